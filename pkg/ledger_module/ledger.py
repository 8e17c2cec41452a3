# ledger_module/ledger.py
# Append-only chain of blocks holding transaction digests, and the
# proof-of-work miner race modeled by its latency distribution.
#
# Canonical transaction encoding (big-endian):
#   magic "BETX" | u8 layout version | u8 kind index | u16 author length | author utf-8
#   | u64 nonce | u16 field count | fields sorted by name, each:
#     u16 name length | name utf-8 | u8 type tag | value
#   type tags: 'd' f64, 'q' i64, '?' u8 bool, 's' u32 length + utf-8
#
# Block encoding:
#   u64 height | 32 bytes prev_hash | f64 timestamp | u16 miner id length | miner id utf-8
#   | u32 digest count | digest count x 32 bytes
# block_hash is the digest of that encoding; its bit length is bounded by S_B.

import hashlib
import logging
import numbers
import struct
import threading
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from enum import Enum
from typing import Any, Iterable, Iterator, Optional

import numpy as np

from config import DIGEST_ALGORITHM
from ledger_module.offchain_store import OffChainStore
from utilities_module.errors import (
    DigestMismatchError,
    EmptyQueueError,
    ForkError,
    InvariantError,
    LedgerError,
    ReplayError,
)

logger = logging.getLogger(__name__)

TX_MAGIC = b"BETX"
TX_LAYOUT_VERSION = 1
DIGEST_BYTES = 32
GENESIS_PREV_HASH = "00" * DIGEST_BYTES

_BLOCK_FIXED = struct.Struct(">Q32sdH")


class TxKind(str, Enum):
    REGISTRATION = "Registration"
    EMISSION_RECORD = "EmissionRecord"
    PENALTY = "Penalty"
    SUBSIDY = "Subsidy"
    TRADE_BUY = "TradeBuy"
    TRADE_SELL = "TradeSell"
    SETTLEMENT = "Settlement"
    BALANCE_RESET = "BalanceReset"


TX_KINDS = list(TxKind)
_KIND_INDEX = {kind: idx for idx, kind in enumerate(TX_KINDS)}
_F64 = struct.Struct(">d")
_I64 = struct.Struct(">q")
_U32 = struct.Struct(">I")


def digest_hex(data: bytes) -> str:
    return hashlib.new(DIGEST_ALGORITHM, data).hexdigest()


def _pack_str(value: str, width: str = ">H") -> bytes:
    raw = value.encode("utf-8")
    return struct.pack(width, len(raw)) + raw


@lru_cache(maxsize=256)
def _pack_name(name: str) -> bytes:
    return _pack_str(name)


def _pack_value(value: Any) -> bytes:
    kind = type(value)
    if kind is float:
        return b"d" + _F64.pack(value)
    if kind is str:
        raw = value.encode("utf-8")
        return b"s" + _U32.pack(len(raw)) + raw
    if kind is int:
        return b"q" + _I64.pack(value)
    if isinstance(value, (bool, np.bool_)):
        return b"?" + struct.pack(">B", 1 if value else 0)
    if isinstance(value, numbers.Integral):
        return b"q" + struct.pack(">q", int(value))
    if isinstance(value, numbers.Real):
        return b"d" + struct.pack(">d", float(value))
    if isinstance(value, str):
        return b"s" + _pack_str(value, ">I")
    raise LedgerError(f"cannot encode payload value of type {type(value).__name__}")


def encode_tx(kind: TxKind, author: str, nonce: int, fields: dict) -> bytes:
    parts = [
        TX_MAGIC,
        struct.pack(">BB", TX_LAYOUT_VERSION, _KIND_INDEX[kind]),
        _pack_str(author),
        struct.pack(">QH", nonce, len(fields)),
    ]
    for name in sorted(fields):
        parts.append(_pack_name(name))
        parts.append(_pack_value(fields[name]))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise LedgerError("truncated transaction encoding")
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def text(self, width: str = ">H") -> str:
        (length,) = self.take(width)
        raw = self.data[self.offset:self.offset + length]
        if len(raw) != length:
            raise LedgerError("truncated transaction encoding")
        self.offset += length
        return raw.decode("utf-8")


def decode_tx(data: bytes) -> tuple[TxKind, str, int, dict]:
    """Inverse of encode_tx: (kind, author, nonce, fields)."""
    if data[:4] != TX_MAGIC:
        raise LedgerError("not a transaction encoding")
    reader = _Reader(data)
    reader.offset = 4
    version, kind_index = reader.take(">BB")
    if version != TX_LAYOUT_VERSION or kind_index >= len(TX_KINDS):
        raise LedgerError(f"unsupported layout version {version} or kind {kind_index}")
    author = reader.text()
    nonce, count = reader.take(">QH")
    fields = {}
    for _ in range(count):
        name = reader.text()
        (tag,) = reader.take(">c")
        if tag == b"d":
            (fields[name],) = reader.take(">d")
        elif tag == b"q":
            (fields[name],) = reader.take(">q")
        elif tag == b"?":
            (flag,) = reader.take(">B")
            fields[name] = bool(flag)
        elif tag == b"s":
            fields[name] = reader.text(">I")
        else:
            raise LedgerError(f"unknown type tag {tag!r}")
    if reader.offset != len(data):
        raise LedgerError("trailing bytes after transaction encoding")
    return TX_KINDS[kind_index], author, nonce, fields


@dataclass(frozen=True)
class LedgerTx:
    kind: TxKind
    author: str
    nonce: int
    fields: tuple
    digest: str

    @classmethod
    def create(cls, kind: TxKind, author: str, nonce: int, **fields) -> "LedgerTx":
        return cls.encode_new(kind, author, nonce, fields)[0]

    @classmethod
    def encode_new(cls, kind: TxKind, author: str, nonce: int, fields: dict) -> tuple["LedgerTx", bytes]:
        """(tx, canonical bytes), encoding the payload once."""
        kind = TxKind(kind)
        encoded = encode_tx(kind, author, nonce, fields)
        tx = cls(kind=kind, author=author, nonce=nonce, fields=tuple(sorted(fields.items())), digest=digest_hex(encoded))
        return tx, encoded

    @classmethod
    def from_bytes(cls, data: bytes) -> "LedgerTx":
        kind, author, nonce, fields = decode_tx(data)
        return cls(kind=kind, author=author, nonce=nonce, fields=tuple(sorted(fields.items())), digest=digest_hex(data))

    @property
    def payload(self) -> dict:
        return dict(self.fields)

    @property
    def encoded(self) -> bytes:
        return encode_tx(self.kind, self.author, self.nonce, self.payload)

    def verify(self) -> bool:
        return digest_hex(self.encoded) == self.digest


@dataclass(frozen=True)
class LedgerBlock:
    height: int
    prev_hash: str
    timestamp: float
    miner_id: str
    tx_digests: tuple
    block_hash: str

    @staticmethod
    def encode_header(height: int, prev_hash: str, timestamp: float, miner_id: str, tx_digests: Iterable[str]) -> bytes:
        digests = list(tx_digests)
        miner = miner_id.encode("utf-8")
        return b"".join([
            _BLOCK_FIXED.pack(height, bytes.fromhex(prev_hash), float(timestamp), len(miner)),
            miner,
            struct.pack(">I", len(digests)),
            *(bytes.fromhex(d) for d in digests),
        ])

    @classmethod
    def build(cls, height: int, prev_hash: str, timestamp: float, miner_id: str, tx_digests: Iterable[str]) -> "LedgerBlock":
        digests = tuple(tx_digests)
        encoded = cls.encode_header(height, prev_hash, timestamp, miner_id, digests)
        return cls(height, prev_hash, float(timestamp), miner_id, digests, digest_hex(encoded))

    @property
    def encoded(self) -> bytes:
        return self.encode_header(self.height, self.prev_hash, self.timestamp, self.miner_id, self.tx_digests)

    @property
    def size_bits(self) -> int:
        return len(self.encoded) * 8

    def recompute_hash(self) -> str:
        return digest_hex(self.encoded)


def block_capacity(block_size_bits: float, miner_id: str) -> int:
    """Digests that fit in one block without exceeding block_size_bits."""
    overhead = _BLOCK_FIXED.size + len(miner_id.encode("utf-8")) + 4
    return max(0, int((block_size_bits // 8 - overhead) // DIGEST_BYTES))


@dataclass(frozen=True)
class MinerPool:
    miner_count_M: int
    lambda_c: float

    def __post_init__(self):
        if self.miner_count_M < 1:
            raise InvariantError("miner_count_M >= 1", "miner pool needs at least one miner")
        if not self.lambda_c > 0:
            raise InvariantError("lambda_c > 0", f"computing speed must be > 0, got {self.lambda_c}")

    @classmethod
    def from_config(cls, cfg) -> "MinerPool":
        return cls(miner_count_M=cfg.miner_count_M, lambda_c=cfg.lambda_c)

    @property
    def race_rate(self) -> float:
        return self.lambda_c * self.miner_count_M


def expected_comp_latency(pool: MinerPool) -> float:
    """Mean latency of the fastest miner: integral of exp(-lambda_c M w) over w >= 0."""
    return 1.0 / pool.race_rate


def survival_fastest(pool: MinerPool, w):
    """Pr(fastest miner still running at w) = (1 - Pr(W_i < w))^M = exp(-lambda_c M w)."""
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0):
        raise InvariantError("w >= 0", "survival_fastest is defined for w >= 0 only")
    result = np.exp(-pool.race_rate * w_arr)
    return float(result) if result.ndim == 0 else result


def miner_race(pool: MinerPool, rng: np.random.Generator) -> tuple[int, float]:
    """Every miner draws an Exponential(lambda_c) completion time; the fastest wins."""
    times = rng.exponential(1.0 / pool.lambda_c, size=pool.miner_count_M)
    winner = int(np.argmin(times))
    return winner, float(times[winner])


def draw_comp_latency(pool: MinerPool, rng: np.random.Generator, size=None):
    """Latency of the fastest miner drawn directly from Exponential(lambda_c M)."""
    return rng.exponential(1.0 / pool.race_rate, size=size)


@dataclass(frozen=True)
class Ack:
    digest: str
    queue_position: int


class Ledger:
    """Full-node view: sealed blocks, the pending digest queue and the off-chain
    payload store. All writes go through one lock."""

    def __init__(self, block_size_bits: float, store: Optional[OffChainStore] = None):
        self.block_size_bits = block_size_bits
        self.store = store if store is not None else OffChainStore()
        self.blocks: list[LedgerBlock] = []
        self.pending: deque[str] = deque()
        self._nonces: dict[str, int] = {}
        self._lock = threading.Lock()
        if block_capacity(block_size_bits, "miner-0") < 1:
            raise InvariantError("block_size_SB", f"{block_size_bits} bits cannot hold a single digest")

    @property
    def height(self) -> int:
        return len(self.blocks)

    @property
    def tip_hash(self) -> str:
        return self.blocks[-1].block_hash if self.blocks else GENESIS_PREV_HASH

    def last_nonce(self, author: str) -> int:
        return self._nonces.get(author, -1)

    def append_tx(self, tx: LedgerTx) -> Ack:
        encoded = tx.encoded
        if digest_hex(encoded) != tx.digest:
            raise DigestMismatchError(f"tx {tx.digest[:12]} from {tx.author}: digest does not match payload")
        return self._append(tx, encoded)

    def _append(self, tx: LedgerTx, encoded: bytes) -> Ack:
        with self._lock:
            if tx.nonce <= self.last_nonce(tx.author):
                raise ReplayError(f"{tx.author} reused nonce {tx.nonce} (last {self.last_nonce(tx.author)})")
            stored = self.store.put(encoded)
            if stored != tx.digest:
                raise DigestMismatchError(f"store keyed payload as {stored[:12]}, tx says {tx.digest[:12]}")
            self._nonces[tx.author] = tx.nonce
            self.pending.append(tx.digest)
            return Ack(digest=tx.digest, queue_position=len(self.pending) - 1)

    def submit(self, kind: TxKind, author: str, **fields) -> LedgerTx:
        """Creates a tx with the author's next nonce and appends it."""
        tx, encoded = LedgerTx.encode_new(kind, author, self.last_nonce(author) + 1, fields)
        self._append(tx, encoded)
        return tx

    def seal_block(self, pool: MinerPool, rng: np.random.Generator, timestamp: float) -> tuple[LedgerBlock, float]:
        with self._lock:
            if not self.pending:
                raise EmptyQueueError("seal_block needs at least one pending digest")
            winner, latency = miner_race(pool, rng)
            miner_id = f"miner-{winner}"
            take = min(len(self.pending), block_capacity(self.block_size_bits, miner_id))
            digests = [self.pending.popleft() for _ in range(take)]
            block = LedgerBlock.build(self.height, self.tip_hash, timestamp, miner_id, digests)
            self._link(block)
        logger.debug("Sealed block %d with %d txs (%.3f s).", block.height, take, latency)
        return block, latency

    def _link(self, block: LedgerBlock) -> None:
        if block.height != self.height or block.prev_hash != self.tip_hash:
            raise ForkError(f"block {block.height} does not extend tip {self.tip_hash[:12]}; forks are unsupported")
        self.blocks.append(block)

    def seal_all(self, pool: MinerPool, rng: np.random.Generator, timestamp: float) -> list[tuple[LedgerBlock, float]]:
        sealed = []
        while self.pending:
            sealed.append(self.seal_block(pool, rng, timestamp))
        return sealed

    def fetch(self, digest: str) -> bytes:
        return self.store.fetch(digest)

    def transaction(self, digest: str) -> LedgerTx:
        return LedgerTx.from_bytes(self.store.fetch(digest))

    def transactions(self) -> Iterator[LedgerTx]:
        """Sealed transactions in chain order."""
        for block in self.blocks:
            for digest in block.tx_digests:
                yield self.transaction(digest)

    @property
    def tx_count(self) -> int:
        return sum(len(b.tx_digests) for b in self.blocks)


def audit_chain(blocks: list[LedgerBlock], store: OffChainStore) -> list[tuple[int, str]]:
    """(height, digest) of every sealed tx whose stored payload no longer hashes to its digest."""
    corrupted = []
    for block in blocks:
        for digest in block.tx_digests:
            if digest not in store or digest_hex(store.fetch(digest)) != digest:
                corrupted.append((block.height, digest))
    return corrupted


def verify_chain(blocks: list[LedgerBlock], store: OffChainStore) -> bool:
    prev_hash = GENESIS_PREV_HASH
    for height, block in enumerate(blocks):
        if block.height != height or block.prev_hash != prev_hash:
            raise ForkError(f"block {block.height} does not link to its predecessor")
        if block.recompute_hash() != block.block_hash:
            raise DigestMismatchError(f"block {block.height} header does not match its hash")
        prev_hash = block.block_hash
    corrupted = audit_chain(blocks, store)
    if corrupted:
        height, digest = corrupted[0]
        raise DigestMismatchError(f"tx {digest[:12]} in block {height} fails digest verification")
    return True
