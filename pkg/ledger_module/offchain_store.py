# ledger_module/offchain_store.py
# Content-addressed payload store. Only digests go on the chain; the payload
# bytes live here, grouped into chunks of bounded size.

import hashlib
import logging
from typing import Iterator

from config import DIGEST_ALGORITHM, PAYLOADS_PER_CHUNK
from utilities_module.errors import LedgerError

logger = logging.getLogger(__name__)


class OffChainStore:
    """Manages payload storage with automatic chunking."""

    def __init__(self, max_payloads_per_chunk: int = PAYLOADS_PER_CHUNK):
        self.max_payloads_per_chunk = max_payloads_per_chunk
        self.chunks: list[dict[str, bytes]] = []
        self.index: dict[str, int] = {}

    def put(self, payload: bytes) -> str:
        """Stores a payload and returns its digest. Storing the same bytes twice is a no-op."""
        digest = hashlib.new(DIGEST_ALGORITHM, payload).hexdigest()
        if digest in self.index:
            return digest

        # Open a new chunk when the current one is full
        if not self.chunks or len(self.chunks[-1]) >= self.max_payloads_per_chunk:
            self.chunks.append({})
            logger.debug("Opened payload chunk %d", len(self.chunks))

        self.chunks[-1][digest] = bytes(payload)
        self.index[digest] = len(self.chunks) - 1
        return digest

    def fetch(self, digest: str) -> bytes:
        chunk = self.index.get(digest)
        if chunk is None:
            raise LedgerError(f"payload {digest[:12]} is not in the off-chain store")
        return self.chunks[chunk][digest]

    def __contains__(self, digest: str) -> bool:
        return digest in self.index

    def __len__(self) -> int:
        return len(self.index)

    def items(self) -> Iterator[tuple[str, bytes]]:
        for chunk in self.chunks:
            yield from chunk.items()

    @property
    def byte_count(self) -> int:
        return sum(len(p) for _, p in self.items())
