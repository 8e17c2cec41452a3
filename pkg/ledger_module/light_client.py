# ledger_module/light_client.py
# Vehicle-side light view: block headers plus their digest lists, never payloads.

import logging
from dataclasses import dataclass, field, replace

from ledger_module.ledger import GENESIS_PREV_HASH, Ledger, LedgerBlock
from utilities_module.errors import DigestMismatchError, ForkError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LightClient:
    owner: str = "vehicle"
    headers: tuple = field(default_factory=tuple)

    @property
    def height(self) -> int:
        return len(self.headers)

    @property
    def tip_hash(self) -> str:
        return self.headers[-1].block_hash if self.headers else GENESIS_PREV_HASH

    @property
    def storage_bytes(self) -> int:
        """Bytes held locally: the encoded headers, digest lists included."""
        return sum(len(h.encoded) for h in self.headers)

    def verify_inclusion(self, digest: str) -> bool:
        return any(digest in h.tx_digests for h in self.headers)


def light_sync(client: LightClient, full: Ledger) -> LightClient:
    """Pulls the headers the client is missing. The client tip must be an
    ancestor of the full tip; anything else is a fork and is rejected."""
    if client.height > full.height or (client.height and full.blocks[client.height - 1].block_hash != client.tip_hash):
        raise ForkError(f"{client.owner}: local tip {client.tip_hash[:12]} is not on the full chain (forks unsupported)")

    prev_hash = client.tip_hash
    new_headers = []
    for block in full.blocks[client.height:]:
        _check_header(block, prev_hash)
        new_headers.append(block)
        prev_hash = block.block_hash

    if new_headers:
        logger.debug("%s synced %d headers", client.owner, len(new_headers))
    return replace(client, headers=client.headers + tuple(new_headers))


def _check_header(block: LedgerBlock, prev_hash: str) -> None:
    if block.prev_hash != prev_hash:
        raise ForkError(f"header {block.height} does not link to {prev_hash[:12]}")
    if block.recompute_hash() != block.block_hash:
        raise DigestMismatchError(f"header {block.height} hash mismatch")
