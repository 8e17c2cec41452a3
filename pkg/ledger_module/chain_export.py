# ledger_module/chain_export.py
# Chain export: a JSON header manifest plus a content-addressed payload directory
# (<dir>/payloads/<aa>/<digest>.bin).

import json
import logging
from pathlib import Path

from config import DIGEST_ALGORITHM, PAYLOAD_CONTAINER_NAME, SCHEMA_VERSION
from ledger_module.ledger import Ledger, LedgerBlock, LedgerTx, verify_chain
from ledger_module.offchain_store import OffChainStore
from utilities_module.blob_utils import download_from_blob_storage, upload_to_blob_storage
from utilities_module.errors import DigestMismatchError, LedgerError

logger = logging.getLogger(__name__)

CHAIN_MANIFEST = "chain.json"
PAYLOAD_EXTENSION = "bin"


def export_chain(ledger: Ledger, out_dir) -> Path:
    """Writes the sealed chain. Output bytes depend only on the chain content."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for block in ledger.blocks:
        for digest in block.tx_digests:
            _, written = upload_to_blob_storage(out_dir, PAYLOAD_CONTAINER_NAME, ledger.fetch(digest), PAYLOAD_EXTENSION)
            if written != digest:
                raise DigestMismatchError(f"payload {digest[:12]} hashed to {written[:12]} on export")

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "digest_algorithm": DIGEST_ALGORITHM,
        "block_size_bits": ledger.block_size_bits,
        "height": ledger.height,
        "tx_count": ledger.tx_count,
        "blocks": [
            {
                "height": b.height,
                "prev_hash": b.prev_hash,
                "timestamp": b.timestamp,
                "miner_id": b.miner_id,
                "tx_digests": list(b.tx_digests),
                "block_hash": b.block_hash,
            }
            for b in ledger.blocks
        ],
    }
    path = out_dir / CHAIN_MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("✅ Exported %d blocks (%d txs) to %s", ledger.height, ledger.tx_count, out_dir)
    return path


def load_chain(in_dir) -> Ledger:
    """Rebuilds a full-node Ledger from an export and verifies it end to end."""
    in_dir = Path(in_dir)
    manifest_path = in_dir / CHAIN_MANIFEST
    if not manifest_path.exists():
        raise LedgerError(f"no {CHAIN_MANIFEST} in {in_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("digest_algorithm") != DIGEST_ALGORITHM:
        raise LedgerError(f"chain uses {manifest.get('digest_algorithm')}, this build uses {DIGEST_ALGORITHM}")

    store = OffChainStore()
    ledger = Ledger(manifest["block_size_bits"], store=store)
    for entry in manifest["blocks"]:
        block = LedgerBlock(
            height=entry["height"],
            prev_hash=entry["prev_hash"],
            timestamp=float(entry["timestamp"]),
            miner_id=entry["miner_id"],
            tx_digests=tuple(entry["tx_digests"]),
            block_hash=entry["block_hash"],
        )
        for digest in block.tx_digests:
            try:
                payload = download_from_blob_storage(in_dir, PAYLOAD_CONTAINER_NAME, digest, PAYLOAD_EXTENSION)
            except FileNotFoundError as exc:
                raise LedgerError(f"payload {digest[:12]} missing from export") from exc
            store.put(payload)
            tx = LedgerTx.from_bytes(payload)
            ledger._nonces[tx.author] = max(tx.nonce, ledger.last_nonce(tx.author))
        ledger._link(block)

    verify_chain(ledger.blocks, store)
    logger.info("✅ Loaded %d blocks from %s", ledger.height, in_dir)
    return ledger
