# utilities_module/blob_utils.py

import hashlib
import logging
from pathlib import Path

from config import DIGEST_ALGORITHM

logger = logging.getLogger(__name__)


def blob_path(root: Path, container_name: str, digest_hex: str, file_extension: str) -> Path:
    """Content-addressed location: <root>/<container>/<first two hex chars>/<digest>.<ext>."""
    return Path(root) / container_name / digest_hex[:2] / f"{digest_hex}.{file_extension}"


def upload_to_blob_storage(root: Path, container_name: str, file_bytes: bytes, file_extension: str) -> tuple[Path, str]:
    """
    Writes a blob into a local content-addressed container and returns its path.

    Args:
        root: Directory holding the containers (e.g. a chain export directory).
        container_name: The container sub-directory (e.g. 'payloads').
        file_bytes: The blob content in bytes.
        file_extension: The file extension (e.g. 'bin').

    Returns:
        (path of the written blob, hex digest of its content)
    """
    digest_hex = hashlib.new(DIGEST_ALGORITHM, file_bytes).hexdigest()
    path = blob_path(root, container_name, digest_hex, file_extension)

    # Identical content always lands on the same path, so an existing blob is left alone.
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(file_bytes)
        logger.debug("Uploaded %s to container '%s'.", path.name, container_name)

    return path, digest_hex


def download_from_blob_storage(root: Path, container_name: str, digest_hex: str, file_extension: str) -> bytes:
    """Reads a blob back by digest; raises FileNotFoundError when absent."""
    return blob_path(root, container_name, digest_hex, file_extension).read_bytes()
