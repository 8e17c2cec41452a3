# config.py
import logging
import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


# --- Build Constants ---
APP_NAME = "bets-sim"
APP_VERSION = "1.0.0"
SCHEMA_VERSION = 1

# Fixed per build; recorded in every run manifest.
DIGEST_ALGORITHM = "sha256"


# --- Configuration Variables from .env ---
LOG_LEVEL = os.getenv("BETS_LOG_LEVEL", "INFO").upper()
DEFAULT_OUT_DIR = os.getenv("BETS_OUT_DIR", "out")
DEFAULT_SCENARIO_PATH = os.getenv(
    "BETS_SCENARIO",
    os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios", "default.json"),
)

# Off-chain payload store
PAYLOADS_PER_CHUNK = 512
PAYLOAD_CONTAINER_NAME = "payloads"

# System authors on the ledger
SYSTEM_AUTHOR = "system"
AUTHORITY_AUTHOR = "authority"


def setup_logging(level: str | None = None) -> None:
    """Configure the root logger once for the CLI and scripts."""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger(__name__).debug("--- Logging configured at %s ---", level or LOG_LEVEL)
