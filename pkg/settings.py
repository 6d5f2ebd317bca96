"""
Process-level configuration read from the environment (and a local .env file),
plus the logging setup shared by the CLI and the worker processes.
"""

import logging
import os

from dotenv import load_dotenv

# Load .env for local development
load_dotenv()

logger = logging.getLogger(__name__)

# ==============================================================================
# Environment
# ==============================================================================
LOG_LEVEL = os.environ.get("BANDIT_LOG_LEVEL", "INFO").upper()
WORKERS = int(os.environ.get("BANDIT_WORKERS", "1"))
OUTPUT_DIR = os.environ.get("BANDIT_OUTPUT_DIR", "results")
VERIFY_INSTANCES = int(os.environ.get("BANDIT_VERIFY_INSTANCES", "100"))

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# ==============================================================================
# Logging
# ==============================================================================
def configure_logging(level: str | None = None) -> None:
    """Configure the root logger once; later calls only adjust the level."""
    level = (level or LOG_LEVEL).upper()
    if not isinstance(logging.getLevelName(level), int):
        logger.warning("unknown log level %r, falling back to INFO", level)
        level = "INFO"
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)
