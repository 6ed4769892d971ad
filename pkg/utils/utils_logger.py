"""
utils_logger.py - shared loguru setup for the simulator, learners and runner.

Importing this module configures two sinks once per process:
- stderr at FEMAD_LOG_LEVEL (default INFO)
- logs/femad_log.log at the same level, rotated at 20 MB

Seeds trained in a process pool write to the same file; enqueue=True keeps
their lines whole, and each line carries the process name.

    py -m utils.utils_logger
"""

# Imports from Python Standard Library
import os
import pathlib
import sys

# Imports from external packages
from dotenv import load_dotenv
from loguru import logger

load_dotenv()

CURRENT_SCRIPT = pathlib.Path(__file__).stem

LOG_FOLDER: pathlib.Path = pathlib.Path(os.getenv("FEMAD_LOG_DIR", "logs"))
LOG_FILE: pathlib.Path = LOG_FOLDER.joinpath("femad_log.log")
LOG_LEVEL: str = os.getenv("FEMAD_LOG_LEVEL", "INFO").upper()
LOG_FORMAT: str = (
    "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {process.name} | {name}:{function}:{line} - {message}"
)

logger.remove()
logger.add(sys.stderr, level=LOG_LEVEL, format=LOG_FORMAT)

try:
    LOG_FOLDER.mkdir(parents=True, exist_ok=True)
    logger.add(LOG_FILE, level=LOG_LEVEL, format=LOG_FORMAT, rotation="20 MB", retention=5, enqueue=True)
except OSError as e:
    logger.error(f"File logging disabled, cannot use {LOG_FILE}: {e}")


def get_log_file_path() -> pathlib.Path:
    """Return the path to the log file."""
    return LOG_FILE


def main() -> None:
    logger.info(f"STARTING {CURRENT_SCRIPT}.py")
    logger.info(f"Level {LOG_LEVEL}, file {LOG_FILE}")
    logger.debug("Debug lines are visible at FEMAD_LOG_LEVEL=DEBUG.")
    logger.info(f"EXITING {CURRENT_SCRIPT}.py.")


if __name__ == "__main__":
    main()
