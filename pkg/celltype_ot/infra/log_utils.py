import logging
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from celltype_ot.config import settings

_LOGGER_NAME = "celltype_ot"
_LEVELS = {"DEBUG": logging.DEBUG, "INFO": logging.INFO, "WARN": logging.WARNING,
           "WARNING": logging.WARNING, "ERROR": logging.ERROR}

_console_handler: Optional[logging.Handler] = None
_file_handler: Optional[logging.FileHandler] = None


def _file_handler_for(path: Path) -> logging.FileHandler:
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter("[%(asctime)s] [%(levelname)s] %(message)s"))
    return handler


def get_logger() -> logging.Logger:
    """The package logger; the sidecar file follows `settings.log_path`."""
    global _console_handler, _file_handler
    logger = logging.getLogger(_LOGGER_NAME)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    if _console_handler is None:
        _console_handler = RichHandler(
            console=Console(stderr=True), show_time=False, show_path=False, level=logging.INFO
        )
        logger.addHandler(_console_handler)

    log_file = settings.log_path
    if _file_handler is None or Path(_file_handler.baseFilename) != log_file.resolve():
        if _file_handler is not None:
            logger.removeHandler(_file_handler)
            _file_handler.close()
        _file_handler = _file_handler_for(log_file)
        logger.addHandler(_file_handler)
    return logger


def log_message(msg: str, level: str = "INFO") -> None:
    """Log to stderr and append a timestamped line to the sidecar log."""
    get_logger().log(_LEVELS.get(level.upper(), logging.INFO), msg)
