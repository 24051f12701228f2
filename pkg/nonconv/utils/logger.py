# nonconv/utils/logger.py
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logger(name: str = "nonconv", level: int = logging.INFO, log_file: Optional[str] = None) -> logging.Logger:
    """
    Returns a configured logger instance.

    Console output goes to stdout; when ``log_file`` is given a rotating file
    handler is attached as well. Handlers are only added once per name.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if not logger.handlers:
        formatter = logging.Formatter(FORMAT)

        ch = logging.StreamHandler(sys.stdout)
        ch.setLevel(level)
        ch.setFormatter(formatter)
        logger.addHandler(ch)

        if log_file:
            directory = os.path.dirname(log_file)
            if directory:
                os.makedirs(directory, exist_ok=True)
            fh = RotatingFileHandler(log_file, maxBytes=5_000_000, backupCount=3)
            fh.setFormatter(formatter)
            logger.addHandler(fh)

        logger.propagate = False

    return logger


def set_level(level: str) -> None:
    """Apply a level name (e.g. "DEBUG") to every nonconv logger already created."""
    numeric = getattr(logging, level.upper(), logging.INFO)
    for name, existing in logging.root.manager.loggerDict.items():
        if name.startswith("nonconv") and isinstance(existing, logging.Logger):
            existing.setLevel(numeric)
            for handler in existing.handlers:
                handler.setLevel(numeric)


def add_file_handler(log_file: str) -> None:
    """Attach one rotating file handler to every nonconv logger already created."""
    directory = os.path.dirname(log_file)
    if directory:
        os.makedirs(directory, exist_ok=True)
    fh = RotatingFileHandler(log_file, maxBytes=5_000_000, backupCount=3)
    fh.setFormatter(logging.Formatter(FORMAT))
    for name, existing in logging.root.manager.loggerDict.items():
        if name.startswith("nonconv") and isinstance(existing, logging.Logger):
            existing.addHandler(fh)
