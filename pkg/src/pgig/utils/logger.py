# -*- coding: utf-8 -*-
"""
Logging setup for pgig.

All modules obtain their logger through get_logger(__name__) so that the
hierarchy below "pgig" can be configured in one place.
"""

import logging
import os
from pathlib import Path
from typing import Optional, Union

ROOT_LOGGER = "pgig"
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
DATE_FORMAT = "%H:%M:%S"


def get_logger(name: str) -> logging.Logger:
    """
    Return a logger inside the pgig hierarchy.

    Args:
        name: Usually the caller's __name__

    Returns:
        logging.Logger: Logger named below "pgig"
    """
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def resolve_level(level: Union[str, int, None]) -> int:
    """
    Turn a level name or number into a logging level.

    Falls back to PGIG_LOG_LEVEL and finally WARNING.
    """
    if level is None:
        level = os.environ.get("PGIG_LOG_LEVEL", "WARNING")
    if isinstance(level, int):
        return level
    value = logging.getLevelName(str(level).upper())
    return value if isinstance(value, int) else logging.WARNING


def setup_logging(
    level: Union[str, int, None] = None, log_file: Optional[str] = None
) -> logging.Logger:
    """
    Configure the pgig root logger.

    Args:
        level: Level name/number (default: PGIG_LOG_LEVEL or WARNING)
        log_file: Optional file receiving a copy of every record
            (default: PGIG_LOG_FILE if set)

    Returns:
        logging.Logger: The configured "pgig" logger

    Example:
        >>> logger = setup_logging("INFO")
        >>> logger.info("ready")
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(resolve_level(level))

    # Re-running setup must not stack handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)

    console = logging.StreamHandler()
    console.setFormatter(formatter)
    logger.addHandler(console)

    log_file = log_file or os.environ.get("PGIG_LOG_FILE")
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger
