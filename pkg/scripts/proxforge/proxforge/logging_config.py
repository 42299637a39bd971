"""
Centralized logging configuration for proxforge.
Uses dictConfig for clean, maintainable logging setup.
"""
import logging
import logging.config
import os
from typing import Any, Dict, Optional

PROXFORGE_ENV = os.getenv("PROXFORGE_ENV", "production").lower()
IS_DEV = PROXFORGE_ENV == "development"
DEFAULT_LEVEL = os.getenv("PROXFORGE_LOG_LEVEL", "DEBUG" if IS_DEV else "INFO").upper()


def build_logging_config(level: str = DEFAULT_LEVEL) -> Dict[str, Any]:
    """Return the dictConfig payload for the given level."""
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "standard": {
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            },
            "simple": {
                "format": "%(levelname)s: %(message)s"
            },
        },
        "handlers": {
            # stderr keeps stdout free for stats/inspect payloads
            "console": {
                "class": "logging.StreamHandler",
                "level": level,
                "formatter": "standard" if IS_DEV else "simple",
                "stream": "ext://sys.stderr",
            }
        },
        "loggers": {
            "proxforge": {
                "handlers": ["console"],
                "level": level,
                "propagate": False,
            },
        },
    }


def setup_logging(level: Optional[str] = None) -> None:
    """Apply the logging configuration."""
    logging.config.dictConfig(build_logging_config((level or DEFAULT_LEVEL).upper()))


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance with the configured setup."""
    return logging.getLogger(name)
