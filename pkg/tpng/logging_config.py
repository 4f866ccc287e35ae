"""Logging setup for the command line.

Library modules only create ``tpng.<area>`` loggers and emit one JSON object per
event; handlers are attached here, under the ``tpng`` logger, so importing the
package never touches the root logger.
"""
import logging
from logging.config import dictConfig
from typing import Any, Dict, Optional

from tpng.core.config import LOG_JSON, LOG_LEVEL

PLAIN_FORMAT = "%(asctime)s %(levelname)-7s %(name)s %(message)s"


def build_config(level: str = LOG_LEVEL, json_lines: bool = LOG_JSON) -> Dict[str, Any]:
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "plain": {"format": PLAIN_FORMAT},
            "jsonl": {"format": "%(message)s"},
        },
        "handlers": {
            "stderr": {
                "class": "logging.StreamHandler",
                "formatter": "jsonl" if json_lines else "plain",
                "stream": "ext://sys.stderr",
            }
        },
        "loggers": {
            "tpng": {"handlers": ["stderr"], "level": level, "propagate": False},
        },
    }


def setup_logging(level: Optional[str] = None, json_lines: Optional[bool] = None) -> None:
    dictConfig(build_config(level or LOG_LEVEL, LOG_JSON if json_lines is None else json_lines))
    logging.getLogger("tpng").debug('{"event": "logging_configured"}')
