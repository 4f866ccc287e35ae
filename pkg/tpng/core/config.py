"""Centralized settings.

Every environment variable the package honours is read here, once, at import.
Values use the ``TPNG_`` prefix so they can be overridden per CI job.
"""

from __future__ import annotations

import os

# Logging
LOG_LEVEL: str = os.getenv("TPNG_LOG_LEVEL", "INFO").upper()
LOG_JSON: bool = os.getenv("TPNG_LOG_JSON", "1") in ("1", "true", "True")

# Execution
WORKERS: int = int(os.getenv("TPNG_WORKERS", "1"))
DEFAULT_SEED: int = int(os.getenv("TPNG_DEFAULT_SEED", "0"), 0)
OUTPUT_DIR: str = os.getenv("TPNG_OUTPUT_DIR", "./out")

# Statistical guards
MIN_GOF_SAMPLES: int = int(os.getenv("TPNG_MIN_GOF_SAMPLES", "100"))
MAX_EXCLUSION_RATE: float = float(os.getenv("TPNG_MAX_EXCLUSION_RATE", "0.2"))

# Environment keys that RunConfig accepts as overrides (TPNG_<KEY>)
ENV_PREFIX = "TPNG_"
