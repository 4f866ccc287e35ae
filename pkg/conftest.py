"""Global test configuration: environment variables must be set BEFORE any
test module imports tpng, because tpng.core.config reads them once at import.
"""
import os

# Plain-text log lines are easier to read in pytest's captured output
os.environ.setdefault('TPNG_LOG_JSON', '0')
os.environ.setdefault('TPNG_LOG_LEVEL', 'WARNING')

# Replicas run in-process unless a test asks for a pool explicitly
os.environ['TPNG_WORKERS'] = '1'

# Small experiment runs in the suite should still reach the GOF guard
os.environ.setdefault('TPNG_MIN_GOF_SAMPLES', '100')

# Keep stray CLI output out of the working tree
os.environ.setdefault('TPNG_OUTPUT_DIR', os.path.join(os.path.dirname(__file__), '.pytest_out'))
