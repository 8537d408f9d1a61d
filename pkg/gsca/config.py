"""
Configuration of the gsca package.

Numerical defaults are module constants. Run-time settings come from the
environment, optionally through a ``.env`` file loaded with python-dotenv:

- ``GSCA_OUTPUT_DIR``: default output directory of every command (``results``).
- ``GSCA_JOBS``: default number of parallel jobs for sweeps (1).
- ``GSCA_LOG_LEVEL``: log level used when ``-v`` is not given (``WARNING``).
"""
import os
from pathlib import Path

from dotenv import load_dotenv

# Relative to the largest singular value
RANK_TOL = 1e-7
SIGMA2_FLOOR = 0.05
MAX_ITER = 10000
EPS_F = 1e-8
LOW_PRECISION_EPS = 1e-2

DEFAULT_FOLDS = 7
DEFAULT_N_LAMBDAS = 30
FOLD_RETRIES = 100

DEFAULT_LQ_Q = 0.1
DEFAULT_SCAD_GAMMA = 5.0
DEFAULT_GDP_GAMMA = 1.0


def load_settings(env_file=None):
    """Load ``.env`` (if present) into the process environment."""
    load_dotenv(dotenv_path=env_file, override=False)


def default_output_dir():
    return Path(os.getenv("GSCA_OUTPUT_DIR", "results"))


def default_jobs():
    try:
        return max(1, int(os.getenv("GSCA_JOBS", "1")))
    except ValueError:
        return 1


def default_log_level():
    return os.getenv("GSCA_LOG_LEVEL", "WARNING").upper()
