"""Thread-count policy shared by transforms and compiled kernels."""
import os


def num_threads() -> int:
    """Worker count capped by the ``MS_THREADS`` environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("MS_THREADS", "1")))
    except ValueError:
        return 1
