"""Pointwise kernel backend, chosen once at import.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded.  Setting ``NLMS_PURE_PYTHON=1`` forces the fallback.
The two power kernels always use numpy: its vectorized ``pow`` beats the
scalar libm call in the compiled loop (see benchmarks/bench_kernels.py).
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("NLMS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        pass

power_nonlinearity = _kernels_py.power_nonlinearity
abs_power = _kernels_py.abs_power
phase_rotate = _impl.phase_rotate
current = _impl.current
magnetic_grad_sq = _impl.magnetic_grad_sq
abs_rate = _impl.abs_rate

__all__ = [
    "BACKEND", "power_nonlinearity", "abs_power", "phase_rotate", "current",
    "magnetic_grad_sq", "abs_rate",
]
