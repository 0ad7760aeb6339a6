"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy implementations in ``_kernels_py`` are used. Setting the environment
variable ``CABINET60_BACKEND=python`` forces the fallback.
"""
import os

from . import _kernels_py

python_kernels = _kernels_py

compiled_kernels = None
try:
    from . import _kernels as compiled_kernels
except ImportError:
    pass

if compiled_kernels is not None and os.environ.get("CABINET60_BACKEND", "").lower() != "python":
    kernels = compiled_kernels
    BACKEND = "cython"
else:
    kernels = _kernels_py
    BACKEND = "python"

em_exp_mixture_step = kernels.em_exp_mixture_step
strict_local_maxima = kernels.strict_local_maxima
accumulate_bins = kernels.accumulate_bins

__all__ = ["BACKEND", "kernels", "python_kernels", "compiled_kernels",
           "em_exp_mixture_step", "strict_local_maxima", "accumulate_bins"]
