"""Kernel backend chosen at import: compiled extension if built, else numpy.

Set GPV_BACKEND=python to force the fallback.
"""
import os

NAME = "python"
if os.environ.get("GPV_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _k
        NAME = "cython"
    except ImportError:  # extension not built
        _k = None
else:
    _k = None
if _k is None:
    from . import _pykernels as _k

kirchhoff_velocity = _k.kirchhoff_velocity
min_distance = _k.min_distance
rk4_run = _k.rk4_run
forcing_a = _k.forcing_a
phase_rotate = _k.phase_rotate
