"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it was built; setting the
environment variable ``MIMCAVITY_PURE_PYTHON=1`` forces the fallback.
Both expose the same functions: ``prufer_phase``, ``solve_roots``,
``advance`` and ``field_accel``.
"""

import os

from . import _fallback
from ._fallback import (
    MOTION_DYNAMIC,
    MOTION_FROZEN,
    MOTION_RAMP,
    MOTION_SINE,
    POTENTIAL_FREE,
    POTENTIAL_HARMONIC,
    POTENTIAL_TABLE,
)

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

if _core is not None and not os.environ.get("MIMCAVITY_PURE_PYTHON"):
    _impl = _core
    BACKEND = "compiled"
else:
    _impl = _fallback
    BACKEND = "python"

prufer_phase = _impl.prufer_phase
solve_roots = _impl.solve_roots
advance = _impl.advance
field_accel = _impl.field_accel


def available_backends():
    return ["python"] + (["compiled"] if _core is not None else [])


def get_backend(name):
    """Return the kernel module for ``"python"`` or ``"compiled"``."""
    if name == "python":
        return _fallback
    if name == "compiled":
        if _core is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _core
    raise ValueError(f"unknown backend {name!r}")


__all__ = [
    "BACKEND",
    "MOTION_DYNAMIC",
    "MOTION_FROZEN",
    "MOTION_RAMP",
    "MOTION_SINE",
    "POTENTIAL_FREE",
    "POTENTIAL_HARMONIC",
    "POTENTIAL_TABLE",
    "advance",
    "available_backends",
    "field_accel",
    "get_backend",
    "prufer_phase",
    "solve_roots",
]
