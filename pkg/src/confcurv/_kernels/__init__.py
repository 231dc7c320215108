"""Hot kernels with a compiled core and a NumPy fallback chosen at import.

``BACKEND`` reports which implementation is active; both expose the same
two entry points (:func:`eval_tape`, :func:`cell_energy_gradient`) and the
tape compiler lives in :mod:`.tape`.
"""

from . import _fallback
from .tape import Tape, compile_exprs  # noqa: F401

try:
    from . import _native
    BACKEND = "native"
except ImportError:
    _native = None
    BACKEND = "fallback"


def eval_tape(tape, points):
    if _native is not None:
        return _native.eval_tape(tape, points)
    return _fallback.eval_tape(tape, points)


def cell_energy_gradient(u, base, offsets, coeff, ginv, weight, eps2, power):
    # the compiled loop keeps its scratch arrays on the stack, capped at
    # 8 functions x 4 axes; larger problems take the NumPy path
    if _native is not None and u.shape[0] <= 8 and coeff.shape[1] <= 4:
        return _native.cell_energy_gradient(u, base, offsets, coeff, ginv,
                                            weight, eps2, power)
    return _fallback.cell_energy_gradient(u, base, offsets, coeff, ginv,
                                          weight, eps2, power)


__all__ = ["Tape", "compile_exprs", "eval_tape", "cell_energy_gradient",
           "BACKEND", "_fallback"]
