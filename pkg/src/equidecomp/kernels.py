"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``EQUIDECOMP_PURE_PYTHON`` is set to a non-empty value,
the pure-Python kernels are used.  Both expose ``augment_round``,
``alternating_layers`` and ``neighbors`` with identical results.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and not os.environ.get("EQUIDECOMP_PURE_PYTHON"):
    _impl = _ckernels
    BACKEND = "cython"
else:
    _impl = _pykernels
    BACKEND = "python"

augment_round = _impl.augment_round
alternating_layers = _impl.alternating_layers
neighbors = _impl.neighbors


def backends():
    """Available backend modules by name."""
    out = {"python": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out
