"""Backend selection for the element kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. ``DDFLOW_KERNELS=python`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("DDFLOW_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def use_backend(name):
    """Switch kernels at runtime; ``name`` is ``"cython"`` or ``"python"``."""
    global _impl, BACKEND
    if name == "python":
        _impl = _kernels_py
    elif name == "cython":
        from . import _kernels as _compiled
        _impl = _compiled
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    BACKEND = name


def local_matrices(wq, test, trial):
    return _impl.local_matrices(wq, test, trial)


def local_vectors(wq, test):
    return _impl.local_vectors(wq, test)


def scatter_add(pos, vals, n):
    return _impl.scatter_add(pos, vals, n)
