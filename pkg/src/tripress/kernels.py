"""Hot-loop kernels, compiled when available.

The compiled extension is preferred; set ``TRIPRESS_PURE_PYTHON=1`` to force
the pure-Python fallback.
"""
import os

from . import _pykernels as python

compiled = None
if not os.environ.get("TRIPRESS_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else python

IMPLEMENTATION = active.IMPLEMENTATION
fnv1a64 = active.fnv1a64
route_terms = active.route_terms
destinations = active.destinations
split_statement = active.split_statement
encode_terms = active.encode_terms


def available():
    """Kernel modules importable in this interpreter, compiled first."""
    return [m for m in (compiled, python) if m is not None]
