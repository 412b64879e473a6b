"""Simulation engines: a compiled kernel with a pure-Python fallback.

Both engines implement identical request semantics and share the same
random-stream recipe, so a run is reproducible bit-for-bit across them.
The compiled one exists purely for speed (the per-request loop is the
hot path); import failures fall back silently to the pure engine.
"""

from .pure import PureEngine

try:
    from . import _speedups  # noqa: F401
    from .compiled import CompiledEngine

    HAVE_COMPILED = True
except ImportError:  # extension not built on this install
    CompiledEngine = None
    HAVE_COMPILED = False

DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "pure"


def make_engine(backend: str = "auto", **kwargs):
    """Instantiate a simulation engine; `backend` in auto|compiled|pure."""
    if backend == "auto":
        backend = DEFAULT_BACKEND
    if backend == "pure":
        return PureEngine(**kwargs)
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled engine requested but the extension is not built")
        return CompiledEngine(**kwargs)
    raise ValueError(f"unknown backend {backend!r}")
