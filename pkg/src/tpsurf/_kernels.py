"""Backend selection for the pairwise kernels.

The compiled extension is used when it importable; otherwise (or when
TPSURF_FORCE_NUMPY is set) the pure-numpy implementation takes over.
Both expose the same row-sum contracts; `benchmarks/bench_kernels.py`
compares them.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

_numpy_backend = _kernels_numpy
_compiled = None
if not os.environ.get("TPSURF_FORCE_NUMPY"):
    try:
        from . import _pairwise as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

_active = _compiled if _compiled is not None else _numpy_backend


def backend_name() -> str:
    return _active.BACKEND_NAME


def available_backends() -> list[str]:
    names = [_numpy_backend.BACKEND_NAME]
    if _compiled is not None:
        names.insert(0, _compiled.BACKEND_NAME)
    return names


def get_backend(name: str | None = None):
    """Module implementing energy_rows / pair_stats_rows."""
    if name is None:
        return _active
    if name == _numpy_backend.BACKEND_NAME:
        return _numpy_backend
    if _compiled is not None and name == _compiled.BACKEND_NAME:
        return _compiled
    raise ValueError(f"backend {name!r} is not available")


def energy_rows(points, weights, frames, parents, q, i0, i1, symmetrize=False, backend=None):
    return get_backend(backend).energy_rows(
        points, weights, frames, parents, q, i0, i1, symmetrize
    )


def pair_stats_rows(points, frames, parents, i0, i1, backend=None):
    return get_backend(backend).pair_stats_rows(points, frames, parents, i0, i1)


def gradient_rows(points, weights, frames, edges, gram_inv, parents, q, i0, i1):
    # the backward pass is vectorized numpy in both configurations
    return _numpy_backend.gradient_rows(
        points, weights, frames, edges, gram_inv, parents, q, i0, i1
    )
