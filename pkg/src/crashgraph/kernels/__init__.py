"""Hot numeric kernels with a compiled core and a numpy fallback.

The compiled Cython extension is preferred when importable; otherwise the
numpy implementations in ``_pykernels`` are used. Selection happens once at
import and can be overridden with the ``CRASHGRAPH_KERNELS`` environment
variable (``compiled`` or ``python``) or at runtime via :func:`set_backend`
(used by tests and the benchmark). Both backends implement the same pinned
accumulation orders; see benchmarks/bench_kernels.py for a comparison.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError, ShapeError
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built; numpy fallback stays active
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels


def _default_backend() -> str:
    env = os.environ.get("CRASHGRAPH_KERNELS")
    if env:
        if env not in ("compiled", "python"):
            raise ConfigError(f"CRASHGRAPH_KERNELS={env!r}; expected 'compiled' or 'python'")
        if env == "compiled" and _ckernels is None:
            raise ConfigError("CRASHGRAPH_KERNELS=compiled but the extension is not built")
        return env
    return "compiled" if _ckernels is not None else "python"


_active = _default_backend()


def backend() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return _active


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str | None) -> str:
    """Switch backends ('compiled'/'python'); None restores the default."""
    global _active
    if name is None:
        _active = _default_backend()
        return _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown kernel backend {name!r}; available: {available_backends()}")
    _active = name
    return _active


def _f64_2d(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _f64_1d(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def _i64_1d(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.int64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def spmm_csr(indptr, indices, values, dense) -> np.ndarray:
    """CSR sparse (n x n) times dense (n x k)."""
    indptr = _i64_1d(indptr, "indptr")
    indices = _i64_1d(indices, "indices")
    values = _f64_1d(values, "values")
    dense = _f64_2d(dense, "dense")
    n = indptr.shape[0] - 1
    if dense.shape[0] != n:
        raise ShapeError(f"spmm: adjacency is {n}x{n} but dense has {dense.shape[0]} rows")
    if indices.shape[0] != values.shape[0]:
        raise ShapeError("spmm: indices/values length mismatch")
    return _BACKENDS[_active].spmm_csr(indptr, indices, values, dense)


def conv1d_rows(x, kernel) -> np.ndarray:
    """Same-padded cross-correlation of each row with a shared odd kernel."""
    x = _f64_2d(x, "x")
    kernel = _f64_1d(kernel, "kernel")
    if kernel.shape[0] % 2 == 0:
        raise ShapeError(f"conv1d kernel length must be odd, got {kernel.shape[0]}")
    return _BACKENDS[_active].conv1d_rows(x, kernel)


def conv1d_rows_kernel_grad(x, grad_out, kt: int) -> np.ndarray:
    x = _f64_2d(x, "x")
    grad_out = _f64_2d(grad_out, "grad_out")
    if x.shape != grad_out.shape:
        raise ShapeError("conv1d kernel grad: x and grad_out shapes differ")
    if kt % 2 == 0:
        raise ShapeError(f"conv1d kernel length must be odd, got {kt}")
    return _BACKENDS[_active].conv1d_rows_kernel_grad(x, grad_out, kt)


def segment_max(values, seg_ids, n_segments: int) -> np.ndarray:
    values = _f64_1d(values, "values")
    seg_ids = _i64_1d(seg_ids, "seg_ids")
    if values.shape[0] != seg_ids.shape[0]:
        raise ShapeError("segment_max: values/seg_ids length mismatch")
    return _BACKENDS[_active].segment_max(values, seg_ids, n_segments)


def scatter_add_rows(rows, ids, n_out: int) -> np.ndarray:
    rows = _f64_2d(rows, "rows")
    ids = _i64_1d(ids, "ids")
    if rows.shape[0] != ids.shape[0]:
        raise ShapeError("scatter_add_rows: rows/ids length mismatch")
    return _BACKENDS[_active].scatter_add_rows(rows, ids, n_out)


def st_edge_pairs(lat, lon, t_seconds, max_km: float, max_hours: float):
    """Unordered record-index pairs within both proximity thresholds."""
    lat = _f64_1d(lat, "lat")
    lon = _f64_1d(lon, "lon")
    t_seconds = _i64_1d(t_seconds, "t_seconds")
    if not (lat.shape[0] == lon.shape[0] == t_seconds.shape[0]):
        raise ShapeError("st_edge_pairs: lat/lon/t length mismatch")
    return _BACKENDS[_active].st_edge_pairs(lat, lon, t_seconds, float(max_km), float(max_hours))
