"""Pure numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is not built. Each
function mirrors the compiled version's accumulation order so the two
backends agree bitwise wherever the operation order is pinned (see
tests/test_kernels.py for the exact parity contract).
"""

from __future__ import annotations

import numpy as np

_EARTH_RADIUS_KM = 6371.0088


def spmm_csr(indptr, indices, values, dense):
    n = indptr.shape[0] - 1
    out = np.zeros((n, dense.shape[1]), dtype=np.float64)
    nnz_per_row = np.diff(indptr)
    row_ids = np.repeat(np.arange(n, dtype=np.int64), nnz_per_row)
    np.add.at(out, row_ids, values[:, None] * dense[indices])
    return out


def conv1d_rows(x, kernel):
    n, width = x.shape
    kt = kernel.shape[0]
    pad = (kt - 1) // 2
    xpad = np.zeros((n, width + kt - 1), dtype=np.float64)
    xpad[:, pad : pad + width] = x
    out = np.zeros((n, width), dtype=np.float64)
    for k in range(kt):
        out += kernel[k] * xpad[:, k : k + width]
    return out


def conv1d_rows_kernel_grad(x, grad_out, kt):
    n, width = x.shape
    pad = (kt - 1) // 2
    xpad = np.zeros((n, width + kt - 1), dtype=np.float64)
    xpad[:, pad : pad + width] = x
    grad_flat = grad_out.ravel()
    dk = np.empty(kt, dtype=np.float64)
    for k in range(kt):
        dk[k] = np.dot(grad_flat, xpad[:, k : k + width].ravel())
    return dk


def segment_max(values, seg_ids, n_segments):
    out = np.full(n_segments, -np.inf, dtype=np.float64)
    np.maximum.at(out, seg_ids, values)
    return out


def scatter_add_rows(rows, ids, n_out):
    out = np.zeros((n_out, rows.shape[1]), dtype=np.float64)
    np.add.at(out, ids, rows)
    return out


def st_edge_pairs(lat, lon, t_seconds, max_km, max_hours):
    """Unordered index pairs within both the distance and time thresholds.

    Scans records in timestamp order and stops each inner window once the
    time gap exceeds the threshold; distances use the haversine formula on
    the IUGG mean sphere. Thresholds are inclusive.
    """
    n = lat.shape[0]
    order = np.argsort(t_seconds, kind="stable").astype(np.int64)
    ts = t_seconds[order].astype(np.float64)
    lat_r = np.radians(lat[order])
    lon_r = np.radians(lon[order])
    cos_lat = np.cos(lat_r)
    max_dt = max_hours * 3600.0
    us: list[np.ndarray] = []
    vs: list[np.ndarray] = []
    for a in range(n - 1):
        hi = int(np.searchsorted(ts, ts[a] + max_dt, side="right"))
        if hi <= a + 1:
            continue
        sl = slice(a + 1, hi)
        dlat = lat_r[sl] - lat_r[a]
        dlon = lon_r[sl] - lon_r[a]
        s = np.sin(dlat / 2.0) ** 2 + cos_lat[a] * cos_lat[sl] * np.sin(dlon / 2.0) ** 2
        dist = 2.0 * _EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(s)))
        hits = np.nonzero(dist <= max_km)[0]
        if hits.size:
            us.append(np.full(hits.size, order[a], dtype=np.int64))
            vs.append(order[a + 1 + hits])
    if not us:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(us), np.concatenate(vs)
