# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels (CSR spmm, row convolution,
segment reductions, spatio-temporal edge enumeration)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport asin, sin, sqrt

cnp.import_array()

cdef double _EARTH_RADIUS_KM = 6371.0088


def spmm_csr(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
             double[::1] values, double[:, ::1] dense):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t k = dense.shape[1]
    out_arr = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, e, c, j
    cdef double v
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            v = values[e]
            for c in range(k):
                out[i, c] += v * dense[j, c]
    return out_arr


def conv1d_rows(double[:, ::1] x, double[::1] kernel):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t width = x.shape[1]
    cdef Py_ssize_t kt = kernel.shape[0]
    cdef Py_ssize_t pad = (kt - 1) // 2
    out_arr = np.zeros((n, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, c, k, src
    for k in range(kt):
        for i in range(n):
            for c in range(width):
                src = c + k - pad
                if 0 <= src < width:
                    out[i, c] += kernel[k] * x[i, src]
    return out_arr


def conv1d_rows_kernel_grad(double[:, ::1] x, double[:, ::1] grad_out, Py_ssize_t kt):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t width = x.shape[1]
    cdef Py_ssize_t pad = (kt - 1) // 2
    dk_arr = np.zeros(kt, dtype=np.float64)
    cdef double[::1] dk = dk_arr
    cdef Py_ssize_t i, c, k, src
    cdef double acc
    for k in range(kt):
        acc = 0.0
        for i in range(n):
            for c in range(width):
                src = c + k - pad
                if 0 <= src < width:
                    acc += grad_out[i, c] * x[i, src]
        dk[k] = acc
    return dk_arr


def segment_max(double[::1] values, cnp.int64_t[::1] seg_ids, Py_ssize_t n_segments):
    out_arr = np.full(n_segments, -np.inf, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e
    for e in range(values.shape[0]):
        if values[e] > out[seg_ids[e]]:
            out[seg_ids[e]] = values[e]
    return out_arr


def scatter_add_rows(double[:, ::1] rows, cnp.int64_t[::1] ids, Py_ssize_t n_out):
    cdef Py_ssize_t k = rows.shape[1]
    out_arr = np.zeros((n_out, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, c, i
    for e in range(rows.shape[0]):
        i = ids[e]
        for c in range(k):
            out[i, c] += rows[e, c]
    return out_arr


def st_edge_pairs(double[::1] lat, double[::1] lon, cnp.int64_t[::1] t_seconds,
                  double max_km, double max_hours):
    cdef Py_ssize_t n = lat.shape[0]
    order_arr = np.argsort(np.asarray(t_seconds), kind="stable").astype(np.int64)
    cdef cnp.int64_t[::1] order = order_arr
    ts_arr = np.asarray(t_seconds)[order_arr].astype(np.float64)
    cdef double[::1] ts = ts_arr
    lat_r_arr = np.radians(np.asarray(lat)[order_arr])
    lon_r_arr = np.radians(np.asarray(lon)[order_arr])
    cdef double[::1] lat_r = lat_r_arr
    cdef double[::1] lon_r = lon_r_arr
    cos_lat_arr = np.cos(lat_r_arr)
    cdef double[::1] cos_lat = cos_lat_arr
    cdef double max_dt = max_hours * 3600.0
    cdef list us = []
    cdef list vs = []
    cdef Py_ssize_t a, b
    cdef double s, dist, sin_dlat, sin_dlon
    for a in range(n - 1):
        for b in range(a + 1, n):
            if ts[b] - ts[a] > max_dt:
                break
            sin_dlat = sin((lat_r[b] - lat_r[a]) / 2.0)
            sin_dlon = sin((lon_r[b] - lon_r[a]) / 2.0)
            s = sin_dlat * sin_dlat + cos_lat[a] * cos_lat[b] * sin_dlon * sin_dlon
            s = sqrt(s)
            if s > 1.0:
                s = 1.0
            dist = 2.0 * _EARTH_RADIUS_KM * asin(s)
            if dist <= max_km:
                us.append(order[a])
                vs.append(order[b])
    return (np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64))
