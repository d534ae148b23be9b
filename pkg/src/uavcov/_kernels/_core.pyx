# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernel; semantics mirror reference.py exactly."""

import numpy as np

from libc.math cimport INFINITY, cos, fabs, sin, sqrt

ctypedef double complex cplx

cdef double RESIDUAL_RTOL = 1e-6
cdef double TWO_PI = 6.283185307179586476925287


cdef void _fill_steering(cplx* A, const double* u, const double* v,
                         Py_ssize_t L, int rows, int cols,
                         double spacing) noexcept nogil:
    cdef Py_ssize_t l
    cdef int r, c
    cdef Py_ssize_t N = rows * cols
    cdef double ph, base
    for l in range(L):
        for r in range(rows):
            base = TWO_PI * spacing * r * v[l]
            for c in range(cols):
                ph = base + TWO_PI * spacing * c * u[l]
                A[l * N + r * cols + c] = cos(ph) + 1j * sin(ph)


cdef bint _power_iter(const cplx* A, const double* w, Py_ssize_t L, Py_ssize_t N,
                      double tol, int max_iter,
                      cplx* v, cplx* v_keep, cplx* y, cplx* c,
                      double* lam_out, double* res_out) noexcept nogil:
    """Dominant eigenpair of sum_l w_l a_l a_l^H; returns converged flag.

    v/v_keep/y/c are caller scratch of length N, N, N, L.  On exit v_keep
    holds the vector at which (lam_out, res_out) were evaluated.
    """
    cdef Py_ssize_t k, l, basis_ptr = 0
    cdef int it
    cdef double lam_prev = INFINITY, lam = 0.0, yn2, res = 0.0, floor, yn
    cdef cplx acc
    cdef double inv0 = 1.0 / sqrt(<double> N)
    for k in range(N):
        v[k] = inv0
    for it in range(max_iter):
        for l in range(L):
            acc = 0
            for k in range(N):
                acc = acc + A[l * N + k].conjugate() * v[k]
            c[l] = w[l] * acc
        for k in range(N):
            y[k] = 0
        for l in range(L):
            acc = c[l]
            if acc != 0:
                for k in range(N):
                    y[k] = y[k] + acc * A[l * N + k]
        lam = 0.0
        yn2 = 0.0
        for k in range(N):
            lam += v[k].real * y[k].real + v[k].imag * y[k].imag
            yn2 += y[k].real * y[k].real + y[k].imag * y[k].imag
        res = yn2 - lam * lam
        res = sqrt(res) if res > 0.0 else 0.0
        floor = lam if lam > 1e-300 else 1e-300
        for k in range(N):
            v_keep[k] = v[k]
        lam_out[0] = lam
        res_out[0] = res / floor
        if fabs(lam - lam_prev) <= tol * floor and res <= RESIDUAL_RTOL * floor:
            return 1
        lam_prev = lam
        yn = sqrt(yn2)
        if yn == 0.0:
            if basis_ptr >= N:
                lam_out[0] = 0.0
                res_out[0] = 0.0
                return 1
            for k in range(N):
                v[k] = 0
            v[basis_ptr] = 1
            basis_ptr += 1
            lam_prev = INFINITY
        else:
            for k in range(N):
                v[k] = y[k] / yn
    return 0


def evaluate_links(double[::1] weights, double[::1] tx_u, double[::1] tx_v,
                   double[::1] rx_u, double[::1] rx_v,
                   long long[::1] offsets,
                   int tx_rows, int tx_cols, int rx_rows, int rx_cols,
                   double tx_spacing, double rx_spacing,
                   double tol=1e-9, int max_iter=1000):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t n_tx = tx_rows * tx_cols
    cdef Py_ssize_t n_rx = rx_rows * rx_cols
    cdef Py_ssize_t i, l, k, s, L, Lmax = 1
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    for i in range(n):
        L = offsets[i + 1] - offsets[i]
        if L > Lmax:
            Lmax = L

    power = np.zeros(n)
    strongest = np.full(n, -1, dtype=np.int64)
    tx_eig = np.zeros(n)
    rx_eig = np.zeros(n)
    tx_res = np.zeros(n)
    rx_res = np.zeros(n)
    conv = np.ones(n, dtype=np.uint8)

    cdef double[::1] power_v = power
    cdef long long[::1] strongest_v = strongest
    cdef double[::1] tx_eig_v = tx_eig
    cdef double[::1] rx_eig_v = rx_eig
    cdef double[::1] tx_res_v = tx_res
    cdef double[::1] rx_res_v = rx_res
    cdef unsigned char[::1] conv_v = conv

    A_tx_buf = np.empty(Lmax * n_tx, dtype=np.complex128)
    A_rx_buf = np.empty(Lmax * n_rx, dtype=np.complex128)
    vecs = np.empty(2 * n_tx + 2 * n_rx, dtype=np.complex128)
    ybig = np.empty(n_tx if n_tx > n_rx else n_rx, dtype=np.complex128)
    cbig = np.empty(Lmax, dtype=np.complex128)
    cdef cplx[::1] A_tx_v = A_tx_buf
    cdef cplx[::1] A_rx_v = A_rx_buf
    cdef cplx[::1] vecs_v = vecs
    cdef cplx[::1] ybig_v = ybig
    cdef cplx[::1] cbig_v = cbig
    cdef cplx* A_txp = &A_tx_v[0]
    cdef cplx* A_rxp = &A_rx_v[0]
    cdef cplx* v_tx = &vecs_v[0]
    cdef cplx* vk_tx = &vecs_v[n_tx]
    cdef cplx* v_rx = &vecs_v[2 * n_tx]
    cdef cplx* vk_rx = &vecs_v[2 * n_tx + n_rx]
    cdef cplx* ybuf = &ybig_v[0]
    cdef cplx* cbuf = &cbig_v[0]

    cdef double lam_t, lam_r, res_t, res_r
    cdef bint ok_t, ok_r
    cdef double gt, gr, p, best
    cdef Py_ssize_t best_idx
    cdef cplx acc

    with nogil:
        for i in range(n):
            s = offsets[i]
            L = offsets[i + 1] - s
            if L == 0:
                continue
            _fill_steering(A_txp, &tx_u[s], &tx_v[s], L, tx_rows, tx_cols, tx_spacing)
            _fill_steering(A_rxp, &rx_u[s], &rx_v[s], L, rx_rows, rx_cols, rx_spacing)
            ok_t = _power_iter(A_txp, &weights[s], L, n_tx, tol, max_iter,
                               v_tx, vk_tx, ybuf, cbuf, &lam_t, &res_t)
            ok_r = _power_iter(A_rxp, &weights[s], L, n_rx, tol, max_iter,
                               v_rx, vk_rx, ybuf, cbuf, &lam_r, &res_r)
            tx_eig_v[i] = lam_t
            rx_eig_v[i] = lam_r
            tx_res_v[i] = res_t
            rx_res_v[i] = res_r
            conv_v[i] = 1 if (ok_t and ok_r) else 0
            best = -1.0
            best_idx = 0
            p = 0.0
            for l in range(L):
                acc = 0
                for k in range(n_tx):
                    acc = acc + A_txp[l * n_tx + k].conjugate() * vk_tx[k]
                gt = acc.real * acc.real + acc.imag * acc.imag
                acc = 0
                for k in range(n_rx):
                    acc = acc + A_rxp[l * n_rx + k].conjugate() * vk_rx[k]
                gr = acc.real * acc.real + acc.imag * acc.imag
                gt = weights[s + l] * gt * gr
                power_v[i] += gt
                if gt > best:
                    best = gt
                    best_idx = l
            strongest_v[i] = best_idx

    return (power, strongest, tx_eig, rx_eig, tx_res, rx_res,
            conv.astype(bool))
