"""Pure-NumPy batch kernel: pads links to a common path count per chunk
and runs the power iterations for all links of a chunk simultaneously.

Semantics (start vector, convergence rule, basis-vector restart) match
`uavcov.link.dominant_eigenvector`, except that hitting max_iter flags the
link instead of raising.
"""

from __future__ import annotations

import numpy as np

RESIDUAL_RTOL = 1e-6

_CHUNK = 512


def _steering(u, v, rows, cols, spacing):
    # (B, L) cosines -> (B, L, rows*cols) unit-modulus responses
    m = np.arange(cols)
    n = np.arange(rows)
    phase = (
        2.0
        * np.pi
        * spacing
        * (n[:, None] * v[..., None, None] + m[None, :] * u[..., None, None])
    )
    return np.exp(1j * phase).reshape(*u.shape, rows * cols)


def _batch_power(A, w, tol, max_iter):
    """Dominant eigenpair of Q_b = sum_l w[b,l] a[b,l] a[b,l]^H per batch row."""
    B, L, N = A.shape
    v = np.full((B, N), 1.0 / np.sqrt(N), dtype=complex)
    lam_prev = np.full(B, np.inf)
    lam_out = np.zeros(B)
    res_out = np.zeros(B)
    v_out = v.copy()
    conv = np.zeros(B, dtype=bool)
    basis_ptr = np.zeros(B, dtype=np.int64)
    active = np.ones(B, dtype=bool)
    for _ in range(max_iter):
        ai = np.flatnonzero(active)
        if ai.size == 0:
            break
        Aa = A[ai]
        va = v[ai]
        c = np.einsum("bln,bn->bl", Aa.conj(), va) * w[ai]
        y = np.einsum("bl,bln->bn", c, Aa)
        lam = np.einsum("bn,bn->b", va.conj(), y).real
        yn2 = np.einsum("bn,bn->b", y.conj(), y).real
        res = np.sqrt(np.maximum(yn2 - lam * lam, 0.0))
        floor = np.maximum(lam, 1e-300)
        # record the state at which lam/res were evaluated
        lam_out[ai] = lam
        res_out[ai] = res / floor
        v_out[ai] = va
        done = (np.abs(lam - lam_prev[ai]) <= tol * floor) & (
            res <= RESIDUAL_RTOL * floor
        )
        conv[ai[done]] = True
        active[ai[done]] = False
        ri = ai[~done]
        if ri.size == 0:
            continue
        lam_prev[ri] = lam[~done]
        yn = np.sqrt(yn2[~done])
        yr = y[~done]
        nz = yn > 0.0
        v[ri[nz]] = yr[nz] / yn[nz][:, None]
        for j, row in zip(ri[~nz], np.flatnonzero(~nz)):
            # iterate annihilated: restart from the next canonical basis vector
            if basis_ptr[j] >= N:
                lam_out[j] = 0.0
                res_out[j] = 0.0
                conv[j] = True
                active[j] = False
            else:
                v[j] = 0.0
                v[j, basis_ptr[j]] = 1.0
                basis_ptr[j] += 1
                lam_prev[j] = np.inf
    return lam_out, v_out, res_out, conv


def evaluate_links(
    weights,
    tx_u,
    tx_v,
    rx_u,
    rx_v,
    offsets,
    tx_rows,
    tx_cols,
    rx_rows,
    rx_cols,
    tx_spacing,
    rx_spacing,
    tol=1e-9,
    max_iter=1000,
):
    n = offsets.size - 1
    counts = np.diff(offsets)
    power = np.zeros(n)
    strongest = np.full(n, -1, dtype=np.int64)
    tx_eig = np.zeros(n)
    rx_eig = np.zeros(n)
    tx_res = np.zeros(n)
    rx_res = np.zeros(n)
    conv = np.ones(n, dtype=bool)
    nonempty = np.flatnonzero(counts > 0)
    for start in range(0, nonempty.size, _CHUNK):
        li = nonempty[start : start + _CHUNK]
        cnt = counts[li]
        L = int(cnt.max())
        pad_idx = offsets[li][:, None] + np.arange(L)[None, :]
        mask = np.arange(L)[None, :] < cnt[:, None]
        safe = np.where(mask, pad_idx, offsets[li][:, None])
        w = np.where(mask, weights[safe], 0.0)
        A_tx = _steering(tx_u[safe], tx_v[safe], tx_rows, tx_cols, tx_spacing)
        A_rx = _steering(rx_u[safe], rx_v[safe], rx_rows, rx_cols, rx_spacing)
        lam_t, v_t, res_t, conv_t = _batch_power(A_tx, w, tol, max_iter)
        lam_r, v_r, res_r, conv_r = _batch_power(A_rx, w, tol, max_iter)
        g_tx = np.abs(np.einsum("bln,bn->bl", A_tx.conj(), v_t)) ** 2
        g_rx = np.abs(np.einsum("bln,bn->bl", A_rx.conj(), v_r)) ** 2
        p = w * g_tx * g_rx
        power[li] = p.sum(axis=1)
        strongest[li] = np.argmax(p, axis=1)
        tx_eig[li] = lam_t
        rx_eig[li] = lam_r
        tx_res[li] = res_t
        rx_res[li] = res_r
        conv[li] = conv_t & conv_r
    return power, strongest, tx_eig, rx_eig, tx_res, rx_res, conv
