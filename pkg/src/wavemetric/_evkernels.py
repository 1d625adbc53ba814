"""Hot kernels for the discrete evolution operator.

Both kernels compute, node by node over a flattened rectilinear grid,

    out = E^{-1} [ -(i/2) sum_j (A^j D_j psi + D_j (A^j psi)) + V psi ]

with antisymmetric central differences D_j and zero exterior values.  The
const-A variant exploits position-independent A^j (the sum collapses to
-i A^j D_j psi) stored sparsely as (row, col, val) triples.  Neighbor access
is by flat index arithmetic: node n has axis-j coordinate (n // strides[j])
% shape[j], and stepping m nodes along axis j adds m * strides[j].

The weight inverse comes either as a per-node diagonal (einv_diag, the common
case: every built-in family except elastic has diagonal E) or as a full
per-node matrix (einv_full); the unused one is a dummy array.  Likewise vmat
is a dummy when use_v is False.

Compiled with numba when available; the evolution module switches to
vectorized numpy routines instead of running these loops interpreted.
"""

import numpy as np

from ._accel import njit


@njit(cache=True)
def rhs_const_a(psi, out, shape, strides, coeffs, a_nnz, a_rows, a_cols, a_vals,
                einv_diag, einv_full, use_diag_einv, vmat, use_v):
    n_nodes, k = psi.shape
    d = shape.shape[0]
    s = coeffs.shape[1]
    dpsi = np.empty(k, np.complex128)
    acc = np.empty(k, np.complex128)
    for n in range(n_nodes):
        for r in range(k):
            acc[r] = 0.0
        if use_v:
            for r in range(k):
                t = 0.0 + 0.0j
                for c in range(k):
                    t += vmat[n, r, c] * psi[n, c]
                acc[r] = t
        for j in range(d):
            cj = (n // strides[j]) % shape[j]
            for r in range(k):
                dpsi[r] = 0.0
            for m in range(1, s + 1):
                cm = coeffs[j, m - 1]
                if cm == 0.0:
                    continue
                if cj + m < shape[j]:
                    base = n + m * strides[j]
                    for r in range(k):
                        dpsi[r] += cm * psi[base, r]
                if cj - m >= 0:
                    base = n - m * strides[j]
                    for r in range(k):
                        dpsi[r] -= cm * psi[base, r]
            for e in range(a_nnz[j]):
                acc[a_rows[j, e]] += (-1j) * a_vals[j, e] * dpsi[a_cols[j, e]]
        if use_diag_einv:
            for r in range(k):
                out[n, r] = einv_diag[n, r] * acc[r]
        else:
            for r in range(k):
                t = 0.0 + 0.0j
                for c in range(k):
                    t += einv_full[n, r, c] * acc[c]
                out[n, r] = t


@njit(cache=True)
def rhs_var_a(psi, out, shape, strides, coeffs, a_samples, einv_diag, einv_full,
              use_diag_einv, vmat, use_v):
    n_nodes, k = psi.shape
    d = shape.shape[0]
    s = coeffs.shape[1]
    phi = np.empty((d, n_nodes, k), np.complex128)
    for j in range(d):
        for n in range(n_nodes):
            for r in range(k):
                t = 0.0 + 0.0j
                for c in range(k):
                    t += a_samples[j, n, r, c] * psi[n, c]
                phi[j, n, r] = t
    dpsi = np.empty(k, np.complex128)
    dphi = np.empty(k, np.complex128)
    acc = np.empty(k, np.complex128)
    for n in range(n_nodes):
        for r in range(k):
            acc[r] = 0.0
        if use_v:
            for r in range(k):
                t = 0.0 + 0.0j
                for c in range(k):
                    t += vmat[n, r, c] * psi[n, c]
                acc[r] = t
        for j in range(d):
            cj = (n // strides[j]) % shape[j]
            for r in range(k):
                dpsi[r] = 0.0
                dphi[r] = 0.0
            for m in range(1, s + 1):
                cm = coeffs[j, m - 1]
                if cm == 0.0:
                    continue
                if cj + m < shape[j]:
                    base = n + m * strides[j]
                    for r in range(k):
                        dpsi[r] += cm * psi[base, r]
                        dphi[r] += cm * phi[j, base, r]
                if cj - m >= 0:
                    base = n - m * strides[j]
                    for r in range(k):
                        dpsi[r] -= cm * psi[base, r]
                        dphi[r] -= cm * phi[j, base, r]
            for r in range(k):
                t = dphi[r]
                for c in range(k):
                    t += a_samples[j, n, r, c] * dpsi[c]
                acc[r] += -0.5j * t
        if use_diag_einv:
            for r in range(k):
                out[n, r] = einv_diag[n, r] * acc[r]
        else:
            for r in range(k):
                t = 0.0 + 0.0j
                for c in range(k):
                    t += einv_full[n, r, c] * acc[c]
                out[n, r] = t
