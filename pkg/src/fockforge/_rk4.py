"""Compiled fixed-step RK4 kernel for the Lindblad equation.

The generator is split as

    drho/dt = X + X^H + sum_j L_j rho L_j^H,   X = -i K rho,
    K = H - (i/2) sum_j L_j^H L_j,

with the rates folded into the ``L_j``. Operators arrive in CSR form: the
model matrices are dense but very sparse, and CSR products are what keeps a
360x360 two-mode density matrix affordable at tens of thousands of steps.
The split is only valid for Hermitian ``rho``: on an anti-Hermitian part it
acts as an unstable map, so rounding asymmetry is projected out after every
step.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _csr_matmul(indptr, indices, data, rho, out):
    n = rho.shape[1]
    for i in range(out.shape[0]):
        for j in range(n):
            out[i, j] = 0.0
        for q in range(indptr[i], indptr[i + 1]):
            k = indices[q]
            c = data[q]
            for j in range(n):
                out[i, j] += c * rho[k, j]


@njit(cache=True)
def _rhs(k_ptr, k_idx, k_val, j_ptr, j_idx, j_val, j_off, rho, x, y, z, out):
    n = rho.shape[0]
    _csr_matmul(k_ptr, k_idx, k_val, rho, x)
    for i in range(n):
        for j in range(n):
            out[i, j] = x[i, j] + np.conj(x[j, i])
    for m in range(j_ptr.shape[0]):
        lo = j_off[m]
        hi = j_off[m + 1]
        ptr = j_ptr[m]
        idx = j_idx[lo:hi]
        val = j_val[lo:hi]
        _csr_matmul(ptr, idx, val, rho, y)
        for i in range(n):
            for j in range(n):
                z[i, j] = np.conj(y[j, i])
        for i in range(n):
            for q in range(ptr[i], ptr[i + 1]):
                k = idx[q]
                c = val[q]
                for j in range(n):
                    out[i, j] += c * z[k, j]


@njit(cache=True)
def rk4_steps(k_ptr, k_idx, k_val, j_ptr, j_idx, j_val, j_off, rho, h, nsteps):
    """Advance ``rho`` in place by ``nsteps`` classical RK4 steps of size ``h``."""
    n = rho.shape[0]
    x = np.empty_like(rho)
    y = np.empty_like(rho)
    z = np.empty_like(rho)
    k1 = np.empty_like(rho)
    k2 = np.empty_like(rho)
    k3 = np.empty_like(rho)
    k4 = np.empty_like(rho)
    tmp = np.empty_like(rho)
    for _ in range(nsteps):
        _rhs(k_ptr, k_idx, k_val, j_ptr, j_idx, j_val, j_off, rho, x, y, z, k1)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + 0.5 * h * k1[i, j]
        _rhs(k_ptr, k_idx, k_val, j_ptr, j_idx, j_val, j_off, tmp, x, y, z, k2)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + 0.5 * h * k2[i, j]
        _rhs(k_ptr, k_idx, k_val, j_ptr, j_idx, j_val, j_off, tmp, x, y, z, k3)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + h * k3[i, j]
        _rhs(k_ptr, k_idx, k_val, j_ptr, j_idx, j_val, j_off, tmp, x, y, z, k4)
        for i in range(n):
            for j in range(n):
                rho[i, j] += (h / 6.0) * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        for i in range(n):
            for j in range(i, n):
                v = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
                rho[i, j] = v
                rho[j, i] = np.conj(v)
