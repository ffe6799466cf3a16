#!/usr/bin/env python3
"""
Poisson Kernels
Compiled sweeps for the 5-point pressure Poisson equation

    (p[i-1,j] - 2p + p[i+1,j])/dx^2 + (p[i,j-1] - 2p + p[i,j+1])/dy^2 = rhs

on the active cells of a ghost-padded m x n array.

Neighbour rule shared by the kernels: an active neighbour is read as stored.
For Dirichlet problems a non-active neighbour holds the boundary value and is
read as stored too. For Neumann problems a non-active neighbour stands for the
zero-gradient ghost, p_ghost = p_cell, so its coefficient folds into the
diagonal: the diagonal of a cell is the sum of the coefficients of the
neighbours it actually couples to. The Jacobi kernel is the one exception
and keeps the full 2/dx^2 + 2/dy^2 diagonal (see jacobi_kernel).
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _gather(p, active, dirichlet, i, j, idx2, idy2):
    """Weighted sum of the coupled neighbours of (i, j) and the matching diagonal."""
    total = 0.0
    diag = 0.0
    if dirichlet or active[i - 1, j]:
        total += p[i - 1, j] * idx2
        diag += idx2
    if dirichlet or active[i + 1, j]:
        total += p[i + 1, j] * idx2
        diag += idx2
    if dirichlet or active[i, j - 1]:
        total += p[i, j - 1] * idy2
        diag += idy2
    if dirichlet or active[i, j + 1]:
        total += p[i, j + 1] * idy2
        diag += idy2
    return total, diag


# -----------------------------
#        Point methods
# -----------------------------

@njit(cache=True, nogil=True)
def jacobi_kernel(p_old, p_new, rhs, active, dirichlet, idx2, idy2):
    # With the folded diagonal, simultaneous updates on a pure Neumann problem
    # carry a checkerboard mode with iteration factor -1. Reading each missing
    # neighbour as the cell's old value keeps the full diagonal and the same
    # fixed point.
    m, n = p_old.shape
    full = 2.0 * (idx2 + idy2)
    for i in range(m):
        for j in range(n):
            if not active[i, j]:
                p_new[i, j] = p_old[i, j]
                continue
            c = p_old[i, j]
            total, diag = _gather(p_old, active, dirichlet, i, j, idx2, idy2)
            p_new[i, j] = (total + (full - diag) * c - rhs[i, j]) / full


@njit(cache=True, nogil=True)
def gauss_seidel_kernel(p, rhs, active, dirichlet, idx2, idy2):
    m, n = p.shape
    for j in range(1, n - 1):
        for i in range(1, m - 1):
            if not active[i, j]:
                continue
            total, diag = _gather(p, active, dirichlet, i, j, idx2, idy2)
            if diag == 0.0:
                continue  # isolated cell, value is free
            p[i, j] = (total - rhs[i, j]) / diag


@njit(cache=True, nogil=True)
def sor_kernel(p, rhs, active, dirichlet, idx2, idy2, omega):
    m, n = p.shape
    for j in range(1, n - 1):
        for i in range(1, m - 1):
            if not active[i, j]:
                continue
            total, diag = _gather(p, active, dirichlet, i, j, idx2, idy2)
            if diag == 0.0:
                continue
            gs = (total - rhs[i, j]) / diag
            p[i, j] = (1.0 - omega) * p[i, j] + omega * gs


@njit(cache=True, nogil=True)
def residual_kernel(p, rhs, active, dirichlet, idx2, idy2, r):
    m, n = p.shape
    for i in range(m):
        for j in range(n):
            if not active[i, j]:
                r[i, j] = 0.0
                continue
            total, diag = _gather(p, active, dirichlet, i, j, idx2, idy2)
            r[i, j] = rhs[i, j] - (total - diag * p[i, j])


# -----------------------------
#        Thomas algorithm
# -----------------------------

@njit(cache=True, nogil=True)
def thomas_kernel(lower, diag, upper, rhs, x, cp, dp, size):
    """Forward elimination / back substitution; returns the failing row or -1.

    lower[k] multiplies x[k-1], upper[k] multiplies x[k+1].
    """
    if diag[0] == 0.0:
        return 0
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for k in range(1, size):
        denom = diag[k] - lower[k] * cp[k - 1]
        if denom == 0.0 or not np.isfinite(denom):
            return k
        cp[k] = upper[k] / denom
        dp[k] = (rhs[k] - lower[k] * dp[k - 1]) / denom
    x[size - 1] = dp[size - 1]
    for k in range(size - 2, -1, -1):
        x[k] = dp[k] - cp[k] * x[k + 1]
    return -1


# -----------------------------
#          Line sweeps
# -----------------------------

@njit(cache=True, nogil=True)
def line_sweep_kernel(p, rhs, active, dirichlet, idx2, idy2, omega, relax_inside):
    """One sweep of implicit lines along axis 0, lines taken in ascending axis-1 order.

    Each contiguous run of active cells on a line is one tridiagonal system.
    relax_inside=True scales the system by omega before solving (variant A);
    otherwise the line solution is blended with the old values (variant B).
    A Neumann run with no coupling off the line is singular; its first cell
    keeps its old value and the rest of the run is solved against it.
    Returns (line, row) of a zero pivot, or (-1, -1).
    """
    m, n = p.shape
    lo = np.zeros(m)
    di = np.zeros(m)
    up = np.zeros(m)
    b = np.zeros(m)
    x = np.zeros(m)
    old = np.zeros(m)
    cp = np.zeros(m)
    dp = np.zeros(m)
    for j in range(1, n - 1):
        i = 1
        while i < m - 1:
            if not active[i, j]:
                i += 1
                continue
            start = i
            while i < m - 1 and active[i, j]:
                i += 1
            stop = i
            size = stop - start
            coupled = False
            for k in range(size):
                ii = start + k
                c = p[ii, j]
                old[k] = c
                dk = 0.0
                bk = -rhs[ii, j]
                if dirichlet or active[ii, j - 1]:
                    bk += p[ii, j - 1] * idy2
                    dk += idy2
                    coupled = True
                if dirichlet or active[ii, j + 1]:
                    bk += p[ii, j + 1] * idy2
                    dk += idy2
                    coupled = True
                if k == 0:
                    lo[k] = 0.0
                    if dirichlet:
                        bk += p[ii - 1, j] * idx2
                        dk += idx2
                        coupled = True
                else:
                    lo[k] = -idx2
                    dk += idx2
                if k == size - 1:
                    up[k] = 0.0
                    if dirichlet:
                        bk += p[ii + 1, j] * idx2
                        dk += idx2
                else:
                    up[k] = -idx2
                    dk += idx2
                if relax_inside:
                    di[k] = dk / omega
                    bk += (1.0 - omega) / omega * dk * c
                else:
                    di[k] = dk
                b[k] = bk
            if not coupled:
                di[0] = 1.0
                up[0] = 0.0
                b[0] = old[0]
            bad = thomas_kernel(lo, di, up, b, x, cp, dp, size)
            if bad >= 0:
                return j, start + bad
            for k in range(size):
                if relax_inside:
                    p[start + k, j] = x[k]
                else:
                    p[start + k, j] = (1.0 - omega) * old[k] + omega * x[k]
    return -1, -1
