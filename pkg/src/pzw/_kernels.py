"""numba kernels: Chebyshev action of exp(-i tau A / hbar) for Hermitian banded A."""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True, fastmath=True, boundscheck=False)
def _htri_step(dr, di, sr, si, orr, oi, dd, ur, ui, sc, md):
    # d = sc * K s - md * o, K Hermitian tridiagonal: K[i, i+1] = ur[i] + i ui[i]
    n = dr.shape[0]
    for i in range(n):
        dr[i] = sc * dd[i] * sr[i] - md * orr[i]
        di[i] = sc * dd[i] * si[i] - md * oi[i]
    for i in range(n - 1):
        a = sc * ur[i]
        b = sc * ui[i]
        dr[i] += a * sr[i + 1] - b * si[i + 1]
        di[i] += a * si[i + 1] + b * sr[i + 1]
    for i in range(1, n):
        a = sc * ur[i - 1]
        b = -sc * ui[i - 1]
        dr[i] += a * sr[i - 1] - b * si[i - 1]
        di[i] += a * si[i - 1] + b * sr[i - 1]


@nb.njit(cache=True, fastmath=True, boundscheck=False)
def _hband_step(dr, di, sr, si, orr, oi, dd, ur, ui, sc, md):
    n = dr.shape[0]
    for i in range(n):
        dr[i] = sc * dd[i] * sr[i] - md * orr[i]
        di[i] = sc * dd[i] * si[i] - md * oi[i]
    for k in range(ur.shape[0]):
        off = k + 1
        for i in range(n - off):
            a = sc * ur[k, i]
            b = sc * ui[k, i]
            dr[i] += a * sr[i + off] - b * si[i + off]
            di[i] += a * si[i + off] + b * sr[i + off]
        for i in range(off, n):
            a = sc * ur[k, i - off]
            b = -sc * ui[k, i - off]
            dr[i] += a * sr[i - off] - b * si[i - off]
            di[i] += a * si[i - off] + b * sr[i - off]


@nb.njit(cache=True, fastmath=True, boundscheck=False)
def _hstep(dr, di, sr, si, orr, oi, dd, ur, ui, sc, md):
    if ur.shape[0] == 1 and dr.shape[0] > 1:
        _htri_step(dr, di, sr, si, orr, oi, dd, ur[0], ui[0], sc, md)
    else:
        _hband_step(dr, di, sr, si, orr, oi, dd, ur, ui, sc, md)


@nb.njit(cache=True, fastmath=True, boundscheck=False)
def _cheb_column(xr, xi, dd, ur, ui, cre, cim, b, ar, ai):
    dim = xr.shape[0]
    nt = cre.shape[0]
    for i in range(dim):
        b[0, 0, i] = xr[i]
        b[0, 1, i] = xi[i]
        ar[i] = cre[0] * xr[i] - cim[0] * xi[i]
        ai[i] = cre[0] * xi[i] + cim[0] * xr[i]
    ip, iq, ir = 0, 1, 2
    for k in range(1, nt):
        if k == 1:
            _hstep(b[1, 0], b[1, 1], b[0, 0], b[0, 1], b[0, 0], b[0, 1], dd, ur, ui, 1.0, 0.0)
            cur = 1
        else:
            _hstep(b[ir, 0], b[ir, 1], b[iq, 0], b[iq, 1], b[ip, 0], b[ip, 1], dd, ur, ui, 2.0, 1.0)
            cur = ir
            ip, iq, ir = iq, ir, ip
        cr = cre[k]
        ci = cim[k]
        tr = b[cur, 0]
        ti = b[cur, 1]
        for i in range(dim):
            ar[i] += cr * tr[i] - ci * ti[i]
            ai[i] += cr * ti[i] + ci * tr[i]
    for i in range(dim):
        xr[i] = ar[i]
        xi[i] = ai[i]


@nb.njit(cache=True, fastmath=True, boundscheck=False)
def _cheb_column_tri(xr, xi, dd, Ur, Ui, cre, cim, b, ar, ai):
    # fused recurrence and accumulation for the tridiagonal case; vectors are
    # zero padded (active entries 1..n) and U[i] couples i to i+1
    n = xr.shape[0]
    nt = cre.shape[0]
    for i in range(n):
        b[0, 0, i + 1] = xr[i]
        b[0, 1, i + 1] = xi[i]
        ar[i] = cre[0] * xr[i] - cim[0] * xi[i]
        ai[i] = cre[0] * xi[i] + cim[0] * xr[i]
    ip, iq, ir = 2, 0, 1
    for k in range(1, nt):
        sc = 1.0 if k == 1 else 2.0
        md = 0.0 if k == 1 else 1.0
        sr = b[iq, 0]
        si = b[iq, 1]
        orr = b[ip, 0]
        oi = b[ip, 1]
        dr = b[ir, 0]
        di = b[ir, 1]
        cr = cre[k]
        ci = cim[k]
        for i in range(1, n + 1):
            vr = (dd[i] * sr[i] + Ur[i] * sr[i + 1] - Ui[i] * si[i + 1]
                  + Ur[i - 1] * sr[i - 1] + Ui[i - 1] * si[i - 1])
            vi = (dd[i] * si[i] + Ur[i] * si[i + 1] + Ui[i] * sr[i + 1]
                  + Ur[i - 1] * si[i - 1] - Ui[i - 1] * sr[i - 1])
            tr = sc * vr - md * orr[i]
            ti = sc * vi - md * oi[i]
            dr[i] = tr
            di[i] = ti
            ar[i - 1] += cr * tr - ci * ti
            ai[i - 1] += cr * ti + ci * tr
        ip, iq, ir = iq, ir, ip
    for i in range(n):
        xr[i] = ar[i]
        xi[i] = ai[i]


@nb.njit(cache=True)
def _tri_padded(d, ur, ui, center, inv_radius):
    dim = d.shape[0]
    dd = np.zeros(dim + 2)
    dd[1:dim + 1] = (d - center) * inv_radius
    Ur = np.zeros(dim + 2)
    Ui = np.zeros(dim + 2)
    Ur[1:dim] = ur[0, :dim - 1] * inv_radius
    Ui[1:dim] = ui[0, :dim - 1] * inv_radius
    return dd, Ur, Ui


@nb.njit(cache=True)
def cheb_apply(vr, vi, d, ur, ui, center, inv_radius, cre, cim):
    """In place v <- sum_k c_k T_k(K) v with K = (A - center) * inv_radius.

    A is Hermitian banded: real diagonal ``d`` and upper bands
    A[i, i+k+1] = ur[k, i] + i ui[k, i]. vr, vi hold real and imaginary
    parts with one orbital per row, so each orbital's recurrence runs on
    contiguous memory.
    """
    ncol, dim = vr.shape
    ar = np.empty(dim)
    ai = np.empty(dim)
    if ur.shape[0] == 1 and dim > 1:
        dd, Ur, Ui = _tri_padded(d, ur, ui, center, inv_radius)
        b = np.zeros((3, 2, dim + 2))
        for col in range(ncol):
            _cheb_column_tri(vr[col], vi[col], dd, Ur, Ui, cre, cim, b, ar, ai)
        return
    dd = (d - center) * inv_radius
    uur = ur * inv_radius
    uui = ui * inv_radius
    b = np.empty((3, 2, dim))
    for col in range(ncol):
        _cheb_column(vr[col], vi[col], dd, uur, uui, cre, cim, b, ar, ai)


@nb.njit(cache=True, parallel=True)
def cheb_apply_parallel(vr, vi, d, ur, ui, center, inv_radius, cre, cim):
    ncol, dim = vr.shape
    tri = ur.shape[0] == 1 and dim > 1
    dd, Ur, Ui = _tri_padded(d, ur, ui, center, inv_radius)
    ddb = (d - center) * inv_radius
    uur = ur * inv_radius
    uui = ui * inv_radius
    for col in nb.prange(ncol):
        ar = np.empty(dim)
        ai = np.empty(dim)
        if tri:
            b = np.zeros((3, 2, dim + 2))
            _cheb_column_tri(vr[col], vi[col], dd, Ur, Ui, cre, cim, b, ar, ai)
        else:
            b = np.empty((3, 2, dim))
            _cheb_column(vr[col], vi[col], ddb, uur, uui, cre, cim, b, ar, ai)


@nb.njit(cache=True, fastmath=True, boundscheck=False)
def band_expectation(vr, vi, d, ur, ui):
    """sum over rows of <v|A|v> for Hermitian banded A (rows are orbitals)."""
    ncol, dim = vr.shape
    tot = 0.0
    for col in range(ncol):
        xr = vr[col]
        xi = vi[col]
        for i in range(dim):
            tot += d[i] * (xr[i] * xr[i] + xi[i] * xi[i])
        for k in range(ur.shape[0]):
            off = k + 1
            for i in range(dim - off):
                j = i + off
                # 2 Re(conj(v_i) A_ij v_j)
                re = xr[i] * xr[j] + xi[i] * xi[j]
                im = xr[i] * xi[j] - xi[i] * xr[j]
                tot += 2.0 * (ur[k, i] * re - ui[k, i] * im)
    return tot


@nb.njit(cache=True, fastmath=True)
def oscillating_sum(M, lam, n_samples, dt_over_hbar, out):
    """out[n] = Re sum_{l,k} M[l,k] exp(-i (lam_l - lam_k) n dt / hbar).

    M is Hermitian; the diagonal contributes a constant and each l < k pair
    twice its real part. Phases advance by recurrence, renormalized every
    64 samples.
    """
    dim = M.shape[0]
    base = 0.0
    for l in range(dim):
        base += M[l, l].real
    npair = dim * (dim - 1) // 2
    zr = np.empty(npair)
    zi = np.empty(npair)
    sr = np.empty(npair)
    si = np.empty(npair)
    wr = np.empty(npair)
    wi = np.empty(npair)
    idx = 0
    for l in range(dim):
        for k in range(l + 1, dim):
            ph = -(lam[l] - lam[k]) * dt_over_hbar
            sr[idx] = np.cos(ph)
            si[idx] = np.sin(ph)
            zr[idx] = 2.0 * M[l, k].real
            zi[idx] = 2.0 * M[l, k].imag
            wr[idx] = 1.0
            wi[idx] = 0.0
            idx += 1
    # phases for the renormalization checkpoints are recomputed exactly
    for n in range(n_samples):
        if n > 0 and n % 64 == 0:
            idx = 0
            for l in range(dim):
                for k in range(l + 1, dim):
                    ph = -(lam[l] - lam[k]) * dt_over_hbar * n
                    wr[idx] = np.cos(ph)
                    wi[idx] = np.sin(ph)
                    idx += 1
        acc = 0.0
        for p in range(npair):
            acc += zr[p] * wr[p] - zi[p] * wi[p]
        out[n] = base + acc
        for p in range(npair):
            a = wr[p] * sr[p] - wi[p] * si[p]
            wi[p] = wr[p] * si[p] + wi[p] * sr[p]
            wr[p] = a
    return out
