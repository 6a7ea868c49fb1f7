"""Ground state and time propagation of the occupied orbitals.

While the drive is on, orbitals advance with a fourth-order Magnus step whose
exponential is applied by Chebyshev expansion. Every
output interval is integrated twice (k and 2k substeps); the difference
controls k and the Richardson combination of the two is kept. Where the
drive envelope is below ``support_tol`` the Hamiltonian is H_M alone and the
orbitals are evolved exactly in its eigenbasis.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import sparse
from scipy.special import jv

from . import _kernels
from .constants import HBAR


class PropagationError(RuntimeError):
    """Numerical failure during propagation."""


class StepSizeUnderflow(PropagationError):
    pass


class NormDriftError(PropagationError):
    pass


@dataclass
class OrbitalEnsemble:
    orbitals: np.ndarray  # (dim, n_occ) complex, columns |eps>
    occupations: np.ndarray
    energies: np.ndarray  # occupied eigenvalues (eV)
    fermi_energy: float
    eigenvalues: np.ndarray  # full spectrum of H_M
    eigenvectors: np.ndarray

    @property
    def n_electrons(self) -> int:
        return int(round(self.occupations.sum()))


def ground_state(H_M: np.ndarray, n_electrons: int | None = None, gap_tol: float = 1e-8) -> OrbitalEnsemble:
    """Fill the lowest ``n_electrons`` eigenvectors (default: half filling)."""
    dim = H_M.shape[0]
    if n_electrons is None:
        if dim % 2:
            raise ValueError(f"odd dimension {dim}: pass n_electrons explicitly")
        n_electrons = dim // 2
    if not 0 < n_electrons < dim:
        raise ValueError(f"n_electrons must lie in (0, {dim})")
    if np.max(np.abs(H_M - H_M.conj().T)) > 1e-10:
        raise ValueError("H_M is not Hermitian")
    lam, V = np.linalg.eigh(H_M)
    homo, lumo = lam[n_electrons - 1], lam[n_electrons]
    if lumo - homo < gap_tol:
        raise ValueError(
            f"degenerate levels straddle the Fermi level (HOMO {homo:.10g}, LUMO {lumo:.10g} eV); choose the filling explicitly"
        )
    V = V.astype(complex)
    return OrbitalEnsemble(
        orbitals=V[:, :n_electrons].copy(),
        occupations=np.ones(n_electrons),
        energies=lam[:n_electrons].copy(),
        fermi_energy=0.5 * (homo + lumo),
        eigenvalues=lam,
        eigenvectors=V,
    )


def density_matrix(orbitals: np.ndarray, occupations=None) -> np.ndarray:
    """rho = sum_eps f(eps) |eps><eps|."""
    if occupations is None:
        return orbitals @ orbitals.conj().T
    return (orbitals * occupations) @ orbitals.conj().T


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PZW_THREADS", "1")))
    except ValueError:
        return 1


def chebyshev_coefficients(tau: float, center: float, radius: float, eps: float = 1e-14) -> np.ndarray:
    """Coefficients of exp(-i tau A / hbar) = sum_k c_k T_k((A - center)/radius)."""
    z = tau * radius / HBAR
    kmax = int(z + 10.0 * z ** (1.0 / 3.0) + 30)
    k = np.arange(kmax + 1)
    J = jv(k, z)
    big = np.flatnonzero(np.abs(J) > eps)
    n = max(int(big[-1]) + 2 if big.size else 1, 2)
    k, J = k[:n], J[:n]
    c = np.where(k == 0, 1.0, 2.0) * (-1j) ** (k % 4) * J
    return c * np.exp(-1j * tau * center / HBAR)


def _bandwidth(H: np.ndarray) -> int:
    dim = H.shape[0]
    for b in range(dim - 1, 0, -1):
        if np.any(np.diagonal(H, b) != 0):
            return b
    return 0


class _Generator:
    """Fourth-order Magnus steps for H_M + diag(d(t)), one exponential per step.

    With d1, d2 the couplings at the two Gauss points, the Magnus exponent is
    h (H_M + (d1 + d2)/2) - i kappa [H_M, d1 - d2] with kappa = sqrt(3) h / (12 hbar).
    The commutator of a banded H_M with a diagonal keeps the band structure,
    so each step is a single banded exponential.
    """

    def __init__(self, H_M: np.ndarray, eigenvalues: np.ndarray, cheb_eps: float = 1e-14):
        self.dim = H_M.shape[0]
        self.lmin, self.lmax = float(eigenvalues[0]), float(eigenvalues[-1])
        self.eps = cheb_eps
        self.terms = 0
        bw = _bandwidth(H_M)
        self.banded = self.dim > 1 and bw <= max(8, self.dim // 20)
        offd = H_M - np.diag(np.diagonal(H_M))
        self.absH = sparse.csr_matrix(np.abs(offd))
        self.rowsum = np.asarray(self.absH.sum(axis=1)).ravel()
        if self.banded:
            nb_ = max(bw, 1)
            self.d = np.ascontiguousarray(np.diagonal(H_M).real)
            self.ur = np.zeros((nb_, self.dim))
            self.ui = np.zeros((nb_, self.dim))
            for b in range(1, bw + 1):
                self.ur[b - 1, : self.dim - b] = np.diagonal(H_M, b).real
                self.ui[b - 1, : self.dim - b] = np.diagonal(H_M, b).imag
            self._apply = _kernels.cheb_apply_parallel if _threads() > 1 else _kernels.cheb_apply
            if _threads() > 1:
                numba.set_num_threads(min(_threads(), numba.config.NUMBA_NUM_THREADS))
        else:
            self.H = np.ascontiguousarray(H_M)

    def _bounds(self, dbar: np.ndarray, delta: np.ndarray, kappa: float) -> tuple[float, float]:
        # Weyl for the diagonal shift, Gershgorin for the commutator part
        comm = kappa * float(np.max(self.absH @ np.abs(delta) + np.abs(delta) * self.rowsum)) if kappa else 0.0
        lo = self.lmin + float(dbar.min()) - comm
        hi = self.lmax + float(dbar.max()) + comm
        span = max(hi - lo, 1e-3)
        return 0.5 * (lo + hi), 0.5 * span * 1.01 + 1e-6

    def step(self, Xr: np.ndarray, Xi: np.ndarray, diag, t: float, h: float) -> None:
        d1 = diag(t + _C1 * h)
        d2 = diag(t + _C2 * h)
        dbar = 0.5 * (d1 + d2)
        delta = d1 - d2
        kappa = math.sqrt(3.0) * h / (12.0 * HBAR) if np.any(delta) else 0.0
        center, radius = self._bounds(dbar, delta, kappa)
        c = chebyshev_coefficients(h, center, radius, self.eps)
        self.terms += c.size - 1
        if self.banded:
            ur, ui = self.ur, self.ui
            if kappa:
                ur = np.empty_like(self.ur)
                ui = np.empty_like(self.ui)
                for b in range(self.ur.shape[0]):
                    off = b + 1
                    dd = np.zeros(self.dim)
                    dd[: self.dim - off] = delta[off:] - delta[:-off]
                    # A_ij = H_ij (1 - i kappa (delta_j - delta_i))
                    ur[b] = self.ur[b] + kappa * self.ui[b] * dd
                    ui[b] = self.ui[b] - kappa * self.ur[b] * dd
            self._apply(Xr, Xi, self.d + dbar, ur, ui, center, 1.0 / radius,
                        np.ascontiguousarray(c.real), np.ascontiguousarray(c.imag))
            return
        A = self.H + np.diag(dbar) - 1j * kappa * self.H * (delta[None, :] - delta[:, None])
        AT = np.ascontiguousarray(((A - center * np.eye(self.dim)) / radius).T)
        X = Xr + 1j * Xi
        T0 = X
        T1 = X @ AT
        acc = c[0] * T0 + c[1] * T1
        for k in range(2, c.size):
            T2 = 2.0 * (T1 @ AT) - T0
            acc += c[k] * T2
            T0, T1 = T1, T2
        Xr[:] = acc.real
        Xi[:] = acc.imag

    def energy(self, Xr: np.ndarray, Xi: np.ndarray) -> float:
        if self.banded:
            return float(_kernels.band_expectation(Xr, Xi, self.d, self.ur, self.ui))
        X = Xr + 1j * Xi
        return float(np.real(np.sum(X.conj() * (X @ self.H.T))))


_C1 = 0.5 - math.sqrt(3) / 6
_C2 = 0.5 + math.sqrt(3) / 6


@dataclass
class FreeSegment:
    """Samples first..last evolve under H_M alone from coefficients C = V^dagger Phi(t_ref)."""

    first: int
    last: int
    t_ref: float
    coeffs: np.ndarray


@dataclass
class Trajectory:
    times: np.ndarray
    initial_orbitals: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matter_energy: np.ndarray  # Tr[H_M rho(t)] per sample
    driven_first: int = 0
    driven_last: int = -1
    driven_densities: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    segments: list[FreeSegment] = field(default_factory=list)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    final_orbitals: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def n_samples(self) -> int:
        return self.times.size

    def _segment_of(self, i: int) -> FreeSegment | None:
        for s in self.segments:
            if s.first <= i <= s.last:
                return s
        return None

    def _is_driven(self, i: int) -> bool:
        return self.driven_first <= i <= self.driven_last

    def orbitals(self, i: int) -> np.ndarray:
        i = i % self.n_samples
        if i == 0:
            return self.initial_orbitals
        if i in self.snapshots:
            return self.snapshots[i]
        if i == self.n_samples - 1 and self.final_orbitals is not None:
            return self.final_orbitals
        seg = None if self._is_driven(i) else self._segment_of(i)
        if seg is None:
            raise KeyError(f"orbitals at sample {i} were not stored (use store='all')")
        tau = self.times[i] - seg.t_ref
        ph = np.exp(-1j * self.eigenvalues * tau / HBAR)
        return self.eigenvectors @ (ph[:, None] * seg.coeffs)

    def densities(self, i: int) -> np.ndarray:
        """Site occupations n_i(t) in the modified basis."""
        i = i % self.n_samples
        if self._is_driven(i):
            return self.driven_densities[i - self.driven_first]
        Phi = self.orbitals(i)
        return np.sum(np.abs(Phi) ** 2, axis=1)

    def density_matrix(self, i: int) -> np.ndarray:
        return density_matrix(self.orbitals(i))

    def expectation_diag(self, w: np.ndarray) -> np.ndarray:
        """sum_i w_i n_i(t) for every sample."""
        w = np.asarray(w, float)
        out = np.empty(self.n_samples)
        if self.driven_last >= self.driven_first:
            out[self.driven_first:self.driven_last + 1] = self.driven_densities @ w
        V = self.eigenvectors
        for seg in self.segments:
            C = seg.coeffs
            Wt = V.conj().T @ (w[:, None] * V)
            Rt = C @ C.conj().T
            M = np.ascontiguousarray(Rt * Wt.conj())
            n = seg.last - seg.first + 1
            t_off = self.times[seg.first] - seg.t_ref
            if abs(t_off) > 1e-12:
                ph = np.exp(-1j * self.eigenvalues * t_off / HBAR)
                M = np.ascontiguousarray(M * np.outer(ph, ph.conj()))
            buf = np.empty(n)
            _kernels.oscillating_sum(M, self.eigenvalues, n, self.dt / HBAR, buf)
            out[seg.first:seg.last + 1] = buf
        return out

    def norm_drift(self) -> float:
        return float(self.stats.get("max_norm_drift", 0.0))


def _sample_grid(t_span, dt_out):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not dt_out > 0 or not t1 > t0:
        raise ValueError("need t_end > t_start and dt_out > 0")
    n = int(round((t1 - t0) / dt_out))
    if n < 1 or abs(n * dt_out - (t1 - t0)) > 1e-9 * max(1.0, t1 - t0):
        raise ValueError(f"t_span length {t1 - t0} is not a multiple of dt_out={dt_out}")
    return t0 + dt_out * np.arange(n + 1)


def propagate(ensemble: OrbitalEnsemble, H_M: np.ndarray, interaction, t_span=(0.0, 400.0), dt_out: float = 0.1,
              rtol: float = 1e-8, atol: float = 1e-10, store: str = "final", support_tol: float = 1e-14,
              max_substeps: int = 100000) -> Trajectory:
    """Propagate the occupied orbitals under H_M + H_LM(t) and sample every dt_out.

    store: 'final' keeps the last orbitals, 'all' also every driven sample.
    """
    if store not in ("final", "all", "none"):
        raise ValueError(f"unknown store policy {store!r}")
    times = _sample_grid(t_span, dt_out)
    nS = times.size
    lam, V = ensemble.eigenvalues, ensemble.eigenvectors
    gen = _Generator(H_M, lam)
    tol = atol + rtol
    Phi0 = ensemble.orbitals

    if interaction is None:
        on, off = math.inf, -math.inf
    else:
        on, off = interaction.support(support_tol)
    t0 = times[0]
    on, off = max(on, t0), min(off, times[-1])
    driven = off > on
    n_on = n_off = 0
    if driven:
        n_on = min(max(int(math.floor((on - t0) / dt_out + 1e-9)), 0), nS - 1)
        n_off = min(max(int(math.ceil((off - t0) / dt_out - 1e-9)), 0), nS - 1)
        driven = n_off > n_on

    matter = np.empty(nS)
    traj = Trajectory(times, Phi0, lam, V, matter)
    stats = {"macro_steps": 0, "rejections": 0, "max_substeps": 0, "max_norm_drift": 0.0, "driven_window": None}

    def free_segment(first, last, Phi):
        C = V.conj().T @ Phi
        seg = FreeSegment(first, last, float(times[first]), C)
        traj.segments.append(seg)
        occ = np.sum(np.abs(C) ** 2, axis=1)
        matter[first:last + 1] = float(occ @ lam)
        tau = times[last] - times[first]
        return V @ (np.exp(-1j * lam * tau / HBAR)[:, None] * C)

    Phi = Phi0
    if not driven:
        Phi = free_segment(0, nS - 1, Phi)
        traj.final_orbitals = Phi if store != "none" else None
        traj.stats = stats
        return traj

    if n_on > 0:
        Phi = free_segment(0, n_on, Phi)
    diag = interaction.diagonal
    Xr = np.ascontiguousarray(Phi.T.real)
    Xi = np.ascontiguousarray(Phi.T.imag)
    nd = n_off - n_on + 1
    dens = np.empty((nd, Xr.shape[1]))
    dens[0] = np.sum(Xr**2 + Xi**2, axis=0)
    matter[n_on] = gen.energy(Xr, Xi)
    k = 1
    for s in range(n_on, n_off):
        t = times[s]
        while True:
            if k > max_substeps:
                raise StepSizeUnderflow(f"step size underflow at t = {t:.6f} fs (more than {max_substeps} substeps per sample)")
            h = dt_out / k
            Cr, Ci = Xr.copy(), Xi.copy()
            for j in range(k):
                gen.step(Cr, Ci, diag, t + j * h, h)
            Fr, Fi = Xr.copy(), Xi.copy()
            for j in range(2 * k):
                gen.step(Fr, Fi, diag, t + j * 0.5 * h, 0.5 * h)
            Dr, Di = Fr - Cr, Fi - Ci
            err = math.sqrt(float(np.max(np.sum(Dr**2 + Di**2, axis=1)))) / 15.0
            if not np.isfinite(err):
                raise PropagationError(f"non-finite state at t = {t:.6f} fs")
            if err <= tol:
                break
            stats["rejections"] += 1
            k = max(k + 1, int(math.ceil(k * (err / tol) ** 0.25 * 1.1)))
        Xr = Fr + Dr / 15.0
        Xi = Fi + Di / 15.0
        stats["macro_steps"] += 1
        stats["max_substeps"] = max(stats["max_substeps"], k)
        k = min(k, max(1, int(math.ceil(k * (err / (0.3 * tol)) ** 0.25))))
        nrm = np.sum(Xr**2 + Xi**2, axis=1)
        drift = float(np.max(np.abs(nrm - 1.0)))
        stats["max_norm_drift"] = max(stats["max_norm_drift"], drift)
        if drift > 100 * tol:
            raise NormDriftError(f"norm drift {drift:.3g} exceeds 100x tolerance at t = {times[s + 1]:.6f} fs")
        dens[s + 1 - n_on] = np.sum(Xr**2 + Xi**2, axis=0)
        matter[s + 1] = gen.energy(Xr, Xi)
        if store == "all":
            traj.snapshots[s + 1] = (Xr + 1j * Xi).T.copy()
    traj.driven_first, traj.driven_last = n_on, n_off
    traj.driven_densities = dens
    Phi = (Xr + 1j * Xi).T.copy()
    if n_off < nS - 1:
        Phi = free_segment(n_off, nS - 1, Phi)
    # the driven block owns its end sample
    matter[n_off] = gen.energy(Xr, Xi)
    traj.final_orbitals = Phi if store != "none" else None
    stats["chebyshev_terms"] = gen.terms
    stats["driven_window"] = (float(times[n_on]), float(times[n_off]))
    traj.stats = stats
    return traj
