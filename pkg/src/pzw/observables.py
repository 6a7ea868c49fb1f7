"""Energy, polarization, populations, fidelity and harmonic spectra."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, float)
        v = np.asarray(self.values)
        if t.shape[0] != v.shape[0]:
            raise ValueError("times and values differ in length")
        if t.size > 2:
            d = np.diff(t)
            if np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, abs(d[0])):
                raise ValueError("time grid is not uniform")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class Spectrum:
    omega: np.ndarray  # rad/fs
    harmonic: np.ndarray  # omega / omega0
    power: np.ndarray

    def power_near(self, harmonic: float, half_width: float = 0.1) -> float:
        """Peak power within harmonic +- half_width."""
        sel = np.abs(self.harmonic - harmonic) <= half_width
        return float(self.power[sel].max())


def interaction_energy(traj: Trajectory, interaction) -> np.ndarray:
    """sum_i h_i(t) n_i(t) minus the charge-reference c-number, per sample.

    Outside the driven window the coupling is below the propagation support
    tolerance and contributes nothing.
    """
    out = np.zeros(traj.n_samples)
    if interaction is None:
        return out
    for i in range(traj.driven_first, traj.driven_last + 1):
        t = traj.times[i]
        h = interaction.diagonal(t)
        out[i] = h @ traj.densities(i) - interaction.reference_energy(t)
    return out


def energy(traj: Trajectory, H_M=None, interaction=None) -> TimeSeries:
    """<H(t)> = Tr[(H_M + H_LM(t)) rho(t)] (eV)."""
    return TimeSeries(traj.times, traj.matter_energy + interaction_energy(traj, interaction))


def polarization(traj: Trajectory, x_diag) -> TimeSeries:
    """Induced Tr[x rho(t)] - Tr[x rho(0)] for a position operator diagonal in the basis (e A)."""
    x = np.asarray(x_diag)
    if x.ndim == 2:
        x = np.real(np.diagonal(x))
    p = traj.expectation_diag(x)
    return TimeSeries(traj.times, p - p[0])


def populations(traj: Trajectory, eigenvectors=None, indices=(0, -1)) -> np.ndarray:
    """Occupations of the H_M eigenstates, one row per requested sample."""
    V = traj.eigenvectors if eigenvectors is None else eigenvectors
    rows = []
    for i in indices:
        Phi = traj.orbitals(i)
        rows.append(np.sum(np.abs(V.conj().T @ Phi) ** 2, axis=1))
    return np.array(rows)


def absorbed_energy(E: TimeSeries, t0_pre: float, tf_post: float, pulse_end: float | None = None) -> float:
    """<H>(tf_post) - <H>(t0_pre)."""
    if pulse_end is not None and tf_post < pulse_end:
        warnings.warn(f"tf_post={tf_post} fs lies inside the pulse window (ends {pulse_end} fs)", stacklevel=2)
    i0 = int(np.argmin(np.abs(E.times - t0_pre)))
    i1 = int(np.argmin(np.abs(E.times - tf_post)))
    return float(E.values[i1] - E.values[i0])


class FidelityError(ValueError):
    pass


def fidelity(f: TimeSeries, g: TimeSeries, T: float | None = None) -> float:
    """|int_0^T f* g dt| / (||f|| ||g||) with trapezoidal weights."""
    if f.times.shape != g.times.shape or np.max(np.abs(f.times - g.times)) > 1e-9:
        raise ValueError("series must share a time grid")
    t = f.times
    sel = slice(None) if T is None else t <= t[0] + T + 1e-9 * max(1.0, T)
    t, a, b = t[sel], f.values[sel], g.values[sel]
    if T is not None and t[-1] < t[0] + T - 1e-6:
        raise ValueError(f"series ends at {t[-1]} fs, before T={T} fs")
    w = np.full(t.size, t[1] - t[0])
    w[0] = w[-1] = 0.5 * (t[1] - t[0])
    ab = np.sum(w * np.conj(a) * b)
    na = np.sqrt(np.sum(w * np.abs(a) ** 2))
    nb = np.sqrt(np.sum(w * np.abs(b) ** 2))
    if na == 0 or nb == 0:
        raise FidelityError("fidelity undefined for a zero-norm series")
    return float(abs(ab) / (na * nb))


def power_spectrum(p: TimeSeries, omega0: float, window: str = "none", pad_factor: int = 4) -> Spectrum:
    """|omega^2 P(omega)|^2 on omega >= 0, with the axis also in units of omega0."""
    v = np.asarray(p.values, float)
    if window == "hann":
        v = v * np.hanning(v.size)
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    n = int(pad_factor) * v.size
    F = np.fft.rfft(v, n=n) * p.dt
    om = 2 * np.pi * np.fft.rfftfreq(n, d=p.dt)
    return Spectrum(om, om / omega0, np.abs(om**2 * F) ** 2)
