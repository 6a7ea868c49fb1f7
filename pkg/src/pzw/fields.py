"""Driving fields, the ray integral of the field, and Gauss-Legendre rules.

All fields are linearly polarized along x; evaluators return the x component.
Every field can bind a set of sample points once and hand back a fast
``t -> values`` callable (``site_drive``), which is what the interaction
operators use inside the propagator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import C_LIGHT

Drive = Callable[[float], np.ndarray]


class FieldRangeError(ValueError):
    """A query fell outside a gridded field's window."""


def _envelope(t, t0, sigma):
    if math.isinf(sigma):
        return np.ones_like(np.asarray(t, float))
    return np.exp(-((np.asarray(t, float) - t0) / sigma) ** 2)


def _fd_step(length: float, deriv_order: int) -> float:
    # balances O(h^4) truncation against eps / h^d rounding for a
    # fourth-order central difference on a field varying over ``length``
    return length * 2.0 * np.finfo(float).eps ** (1.0 / (deriv_order + 4))


def _gauss_support(t0, sigma, rel_tol):
    if math.isinf(sigma):
        return -math.inf, math.inf
    half = sigma * math.sqrt(math.log(1.0 / rel_tol))
    return t0 - half, t0 + half


@dataclass(frozen=True)
class GaussianBeamField:
    E0: float
    omega: float
    sigma: float
    t0: float
    spot: float = math.inf

    def __post_init__(self):
        if not self.spot > 0 or not self.sigma > 0:
            raise ValueError("spot and sigma must be positive")

    def temporal(self, t):
        """E(t) at the beam center."""
        return self.E0 * _envelope(t, self.t0, self.sigma) * np.cos(self.omega * (np.asarray(t, float) - self.t0))

    def spatial(self, points) -> np.ndarray:
        p = np.asarray(points, float)
        if math.isinf(self.spot):
            return np.ones(p.shape[:-1])
        return np.exp(-(p[..., 0] ** 2 + p[..., 1] ** 2) / self.spot**2)

    def evaluate(self, points, t):
        return self.spatial(points) * self.temporal(t)

    def site_drive(self, points, weights) -> Drive:
        prof = self.spatial(points) @ np.asarray(weights, float)
        return lambda t: prof * self.temporal(t)

    def support(self, rel_tol: float = 1e-14):
        return _gauss_support(self.t0, self.sigma, rel_tol)

    def scaled(self, factor: float):
        return replace(self, E0=self.E0 * factor)

    def default_stencil(self, deriv_order: int = 1) -> float | None:
        if not math.isfinite(self.spot):
            return None  # spatially uniform: any step works
        return self.spot / 200


@dataclass(frozen=True)
class PlaneWaveField:
    """Pulse propagating along +y, polarized along x."""

    E0: float
    omega: float
    sigma: float
    t0: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def k(self) -> float:
        return self.omega / C_LIGHT

    @property
    def wavelength(self) -> float:
        return 2 * math.pi / self.k

    def evaluate(self, points, t):
        y = np.asarray(points, float)[..., 1]
        tau = np.asarray(t, float) - self.t0
        return self.E0 * _envelope(t, self.t0, self.sigma) * np.cos(self.k * y - self.omega * tau)

    def site_drive(self, points, weights) -> Drive:
        y = np.asarray(points, float)[..., 1]
        w = np.asarray(weights, float)
        c = np.cos(self.k * y) @ w
        s = np.sin(self.k * y) @ w

        def drive(t):
            tau = t - self.t0
            amp = self.E0 * float(_envelope(t, self.t0, self.sigma))
            return amp * (c * math.cos(self.omega * tau) + s * math.sin(self.omega * tau))

        return drive

    def support(self, rel_tol: float = 1e-14):
        return _gauss_support(self.t0, self.sigma, rel_tol)

    def scaled(self, factor: float):
        return replace(self, E0=self.E0 * factor)

    def default_stencil(self, deriv_order: int = 1) -> float | None:
        return _fd_step(1.0 / self.k, deriv_order)


@dataclass(frozen=True)
class FieldGrid:
    x0: float
    dx: float
    nx: int
    t_start: float
    dt: float
    nt: int
    frames: np.ndarray  # (nt, nx) V/Angstrom
    polarization: str = "x"

    def __post_init__(self):
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("dx and dt must be positive")
        if self.nx < 4 or self.nt < 4:
            raise ValueError(f"grid needs nx >= 4 and nt >= 4 for cubic splines (got nx={self.nx}, nt={self.nt})")
        f = np.asarray(self.frames, float)
        if f.shape != (self.nt, self.nx):
            raise ValueError(f"frames shape {f.shape} does not match (nt, nx) = ({self.nt}, {self.nx})")
        object.__setattr__(self, "frames", f)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.nt)


class FieldFormatError(ValueError):
    pass


def parse_field_grid(text) -> FieldGrid:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode()
    lines = [ln for ln in text.splitlines()]
    if not lines or lines[0].strip() != "# pzw-field v1":
        raise FieldFormatError("magic line mismatch: expected '# pzw-field v1'")
    if len(lines) < 4:
        raise FieldFormatError("header truncated: expected 4 header lines")
    pol = lines[1].split(":", 1)
    if pol[0].strip() != "pol" or len(pol) != 2:
        raise FieldFormatError("line 2: expected 'pol: x'")
    polarization = pol[1].strip()
    if polarization != "x":
        raise FieldFormatError(f"line 2: only x polarization supported, found {polarization!r}")

    def header(idx, key):
        parts = lines[idx].split(":", 1)
        if parts[0].strip() != key or len(parts) != 2:
            raise FieldFormatError(f"line {idx + 1}: expected '{key}: ...'")
        toks = parts[1].split()
        if len(toks) != 3:
            raise FieldFormatError(f"line {idx + 1}: expected 3 values, found {len(toks)}")
        try:
            return float(toks[0]), float(toks[1]), int(toks[2])
        except ValueError as e:
            raise FieldFormatError(f"line {idx + 1}: {e}") from None

    x0, dx, nx = header(2, "grid")
    t0, dt, nt = header(3, "time")
    rows = [ln for ln in lines[4:] if ln.strip()]
    if len(rows) != nt:
        raise FieldFormatError(f"expected {nt} frames, found {len(rows)}")
    frames = np.empty((nt, nx))
    for i, ln in enumerate(rows):
        toks = ln.split()
        if len(toks) != nx:
            raise FieldFormatError(f"frame {i}: expected {nx} samples, found {len(toks)}")
        try:
            frames[i] = [float(v) for v in toks]
        except ValueError as e:
            raise FieldFormatError(f"frame {i}: {e}") from None
    try:
        return FieldGrid(x0, dx, nx, t0, dt, nt, frames, polarization)
    except ValueError as e:
        raise FieldFormatError(str(e)) from None


def write_field_grid(grid: FieldGrid) -> bytes:
    out = [
        "# pzw-field v1",
        f"pol: {grid.polarization}",
        f"grid: {grid.x0!r} {grid.dx!r} {grid.nx}",
        f"time: {grid.t_start!r} {grid.dt!r} {grid.nt}",
    ]
    out += [" ".join(repr(float(v)) for v in row) for row in grid.frames]
    return ("\n".join(out) + "\n").encode()


class GridField:
    """Natural cubic spline in x per frame, then across frames in t."""

    def __init__(self, grid: FieldGrid, factor: float = 1.0):
        self.grid = grid
        self.factor = factor
        self._xspline = CubicSpline(grid.x, grid.frames, axis=1, bc_type="natural")
        self._xmin, self._xmax = grid.x[0], grid.x[-1]
        self._tmin, self._tmax = grid.t[0], grid.t[-1]

    def _check_x(self, x):
        x = np.asarray(x, float)
        eps = 1e-9 * max(1.0, abs(self._xmax), abs(self._xmin))
        if np.any(x < self._xmin - eps) or np.any(x > self._xmax + eps):
            bad = x[(x < self._xmin - eps) | (x > self._xmax + eps)].ravel()[0]
            raise FieldRangeError(f"x={bad:.6g} A outside grid [{self._xmin:.6g}, {self._xmax:.6g}]")
        return np.clip(x, self._xmin, self._xmax)

    def _check_t(self, t):
        eps = 1e-9 * max(1.0, abs(self._tmax))
        if t < self._tmin - eps or t > self._tmax + eps:
            raise FieldRangeError(f"t={t:.6g} fs outside grid [{self._tmin:.6g}, {self._tmax:.6g}]")
        return min(max(t, self._tmin), self._tmax)

    def eval_scalar(self, x: float, t: float) -> float:
        x = self._check_x(x)
        t = self._check_t(float(t))
        col = self._xspline(x)  # (nt,)
        return self.factor * float(CubicSpline(self.grid.t, col, bc_type="natural")(t))

    def evaluate(self, points, t):
        p = np.asarray(points, float)
        x = self._check_x(p[..., 0])
        t = self._check_t(float(t))
        vals = self._xspline(x.ravel())  # (nt, m)
        out = CubicSpline(self.grid.t, vals, axis=0, bc_type="natural")(t)
        return self.factor * out.reshape(x.shape)

    def site_drive(self, points, weights) -> Drive:
        p = np.asarray(points, float)
        x = self._check_x(p[..., 0])  # (m, k)
        vals = self._xspline(x.reshape(-1)).reshape(self.grid.nt, *x.shape)
        reduced = vals @ np.asarray(weights, float)  # (nt, m)
        spl = CubicSpline(self.grid.t, reduced, axis=0, bc_type="natural")
        f = self.factor

        def drive(t):
            return f * spl(self._check_t(float(t)))

        return drive

    def support(self, rel_tol: float = 1e-14):
        amp = np.max(np.abs(self.grid.frames), axis=1)
        peak = amp.max()
        if peak == 0:
            return math.inf, -math.inf
        idx = np.flatnonzero(amp > rel_tol * peak)
        t = self.grid.t
        # one frame of margin on each side: spline lobes reach into neighbours
        lo = t[max(idx[0] - 2, 0)] if idx[0] > 1 else -math.inf
        hi = t[min(idx[-1] + 2, self.grid.nt - 1)] if idx[-1] < self.grid.nt - 2 else math.inf
        return lo, hi

    def scaled(self, factor: float):
        return GridField(self.grid, self.factor * factor)

    def default_stencil(self, deriv_order: int = 1) -> float | None:
        return self.grid.dx

    def x_range(self):
        return self._xmin, self._xmax


def eval_gaussian_beam(field: GaussianBeamField, point, t) -> np.ndarray:
    """Field vector (V/A) at a lab point."""
    return np.array([float(field.evaluate(point, t)), 0.0, 0.0])


def eval_plane_wave(field: PlaneWaveField, point, t) -> np.ndarray:
    return np.array([float(field.evaluate(point, t)), 0.0, 0.0])


def eval_grid(field, x: float, t: float) -> float:
    if isinstance(field, FieldGrid):
        field = GridField(field)
    return field.eval_scalar(x, t)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size


def gauss_legendre(n_q: int) -> QuadratureRule:
    """n_q-point Gauss-Legendre rule on [0, 1]."""
    if not (1 <= int(n_q) <= 64) or int(n_q) != n_q:
        raise ValueError(f"n_q must be an integer in [1, 64], got {n_q}")
    x, w = np.polynomial.legendre.leggauss(int(n_q))
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w)


def ray_points(r_sites, rule: QuadratureRule, origin_shift=(0.0, 0.0, 0.0)) -> np.ndarray:
    """(m, k, 3) field-frame points u_k r_i - shift along each ray."""
    r = np.atleast_2d(np.asarray(r_sites, float))
    return rule.nodes[None, :, None] * r[:, None, :] - np.asarray(origin_shift, float)


def ray_average(field, r_site, t, rule: QuadratureRule, origin_shift=(0.0, 0.0, 0.0)) -> float:
    """sum_k w_k E_x(u_k r_site, t): the field averaged along the ray to a site.

    ``r_site`` is measured from the coordinate origin; the field is sampled in
    its own frame, offset by ``origin_shift``.
    """
    pts = ray_points(r_site, rule, origin_shift)[0]
    return float(np.asarray(field.evaluate(pts, t)) @ rule.weights)
