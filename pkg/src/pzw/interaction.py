"""Light-matter coupling operators in the position-diagonal basis.

Every operator here is diagonal in the modified basis, so it is stored as a
recipe ``t -> h(t)`` for the diagonal. The electron charge is -1, so a static
potential gradient couples as h_i = +x_i E.

Charge-neutral subtraction: the many-body coupling sum_i h_i (n_i - rho_ii(0))
differs from the single-particle matrix diag(h) by the c-number
-sum_i h_i rho_ii(0). It does not affect the orbital dynamics and enters only
the energy, through ``reference_energy``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .fields import GaussianBeamField, GridField, QuadratureRule, gauss_legendre, ray_points
from .lattice_basis import ModifiedBasis


@dataclass(frozen=True)
class InteractionOperator:
    kind: str
    basis: ModifiedBasis
    field: object
    diag_fn: Callable[[float], np.ndarray] = field(repr=False, compare=False)
    rule: QuadratureRule | None = None
    expansion_point: tuple[float, float, float] | None = None
    max_order: int = 1
    charge_reference: np.ndarray | None = field(default=None, repr=False, compare=False)

    def diagonal(self, t: float) -> np.ndarray:
        """Diagonal of H_LM(t) in the modified basis (eV)."""
        return self.diag_fn(t)

    def emit(self, t: float) -> np.ndarray:
        """Dense H_LM(t) in the modified basis."""
        return np.diag(self.diagonal(t)).astype(complex)

    def reference_energy(self, t: float) -> float:
        """c-number removed by the charge-neutral form (0 when disabled)."""
        if self.charge_reference is None:
            return 0.0
        return float(self.diagonal(t) @ self.charge_reference)

    def with_charge_reference(self, ref) -> "InteractionOperator":
        return replace(self, charge_reference=None if ref is None else np.asarray(ref, float))

    def support(self, rel_tol: float = 1e-14) -> tuple[float, float]:
        return self.field.support(rel_tol)


def _coupling(basis: ModifiedBasis) -> np.ndarray:
    # component of the site coordinate along the polarization (x)
    return basis.lab_coords[:, 0].copy()


def _ref(charge_reference):
    return None if charge_reference is None else np.asarray(charge_reference, float)


def build_pzw(basis: ModifiedBasis, field, rule: QuadratureRule | None = None, charge_reference=None) -> InteractionOperator:
    """Full multipolar coupling: x_i times the field averaged along the ray to site i."""
    rule = rule or gauss_legendre(12)
    x = _coupling(basis)
    pts = ray_points(basis.lab_coords, rule, basis.geometry.origin_shift)
    drive = field.site_drive(pts, rule.weights)
    return InteractionOperator("pzw", basis, field, lambda t: x * drive(t), rule=rule, charge_reference=_ref(charge_reference))


def build_dipole(basis: ModifiedBasis, field, expansion_point=None, charge_reference=None) -> InteractionOperator:
    """Dipole coupling with the field taken at one point (field frame)."""
    p = np.zeros(3) if expansion_point is None else np.asarray(expansion_point, float)
    x = _coupling(basis)
    drive = field.site_drive(p[None, None, :], np.ones(1))
    return InteractionOperator(
        "dipole", basis, field, lambda t: x * float(drive(t)[0]),
        expansion_point=tuple(p), charge_reference=_ref(charge_reference),
    )


def multipole_coefficient(m: int, spot: float) -> float:
    """Coefficient of the (2m+1)-order Gaussian-beam term about the beam center."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if not spot > 0:
        raise ValueError("spot must be positive")
    return (-1) ** (m + 1) / ((2 * m + 1) * math.factorial(m)) * spot ** (-2.0 * m)


def build_multipole_gaussian(basis: ModifiedBasis, beam: GaussianBeamField, max_m: int, charge_reference=None) -> InteractionOperator:
    """Dipole plus odd orders 3, 5, ..., 2*max_m+1 of a Gaussian beam about its center."""
    if max_m < 0:
        raise ValueError("max_m must be >= 0")
    x = _coupling(basis)
    phys = basis.physical_coords
    r2 = phys[:, 0] ** 2 + phys[:, 1] ** 2
    corr = np.zeros_like(x)
    for m in range(1, max_m + 1):
        corr -= multipole_coefficient(m, beam.spot) * r2**m
    prof = x + phys[:, 0] * corr
    return InteractionOperator(
        f"multipole:{2 * max_m + 1}", basis, beam, lambda t: prof * float(beam.temporal(t)),
        expansion_point=(0.0, 0.0, 0.0), max_order=2 * max_m + 1, charge_reference=_ref(charge_reference),
    )


def central_difference_weights(order: int, accuracy: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Offsets j and weights w with f^(order)(0) ~ sum_j w_j f(j h) / h^order."""
    if order == 0:
        return np.zeros(1, int), np.ones(1)
    half = (order + 1) // 2 - 1 + accuracy // 2
    j = np.arange(-half, half + 1)
    A = np.vander(j.astype(float), increasing=True).T  # A[q, k] = j_k^q
    b = np.zeros(j.size)
    b[order] = math.factorial(order)
    w = np.linalg.solve(A, b)
    # impose the exact (anti)symmetry so constants and even parts cancel
    w = 0.5 * (w + (-1) ** order * w[::-1])
    if order % 2 == 0:
        w[half] = -(np.sum(w[:half]) + np.sum(w[half + 1:]))
    return j, w


def multipole_profiles(basis: ModifiedBasis, field, expansion_point, max_order: int, stencil_h=None):
    """Per-order site profiles and the stencil that feeds them.

    Returns (points, P) with points the (k, 3) stencil in the field frame and
    P[n-1] the (dim, k) matrix mapping stencil values to the order-n term.
    ``stencil_h`` fixes one step for every order; by default each derivative
    order gets the field's own step.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    p = np.zeros(3) if expansion_point is None else np.asarray(expansion_point, float)
    e = basis.geometry.direction
    x = _coupling(basis)
    phys = basis.physical_coords
    sigma = (phys - p) @ e  # chain coordinate relative to the expansion point
    dx = phys[:, 0] - p[0]
    pts = [p]
    cols = []  # (n, column indices, weights / h^d)
    for n in range(2, max_order + 1):
        d = n - 1
        h = stencil_h if stencil_h is not None else field.default_stencil(d)
        if h is None:
            h = max(float(np.max(np.abs(sigma))), 1.0) / 4
        j, w = central_difference_weights(d)
        start = len(pts)
        pts.extend(p + jj * float(h) * e for jj in j)
        cols.append((n, np.arange(start, start + j.size), w / float(h) ** d))
    pts = np.array(pts)
    if isinstance(field, GridField):
        lo, hi = field.x_range()
        if pts[:, 0].min() < lo - 1e-9 or pts[:, 0].max() > hi + 1e-9:
            raise ValueError(
                f"finite-difference stencil [{pts[:, 0].min():.6g}, {pts[:, 0].max():.6g}] A leaves the grid [{lo:.6g}, {hi:.6g}]"
            )
    P = np.zeros((max_order, x.size, len(pts)))
    P[0][:, 0] = x
    for n, idx, w in cols:
        P[n - 1][:, idx] = np.outer(dx * sigma ** (n - 1) / math.factorial(n), w)
    return pts, P


def build_multipole_numeric(basis: ModifiedBasis, field, expansion_point=None, max_order: int = 3, stencil_h=None,
                            charge_reference=None) -> InteractionOperator:
    """Taylor expansion of the ray-averaged field about an arbitrary point up to ``max_order``."""
    pts, P = multipole_profiles(basis, field, expansion_point, max_order, stencil_h)
    M = P.sum(axis=0)
    drive = field.site_drive(pts[:, None, :], np.ones(1))
    p = np.zeros(3) if expansion_point is None else np.asarray(expansion_point, float)
    return InteractionOperator(
        f"multipole:{max_order}", basis, field, lambda t: M @ drive(t),
        expansion_point=tuple(p), max_order=max_order, charge_reference=_ref(charge_reference),
    )


def multipole_term(basis: ModifiedBasis, field, expansion_point, order: int, t: float, stencil_h=None) -> np.ndarray:
    """Diagonal of the single order-n term at time t."""
    pts, P = multipole_profiles(basis, field, expansion_point, max(order, 1), stencil_h)
    vals = field.site_drive(pts[:, None, :], np.ones(1))(t)
    return P[order - 1] @ vals


def build_interaction(kind: str, basis: ModifiedBasis, field, *, n_q: int = 12, expansion_point=None,
                      stencil_h=None, charge_reference=None) -> InteractionOperator:
    """Dispatch on 'pzw', 'dipole', or 'multipole:N'."""
    if kind == "pzw":
        return build_pzw(basis, field, gauss_legendre(n_q), charge_reference)
    if kind == "dipole":
        return build_dipole(basis, field, expansion_point, charge_reference)
    if kind.startswith("multipole:"):
        order = int(kind.split(":", 1)[1])
        if order < 1:
            raise ValueError("multipole order must be >= 1")
        at_center = expansion_point is None or not np.any(np.asarray(expansion_point, float))
        if isinstance(field, GaussianBeamField) and math.isfinite(field.spot) and at_center and order % 2 == 1:
            return build_multipole_gaussian(basis, field, (order - 1) // 2, charge_reference)
        return build_multipole_numeric(basis, field, expansion_point, order, stencil_h, charge_reference)
    raise ValueError(f"unknown interaction kind {kind!r}")
