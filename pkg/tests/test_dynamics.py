import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import curve_fit

from pzw.constants import HBAR
from pzw.dynamics import (
    NormDriftError,
    StepSizeUnderflow,
    chebyshev_coefficients,
    density_matrix,
    ground_state,
    propagate,
)
from pzw.fields import GaussianBeamField
from pzw.interaction import build_dipole, build_pzw
from pzw.lattice_basis import ChainGeometry, build_chain
from pzw.observables import energy
from pzw.wannier_io import HoppingEntry, WannierModel, builtin_tpa_model, ssh_model

OMEGA = 1.68 / HBAR


class DiagonalDrive:
    """h_i(t) = x_i E0 f(t) cos(w t); enough of the interaction protocol for propagate."""

    def __init__(self, x, e0, w, window=None):
        self.x, self.e0, self.w, self.window = np.asarray(x, float), e0, w, window

    def diagonal(self, t):
        env = 1.0
        if self.window is not None:
            env = math.exp(-(((t - self.window[0]) / self.window[1]) ** 2))
        return self.x * (self.e0 * env * math.cos(self.w * t))

    def support(self, tol):
        if self.window is None:
            return -math.inf, math.inf
        t0, sig = self.window
        r = sig * math.sqrt(math.log(1.0 / tol))
        return t0 - r, t0 + r

    def reference_energy(self, t):
        return 0.0


@pytest.fixture(scope="module")
def small():
    ch = build_chain(builtin_tpa_model(), ChainGeometry(8, gamma=10, tilt_theta=1.2))
    return ch, ground_state(ch.hamiltonian)


def test_dimer_ground_state():
    H = build_chain(ssh_model(-1.0, 0.0), ChainGeometry(2)).hamiltonian
    ens = ground_state(H)
    assert ens.n_electrons == 2
    assert np.allclose(ens.energies, [-1.0, -1.0], atol=1e-14)
    assert ens.fermi_energy == pytest.approx(0.0, abs=1e-14)


def test_builtin_400_ground_state():
    ens = ground_state(build_chain(builtin_tpa_model(), ChainGeometry(400)).hamiltonian)
    assert ens.orbitals.shape == (800, 400)
    lam = ens.eigenvalues
    assert abs(lam[400] - lam[399] - 1.68) < 0.02
    assert abs(np.trace(density_matrix(ens.orbitals)).real - 400) < 1e-10
    G = ens.orbitals.conj().T @ ens.orbitals
    assert np.max(np.abs(G - np.eye(400))) < 1e-12


def test_ground_state_errors():
    H = np.diag([-1.0, 0.0, 1.0])
    with pytest.raises(ValueError, match="odd"):
        ground_state(H)
    assert ground_state(H, n_electrons=1).n_electrons == 1
    with pytest.raises(ValueError, match="straddle"):
        ground_state(np.diag([-1.0, 0.0, 0.0, 1.0]))


def test_initial_density_is_spectral_projector(small):
    ch, ens = small
    lam, V = np.linalg.eigh(ch.hamiltonian)
    P = V[:, : ch.dim // 2] @ V[:, : ch.dim // 2].T
    assert np.max(np.abs(density_matrix(ens.orbitals) - P)) < 1e-12


def test_chebyshev_scalar_exponential():
    for lam in (-3.0, 0.2, 4.9):
        c = chebyshev_coefficients(0.7, 1.0, 5.0)
        x = (lam - 1.0) / 5.0
        T = np.polynomial.chebyshev.chebval(x, c)
        assert abs(T - np.exp(-1j * 0.7 * lam / HBAR)) < 1e-13


def test_zero_field_stationary(small):
    ch, ens = small
    tr = propagate(ens, ch.hamiltonian, None, (0.0, 400.0), 0.1)
    E = energy(tr).values
    assert np.max(np.abs(E - E[0])) < 1e-10
    assert E[0] == pytest.approx(ens.energies.sum(), abs=1e-12)
    V = ens.eigenvectors
    occ = np.sum(np.abs(V.conj().T @ tr.orbitals(-1)) ** 2, axis=1)
    assert np.allclose(occ, [1.0] * ens.n_electrons + [0.0] * ens.n_electrons, atol=1e-12)


def test_rabi_oscillation_two_level():
    # HOMO/LUMO pair of a 2-cell chain, written in the basis where its dipole is diagonal
    ch = build_chain(builtin_tpa_model(), ChainGeometry(2))
    lam, V = np.linalg.eigh(ch.hamiltonian)
    P = V[:, 1:3]
    X2 = P.conj().T @ np.diag(ch.basis.lab_coords[:, 0]) @ P
    xi, U = np.linalg.eigh(X2)
    H2 = U.conj().T @ np.diag(lam[1:3]) @ U
    mu = abs(X2[0, 1])
    w = (lam[2] - lam[1]) / HBAR
    rabi = 0.01 * w
    e0 = rabi * HBAR / mu
    ens = ground_state(H2, n_electrons=1)
    tr = propagate(ens, H2, DiagonalDrive(xi, e0, w), (0.0, 700.0), 0.5, store="all")
    upper = U.conj().T @ np.array([0.0, 1.0])
    pop = np.array([abs(upper.conj() @ tr.orbitals(i)[:, 0]) ** 2 for i in range(tr.n_samples)])
    (om,), _ = curve_fit(lambda t, o: np.sin(o * t / 2) ** 2, tr.times, pop, p0=[rabi])
    assert abs(om / rabi - 1) < 0.01


def test_post_pulse_energy_plateau(small):
    ch, ens = small
    f = GaussianBeamField(0.01, OMEGA, 10.0, 40.0, spot=200.0)
    op = build_pzw(ch.basis, f)
    tr = propagate(ens, ch.hamiltonian, op, (0.0, 200.0), 0.1)
    E = energy(tr, ch.hamiltonian, op)
    late = E.values[E.times > 40.0 + 5 * 10.0]
    assert np.max(np.abs(late - late[0])) < 1e-8
    assert late[0] - E.values[0] > 1e-6


def test_density_invariants_every_sample(small):
    ch, ens = small
    f = GaussianBeamField(0.02, OMEGA, 8.0, 30.0, spot=150.0)
    tr = propagate(ens, ch.hamiltonian, build_pzw(ch.basis, f), (0.0, 80.0), 0.1, store="all")
    n = ens.n_electrons
    for i in range(tr.n_samples):
        Phi = tr.orbitals(i)
        assert np.max(np.abs(Phi.conj().T @ Phi - np.eye(n))) < 1e-8
        rho = tr.density_matrix(i)
        assert abs(np.trace(rho).real - n) < 1e-9
        assert np.max(np.abs(rho @ rho - rho)) < 1e-8
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-14


def test_liouville_oracle_four_dim():
    ch = build_chain(builtin_tpa_model(), ChainGeometry(2, gamma=10))
    H = ch.hamiltonian
    f = GaussianBeamField(0.5, OMEGA, 10.0, 40.0, spot=30.0)
    op = build_pzw(ch.basis, f)
    ens = ground_state(H)
    tr = propagate(ens, H, op, (0.0, 100.0), 0.1, store="all")

    def rhs(t, y):
        r = y.reshape(4, 4)
        Ht = H + np.diag(op.diagonal(t))
        return (-1j / HBAR * (Ht @ r - r @ Ht)).ravel()

    rho0 = density_matrix(ens.orbitals).astype(complex)
    sol = solve_ivp(rhs, (0.0, 100.0), rho0.ravel(), method="DOP853", rtol=1e-12, atol=1e-14, t_eval=tr.times)
    err = max(np.max(np.abs(tr.density_matrix(i) - sol.y[:, i].reshape(4, 4))) for i in range(tr.n_samples))
    assert err < 1e-8
    assert np.max(np.abs(sol.y[:, -1] - rho0.ravel())) > 1e-4


def test_matches_reference_integrator():
    ch = build_chain(builtin_tpa_model(), ChainGeometry(20, gamma=10))
    H = ch.hamiltonian
    f = GaussianBeamField(0.001, OMEGA, 10.0, 40.0, spot=300.0)
    op = build_pzw(ch.basis, f)
    ens = ground_state(H)
    tr = propagate(ens, H, op, (0.0, 100.0), 0.1)

    def rhs(t, y):
        P = y.reshape(H.shape[0], -1)
        return (-1j / HBAR * (H @ P + op.diagonal(t)[:, None] * P)).ravel()

    sol = solve_ivp(rhs, (0.0, 100.0), ens.orbitals.ravel(), method="DOP853", rtol=1e-12, atol=1e-13,
                    t_eval=tr.times[::50])
    x = ch.basis.lab_coords[:, 0]
    pol = tr.expectation_diag(x)[::50]
    ref = [np.sum(np.abs(sol.y[:, i].reshape(H.shape[0], -1)) ** 2, axis=1) @ x for i in range(sol.y.shape[1])]
    assert np.max(np.abs(pol - ref)) < 1e-7
    assert np.max(np.abs(tr.orbitals(-1) - sol.y[:, -1].reshape(H.shape[0], -1))) < 1e-7


def test_free_segments_match_driven_path(small):
    # one run driven everywhere, one with exact free evolution outside the pulse
    ch, ens = small
    f = GaussianBeamField(0.01, OMEGA, 5.0, 20.0, spot=200.0)
    op = build_dipole(ch.basis, f)
    x = ch.basis.lab_coords[:, 0]
    fast = propagate(ens, ch.hamiltonian, op, (0.0, 60.0), 0.1)
    slow = propagate(ens, ch.hamiltonian, op, (0.0, 60.0), 0.1, support_tol=1e-300)
    assert fast.stats["driven_window"][1] < slow.stats["driven_window"][1]
    assert np.max(np.abs(fast.expectation_diag(x) - slow.expectation_diag(x))) < 1e-8


def test_step_size_underflow(small):
    ch, ens = small
    f = GaussianBeamField(0.05, OMEGA, 5.0, 20.0, spot=200.0)
    with pytest.raises(StepSizeUnderflow, match="t = "):
        propagate(ens, ch.hamiltonian, build_pzw(ch.basis, f), (0.0, 40.0), 5.0, max_substeps=1)


def test_norm_drift_error_type():
    assert issubclass(NormDriftError, RuntimeError)


def test_bad_time_grid(small):
    ch, ens = small
    with pytest.raises(ValueError):
        propagate(ens, ch.hamiltonian, None, (0.0, 1.05), 0.1)
    with pytest.raises(ValueError):
        propagate(ens, ch.hamiltonian, None, (0.0, 1.0), 0.1, store="some")


@settings(max_examples=8, deadline=None)
@given(st.floats(0.001, 0.05), st.floats(0.0, math.pi), st.integers(2, 6))
def test_unitarity_property(e0, theta, n):
    ch = build_chain(builtin_tpa_model(), ChainGeometry(n, gamma=10, tilt_theta=theta))
    ens = ground_state(ch.hamiltonian)
    f = GaussianBeamField(e0, OMEGA, 5.0, 15.0, spot=100.0)
    tr = propagate(ens, ch.hamiltonian, build_pzw(ch.basis, f), (0.0, 30.0), 0.1)
    Phi = tr.orbitals(-1)
    assert np.max(np.abs(Phi.conj().T @ Phi - np.eye(n))) < 1e-8
    assert tr.norm_drift() < 1e-8


def _nnn_model(tp):
    # next-nearest-neighbour hopping keeps inversion but breaks the sublattice symmetry
    base = builtin_tpa_model()
    extra = tuple(HoppingEntry((r, 0, 0), m, m, complex(tp)) for r in (1, -1) for m in (0, 1))
    return WannierModel(2, base.lattice_constant, base.hoppings + extra, base.positions)


@pytest.mark.parametrize("tp, odd", [(0.0, True), (-0.3, False)])
def test_bipartite_response_is_odd_in_field(tp, odd):
    # with sublattice symmetry n_i[E](t) + n_i[-E](t) = 1 exactly at half filling
    ch = build_chain(_nnn_model(tp), ChainGeometry(10, gamma=10, tilt_theta=0.5))
    ens = ground_state(ch.hamiltonian)
    f = GaussianBeamField(0.05, OMEGA, 8.0, 30.0, spot=150.0)
    runs = [propagate(ens, ch.hamiltonian, build_pzw(ch.basis, g), (0.0, 70.0), 0.1) for g in (f, f.scaled(-1.0))]
    n0 = runs[0].densities(0)
    dev = max(np.max(np.abs(runs[0].densities(i) + runs[1].densities(i) - 2 * n0)) for i in range(0, 701, 10))
    if odd:
        assert np.allclose(n0, 0.5, atol=1e-12)
        assert dev < 1e-9
    else:
        assert dev > 1e-5
