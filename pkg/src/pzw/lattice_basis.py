"""Finite-chain Hamiltonian, position operator and the position-diagonal basis.

Cell c, orbital m maps to row c*N + m. The chain axis is the first lattice
direction of the model; only x components of the model positions enter the
chain coordinate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .wannier_io import WannierModel


@dataclass(frozen=True)
class ChainGeometry:
    n_cells: int
    gamma: float = 1.0
    tilt_theta: float = math.pi / 2
    origin_shift: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # place the chain's mean coordinate at the lab origin (beam center)
    centered: bool = True

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("n_cells must be >= 2")
        if not self.gamma >= 1:
            raise ValueError("gamma must be >= 1")
        if len(self.origin_shift) != 3 or self.origin_shift[2] != 0:
            raise ValueError("origin_shift must be a 3-vector in the z = 0 plane")

    @property
    def direction(self) -> np.ndarray:
        """Lab-frame unit vector along the chain."""
        return np.array([math.sin(self.tilt_theta), math.cos(self.tilt_theta), 0.0])

    def length(self, a: float) -> float:
        return self.n_cells * self.gamma * a


def charge_scaling_pair(gamma: float) -> tuple[float, float]:
    """(position multiplier, field multiplier) for the gamma trick."""
    if not gamma >= 1:
        raise ValueError("gamma must be >= 1")
    return float(gamma), 1.0 / gamma


def assemble_matter_hamiltonian(model: WannierModel, geom: ChainGeometry) -> np.ndarray:
    """Open-boundary chain Hamiltonian (complex, eV)."""
    model.check_hermitian()
    norb, nc = model.num_orbitals_per_cell, geom.n_cells
    if nc < model.coupling_range:
        warnings.warn(
            f"n_cells={nc} is shorter than the coupling range {model.coupling_range}; couplings truncated",
            stacklevel=2,
        )
    H = np.zeros((nc * norb, nc * norb), complex)
    for R, blk in model.hopping_blocks().items():
        r = R[0]
        for c in range(max(0, -r), min(nc, nc - r)):
            H[c * norb:(c + 1) * norb, (c + r) * norb:(c + r + 1) * norb] += blk
    err = np.max(np.abs(H - H.conj().T))
    if err > 1e-12:
        raise ValueError(f"assembled Hamiltonian is not Hermitian (max deviation {err:.3g} eV)")
    return H


@dataclass(frozen=True)
class PositionOperator:
    """Lab-frame position matrices plus the chain-coordinate matrix they derive from."""

    components: np.ndarray  # (3, dim, dim) complex, Angstrom
    chain: np.ndarray  # (dim, dim) complex, scaled and centered chain coordinate
    geometry: ChainGeometry
    num_orbitals_per_cell: int
    include_intercell: bool


def chain_coordinate_matrix(model: WannierModel, geom: ChainGeometry, include_intercell: bool = False) -> np.ndarray:
    norb, nc, a = model.num_orbitals_per_cell, geom.n_cells, model.lattice_constant
    dim = norb * nc
    S = np.zeros((dim, dim), complex)
    pblocks = model.position_blocks()
    d0 = pblocks.get((0, 0, 0), np.zeros((3, norb, norb), complex))[0]
    if np.max(np.abs(d0 - d0.conj().T), initial=0.0) > 1e-12:
        raise ValueError("intra-cell position block is not Hermitian")
    for c in range(nc):
        sl = slice(c * norb, (c + 1) * norb)
        S[sl, sl] = d0 + c * a * np.eye(norb)
    if include_intercell:
        for R, blk in pblocks.items():
            r = R[0]
            if r == 0:
                continue
            for c in range(max(0, -r), min(nc, nc - r)):
                S[c * norb:(c + 1) * norb, (c + r) * norb:(c + r + 1) * norb] += blk[0]
        S = 0.5 * (S + S.conj().T)
    if geom.centered:
        S -= np.trace(S).real / dim * np.eye(dim)
    return S * geom.gamma


def assemble_position_operator(model: WannierModel, geom: ChainGeometry, include_intercell: bool = False) -> PositionOperator:
    S = chain_coordinate_matrix(model, geom, include_intercell)
    dim = S.shape[0]
    comps = np.empty((3, dim, dim), complex)
    eye = np.eye(dim)
    for k in range(3):
        comps[k] = S * geom.direction[k] + geom.origin_shift[k] * eye
    return PositionOperator(comps, S, geom, model.num_orbitals_per_cell, include_intercell)


def _canonical_eigh(M: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """eigh with deterministic phases and degenerate-group ordering."""
    w, V = np.linalg.eigh(M)
    n = V.shape[0]
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        first = nz[0] if nz.size else 0
        ph = col[first] / abs(col[first]) if abs(col[first]) > 0 else 1.0
        V[:, j] = col / ph
    # within degenerate groups order by descending first-nonzero magnitude
    j = 0
    while j < len(w):
        k = j + 1
        while k < len(w) and abs(w[k] - w[j]) < tol:
            k += 1
        if k - j > 1:
            def key(c):
                col = V[:, c]
                nz = np.flatnonzero(np.abs(col) > 1e-12)
                return (nz[0] if nz.size else n, -abs(col[nz[0]]) if nz.size else 0.0)

            order = sorted(range(j, k), key=key)
            V[:, j:k] = V[:, order]
        j = k
    return w, V


@dataclass(frozen=True)
class ModifiedBasis:
    """Unitary that makes the chain coordinate diagonal, and the coordinates."""

    diag_coords: np.ndarray  # chain coordinate s_i (Angstrom), scaled and centered
    geometry: ChainGeometry
    block_unitaries: tuple[np.ndarray, ...] = ()
    global_unitary: np.ndarray | None = None
    num_orbitals_per_cell: int = 1
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.diag_coords.size

    @property
    def is_block_diagonal(self) -> bool:
        return self.global_unitary is None

    def unitary(self) -> np.ndarray:
        if self.global_unitary is not None:
            return self.global_unitary
        if self._dense is None:
            U = np.zeros((self.dim, self.dim), complex)
            n = self.num_orbitals_per_cell
            for c, blk in enumerate(self.block_unitaries):
                U[c * n:(c + 1) * n, c * n:(c + 1) * n] = blk
            object.__setattr__(self, "_dense", U)
        return self._dense

    def transform(self, M: np.ndarray) -> np.ndarray:
        """U^dagger M U."""
        U = self.unitary()
        return U.conj().T @ M @ U

    def to_lab(self, s) -> np.ndarray:
        """Chain coordinate -> lab-frame coordinate (includes origin_shift)."""
        s = np.asarray(s, float)
        return s[..., None] * self.geometry.direction + np.asarray(self.geometry.origin_shift, float)

    @property
    def lab_coords(self) -> np.ndarray:
        """(dim, 3) coordinates relative to the chosen origin."""
        return self.to_lab(self.diag_coords)

    @property
    def physical_coords(self) -> np.ndarray:
        """(dim, 3) positions in the field's frame (origin_shift removed)."""
        return self.diag_coords[:, None] * self.geometry.direction


def diagonalize_position(pos: PositionOperator, include_intercell: bool | None = None) -> ModifiedBasis:
    if include_intercell is None:
        include_intercell = pos.include_intercell
    S = pos.chain
    if np.max(np.abs(S - S.conj().T)) > 1e-10:
        raise ValueError("position operator is not Hermitian")
    n = pos.num_orbitals_per_cell
    dim = S.shape[0]
    if include_intercell:
        w, V = _canonical_eigh(S)
        return ModifiedBasis(w, pos.geometry, (), V, n)
    coords = np.empty(dim)
    blocks = []
    for c in range(dim // n):
        sl = slice(c * n, (c + 1) * n)
        w, V = _canonical_eigh(S[sl, sl])
        coords[sl] = w
        blocks.append(V)
    return ModifiedBasis(coords, pos.geometry, tuple(blocks), None, n)


@dataclass(frozen=True)
class ChainSystem:
    """Everything the dynamics needs, expressed in the modified basis."""

    model: WannierModel
    geometry: ChainGeometry
    basis: ModifiedBasis
    hamiltonian: np.ndarray  # H_M in the modified basis
    include_intercell: bool = False

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def length(self) -> float:
        return self.geometry.length(self.model.lattice_constant)


def build_chain(model: WannierModel, geom: ChainGeometry, include_intercell: bool = False) -> ChainSystem:
    H = assemble_matter_hamiltonian(model, geom)
    pos = assemble_position_operator(model, geom, include_intercell)
    basis = diagonalize_position(pos, include_intercell)
    Hm = basis.transform(H)
    Hm = 0.5 * (Hm + Hm.conj().T)
    return ChainSystem(model, geom, basis, Hm, include_intercell)
