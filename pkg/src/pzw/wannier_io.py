"""Readers and writers for Wannier90-style ``_hr.dat`` / ``_r.dat`` files.

Orbital indices are 1-based on disk and 0-based in memory. Hopping values
follow the Wannier90 convention H_mn(R) = <m0|H|nR>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class WannierFormatError(ValueError):
    """Malformed model file. ``line`` is 1-based when known."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


@dataclass(frozen=True)
class HoppingEntry:
    cell_offset: tuple[int, int, int]
    m: int
    n: int
    value: complex


@dataclass(frozen=True)
class PositionEntry:
    cell_offset: tuple[int, int, int]
    m: int
    n: int
    value: tuple[complex, complex, complex]


@dataclass(frozen=True)
class HrHeader:
    comment: str
    num_wann: int
    nrpts: int
    degeneracies: tuple[int, ...]


@dataclass(frozen=True)
class WannierModel:
    num_orbitals_per_cell: int
    lattice_constant: float
    hoppings: tuple[HoppingEntry, ...]
    positions: tuple[PositionEntry, ...] = ()
    coupling_range: int = field(default=-1)

    def __post_init__(self):
        if self.num_orbitals_per_cell < 1:
            raise ValueError("num_orbitals_per_cell must be >= 1")
        if not self.lattice_constant > 0:
            raise ValueError("lattice_constant must be positive")
        norb = self.num_orbitals_per_cell
        for e in (*self.hoppings, *self.positions):
            if not (0 <= e.m < norb and 0 <= e.n < norb):
                raise ValueError(f"orbital index out of range in {e}")
        if self.coupling_range < 0:
            rng = max((abs(e.cell_offset[0]) for e in self.hoppings), default=0)
            object.__setattr__(self, "coupling_range", rng)

    def hopping_blocks(self) -> dict[tuple[int, int, int], np.ndarray]:
        """R -> (N, N) complex block, summing repeated entries."""
        norb = self.num_orbitals_per_cell
        out: dict[tuple[int, int, int], np.ndarray] = {}
        for e in self.hoppings:
            blk = out.setdefault(e.cell_offset, np.zeros((norb, norb), complex))
            blk[e.m, e.n] += e.value
        return out

    def position_blocks(self) -> dict[tuple[int, int, int], np.ndarray]:
        """R -> (3, N, N) complex block."""
        norb = self.num_orbitals_per_cell
        out: dict[tuple[int, int, int], np.ndarray] = {}
        for e in self.positions:
            blk = out.setdefault(e.cell_offset, np.zeros((3, norb, norb), complex))
            blk[:, e.m, e.n] += np.asarray(e.value)
        return out

    def check_hermitian(self, tol: float = 1e-12) -> None:
        """Raise if some H(R) lacks its partner H(-R)^dagger."""
        blocks = self.hopping_blocks()
        for R, blk in blocks.items():
            mR = (-R[0], -R[1], -R[2])
            partner = blocks.get(mR, np.zeros_like(blk))
            err = np.max(np.abs(blk - partner.conj().T), initial=0.0)
            if err > tol:
                raise ValueError(f"hoppings not Hermitian-closed at R={R} (mismatch {err:.3g} eV)")


def _tokens(line: str, lineno: int, want: int | None = None) -> list[str]:
    toks = line.split()
    if want is not None and len(toks) != want:
        raise WannierFormatError(f"expected {want} columns, found {len(toks)}", lineno)
    return toks


def _num(tok: str, lineno: int, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise WannierFormatError(f"bad numeric token {tok!r}", lineno) from None


def _decode(text) -> list[str]:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode()
    return text.splitlines()


def parse_hr(text) -> tuple[list[HoppingEntry], HrHeader]:
    """Parse ``_hr.dat`` text. Values are divided by their R-point degeneracy."""
    lines = _decode(text)
    if len(lines) < 3:
        raise WannierFormatError("file truncated before header end", len(lines) + 1)
    comment = lines[0]
    num_wann = _num(_tokens(lines[1], 2, 1)[0], 2, int)
    nrpts = _num(_tokens(lines[2], 3, 1)[0], 3, int)
    if num_wann < 1 or nrpts < 1:
        raise WannierFormatError("num_wann and nrpts must be positive", 2 if num_wann < 1 else 3)
    n_deg_lines = -(-nrpts // 15)
    degs: list[int] = []
    pos = 3
    for k in range(n_deg_lines):
        if pos >= len(lines):
            raise WannierFormatError("file truncated inside degeneracy block", pos + 1)
        degs.extend(_num(t, pos + 1, int) for t in lines[pos].split())
        pos += 1
    if len(degs) != nrpts:
        raise WannierFormatError(f"expected {nrpts} degeneracies, found {len(degs)}", pos)
    if any(d <= 0 for d in degs):
        raise WannierFormatError("degeneracies must be positive", pos)

    n_data = nrpts * num_wann * num_wann
    entries: list[HoppingEntry] = []
    for k in range(n_data):
        lineno = pos + k + 1
        if pos + k >= len(lines) or not lines[pos + k].strip():
            raise WannierFormatError(
                f"expected {n_data} data line{'s' if n_data != 1 else ''}, found {k}", lineno
            )
        t = _tokens(lines[pos + k], lineno, 7)
        R = tuple(_num(x, lineno, int) for x in t[:3])
        m, n = _num(t[3], lineno, int) - 1, _num(t[4], lineno, int) - 1
        if not (0 <= m < num_wann and 0 <= n < num_wann):
            raise WannierFormatError(f"orbital index outside 1..{num_wann}", lineno)
        val = complex(_num(t[5], lineno), _num(t[6], lineno)) / degs[k // (num_wann * num_wann)]
        entries.append(HoppingEntry(R, m, n, val))
    header = HrHeader(comment, num_wann, nrpts, tuple(degs))
    return entries, header


def parse_r(text) -> tuple[list[PositionEntry], int]:
    """Parse ``_r.dat`` text; returns the entries and num_wann."""
    lines = _decode(text)
    if len(lines) < 2:
        raise WannierFormatError("file truncated before header end", len(lines) + 1)
    num_wann = _num(_tokens(lines[1], 2, 1)[0], 2, int)
    entries: list[PositionEntry] = []
    for k, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        t = _tokens(line, k, 11)
        R = tuple(_num(x, k, int) for x in t[:3])
        m, n = _num(t[3], k, int) - 1, _num(t[4], k, int) - 1
        if not (0 <= m < num_wann and 0 <= n < num_wann):
            raise WannierFormatError(f"orbital index outside 1..{num_wann}", k)
        v = [_num(x, k) for x in t[5:]]
        entries.append(PositionEntry(R, m, n, (complex(v[0], v[1]), complex(v[2], v[3]), complex(v[4], v[5]))))
    return entries, num_wann


def _fmt(x: float) -> str:
    return repr(float(x))


def write_hr(model: WannierModel, comment: str = "written by pzw") -> bytes:
    """Serialize hoppings with unit degeneracies at full float precision."""
    if model.num_orbitals_per_cell < 1:
        raise ValueError("model has no orbitals")
    norb = model.num_orbitals_per_cell
    blocks = model.hopping_blocks()
    Rs = sorted(blocks)
    out = [comment, str(norb), str(len(Rs))]
    ones = ["1"] * len(Rs)
    out += ["  ".join(ones[i:i + 15]) for i in range(0, len(Rs), 15)]
    for R in Rs:
        blk = blocks[R]
        for n in range(norb):
            for m in range(norb):
                v = blk[m, n]
                out.append(f"{R[0]} {R[1]} {R[2]} {m + 1} {n + 1} {_fmt(v.real)} {_fmt(v.imag)}")
    return ("\n".join(out) + "\n").encode()


def write_r(model: WannierModel, comment: str = "written by pzw") -> bytes:
    norb = model.num_orbitals_per_cell
    out = [comment, str(norb)]
    blocks = model.position_blocks()
    for R in sorted(blocks):
        blk = blocks[R]
        for n in range(norb):
            for m in range(norb):
                v = blk[:, m, n]
                cols = " ".join(f"{_fmt(c.real)} {_fmt(c.imag)}" for c in v)
                out.append(f"{R[0]} {R[1]} {R[2]} {m + 1} {n + 1} {cols}")
    return ("\n".join(out) + "\n").encode()


def model_from_files(hr_text, r_text=None, lattice_constant: float = 2.496) -> WannierModel:
    hops, header = parse_hr(hr_text)
    pos: list[PositionEntry] = []
    if r_text is not None:
        pos, nw = parse_r(r_text)
        if nw != header.num_wann:
            raise WannierFormatError(f"num_wann mismatch: hr has {header.num_wann}, r has {nw}")
    model = WannierModel(header.num_wann, lattice_constant, tuple(hops), tuple(pos))
    model.check_hermitian()
    return model


TPA_T1 = -2.45
TPA_T2 = -1.61
TPA_A = 2.496


def ssh_model(t1: float, t2: float, a: float = TPA_A, onsite: float = 0.0) -> WannierModel:
    """Two-site SSH chain; site 0 at 0 and site 1 at a/2 along x."""
    z = (0, 0, 0)
    hops = [
        HoppingEntry(z, 0, 0, complex(onsite)),
        HoppingEntry(z, 1, 1, complex(onsite)),
        HoppingEntry(z, 0, 1, complex(t1)),
        HoppingEntry(z, 1, 0, complex(t1)),
        HoppingEntry((1, 0, 0), 1, 0, complex(t2)),
        HoppingEntry((-1, 0, 0), 0, 1, complex(t2)),
    ]
    pos = [
        PositionEntry(z, 0, 0, (0j, 0j, 0j)),
        PositionEntry(z, 1, 1, (complex(a / 2), 0j, 0j)),
    ]
    return WannierModel(2, a, tuple(hops), tuple(pos))


def builtin_tpa_model() -> WannierModel:
    """trans-polyacetylene surrogate with a 1.68 eV gap."""
    return ssh_model(TPA_T1, TPA_T2, TPA_A)


def bulk_bands(model: WannierModel, k: np.ndarray) -> np.ndarray:
    """Band energies along the chain for crystal momenta k (rad per cell)."""
    blocks = model.hopping_blocks()
    k = np.atleast_1d(np.asarray(k, float))
    hk = np.zeros((k.size, model.num_orbitals_per_cell, model.num_orbitals_per_cell), complex)
    for R, blk in blocks.items():
        hk += np.exp(1j * k * R[0])[:, None, None] * blk
    return np.linalg.eigvalsh(hk)
