"""Scenario configuration, runs, sweeps and the ``pzw`` command line.

Interface units are nm, fs, eV and V/Angstrom; lengths are converted to
Angstrom on load. A config is a JSON object with the sections ``model``,
``geometry``, ``field``, ``interaction``, ``propagation``, ``outputs`` and an
optional ``sweep``. Unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .constants import omega_from_wavelength_nm
from .dynamics import PropagationError, ground_state, propagate
from .fields import (
    FieldFormatError,
    FieldGrid,
    GaussianBeamField,
    GridField,
    PlaneWaveField,
    parse_field_grid,
    write_field_grid,
)
from .interaction import build_interaction
from .lattice_basis import ChainGeometry, build_chain
from .observables import (
    TimeSeries,
    absorbed_energy,
    energy,
    fidelity,
    polarization,
    populations,
    power_spectrum,
)
from .wannier_io import WannierFormatError, builtin_tpa_model, model_from_files

NM = 10.0  # Angstrom per nm


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class ModelSpec:
    kind: str = "builtin-tpa"
    hr: str | None = None
    r: str | None = None
    lattice_constant: float = 2.496  # Angstrom


@dataclass
class GeometrySpec:
    n_cells: int = 400
    gamma: float = 10.0
    tilt_theta: float = math.pi / 2
    origin_shift_nm: tuple[float, float] = (0.0, 0.0)
    include_intercell: bool = False


@dataclass
class FieldSpec:
    kind: str = "gaussian"  # gaussian | planewave | grid
    e0: float = 0.003  # V/Angstrom, physical amplitude before the gamma rescaling
    lambda_nm: float = 738.0
    sigma_fs: float = 20.0
    t0_fs: float = 80.0
    spot_nm: float | None = 800.0  # None: no transverse envelope
    file: str | None = None


@dataclass
class InteractionSpec:
    kinds: tuple[str, ...] = ("pzw", "dipole")
    n_q: int = 12
    expansion_x_nm: float = 0.0
    charge_neutral: bool = True


@dataclass
class PropagationSpec:
    t_end_fs: float = 400.0
    dt_out_fs: float = 0.1
    rtol: float = 1e-8
    atol: float = 1e-10


@dataclass
class OutputSpec:
    directory: str = "pzw-out"
    observables: tuple[str, ...] = ("timeseries", "populations", "spectrum")
    spectrum_window: str = "none"
    pad_factor: int = 4


@dataclass
class SweepSpec:
    parameter: str = "geometry.n_cells"
    values: tuple = ()
    durations_fs: tuple[float, ...] = (120.0, 400.0)
    reference: str = "pzw"


@dataclass
class ScenarioConfig:
    name: str = "custom"
    model: ModelSpec = dc_field(default_factory=ModelSpec)
    geometry: GeometrySpec = dc_field(default_factory=GeometrySpec)
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    interaction: InteractionSpec = dc_field(default_factory=InteractionSpec)
    propagation: PropagationSpec = dc_field(default_factory=PropagationSpec)
    outputs: OutputSpec = dc_field(default_factory=OutputSpec)
    sweep: SweepSpec | None = None

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))


_SECTIONS = {
    "model": ModelSpec,
    "geometry": GeometrySpec,
    "field": FieldSpec,
    "interaction": InteractionSpec,
    "propagation": PropagationSpec,
    "outputs": OutputSpec,
    "sweep": SweepSpec,
}


def scenario_a(**kw) -> ScenarioConfig:
    """Gaussian beam at normal incidence on a chain along x."""
    cfg = ScenarioConfig(name="A")
    return _apply_overrides(cfg, kw)


def scenario_b(**kw) -> ScenarioConfig:
    """Plane wave along y hitting a chain tilted by pi/6 from the propagation axis."""
    cfg = ScenarioConfig(
        name="B",
        geometry=GeometrySpec(n_cells=120, gamma=10.0, tilt_theta=math.pi / 6),
        field=FieldSpec(kind="planewave", spot_nm=None),
        sweep=SweepSpec(values=(80, 100, 150, 200, 250, 300, 350, 410)),
    )
    return _apply_overrides(cfg, kw)


def scenario_c(field_file: str = "bowtie.pzwf", **kw) -> ScenarioConfig:
    """Chain in the gap of the synthetic bow-tie field."""
    cfg = ScenarioConfig(
        name="C",
        geometry=GeometrySpec(n_cells=400, gamma=1.0),
        field=FieldSpec(kind="grid", e0=0.1, sigma_fs=20.8, spot_nm=None, file=field_file),
        propagation=PropagationSpec(t_end_fs=200.0),
    )
    return _apply_overrides(cfg, kw)


PRESETS = {"A": scenario_a, "B": scenario_b, "C": scenario_c}


def _apply_overrides(cfg: ScenarioConfig, kw: dict) -> ScenarioConfig:
    for dotted, val in kw.items():
        set_parameter(cfg, dotted.replace("__", "."), val)
    return cfg


def set_parameter(cfg: ScenarioConfig, dotted: str, value) -> None:
    """Assign ``section.key`` on a config in place, with type coercion."""
    parts = dotted.split(".")
    if len(parts) != 2 or parts[0] not in _SECTIONS:
        raise ConfigError(dotted, "expected 'section.key' with section in " + ", ".join(_SECTIONS))
    sec = getattr(cfg, parts[0])
    if sec is None:
        sec = SweepSpec()
        cfg.sweep = sec
    names = {f.name: f for f in dataclasses.fields(sec)}
    if parts[1] not in names:
        raise ConfigError(dotted, "unknown key")
    setattr(sec, parts[1], _coerce(dotted, value, getattr(sec, parts[1])))


def _coerce(key, value, default):
    if value is None:
        return None
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError("expected true/false")
            return value
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise TypeError("expected an integer")
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(key, f"bad value {value!r} ({e})") from None
    return value


def config_from_dict(d: dict, base: ScenarioConfig | None = None, validate: bool = True) -> ScenarioConfig:
    """Build a config from parsed JSON; ``preset`` selects a starting scenario."""
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    d = dict(d)
    preset = d.pop("preset", None)
    if base is None:
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError("preset", f"unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
            base = PRESETS[preset]()
        else:
            base = ScenarioConfig()
    cfg = base
    if "name" in d:
        cfg.name = str(d.pop("name"))
    for sec, body in d.items():
        if sec not in _SECTIONS:
            raise ConfigError(sec, "unknown section")
        if body is None and sec == "sweep":
            cfg.sweep = None
            continue
        if not isinstance(body, dict):
            raise ConfigError(sec, "section must be an object")
        for k, v in body.items():
            set_parameter(cfg, f"{sec}.{k}", v)
    if validate:
        validate_config(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError("<file>", f"cannot read {p}: {e.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"{p}: invalid JSON at line {e.lineno}: {e.msg}") from None
    cfg = config_from_dict(d, validate=False)
    # relative file references resolve against the config's directory
    for sec, key in (("model", "hr"), ("model", "r"), ("field", "file")):
        v = getattr(getattr(cfg, sec), key)
        if v and not os.path.isabs(v):
            setattr(getattr(cfg, sec), key, str(p.parent / v))
    validate_config(cfg)
    return cfg


def _interaction_kind_ok(kind: str) -> bool:
    if kind in ("pzw", "dipole"):
        return True
    if kind.startswith("multipole:"):
        try:
            return int(kind.split(":", 1)[1]) >= 1
        except ValueError:
            return False
    return False


def validate_config(cfg: ScenarioConfig) -> None:
    m = cfg.model
    if m.kind not in ("builtin-tpa", "files"):
        raise ConfigError("model.kind", f"expected builtin-tpa or files, got {m.kind!r}")
    if m.kind == "files":
        if not m.hr:
            raise ConfigError("model.hr", "required when model.kind is files")
        for key in ("hr", "r"):
            v = getattr(m, key)
            if v and not Path(v).is_file():
                raise ConfigError(f"model.{key}", f"file not found: {v}")
    if not m.lattice_constant > 0:
        raise ConfigError("model.lattice_constant", "must be positive")
    g = cfg.geometry
    if g.n_cells < 2:
        raise ConfigError("geometry.n_cells", "must be >= 2")
    if not g.gamma >= 1:
        raise ConfigError("geometry.gamma", "must be >= 1")
    if len(g.origin_shift_nm) != 2:
        raise ConfigError("geometry.origin_shift_nm", "expected [x, y]")
    f = cfg.field
    if f.kind not in ("gaussian", "planewave", "grid"):
        raise ConfigError("field.kind", f"expected gaussian, planewave or grid, got {f.kind!r}")
    if f.kind == "grid":
        if not f.file:
            raise ConfigError("field.file", "required for a gridded field")
        if not Path(f.file).is_file():
            raise ConfigError("field.file", f"file not found: {f.file}")
    if not f.lambda_nm > 0:
        raise ConfigError("field.lambda_nm", "must be positive")
    if not f.sigma_fs > 0:
        raise ConfigError("field.sigma_fs", "must be positive")
    if f.spot_nm is not None and not f.spot_nm > 0:
        raise ConfigError("field.spot_nm", "must be positive (or null for no envelope)")
    it = cfg.interaction
    if not it.kinds:
        raise ConfigError("interaction.kinds", "at least one interaction kind is required")
    for k in it.kinds:
        if not _interaction_kind_ok(k):
            raise ConfigError("interaction.kinds", f"unknown kind {k!r} (pzw, dipole or multipole:N)")
    if not 1 <= it.n_q <= 64:
        raise ConfigError("interaction.n_q", "must lie in 1..64")
    p = cfg.propagation
    if not p.t_end_fs > 0:
        raise ConfigError("propagation.t_end_fs", "must be positive")
    if not p.dt_out_fs > 0:
        raise ConfigError("propagation.dt_out_fs", "must be positive")
    n = p.t_end_fs / p.dt_out_fs
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError("propagation.dt_out_fs", "t_end_fs must be a multiple of dt_out_fs")
    if not (p.rtol > 0 and p.atol >= 0):
        raise ConfigError("propagation.rtol", "tolerances must be positive")
    o = cfg.outputs
    for ob in o.observables:
        if ob not in ("timeseries", "populations", "spectrum"):
            raise ConfigError("outputs.observables", f"unknown observable {ob!r}")
    if o.spectrum_window not in ("none", "hann"):
        raise ConfigError("outputs.spectrum_window", "expected none or hann")
    s = cfg.sweep
    if s is not None:
        if s.reference not in it.kinds:
            raise ConfigError("sweep.reference", f"{s.reference!r} is not among interaction.kinds")
        sec, _, key = s.parameter.partition(".")
        if sec not in _SECTIONS or sec == "sweep" or key not in {f.name for f in dataclasses.fields(_SECTIONS[sec])}:
            raise ConfigError("sweep.parameter", f"unknown parameter {s.parameter!r}")


def resolved_parameters(cfg: ScenarioConfig) -> dict:
    """Internal-unit (Angstrom, rad/fs) view of a config, as recorded in the manifest."""
    g, f = cfg.geometry, cfg.field
    a = cfg.model.lattice_constant if cfg.model.kind == "files" else 2.496
    L = g.n_cells * g.gamma * a
    out = {
        "lattice_constant_A": a,
        "chain_length_A": L,
        "origin_shift_A": [v * NM for v in g.origin_shift_nm] + [0.0],
        "omega_rad_per_fs": omega_from_wavelength_nm(f.lambda_nm),
        "wavelength_A": f.lambda_nm * NM,
        "spot_A": None if f.spot_nm is None else f.spot_nm * NM,
        "model_field_amplitude_V_per_A": f.e0 / g.gamma,
        "expansion_point_A": [cfg.interaction.expansion_x_nm * NM, 0.0, 0.0],
    }
    if f.kind == "gaussian" and f.spot_nm is not None:
        out["L_over_s"] = L / (f.spot_nm * NM)
    if f.kind == "planewave":
        out["L_y_over_lambda"] = abs(L * math.cos(g.tilt_theta)) / (f.lambda_nm * NM)
    return out


# ---------------------------------------------------------------- running


@dataclass
class KindResult:
    kind: str
    energy: TimeSeries
    polarization: TimeSeries
    occupations: np.ndarray  # (2, dim): t = 0 and t = t_end
    absorbed: float
    stats: dict


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    eigenvalues: np.ndarray
    omega: float
    results: dict[str, KindResult]


def _load_model(cfg: ScenarioConfig):
    m = cfg.model
    if m.kind == "builtin-tpa":
        return builtin_tpa_model()
    r_text = Path(m.r).read_text() if m.r else None
    return model_from_files(Path(m.hr).read_text(), r_text, m.lattice_constant)


def build_field(cfg: ScenarioConfig):
    """Physical field (before the 1/gamma amplitude rescaling)."""
    f = cfg.field
    omega = omega_from_wavelength_nm(f.lambda_nm)
    if f.kind == "gaussian":
        spot = math.inf if f.spot_nm is None else f.spot_nm * NM
        return GaussianBeamField(f.e0, omega, f.sigma_fs, f.t0_fs, spot)
    if f.kind == "planewave":
        return PlaneWaveField(f.e0, omega, f.sigma_fs, f.t0_fs)
    grid = parse_field_grid(Path(f.file).read_bytes())
    return GridField(grid)


def simulate(cfg: ScenarioConfig) -> ScenarioResult:
    """Run every interaction kind of a config on one shared ground state."""
    validate_config(cfg)
    model = _load_model(cfg)
    g = cfg.geometry
    geom = ChainGeometry(
        g.n_cells, g.gamma, g.tilt_theta,
        (g.origin_shift_nm[0] * NM, g.origin_shift_nm[1] * NM, 0.0),
    )
    system = build_chain(model, geom, g.include_intercell)
    ens = ground_state(system.hamiltonian)
    fld = build_field(cfg).scaled(1.0 / g.gamma)
    omega = omega_from_wavelength_nm(cfg.field.lambda_nm)
    rho0 = np.sum(np.abs(ens.orbitals) ** 2, axis=1)
    x = system.basis.lab_coords[:, 0]
    p = cfg.propagation
    it = cfg.interaction
    results = {}
    for kind in it.kinds:
        op = build_interaction(kind, system.basis, fld, n_q=it.n_q, expansion_point=(it.expansion_x_nm * NM, 0.0, 0.0))
        if it.charge_neutral:
            op = op.with_charge_reference(rho0)
        traj = propagate(ens, system.hamiltonian, op, (0.0, p.t_end_fs), p.dt_out_fs, p.rtol, p.atol)
        E = energy(traj, system.hamiltonian, op)
        P = polarization(traj, x)
        occ = populations(traj)
        off = op.support()[1]
        dH = absorbed_energy(E, 0.0, p.t_end_fs, pulse_end=off if math.isfinite(off) else None)
        results[kind] = KindResult(kind, E, P, occ, dH, traj.stats)
    return ScenarioResult(cfg, ens.eigenvalues, omega, results)


def _fmt(v: float) -> str:
    return f"{float(v):.12g}"


def csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool) else v for v in r])
    return buf.getvalue().encode()


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _kind_dir(kind: str) -> str:
    return kind.replace(":", "-")


def write_outputs(res: ScenarioResult, directory=None) -> dict[str, str]:
    """Write CSVs and the manifest; returns {relative path: sha256}."""
    cfg = res.config
    out = Path(directory or cfg.outputs.directory)
    sums = {}

    def put(rel, data):
        _write_atomic(out / rel, data)
        sums[rel] = hashlib.sha256(data).hexdigest()

    obs = cfg.outputs.observables
    for kind, r in res.results.items():
        d = _kind_dir(kind)
        if "timeseries" in obs:
            rows = zip(r.energy.times, r.energy.values, r.polarization.values)
            put(f"{d}/timeseries.csv", csv_bytes(["t_fs", "energy_eV", "polarization_eA"], rows))
        if "populations" in obs:
            rows = zip(res.eigenvalues, r.occupations[0], r.occupations[-1])
            put(f"{d}/populations.csv", csv_bytes(["epsilon_eV", "occ_t0", "occ_tf"], rows))
        if "spectrum" in obs:
            sp = power_spectrum(r.polarization, res.omega, cfg.outputs.spectrum_window, cfg.outputs.pad_factor)
            put(f"{d}/spectrum.csv", csv_bytes(["omega_over_omega0", "power"], zip(sp.harmonic, sp.power)))
    summary = [[k, r.absorbed, r.stats.get("macro_steps", 0), r.stats.get("rejections", 0)] for k, r in res.results.items()]
    put("summary.csv", csv_bytes(["interaction", "absorbed_energy_eV", "macro_steps", "rejections"], summary))
    manifest = {
        "pzw_version": __version__,
        "config": cfg.to_dict(),
        "resolved": resolved_parameters(cfg),
        "files": dict(sorted(sums.items())),
    }
    _write_atomic(out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return sums


def run_scenario(cfg: ScenarioConfig, directory=None) -> ScenarioResult:
    res = simulate(cfg)
    write_outputs(res, directory)
    return res


def sweep_point_metrics(res: ScenarioResult, durations, reference: str) -> dict:
    """dH per kind and polarization fidelity of each kind against the reference."""
    row = {}
    ref = res.results[reference]
    for kind, r in res.results.items():
        row[f"dH_{kind}"] = r.absorbed
    for kind, r in res.results.items():
        if kind == reference:
            continue
        for T in durations:
            try:
                row[f"fidelity_{kind}_T{_fmt(T)}"] = fidelity(ref.polarization, r.polarization, T)
            except ValueError:
                row[f"fidelity_{kind}_T{_fmt(T)}"] = float("nan")
    return row


def sweep(cfg: ScenarioConfig, values=None, directory=None, on_point=None) -> list[dict]:
    """Run one scenario per value of ``cfg.sweep.parameter``; failures are recorded, not raised."""
    spec = cfg.sweep or SweepSpec()
    values = list(values if values is not None else spec.values)
    if not values:
        raise ConfigError("sweep.values", "sweep list is empty")
    out = Path(directory or cfg.outputs.directory)
    rows = []
    for i, v in enumerate(values):
        pc = copy.deepcopy(cfg)
        set_parameter(pc, spec.parameter, v)
        row = {"point": i, spec.parameter: v}
        try:
            validate_config(pc)
            row.update({k: val for k, val in resolved_parameters(pc).items() if k in ("L_over_s", "L_y_over_lambda", "chain_length_A")})
            res = simulate(pc)
            write_outputs(res, out / f"point_{i:03d}")
            row.update(sweep_point_metrics(res, spec.durations_fs, spec.reference))
            row["status"] = "ok"
            row["error"] = ""
        except (PropagationError, ValueError, OSError) as e:
            row["status"] = "failed"
            row["error"] = f"{type(e).__name__}: {e}"
        rows.append(row)
        if on_point:
            on_point(row)
    cols = []
    for r in rows:
        for k in r:
            if k not in cols and k not in ("status", "error"):
                cols.append(k)
    cols += ["status", "error"]
    table = [[r.get(c, "") for c in cols] for r in rows]
    _write_atomic(out / "sweep.csv", csv_bytes(cols, table))
    return rows


# ---------------------------------------------------------------- fixture


def bowtie_profile(x: np.ndarray, tip: float = 500.0, width: float = 200.0, gain: float = 2.0) -> np.ndarray:
    """Tip-enhancement factor along the gap, normalized to 1 at the center."""
    x = np.asarray(x, float)

    def g(u):
        return 1.0 + gain * (np.exp(-((u - tip) / width) ** 2) + np.exp(-((u + tip) / width) ** 2))

    return g(x) / g(0.0)


def make_bowtie_fixture(e0: float = 0.1, lambda_nm: float = 738.0, sigma_fs: float = 20.8, t0_fs: float = 80.0,
                        half_gap_nm: float = 50.0, dx_nm: float = 1.0, dt_fs: float = 0.25, t_end_fs: float = 200.0) -> bytes:
    """Synthetic bow-tie gap field in pzw-field v1 format.

    Not a Maxwell solution: a separable stand-in with the temporal pulse of a
    Gaussian envelope and a symmetric double-peak enhancement towards the
    tips at +-half_gap, flat near the center.
    """
    nx = int(round(2 * half_gap_nm / dx_nm)) + 1
    nt = int(round(t_end_fs / dt_fs)) + 1
    x = -half_gap_nm * NM + dx_nm * NM * np.arange(nx)
    t = dt_fs * np.arange(nt)
    omega = omega_from_wavelength_nm(lambda_nm)
    temporal = e0 * np.exp(-((t - t0_fs) / sigma_fs) ** 2) * np.cos(omega * (t - t0_fs))
    frames = temporal[:, None] * bowtie_profile(x)[None, :]
    grid = FieldGrid(float(x[0]), dx_nm * NM, nx, 0.0, dt_fs, nt, frames)
    return write_field_grid(grid)


# ---------------------------------------------------------------- CLI


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--scenario", choices=sorted(PRESETS), help="start from a preset scenario")
    p.add_argument("--model", choices=["builtin-tpa"], help="builtin model")
    p.add_argument("--hr", help="Wannier90 _hr.dat file")
    p.add_argument("--r", help="Wannier90 _r.dat file")
    p.add_argument("--n-cells", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--theta", type=float, help="chain angle from the y axis (rad)")
    p.add_argument("--field", help="gaussian | planewave | grid:FILE")
    p.add_argument("--e0", type=float, help="field amplitude (V/A)")
    p.add_argument("--sigma-fs", type=float)
    p.add_argument("--t0-fs", type=float)
    p.add_argument("--lambda-nm", type=float)
    p.add_argument("--spot-nm", type=float)
    p.add_argument("--interaction", action="append", help="pzw | dipole | multipole:N (repeatable)")
    p.add_argument("--nq", type=int)
    p.add_argument("--expansion-x", type=float, metavar="NM")
    p.add_argument("--t-end-fs", type=float)
    p.add_argument("--dt-out-fs", type=float)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--out", help="output directory")


def config_from_args(ns: argparse.Namespace) -> ScenarioConfig:
    if ns.config:
        cfg = load_config(ns.config)
    elif ns.scenario:
        cfg = PRESETS[ns.scenario]()
    else:
        cfg = scenario_a()
    flags = {
        "n_cells": "geometry.n_cells", "gamma": "geometry.gamma", "theta": "geometry.tilt_theta",
        "e0": "field.e0", "sigma_fs": "field.sigma_fs", "t0_fs": "field.t0_fs", "lambda_nm": "field.lambda_nm",
        "spot_nm": "field.spot_nm", "nq": "interaction.n_q", "expansion_x": "interaction.expansion_x_nm",
        "t_end_fs": "propagation.t_end_fs", "dt_out_fs": "propagation.dt_out_fs", "rtol": "propagation.rtol",
        "atol": "propagation.atol", "out": "outputs.directory",
    }
    for attr, key in flags.items():
        v = getattr(ns, attr, None)
        if v is not None:
            if key == "field.spot_nm":
                cfg.field.spot_nm = float(v)
            else:
                set_parameter(cfg, key, v)
    if ns.model:
        cfg.model.kind = ns.model
    if ns.hr:
        cfg.model.kind, cfg.model.hr = "files", ns.hr
    if ns.r:
        cfg.model.r = ns.r
    if ns.field:
        if ns.field.startswith("grid:"):
            cfg.field.kind, cfg.field.file = "grid", ns.field[5:]
        elif ns.field in ("gaussian", "planewave"):
            cfg.field.kind = ns.field
            if ns.field == "planewave" and ns.spot_nm is None:
                cfg.field.spot_nm = None
        else:
            raise ConfigError("field.kind", f"expected gaussian, planewave or grid:FILE, got {ns.field!r}")
    if ns.interaction:
        cfg.interaction.kinds = tuple(ns.interaction)
    validate_config(cfg)
    return cfg


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pzw", description="Multipolar light-matter dynamics of tight-binding chains.")
    ap.add_argument("--version", action="version", version=f"pzw {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run one scenario")
    _add_common(p)
    p = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(p)
    p.add_argument("--parameter", help="swept key, e.g. geometry.n_cells")
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--durations-fs", help="comma-separated fidelity durations")
    p = sub.add_parser("spectrum", help="power spectrum of a timeseries.csv")
    p.add_argument("timeseries")
    p.add_argument("--lambda-nm", type=float, default=738.0)
    p.add_argument("--window", choices=["none", "hann"], default="none")
    p.add_argument("--pad-factor", type=int, default=4)
    p.add_argument("--out", default="spectrum.csv")
    p = sub.add_parser("fixture", help="write a synthetic field fixture")
    p.add_argument("which", choices=["bowtie"])
    p.add_argument("--out", default="bowtie.pzwf")
    p.add_argument("--e0", type=float, default=0.1)
    p = sub.add_parser("validate-config", help="check a config file and print the resolved parameters")
    p.add_argument("config")
    return ap


def _read_timeseries(path) -> TimeSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "polarization_eA" not in rows[0]:
        raise ConfigError("timeseries", f"{path}: expected columns t_fs, energy_eV, polarization_eA")
    t = np.array([float(r["t_fs"]) for r in rows])
    p = np.array([float(r["polarization_eA"]) for r in rows])
    return TimeSeries(t, p)


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        if ns.cmd == "validate-config":
            cfg = load_config(ns.config)
            print(json.dumps({"config": cfg.to_dict(), "resolved": resolved_parameters(cfg)}, indent=2, sort_keys=True))
            return 0
        if ns.cmd == "fixture":
            data = make_bowtie_fixture(e0=ns.e0)
            _write_atomic(Path(ns.out), data)
            print(ns.out)
            return 0
        if ns.cmd == "spectrum":
            ts = _read_timeseries(ns.timeseries)
            sp = power_spectrum(ts, omega_from_wavelength_nm(ns.lambda_nm), ns.window, ns.pad_factor)
            _write_atomic(Path(ns.out), csv_bytes(["omega_over_omega0", "power"], zip(sp.harmonic, sp.power)))
            print(ns.out)
            return 0
        cfg = config_from_args(ns)
        if ns.cmd == "run":
            res = run_scenario(cfg)
            for k, r in res.results.items():
                print(f"{k}: absorbed energy {_fmt(r.absorbed)} eV")
            print(f"outputs in {cfg.outputs.directory}")
            return 0
        spec = cfg.sweep or SweepSpec()
        if ns.parameter:
            spec.parameter = ns.parameter
        vals = spec.values
        if ns.values:
            vals = tuple(json.loads(v) for v in ns.values.split(","))
        if ns.durations_fs:
            spec.durations_fs = tuple(float(v) for v in ns.durations_fs.split(","))
        cfg.sweep = spec
        validate_config(cfg)
        rows = sweep(cfg, vals, on_point=lambda r: print(f"point {r['point']}: {r['status']} {r['error']}".rstrip(), flush=True))
        return 2 if any(r["status"] != "ok" for r in rows) else 0
    except (ConfigError, FieldFormatError, WannierFormatError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except PropagationError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
