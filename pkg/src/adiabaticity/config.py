"""Run configuration: INI files read with :mod:`configparser`.

Grammar (all sections optional except ``[model]``; keys are case sensitive)::

    [model]
    type = three_level | aggregate
    name = free text, used for the default output directory

    [three_level]
    energies = 0, 3, 0
    mode = ramped | constant
    J0 = 2            # constant mode
    J10 = 8           # ramped mode
    J20 = 8
    t_max = 50

    [aggregate]
    N, mu, mass, D_e, alpha, X0, sigma_E, E0, dd_exponent, temperature,
    mobile, r_min, max_retries        (see AggregateParams for units)
    site_energies = cm^-1 list        # replaces disorder sampling
    initial_positions = angstrom list # default: equilibrium chain
    initial_velocities = angstrom/ps list
    thermal = false                   # sample offsets and velocities at `temperature`

    [initial_state]
    kind = site | superposition | eigenstate
    site = 1                          # kind = site
    sites = 1, 2                      # superposition, or eigenstate with the largest
                                      #   overlap to that superposition
    weights = 1, 1j                   # complex weights for `sites` (default equal);
                                      #   normalized on load with a warning
    index = 1                         # kind = eigenstate, ascending energy order

    [grid]
    dt = auto | number
    dt_divisor = 200
    t_end = number
    record_stride = 1
    time_unit = internal | ps

    [measure]
    target, surface (1-based), amp_floor, degeneracy_tol, overlap_threshold,
    norm_drift_abort, surface_policy = fixed | most_populated_each_step

    [seeds]
    root = 0
    ensemble = 8                      # sweep members per point, seeds root + i

    [sweep]
    sigma_E = cm^-1 list
    alpha = 1/angstrom list
    mode = pairs | grid

    [output]
    directory = path
    format_version = 1
    record_positions = true

Site, target and eigenstate indices are 1-based in files and 0-based in code.
"""
from __future__ import annotations

import configparser
import math
import os
import re
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import dynamics, measure, spectral, units
from .dynamics import ClassicalState, QuantumState, TimeGrid, TrajectoryOptions
from .errors import ParseError, ValidationError
from .models import (
    AggregateModel,
    AggregateParams,
    ThreeLevelModel,
    ThreeLevelParams,
    sample_disorder,
    sample_thermal,
)

OUTPUT_ROOT_ENV = "ADIABATICITY_OUTPUT_ROOT"
FORMAT_VERSION = 1

_KEYS = {
    "model": {"type", "name"},
    "three_level": {"energies", "mode", "J0", "J10", "J20", "t_max"},
    "aggregate": {f.name for f in fields(AggregateParams) if f.init}
    | {"site_energies", "initial_positions", "initial_velocities", "thermal"},
    "initial_state": {"kind", "site", "sites", "weights", "index"},
    "grid": {"dt", "dt_divisor", "t_end", "record_stride", "time_unit"},
    "measure": {
        "target",
        "surface",
        "amp_floor",
        "degeneracy_tol",
        "overlap_threshold",
        "norm_drift_abort",
        "surface_policy",
    },
    "seeds": {"root", "ensemble"},
    "sweep": {"sigma_E", "alpha", "mode"},
    "output": {"directory", "format_version", "record_positions"},
}


@dataclass
class InitialStateSpec:
    kind: str = "site"
    site: int = 0
    sites: tuple = ()
    weights: Optional[tuple] = None  # complex, normalized
    index: Optional[int] = None


@dataclass
class GridSpec:
    dt: Optional[float] = None  # None -> automatic
    dt_divisor: int = dynamics.DT_DIVISOR
    t_end: float = 1.0
    record_stride: int = 1
    time_unit: str = "internal"

    def to_internal(self, value: float) -> float:
        return units.ps_to_au(value) if self.time_unit == "ps" else value


@dataclass
class AggregateSetup:
    site_energies: Optional[tuple] = None  # cm^-1
    initial_positions: Optional[tuple] = None  # angstrom
    initial_velocities: Optional[tuple] = None  # angstrom/ps
    thermal: bool = False


@dataclass
class SweepSpec:
    sigma_E: tuple = ()
    alpha: tuple = ()
    mode: str = "pairs"

    def points(self) -> list[tuple[float, float]]:
        if self.mode == "grid":
            return [(s, a) for s in self.sigma_E for a in self.alpha]
        return list(zip(self.sigma_E, self.alpha))


@dataclass
class RunConfig:
    model_type: str
    name: str = "run"
    three_level: Optional[ThreeLevelParams] = None
    aggregate: Optional[AggregateParams] = None
    setup: AggregateSetup = field(default_factory=AggregateSetup)
    initial_state: InitialStateSpec = field(default_factory=InitialStateSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    options: TrajectoryOptions = field(default_factory=TrajectoryOptions)
    seed: int = 0
    ensemble: int = 8
    sweep: Optional[SweepSpec] = None
    output_dir: Optional[str] = None
    source: Optional[str] = None

    def echo(self) -> dict:
        """Every resolved setting, 1-based indices as in the file."""
        out = {"model": {"type": self.model_type, "name": self.name}}
        if self.three_level is not None:
            out["three_level"] = {k: v for k, v in asdict(self.three_level).items()}
            out["three_level"]["energies"] = list(self.three_level.energies)
        if self.aggregate is not None:
            out["aggregate"] = {f.name: getattr(self.aggregate, f.name) for f in fields(AggregateParams) if f.init}
            out["aggregate"].update({k: _listify(v) for k, v in asdict(self.setup).items()})
        s = self.initial_state
        out["initial_state"] = {
            "kind": s.kind,
            "site": s.site + 1,
            "sites": [k + 1 for k in s.sites],
            "weights": None if s.weights is None else [repr(w) for w in s.weights],
            "index": None if s.index is None else s.index + 1,
        }
        g = self.grid
        out["grid"] = {
            "dt": "auto" if g.dt is None else g.dt,
            "dt_divisor": g.dt_divisor,
            "t_end": g.t_end,
            "record_stride": g.record_stride,
            "time_unit": g.time_unit,
        }
        o = self.options
        out["measure"] = {
            "target": None if o.target_index is None else o.target_index + 1,
            "surface": None if o.surface_index is None else o.surface_index + 1,
            "amp_floor": o.amp_floor,
            "degeneracy_tol": o.degeneracy_tol,
            "overlap_threshold": o.overlap_threshold,
            "norm_drift_abort": o.norm_drift_abort,
            "surface_policy": o.surface_policy,
        }
        out["seeds"] = {"root": self.seed, "ensemble": self.ensemble}
        if self.sweep is not None:
            out["sweep"] = {k: _listify(v) for k, v in asdict(self.sweep).items()}
        out["output"] = {
            "directory": self.output_dir,
            "format_version": FORMAT_VERSION,
            "record_positions": o.record_positions,
        }
        return out


def _listify(v):
    return list(v) if isinstance(v, tuple) else v


# --------------------------------------------------------------------------
# parsing


class _Reader:
    """Typed access to one parsed file, collecting problems instead of failing fast."""

    def __init__(self, parser: configparser.ConfigParser, text: str):
        self.parser = parser
        self.lines = text.splitlines()
        self.problems: list[str] = []

    def where(self, section: str, key: str) -> str:
        inside = False
        for n, line in enumerate(self.lines, 1):
            stripped = line.strip()
            if stripped.startswith("["):
                inside = stripped == f"[{section}]"
            elif inside and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
                return f" (line {n})"
        return ""

    def raw(self, section, key):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        return None

    def fail(self, section, key, msg):
        self.problems.append(f"{section}.{key}{self.where(section, key)}: {msg}")

    def number(self, section, key, default, cast=float):
        raw = self.raw(section, key)
        if raw is None:
            return default
        try:
            value = cast(raw)
        except ValueError:
            self.fail(section, key, f"expected {'an integer' if cast is int else 'a number'}, got {raw!r}")
            return default
        if cast is float and not math.isfinite(value):
            self.fail(section, key, f"must be finite, got {raw!r}")
            return default
        return value

    def flag(self, section, key, default):
        raw = self.raw(section, key)
        if raw is None:
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            self.fail(section, key, f"expected true/false, got {raw!r}")
            return default

    def numbers(self, section, key, default=None, cast=float):
        raw = self.raw(section, key)
        if raw is None:
            return default
        try:
            return tuple(cast(x) for x in raw.replace(",", " ").split())
        except ValueError:
            self.fail(section, key, f"expected a list of numbers, got {raw!r}")
            return default

    def choice(self, section, key, default, allowed):
        raw = self.raw(section, key)
        if raw is None:
            return default
        if raw not in allowed:
            self.fail(section, key, f"must be one of {', '.join(allowed)}, got {raw!r}")
            return default
        return raw


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse and validate configuration text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}") from exc

    rd = _Reader(parser, text)
    for section in parser.sections():
        if section not in _KEYS:
            rd.problems.append(f"unknown section [{section}]")
            continue
        for key in parser.options(section):
            if key not in _KEYS[section]:
                rd.fail(section, key, "unknown key")
    if not parser.has_section("model"):
        raise ValidationError(["model.type: missing [model] section"])

    model_type = rd.choice("model", "type", None, ("three_level", "aggregate"))
    if model_type is None:
        rd.problems.append("model.type: required")
    cfg = RunConfig(model_type=model_type or "three_level", source=source)
    cfg.name = rd.raw("model", "name") or (Path(source).stem if source != "<string>" else "run")

    if model_type == "three_level":
        _read_three_level(rd, cfg)
    elif model_type == "aggregate":
        _read_aggregate(rd, cfg)
    _read_initial_state(rd, cfg)
    _read_grid(rd, cfg)
    _read_measure(rd, cfg)
    cfg.seed = rd.number("seeds", "root", 0, int)
    if cfg.seed < 0:
        rd.fail("seeds", "root", "must be >= 0")
    cfg.ensemble = rd.number("seeds", "ensemble", 8, int)
    if cfg.ensemble < 1:
        rd.fail("seeds", "ensemble", "must be >= 1")
    version = rd.number("output", "format_version", FORMAT_VERSION, int)
    if version != FORMAT_VERSION:
        rd.fail("output", "format_version", f"only version {FORMAT_VERSION} is supported")
    if parser.has_section("sweep"):
        _read_sweep(rd, cfg)
    cfg.output_dir = rd.raw("output", "directory")
    cfg.options.record_positions = rd.flag("output", "record_positions", True)

    if rd.problems:
        raise ValidationError(rd.problems)
    _cross_check(cfg)
    return cfg


def load_config(path) -> RunConfig:
    """Read, parse and validate a configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def _construct(rd, section, cls, kwargs):
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        rd.problems.extend(exc.problems)
    except (TypeError, ValueError) as exc:
        rd.problems.append(f"{section}: {exc}")
    return None


def _read_three_level(rd, cfg):
    d = ThreeLevelParams()
    kwargs = dict(
        energies=rd.numbers("three_level", "energies", d.energies),
        mode=rd.choice("three_level", "mode", d.mode, ("ramped", "constant")),
        J0=rd.number("three_level", "J0", d.J0),
        J10=rd.number("three_level", "J10", d.J10),
        J20=rd.number("three_level", "J20", d.J20),
        t_max=rd.number("three_level", "t_max", d.t_max),
    )
    cfg.three_level = _construct(rd, "three_level", ThreeLevelParams, kwargs)


def _read_aggregate(rd, cfg):
    kwargs = {}
    for f in fields(AggregateParams):
        if not f.init:
            continue
        if isinstance(f.default, bool):
            kwargs[f.name] = rd.flag("aggregate", f.name, f.default)
        elif isinstance(f.default, int):
            kwargs[f.name] = rd.number("aggregate", f.name, f.default, int)
        else:
            kwargs[f.name] = rd.number("aggregate", f.name, f.default)
    cfg.aggregate = _construct(rd, "aggregate", AggregateParams, kwargs)
    cfg.setup = AggregateSetup(
        site_energies=rd.numbers("aggregate", "site_energies"),
        initial_positions=rd.numbers("aggregate", "initial_positions"),
        initial_velocities=rd.numbers("aggregate", "initial_velocities"),
        thermal=rd.flag("aggregate", "thermal", False),
    )


def _read_initial_state(rd, cfg):
    s = InitialStateSpec()
    s.kind = rd.choice("initial_state", "kind", "site", ("site", "superposition", "eigenstate"))
    s.site = rd.number("initial_state", "site", 1, int) - 1
    s.sites = tuple(k - 1 for k in (rd.numbers("initial_state", "sites", (), int) or ()))
    index = rd.number("initial_state", "index", None, int)
    s.index = None if index is None else index - 1
    raw_w = rd.raw("initial_state", "weights")
    if raw_w is not None:
        try:
            w = np.array([complex(x) for x in raw_w.replace(",", " ").split()])
        except ValueError:
            rd.fail("initial_state", "weights", f"expected complex numbers, got {raw_w!r}")
        else:
            norm = float(np.sqrt(np.sum(np.abs(w) ** 2)))
            if len(w) != len(s.sites):
                rd.fail("initial_state", "weights", f"expected {len(s.sites)} values to match sites")
            elif norm == 0:
                rd.fail("initial_state", "weights", "all weights are zero")
            else:
                if abs(norm - 1.0) > 1e-12:
                    warnings.warn(f"initial_state.weights normalized (norm was {norm:.6g})", stacklevel=2)
                s.weights = tuple(w / norm)
    if s.kind == "superposition" and not s.sites:
        rd.fail("initial_state", "sites", "required for kind = superposition")
    if s.kind == "eigenstate" and s.index is None and not s.sites:
        rd.fail("initial_state", "index", "kind = eigenstate needs index or sites")
    cfg.initial_state = s


def _read_grid(rd, cfg):
    g = GridSpec()
    raw_dt = rd.raw("grid", "dt")
    if raw_dt is not None and raw_dt != "auto":
        g.dt = rd.number("grid", "dt", None)
        if g.dt is not None and not g.dt > 0:
            rd.fail("grid", "dt", f"must be > 0 or auto, got {raw_dt}")
    g.dt_divisor = rd.number("grid", "dt_divisor", g.dt_divisor, int)
    if g.dt_divisor < 1:
        rd.fail("grid", "dt_divisor", "must be >= 1")
    if rd.raw("grid", "t_end") is None:
        rd.problems.append("grid.t_end: required")
    g.t_end = rd.number("grid", "t_end", g.t_end)
    if not g.t_end > 0:
        rd.fail("grid", "t_end", "must be > 0")
    g.record_stride = rd.number("grid", "record_stride", 1, int)
    if g.record_stride < 1:
        rd.fail("grid", "record_stride", "must be >= 1")
    g.time_unit = rd.choice("grid", "time_unit", "internal", ("internal", "ps"))
    cfg.grid = g


def _read_measure(rd, cfg):
    o = TrajectoryOptions()
    target = rd.number("measure", "target", None, int)
    o.target_index = None if target is None else target - 1
    surface = rd.number("measure", "surface", None, int)
    o.surface_index = None if surface is None else surface - 1
    o.amp_floor = rd.number("measure", "amp_floor", measure.AMP_FLOOR)
    o.degeneracy_tol = rd.number("measure", "degeneracy_tol", spectral.DEGENERACY_TOL)
    o.overlap_threshold = rd.number("measure", "overlap_threshold", spectral.OVERLAP_THRESHOLD)
    o.norm_drift_abort = rd.number("measure", "norm_drift_abort", dynamics.NORM_DRIFT_ABORT)
    o.surface_policy = rd.choice("measure", "surface_policy", "fixed", ("fixed", "most_populated_each_step"))
    for key in ("amp_floor", "degeneracy_tol", "norm_drift_abort"):
        if not getattr(o, key) > 0:
            rd.fail("measure", key, "must be > 0")
    if not 0 < o.overlap_threshold <= 1:
        rd.fail("measure", "overlap_threshold", "must be in (0, 1]")
    cfg.options = o


def _read_sweep(rd, cfg):
    sw = SweepSpec(
        sigma_E=rd.numbers("sweep", "sigma_E", ()),
        alpha=rd.numbers("sweep", "alpha", ()),
        mode=rd.choice("sweep", "mode", "pairs", ("pairs", "grid")),
    )
    if not sw.sigma_E or not sw.alpha:
        rd.fail("sweep", "sigma_E", "sweep needs sigma_E and alpha lists")
    if sw.mode == "pairs" and len(sw.sigma_E) != len(sw.alpha):
        rd.fail("sweep", "alpha", "pairs mode needs as many alpha values as sigma_E values")
    if any(s < 0 for s in sw.sigma_E):
        rd.fail("sweep", "sigma_E", "values must be >= 0")
    if any(a <= 0 for a in sw.alpha):
        rd.fail("sweep", "alpha", "values must be > 0")
    cfg.sweep = sw


def _cross_check(cfg: RunConfig):
    problems = []
    dim = 3 if cfg.model_type == "three_level" else cfg.aggregate.N
    s = cfg.initial_state
    for k in (s.site,) if s.kind == "site" else s.sites:
        if not 0 <= k < dim:
            problems.append(f"initial_state: site {k + 1} outside 1..{dim}")
    if s.index is not None and not 0 <= s.index < dim:
        problems.append(f"initial_state.index: {s.index + 1} outside 1..{dim}")
    for key, idx in (("target", cfg.options.target_index), ("surface", cfg.options.surface_index)):
        if idx is not None and not 0 <= idx < dim:
            problems.append(f"measure.{key}: {idx + 1} outside 1..{dim}")
    if cfg.model_type == "aggregate":
        for key in ("site_energies", "initial_positions", "initial_velocities"):
            v = getattr(cfg.setup, key)
            if v is not None and len(v) != dim:
                problems.append(f"aggregate.{key}: expected {dim} values, got {len(v)}")
        if cfg.setup.initial_positions is not None and cfg.setup.thermal:
            problems.append("aggregate.thermal: conflicts with initial_positions")
    elif cfg.sweep is not None:
        problems.append("sweep: only aggregate models can be swept")
    if problems:
        raise ValidationError(problems)


# --------------------------------------------------------------------------
# building runs


@dataclass
class RunInputs:
    model: object
    state: QuantumState
    classical: Optional[ClassicalState]
    grid: TimeGrid
    options: TrajectoryOptions
    seed: int


def build_model(cfg: RunConfig, seed: int):
    """Model plus initial classical state (``None`` for the three-level system)."""
    if cfg.model_type == "three_level":
        return ThreeLevelModel(cfg.three_level), None
    p = cfg.aggregate
    su = cfg.setup
    if su.site_energies is not None:
        energies = np.array([units.wavenumber_to_hartree(e) for e in su.site_energies])
    else:
        energies = sample_disorder(p, seed)
    model = AggregateModel(p, energies)
    if not p.mobile:
        X = p.equilibrium_positions() if su.initial_positions is None else units.angstrom_to_bohr(np.array(su.initial_positions))
        return model, ClassicalState(X, np.zeros(p.N), np.inf)
    if su.thermal:
        return model, sample_thermal(p, seed)
    X = p.equilibrium_positions() if su.initial_positions is None else units.angstrom_to_bohr(np.array(su.initial_positions))
    if su.initial_velocities is None:
        V = np.zeros(p.N)
    else:
        V = units.angstrom_to_bohr(np.array(su.initial_velocities)) / units.ps_to_au(1.0)
    return model, ClassicalState(X, V, p.mass)


def initial_state(spec: InitialStateSpec, model, classical: Optional[ClassicalState]) -> QuantumState:
    dim = model.dim
    if spec.kind == "site":
        c = np.zeros(dim, complex)
        c[spec.site] = 1.0
        return QuantumState(c)
    ref = np.zeros(dim, complex)
    ref[list(spec.sites)] = 1.0 if spec.weights is None else spec.weights
    if spec.kind == "superposition":
        return QuantumState.normalized(ref)
    X = classical.positions if classical is not None else None
    eig = spectral.eigensolve(model.hamiltonian(0.0, X))
    k = spec.index if spec.index is not None else int(np.argmax(np.abs(eig.vectors.conj().T @ ref)))
    return QuantumState(eig.vectors[:, k].copy())


def build_run(cfg: RunConfig, seed: Optional[int] = None) -> RunInputs:
    seed = cfg.seed if seed is None else seed
    model, classical = build_model(cfg, seed)
    state = initial_state(cfg.initial_state, model, classical)
    g = cfg.grid
    X = classical.positions if classical is not None else None
    t_end = g.to_internal(g.t_end)
    if g.dt is None:
        # shrink the automatic step so that it divides t_end exactly
        dt = t_end / math.ceil(t_end / dynamics.default_dt(model, X, g.dt_divisor))
    else:
        dt = g.to_internal(g.dt)
    grid = TimeGrid(dt, t_end, g.record_stride)
    o = cfg.options
    options = TrajectoryOptions(
        target_index=o.target_index,
        amp_floor=o.amp_floor,
        degeneracy_tol=o.degeneracy_tol,
        overlap_threshold=o.overlap_threshold,
        norm_drift_abort=o.norm_drift_abort,
        surface_policy=o.surface_policy,
        surface_index=o.surface_index,
        record_positions=o.record_positions,
        metadata={"seed": seed},
    )
    return RunInputs(model, state, classical, grid, options, seed)


def run_config(cfg: RunConfig, seed: Optional[int] = None):
    inputs = build_run(cfg, seed)
    return dynamics.run_trajectory(inputs.model, inputs.state, inputs.classical, inputs.grid, inputs.options)


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def with_sweep_point(cfg: RunConfig, sigma_E: float, alpha: float) -> RunConfig:
    """Copy of ``cfg`` with the aggregate's disorder width and Morse width replaced."""
    kwargs = {f.name: getattr(cfg.aggregate, f.name) for f in fields(AggregateParams) if f.init}
    kwargs.update(sigma_E=sigma_E, alpha=alpha)
    return replace(cfg, aggregate=AggregateParams(**kwargs))
