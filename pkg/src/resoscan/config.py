"""Run configuration: one YAML file, validated before any compute starts.

Sections mirror the pipeline stages (system, potential, packet, grid,
propagation, window, fit, stationary, output).  Every quantity carries
the package-wide units: MeV, fm, seconds.  Parsing is strict - unknown
keys and malformed values fail with their dotted field path - because
runs are minutes long and a typo must not surface after the propagation
finished.  Emission uses plain-float scalars so parse(emit(config))
reproduces the configuration exactly.
"""

from __future__ import annotations

import copy
import re
from dataclasses import asdict, dataclass, field
from typing import Optional

import yaml

_BARE_EXPONENT = re.compile(r"[+-]?\d+(\.\d*)?[eE][+-]?\d+")

from .errors import ValidationError
from .potential import (
    PotentialModel,
    SurrogatePotential,
    SystemParams,
    default_surrogate,
    load_tabulated,
)

_SURROGATE_DEFAULT = default_surrogate()


@dataclass(frozen=True)
class SystemSection:
    reduced_mass_mev: float = SystemParams.reduced_mass_mev
    charge_product: float = SystemParams.charge_product


@dataclass(frozen=True)
class PotentialSection:
    kind: str = "surrogate"                     # surrogate | table
    v0_mev: float = _SURROGATE_DEFAULT.v0_mev
    radius_fm: float = _SURROGATE_DEFAULT.radius_fm
    diffuseness_fm: float = _SURROGATE_DEFAULT.diffuseness_fm
    coulomb_radius_fm: float = _SURROGATE_DEFAULT.coulomb_radius_fm
    table_path: Optional[str] = None


@dataclass(frozen=True)
class PacketSection:
    r0_fm: float = 400.0
    sigma_fm: float = 10.0
    e0_mev: float = 6.0


@dataclass(frozen=True)
class GridSection:
    r_max_fm: float = 1000.0
    n_points: int = 2048


@dataclass(frozen=True)
class PropagationSection:
    dt_s: float = 1e-22
    stop_radius_fm: float = 25.0                # recoil radius triggering snapshots
    exterior_fm: float = 10.0                   # body tracking ignores R below this
    tolerance: float = 1e-15
    max_steps: int = 100_000


@dataclass(frozen=True)
class WindowSection:
    epsilon_mev: tuple = (0.025, 0.001)         # half widths; 2 eps = 50 and 2 keV
    e_lo_mev: float = 3.0
    e_hi_mev: float = 9.0
    fine_half_span_mev: float = 0.35            # fine layouts center on coarse peaks
    analysis_r_max_fm: tuple = (1000.0, 3000.0, 7000.0)


@dataclass(frozen=True)
class FitSection:
    with_background: bool = False
    window_fwhm_factor: float = 5.0
    pade_orders: tuple = (3, 4)


@dataclass(frozen=True)
class StationarySection:
    r_match_fm: float = 25.0
    dr_fm: float = 0.01
    pole_orders: tuple = (2, 2)
    scan_half_span_mev: float = 0.35            # phase/pole hunt around window peaks


@dataclass(frozen=True)
class RunConfig:
    system: SystemSection = field(default_factory=SystemSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    j_list: tuple = (0, 2, 4)
    packet: PacketSection = field(default_factory=PacketSection)
    grid: GridSection = field(default_factory=GridSection)
    propagation: PropagationSection = field(default_factory=PropagationSection)
    window: WindowSection = field(default_factory=WindowSection)
    fit: FitSection = field(default_factory=FitSection)
    stationary: StationarySection = field(default_factory=StationarySection)
    out_dir: str = "runs/default"
    seed: int = 20260815                        # synthetic-noise trials only

    def system_params(self) -> SystemParams:
        return SystemParams(
            reduced_mass_mev=self.system.reduced_mass_mev,
            charge_product=self.system.charge_product,
        )

    def potential_model(self) -> PotentialModel:
        if self.potential.kind == "surrogate":
            return SurrogatePotential(
                v0_mev=self.potential.v0_mev,
                radius_fm=self.potential.radius_fm,
                diffuseness_fm=self.potential.diffuseness_fm,
                coulomb_radius_fm=self.potential.coulomb_radius_fm,
            )
        return load_tabulated(self.potential.table_path)


_SECTIONS = {
    "system": SystemSection,
    "potential": PotentialSection,
    "packet": PacketSection,
    "grid": GridSection,
    "propagation": PropagationSection,
    "window": WindowSection,
    "fit": FitSection,
    "stationary": StationarySection,
}

_LIST_FIELDS = {
    "j_list",
    "epsilon_mev",
    "analysis_r_max_fm",
    "pade_orders",
    "pole_orders",
}


def _coerce(path: str, value, target):
    """Coerce a parsed YAML scalar/list onto the dataclass field's type."""
    if target is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if target is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if target is bool:
        if not isinstance(value, bool):
            raise ValidationError(f"{path}: expected true/false, got {value!r}")
        return value
    return value


def _build_section(name: str, cls, data: dict):
    defaults = cls()
    if not isinstance(data, dict):
        raise ValidationError(f"{name}: expected a mapping, got {type(data).__name__}")
    unknown = set(data) - set(defaults.__dataclass_fields__)
    if unknown:
        raise ValidationError(f"{name}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, fdef in defaults.__dataclass_fields__.items():
        if key not in data:
            continue
        path = f"{name}.{key}"
        value = data[key]
        if key in _LIST_FIELDS:
            if not isinstance(value, (list, tuple)) or not value:
                raise ValidationError(f"{path}: expected a non-empty list")
            elem = int if key in ("j_list", "pade_orders", "pole_orders") else float
            kwargs[key] = tuple(_coerce(f"{path}[{i}]", v, elem) for i, v in enumerate(value))
        else:
            kwargs[key] = _coerce(path, value, type(getattr(defaults, key)) if getattr(defaults, key) is not None else str)
    return cls(**{**{k: getattr(defaults, k) for k in defaults.__dataclass_fields__}, **kwargs})


def from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from parsed YAML."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError("configuration root must be a mapping")
    unknown = set(data) - (set(_SECTIONS) | {"j_list", "out_dir", "seed"})
    if unknown:
        raise ValidationError(f"unknown top-level keys {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(name, cls, data[name])
    if "j_list" in data:
        value = data["j_list"]
        if not isinstance(value, (list, tuple)) or not value:
            raise ValidationError("j_list: expected a non-empty list")
        kwargs["j_list"] = tuple(_coerce(f"j_list[{i}]", v, int) for i, v in enumerate(value))
    if "out_dir" in data:
        if not isinstance(data["out_dir"], str) or not data["out_dir"]:
            raise ValidationError("out_dir: expected a non-empty string")
        kwargs["out_dir"] = data["out_dir"]
    if "seed" in data:
        kwargs["seed"] = _coerce("seed", data["seed"], int)
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Cross-field checks; raises ValidationError with the offending path."""
    def require(cond: bool, path: str, message: str):
        if not cond:
            raise ValidationError(f"{path}: {message}")

    require(cfg.system.reduced_mass_mev > 0.0, "system.reduced_mass_mev", "must be positive")
    require(cfg.system.charge_product >= 0.0, "system.charge_product", "must be non-negative")
    require(cfg.potential.kind in ("surrogate", "table"), "potential.kind",
            f"must be 'surrogate' or 'table', got {cfg.potential.kind!r}")
    if cfg.potential.kind == "table":
        require(bool(cfg.potential.table_path), "potential.table_path",
                "required when potential.kind is 'table'")
    else:
        require(cfg.potential.v0_mev > 0.0, "potential.v0_mev", "must be positive")
        require(cfg.potential.radius_fm > 0.0, "potential.radius_fm", "must be positive")
        require(cfg.potential.diffuseness_fm > 0.0, "potential.diffuseness_fm", "must be positive")
        require(cfg.potential.coulomb_radius_fm > 0.0, "potential.coulomb_radius_fm", "must be positive")
    require(all(j >= 0 for j in cfg.j_list), "j_list", "partial waves must be >= 0")
    require(len(set(cfg.j_list)) == len(cfg.j_list), "j_list", "partial waves must be distinct")
    require(cfg.packet.r0_fm > 0.0, "packet.r0_fm", "must be positive")
    require(cfg.packet.sigma_fm > 0.0, "packet.sigma_fm", "must be positive")
    require(cfg.packet.e0_mev > 0.0, "packet.e0_mev", "must be positive")
    require(cfg.grid.r_max_fm > 0.0, "grid.r_max_fm", "must be positive")
    require(cfg.grid.n_points >= 2, "grid.n_points", "must be >= 2")
    require(cfg.packet.r0_fm < cfg.grid.r_max_fm, "packet.r0_fm",
            f"must lie inside the grid (r_max = {cfg.grid.r_max_fm} fm)")
    require(cfg.propagation.dt_s > 0.0, "propagation.dt_s", "must be positive")
    require(0.0 < cfg.propagation.tolerance <= 1e-8, "propagation.tolerance",
            "must lie in (0, 1e-8]")
    require(cfg.propagation.max_steps >= 1, "propagation.max_steps", "must be >= 1")
    require(cfg.propagation.stop_radius_fm > 0.0, "propagation.stop_radius_fm", "must be positive")
    require(0.0 < cfg.propagation.exterior_fm < cfg.propagation.stop_radius_fm,
            "propagation.exterior_fm",
            "must lie strictly between 0 and propagation.stop_radius_fm")
    require(all(e > 0.0 for e in cfg.window.epsilon_mev), "window.epsilon_mev",
            "half widths must be positive")
    require(cfg.window.e_lo_mev > 0.0, "window.e_lo_mev", "must be positive")
    require(cfg.window.e_hi_mev > cfg.window.e_lo_mev + 2.0 * min(cfg.window.epsilon_mev),
            "window.e_hi_mev", "range must hold at least one bin")
    require(cfg.window.fine_half_span_mev > 0.0, "window.fine_half_span_mev", "must be positive")
    require(all(r > 0.0 for r in cfg.window.analysis_r_max_fm), "window.analysis_r_max_fm",
            "radii must be positive")
    require(all(r >= cfg.grid.r_max_fm for r in cfg.window.analysis_r_max_fm),
            "window.analysis_r_max_fm",
            f"analysis grids cannot be smaller than the propagation grid "
            f"({cfg.grid.r_max_fm} fm)")
    require(cfg.fit.window_fwhm_factor > 0.0, "fit.window_fwhm_factor", "must be positive")
    require(len(cfg.fit.pade_orders) == 2 and cfg.fit.pade_orders[0] >= 0
            and cfg.fit.pade_orders[1] >= 1, "fit.pade_orders", "need (L >= 0, M >= 1)")
    require(cfg.stationary.r_match_fm > 0.0, "stationary.r_match_fm", "must be positive")
    require(cfg.stationary.dr_fm > 0.0, "stationary.dr_fm", "must be positive")
    require(len(cfg.stationary.pole_orders) == 2 and cfg.stationary.pole_orders[0] >= 0
            and cfg.stationary.pole_orders[1] >= 1, "stationary.pole_orders",
            "need (L >= 0, M >= 1)")
    require(cfg.stationary.scan_half_span_mev > 0.0, "stationary.scan_half_span_mev",
            "must be positive")


def to_dict(cfg: RunConfig) -> dict:
    """Plain-scalar dict (tuples become lists) suitable for YAML emission."""
    def plain(obj):
        if isinstance(obj, dict):
            return {k: plain(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [plain(v) for v in obj]
        return obj

    return plain(asdict(cfg))


def emit(cfg: RunConfig) -> str:
    """YAML text whose parse reproduces cfg exactly (plain-float scalars)."""
    return yaml.safe_dump(to_dict(cfg), default_flow_style=False, sort_keys=False)


def apply_override(data: dict, assignment: str) -> dict:
    """Apply one 'dotted.path=value' override; value is parsed as YAML."""
    path, sep, raw = assignment.partition("=")
    if not sep or not path.strip():
        raise ValidationError(
            f"override {assignment!r} is not of the form dotted.path=value"
        )
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ValidationError(f"override {path}: unparseable value {raw!r}: {exc}") from exc
    if isinstance(value, str) and _BARE_EXPONENT.fullmatch(value):
        # YAML 1.1 reads dot-less scientific notation ('1e-12') as a string
        value = float(value)
    out = copy.deepcopy(data)
    node = out
    keys = [k for k in path.strip().split(".") if k]
    for key in keys[:-1]:
        nxt = node.get(key)
        if nxt is None:
            nxt = {}
            node[key] = nxt
        if not isinstance(nxt, dict):
            raise ValidationError(f"override {path}: {key!r} is not a section")
        node = nxt
    node[keys[-1]] = value
    return out


def load_config(path=None, overrides=()) -> RunConfig:
    """Parse the YAML file (or defaults when None), apply overrides, validate."""
    if path is None:
        data: dict = {}
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except FileNotFoundError:
            raise
        except yaml.YAMLError as exc:
            raise ValidationError(f"{path}: not valid YAML: {exc}") from exc
        if data is None:
            data = {}
    for assignment in overrides:
        data = apply_override(data, assignment)
    return from_dict(data)
