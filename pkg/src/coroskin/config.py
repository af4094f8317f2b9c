"""Pipeline configuration: one YAML file with a section per stage.

Precedence is command-line overrides > file > defaults.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .dynamics import EnergyWeights, MechanicalConstraints
from .errors import ConfigError, InputError
from .geometry import MeshSizingParams
from .phantoms import KINDS, MODES, PhantomSpec
from .volumetric import FrangiParams


@dataclass
class SegmentationParams:
    threshold: float = 0.05
    min_branch_mm: float = None

    def validate(self):
        if not 0 <= self.threshold < 1:
            raise ConfigError(f"segmentation.threshold must lie in [0, 1), got {self.threshold}")
        if self.min_branch_mm is not None and not self.min_branch_mm > 0:
            raise ConfigError(f"segmentation.min_branch_mm must be positive, got {self.min_branch_mm}")
        return self


@dataclass
class SurfaceParams:
    sections_per_mm: float = 2.0
    h_min_mm: float = None  # None: a fifth of the mean radius
    h_max_mm: float = None  # None: half the mean radius
    alpha_sizing: float = 1.0

    def validate(self):
        if not self.sections_per_mm > 0:
            raise ConfigError(f"surface.sections_per_mm must be positive, got {self.sections_per_mm}")
        for name in ("h_min_mm", "h_max_mm"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"surface.{name} must be positive, got {v}")
        if self.h_min_mm is not None and self.h_max_mm is not None and self.h_min_mm > self.h_max_mm:
            raise ConfigError("surface.h_min_mm exceeds surface.h_max_mm")
        if not self.alpha_sizing > 0:
            raise ConfigError(f"surface.alpha_sizing must be positive, got {self.alpha_sizing}")
        return self

    def sizing(self, mean_radius):
        return MeshSizingParams(
            self.h_min_mm if self.h_min_mm is not None else mean_radius / 5,
            self.h_max_mm if self.h_max_mm is not None else mean_radius / 2,
            self.alpha_sizing,
        ).validate()


@dataclass
class WeightParams:
    handle_segment_mm: float = 5.0
    kkt_tol: float = 1e-8
    max_iter: int = 200

    def validate(self):
        if not self.handle_segment_mm > 0:
            raise ConfigError(f"weights.handle_segment_mm must be positive, got {self.handle_segment_mm}")
        if not self.kkt_tol > 0:
            raise ConfigError(f"weights.kkt_tol must be positive, got {self.kkt_tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"weights.max_iter must be a positive integer, got {self.max_iter}")
        return self


@dataclass
class SequenceParams:
    n_phases: int = 20
    subdivision: int = 2
    mode: str = "bend_cycle"
    amplitude: float = None
    regularize: bool = True

    def validate(self):
        if int(self.n_phases) != self.n_phases or self.n_phases < 2:
            raise ConfigError(f"sequence.n_phases must be an integer >= 2, got {self.n_phases}")
        if int(self.subdivision) != self.subdivision or self.subdivision < 1:
            raise ConfigError(f"sequence.subdivision must be an integer >= 1, got {self.subdivision}")
        if self.mode not in MODES:
            raise ConfigError(f"sequence.mode must be one of {MODES}, got {self.mode!r}")
        return self


@dataclass
class ValidationParams:
    voxel_mm: float = 0.25
    gate_mm: float = 5.0
    figures: bool = True

    def validate(self):
        for name in ("voxel_mm", "gate_mm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"validation.{name} must be positive, got {getattr(self, name)}")
        return self


@dataclass
class SimulationParams:
    n_ticks: int = 100
    advance_mm: float = 0.25
    dt_s: float = 0.05
    speed_mm_s: float = 20.0
    inject_every: int = 5
    inject_count: int = 20
    wire_nodes: int = 10
    segment_mm: float = 0.5
    tip_radius_mm: float = 0.3

    def validate(self):
        for name in ("n_ticks", "inject_every", "inject_count"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ConfigError(f"simulation.{name} must be a nonnegative integer, got {v}")
        if int(self.wire_nodes) != self.wire_nodes or self.wire_nodes < 2:
            raise ConfigError(f"simulation.wire_nodes must be an integer >= 2, got {self.wire_nodes}")
        for name in ("dt_s", "segment_mm", "tip_radius_mm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"simulation.{name} must be positive, got {getattr(self, name)}")
        for name in ("advance_mm", "speed_mm_s"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"simulation.{name} must be nonnegative, got {getattr(self, name)}")
        return self


SECTIONS = {
    "phantom": PhantomSpec,
    "frangi": FrangiParams,
    "segmentation": SegmentationParams,
    "surface": SurfaceParams,
    "weights": WeightParams,
    "sequence": SequenceParams,
    "constraints": MechanicalConstraints,
    "energy": EnergyWeights,
    "validation": ValidationParams,
    "simulation": SimulationParams,
}


def _default_phantom():
    return PhantomSpec("y_branch")


@dataclass
class PipelineConfig:
    seed: int = 0
    strict: bool = False
    phantom: PhantomSpec = field(default_factory=_default_phantom)
    frangi: FrangiParams = field(default_factory=FrangiParams)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    surface: SurfaceParams = field(default_factory=SurfaceParams)
    weights: WeightParams = field(default_factory=WeightParams)
    sequence: SequenceParams = field(default_factory=SequenceParams)
    constraints: MechanicalConstraints = field(default_factory=MechanicalConstraints)
    energy: EnergyWeights = field(default_factory=EnergyWeights)
    validation: ValidationParams = field(default_factory=ValidationParams)
    simulation: SimulationParams = field(default_factory=SimulationParams)

    def validate(self):
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.phantom.kind not in KINDS:
            raise ConfigError(f"phantom.kind must be one of {KINDS}, got {self.phantom.kind!r}")
        for name in SECTIONS:
            try:
                getattr(self, name).validate()
            except ConfigError:
                raise
            except InputError as exc:
                raise ConfigError(f"{name}: {exc}") from exc
        self.constraints.strict = bool(self.strict)
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _build_section(name, values):
    cls = SECTIONS[name]
    if not isinstance(values, dict):
        raise ConfigError(f"config section '{name}' must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) in section '{name}': {', '.join(unknown)}")
    base = _default_phantom() if name == "phantom" else cls()
    return dataclasses.replace(base, **values)


def config_from_dict(d):
    d = dict(d or {})
    unknown = sorted(set(d) - set(SECTIONS) - {"seed", "strict"})
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    kw = {k: _build_section(k, v) for k, v in d.items() if k in SECTIONS}
    for k in ("seed", "strict"):
        if k in d:
            kw[k] = d[k]
    try:
        return PipelineConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _coerce(text):
    return yaml.safe_load(text)


def apply_overrides(d, overrides):
    """Apply ``section.field=value`` strings (values parsed as YAML scalars)."""
    d = {k: (dict(v) if isinstance(v, dict) else v) for k, v in (d or {}).items()}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.field=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) == 1:
            d[parts[0]] = _coerce(value)
        elif len(parts) == 2:
            d.setdefault(parts[0], {})
            if not isinstance(d[parts[0]], dict):
                raise ConfigError(f"config section '{parts[0]}' must be a mapping")
            d[parts[0]][parts[1]] = _coerce(value)
        else:
            raise ConfigError(f"override key {key!r} has too many parts")
    return d


def load_config(path=None, overrides=None, seed=None, strict=None):
    d = {}
    if path is not None:
        try:
            with open(path) as fh:
                d = yaml.safe_load(fh) or {}
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
    d = apply_overrides(d, overrides)
    if seed is not None:
        d["seed"] = seed
    if strict:
        d["strict"] = True
    return config_from_dict(d).validate()


def dump_config(cfg, path=None):
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
