"""Run configuration: one YAML/JSON file plus dotted-path flag overrides."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

COMMANDS = ("coeffs", "spectrum", "sweep", "validate")
FAULTS = (None, "non_transverse_eps")
THREADS_ENV = "PFLAB_THREADS"


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    n_radial: int = 5
    n_polar: int = 3
    n_azimuthal: int = 2
    cutoff_kind: str = "smoothstep"
    support_radius: float = 2.0
    plateau_radius: float = 1.0
    phi_offset: float = 0.0

    def to_spec(self):
        from .field import CutoffProfile, GridSpec
        if self.cutoff_kind == "sharp":
            profile = CutoffProfile.sharp(self.plateau_radius)
        else:
            profile = CutoffProfile(self.cutoff_kind, self.support_radius, self.plateau_radius)
        return GridSpec(self.n_radial, self.n_polar, self.n_azimuthal, profile, self.phi_offset)


@dataclass
class MCConfig:
    n_samples: int = 100_000
    seed: int = 20240601
    n_streams: int = 4


@dataclass
class QuadratureConfig:
    resolution: int = 16
    c3_resolution: int = 6


@dataclass
class SolverSection:
    max_iterations: int = 5000
    krylov_dimension: int = 40
    residual_tolerance: float = 1e-10
    dense_threshold: int = 1500
    restarts: int = 3
    seed: int = 0
    perturbation: float = 1e-3

    def to_solver(self):
        from .eigen import SolverConfig
        return SolverConfig(**asdict(self))


@dataclass
class RunConfig:
    command: str = "validate"
    grid: GridConfig = field(default_factory=GridConfig)
    n_max: int = 3
    max_dimension: int = 1_000_000
    alphas: list = field(default_factory=lambda: [0.02, 0.04, 0.08, 0.16])
    mc: MCConfig = field(default_factory=MCConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    solver: SolverSection = field(default_factory=SolverSection)
    output_dir: str = "pflab_out"
    threads: int | None = None
    write_vector: bool = False
    fault_injection: str | None = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.grid.cutoff_kind not in ("smoothstep", "sharp"):
            raise ConfigError(f"unknown cutoff_kind {self.grid.cutoff_kind!r}")
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1")
        if min(self.grid.n_radial, self.grid.n_polar, self.grid.n_azimuthal) < 1:
            raise ConfigError("grid sizes must be positive")
        if not isinstance(self.alphas, list) or not all(isinstance(a, (int, float)) for a in self.alphas):
            raise ConfigError("alphas must be a list of numbers")
        if any(a < 0 for a in self.alphas):
            raise ConfigError("alphas must be non-negative")
        if self.fault_injection not in FAULTS:
            raise ConfigError(f"fault_injection must be one of {FAULTS}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Digest of everything that can change numerical output."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump({**self.to_dict(), "config_hash": self.hash()}, fh, sort_keys=True)


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(where + k for k in unknown)}")
    defaults = cls()
    kwargs = {}
    for name, value in data.items():
        sub = getattr(defaults, name)
        if is_dataclass(sub):
            kwargs[name] = _build(type(sub), value, f"{where}{name}.")
        else:
            if isinstance(sub, bool) and not isinstance(value, bool):
                raise ConfigError(f"{where}{name}: expected a boolean")
            if isinstance(sub, int) and not isinstance(sub, bool) and isinstance(value, float) and value.is_integer():
                value = int(value)
            if isinstance(sub, float) and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if isinstance(sub, float) and isinstance(value, str):
                # YAML 1.1 reads exponents without a dot (1e-10) as strings
                try:
                    value = float(value)
                except ValueError:
                    raise ConfigError(f"{where}{name}: expected a number, got {value!r}") from None
            kwargs[name] = value
    return cls(**kwargs)


def apply_override(data: dict, assignment: str) -> None:
    """Set ``a.b.c=value`` in a nested dict; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except ValueError:
        value = None
    try:
        if value is None:
            value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a scalar")
    node[parts[-1]] = value


def load_config(path=None, overrides=(), command: str | None = None, env=None) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            data = yaml.safe_load(text) or {}  # JSON is a YAML subset
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    data = copy.deepcopy(data)
    for ov in overrides:
        apply_override(data, ov)
    if command is not None:
        data["command"] = command
    if "threads" not in data and env is not None and env.get(THREADS_ENV):
        try:
            data["threads"] = int(env[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    try:
        cfg = _build(RunConfig, data, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()
