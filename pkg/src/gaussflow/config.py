"""Run configuration: loading, validation and construction of run inputs."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry
from .flow import FlowConfig
from .orlicz import OrliczClass, varphi_from_config
from .sphere_grid import DEFAULT_ACCURACY, GridError, GridS1, GridS2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dimension: int
    grid: dict
    initial: dict
    f: dict
    varphi: dict
    flow: dict = field(default_factory=dict)
    output: str = "out"
    seed: int = 0
    snapshot_every: int = 0
    verify: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_p(self, p):
        return dataclasses.replace(self, varphi={"family": "power", "p": float(p)})


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)} - {"base_dir"}
_FLOW_FIELDS = {f.name for f in dataclasses.fields(FlowConfig)}


def config_from_dict(data, base_dir="."):
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"dimension", "grid", "initial", "f", "varphi"} - set(data)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    cfg = RunConfig(**data, base_dir=Path(base_dir))
    if cfg.dimension not in (2, 3):
        raise ConfigError(f"dimension must be 2 or 3, got {cfg.dimension}")
    bad_flow = set(cfg.flow) - _FLOW_FIELDS
    if bad_flow:
        raise ConfigError(f"unknown flow keys: {sorted(bad_flow)}")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data, path.parent)


def build_grid(cfg):
    g = cfg.grid
    acc = g.get("accuracy", DEFAULT_ACCURACY)
    try:
        if cfg.dimension == 2:
            return GridS1(g["N"], acc)
        return GridS2(g["n_theta"], g["n_phi"], acc)
    except KeyError as exc:
        raise ConfigError(f"grid block is missing {exc}") from None
    except GridError as exc:
        raise ConfigError(f"invalid grid: {exc}") from None


def _polar_angle(grid):
    if isinstance(grid, GridS1):
        return grid.theta
    return np.broadcast_to(grid.theta[:, None], grid.shape)


def _load_table(grid, path, base_dir):
    path = Path(path)
    if not path.is_absolute():
        path = Path(base_dir) / path
    if path.suffix == ".npy":
        values = np.load(path)
    elif path.suffix == ".json":
        data = json.loads(path.read_text())
        values = np.asarray(data["h"] if isinstance(data, dict) else data, dtype=float)
    else:
        values = np.loadtxt(path, delimiter=",")
    try:
        return grid.check_field(np.reshape(values, grid.shape))
    except ValueError as exc:
        raise ConfigError(f"table {path} has {np.size(values)} values, grid needs {grid.size}") from exc


def initial_body(grid, spec, base_dir="."):
    """Support function of the configured initial body."""
    kind = spec.get("type")
    x = grid.points
    if kind == "round":
        return np.full(grid.shape, float(spec.get("r", 1.0)))
    if kind in ("ellipse", "ellipsoid"):
        axes = np.asarray(spec["axes"], dtype=float)
        if axes.shape != (grid.dim,) or np.any(axes <= 0):
            raise ConfigError(f"{kind} needs {grid.dim} positive semi-axes")
        return np.sqrt(np.sum((axes * x) ** 2, axis=-1))
    if kind == "perturbed":
        r, k, eps = float(spec.get("r", 1.0)), int(spec["mode"]), float(spec["amplitude"])
        if k % 2:
            raise ConfigError("perturbation mode must be even for an origin-symmetric body")
        return r * (1.0 + eps * np.cos(k * _polar_angle(grid)))
    if kind == "table":
        return _load_table(grid, spec["path"], base_dir)
    raise ConfigError(f"unknown initial body type {kind!r}")


def density(grid, spec, base_dir="."):
    """The prescribed function f on the grid nodes.

    ``cosine`` sums ``a_k cos(k theta)`` over even k, theta the polar angle
    (on S^2, ``cos(2 theta) = 2 x3^2 - 1``).
    """
    kind = spec.get("type")
    if kind == "constant":
        return np.full(grid.shape, float(spec.get("value", 1.0)))
    if kind == "cosine":
        theta = _polar_angle(grid)
        out = np.zeros(grid.shape)
        for k, a in spec["coefficients"].items():
            k = int(k)
            if k % 2:
                raise ConfigError(f"cosine mode {k} is odd; f must be even")
            out = out + float(a) * np.cos(k * theta)
        return out
    if kind == "table":
        return _load_table(grid, spec["path"], base_dir)
    raise ConfigError(f"unknown f type {kind!r}")


def build_run(cfg):
    """Validated ``(grid, h0, f, spec, flow_config)`` for a run configuration."""
    grid = build_grid(cfg)
    try:
        spec = varphi_from_config(cfg.varphi, cfg.dimension)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid varphi block: {exc}") from None
    if spec.classify() is OrliczClass.NEITHER:
        raise ConfigError(f"varphi {cfg.varphi} satisfies neither assumption (A) or (B)")
    try:
        flow_cfg = FlowConfig(**cfg.flow)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid flow block: {exc}") from None
    try:
        h0 = initial_body(grid, cfg.initial, cfg.base_dir)
        f = density(grid, cfg.f, cfg.base_dir)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from None

    def odd_part(v):
        return np.max(np.abs(v - grid.antipodal_symmetrize(v))) / np.max(np.abs(v))

    if not np.all(h0 > 0):
        raise ConfigError("initial body must have a positive support function")
    if odd_part(h0) > 1e-10:
        raise ConfigError("initial body must be origin-symmetric")
    report = geometry.check_convex(grid, h0, flow_cfg.convexity_floor)
    if not report.ok:
        raise ConfigError(f"initial body is not uniformly convex (min radius {report.min_eig:.3g})")
    if not np.all(f > 0):
        raise ConfigError("f must be positive")
    if odd_part(f) > 1e-10:
        raise ConfigError("f must be even")
    return grid, h0, f, spec, flow_cfg
