"""JSON run configuration: strict validation, canonical hashing, round trip.

A run is fully determined by its configuration plus the seed, so the
canonical hash is embedded in every output for provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from mfglab.errors import ConfigError
from mfglab.measures import TorusGrid, make_probe
from mfglab.mfg import SolverOptions, model_from_dict, model_to_dict
from mfglab.model import ModelSpec

DEFAULT_DELTAS = (0.4, 0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class RunConfig:
    model: dict = field(default_factory=lambda: model_to_dict(ModelSpec()))
    n_cells: int = 64
    deltas: tuple = DEFAULT_DELTAS
    dt: float = 5e-3
    tol_fp: float = 1e-6
    tol_tail: float = 1e-6
    max_iter: int = 500
    damping: str = "constant"
    omega: float = 1.0
    drift_bound: float = 2.0
    tol_conv: float = 2e-2
    check_tol: float = 1e-2
    seed: int = 0
    bump_kappa: float = 4.0
    bump_center: float = 0.5
    cosine_amplitude: float = 0.3

    def __post_init__(self):
        if self.n_cells < 4:
            raise ConfigError(f"n_cells must be >= 4, got {self.n_cells}")
        deltas = tuple(float(d) for d in self.deltas)
        if len(deltas) < 2:
            raise ConfigError("deltas must list at least two rungs")
        if any(d <= 0 for d in deltas):
            raise ConfigError(f"deltas must be positive, got {deltas}")
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError(f"deltas must be strictly decreasing, got {deltas}")
        object.__setattr__(self, "deltas", deltas)
        if not 0 < self.dt <= 0.1:
            raise ConfigError(f"dt must be in (0, 0.1], got {self.dt}")
        for name in ("tol_fp", "tol_tail", "tol_conv", "check_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.damping not in ("constant", "harmonic"):
            raise ConfigError(f"unknown damping {self.damping!r}")
        if not 0 < self.omega <= 1:
            raise ConfigError(f"omega must be in (0, 1], got {self.omega}")
        if self.drift_bound <= 0:
            raise ConfigError(f"drift_bound must be > 0, got {self.drift_bound}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        try:
            model_from_dict(self.model)
        except Exception as exc:
            raise ConfigError(f"invalid model block: {exc}") from exc

    # -- construction ---------------------------------------------------

    @staticmethod
    def from_dict(data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"config must be a JSON object, got {type(data).__name__}")
        known = set(RunConfig.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return RunConfig(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def load(path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return RunConfig.from_dict(data)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["deltas"] = list(self.deltas)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def canonical_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    # -- derived objects --------------------------------------------------

    def build_model(self) -> ModelSpec:
        return model_from_dict(self.model)

    def build_grid(self) -> TorusGrid:
        return TorusGrid(self.n_cells)

    def build_panel(self) -> dict:
        grid = self.build_grid()
        return {
            "uniform": make_probe(grid, "uniform"),
            "bump": make_probe(grid, "bump", kappa=self.bump_kappa,
                               c=self.bump_center),
            "two_bump": make_probe(grid, "two_bump"),
            "cosine": make_probe(grid, "cosine", a=self.cosine_amplitude),
        }

    def solver_options(self) -> SolverOptions:
        return SolverOptions(dt=self.dt, tol_fp=self.tol_fp,
                             tol_tail=self.tol_tail, max_iter=self.max_iter,
                             damping=self.damping, omega=self.omega,
                             drift_bound=self.drift_bound)
