"""Run configuration: JSON documents, CLI overrides and validation."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cable import CoaxCableParams, ReluctivityCurve, build_coax_cable
from .engine import SolverVariant
from .parallel import default_workers
from .problem import PeriodicProblem, build_dae_pair, build_scalar_test, load_problem

BUILTIN_PROBLEMS = ("coax", "coax_linear", "scalar", "dae_pair")

DEFAULT_COMPARE = ("PP_IC", "PP_PC_fixedpoint", "PP_PC_multiharmonic")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "coax"
    problem_params: dict = field(default_factory=dict)
    mass: str | None = None
    stiffness: str | None = None
    excitation: dict | str | None = None
    N: int = 20
    fine_steps: int = 100
    variant: str = SolverVariant.PP_PC_MULTIHARMONIC.value
    variants: list[str] = field(default_factory=lambda: list(DEFAULT_COMPARE))
    tol: float = 1e-6
    kmax: int = 200
    out: str = "out"
    workers: int = field(default_factory=default_workers)
    real_symmetry: bool = True
    frozen_reference: str | list | None = "zero"
    fixed_point_tol: float = 1e-12
    fixed_point_max_sweeps: int = 100_000
    max_periods: int = 10_000
    plots: bool = True

    def validate(self) -> "RunConfig":
        if self.problem not in BUILTIN_PROBLEMS + ("files",):
            raise ConfigError(f"problem: unknown name {self.problem!r}, expected one of "
                              f"{list(BUILTIN_PROBLEMS) + ['files']}")
        if self.problem == "files" and not (self.mass and self.stiffness and self.excitation):
            raise ConfigError("problem: 'files' needs mass, stiffness and excitation")
        if not self.tol > 0:
            raise ConfigError(f"tol: must be positive, got {self.tol}")
        if self.kmax < 1:
            raise ConfigError(f"kmax: must be at least 1, got {self.kmax}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be at least 1, got {self.workers}")
        if self.N < 2:
            raise ConfigError(f"N: must be at least 2, got {self.N}")
        if self.fine_steps < 1:
            raise ConfigError(f"fine_steps: must be at least 1, got {self.fine_steps}")
        try:
            self.variant = SolverVariant.parse(self.variant).value
            self.variants = [SolverVariant.parse(v).value for v in self.variants]
        except ValueError as exc:
            raise ConfigError(f"variant: {exc}") from exc
        used = {self.variant, *self.variants}
        if SolverVariant.PP_PC_MULTIHARMONIC.value in used and self.N % 2:
            raise ConfigError(f"N: must be even for {SolverVariant.PP_PC_MULTIHARMONIC.value}, got {self.N}")
        return self

    def frozen_state(self, dim: int) -> np.ndarray | None:
        if self.frozen_reference in (None, "zero"):
            return None
        ref = np.asarray(self.frozen_reference, dtype=float)
        if ref.shape != (dim,):
            raise ConfigError(f"frozen_reference: expected {dim} entries, got {ref.shape}")
        return ref


# JSON layout -> RunConfig attribute
_TOP_KEYS = {"problem", "mesh", "variant", "variants", "tol", "kmax", "out", "workers",
             "real_symmetry", "frozen_reference", "fixed_point", "max_periods", "plots"}
_PROBLEM_KEYS = {"name", "params", "mass", "stiffness", "excitation"}
_MESH_KEYS = {"N", "fine_steps"}
_FIXED_POINT_KEYS = {"tol", "max_sweeps"}


def _reject_unknown(section: str, doc: dict, allowed: set) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {', '.join(unknown)}")


def config_from_dict(doc: dict) -> RunConfig:
    _reject_unknown("config", doc, _TOP_KEYS)
    cfg = RunConfig()
    problem = doc.get("problem", {})
    if isinstance(problem, str):
        problem = {"name": problem}
    _reject_unknown("problem", problem, _PROBLEM_KEYS)
    cfg.problem = problem.get("name", "files" if "mass" in problem else cfg.problem)
    cfg.problem_params = dict(problem.get("params", {}))
    cfg.mass = problem.get("mass")
    cfg.stiffness = problem.get("stiffness")
    cfg.excitation = problem.get("excitation")
    mesh = doc.get("mesh", {})
    _reject_unknown("mesh", mesh, _MESH_KEYS)
    cfg.N = int(mesh.get("N", cfg.N))
    cfg.fine_steps = int(mesh.get("fine_steps", cfg.fine_steps))
    fp = doc.get("fixed_point", {})
    _reject_unknown("fixed_point", fp, _FIXED_POINT_KEYS)
    cfg.fixed_point_tol = float(fp.get("tol", cfg.fixed_point_tol))
    cfg.fixed_point_max_sweeps = int(fp.get("max_sweeps", cfg.fixed_point_max_sweeps))
    for key, cast in (("variant", str), ("tol", float), ("kmax", int), ("out", str),
                      ("workers", int), ("real_symmetry", bool), ("max_periods", int),
                      ("plots", bool)):
        if key in doc:
            setattr(cfg, key, cast(doc[key]))
    if "variants" in doc:
        cfg.variants = list(doc["variants"])
    if "frozen_reference" in doc:
        cfg.frozen_reference = doc["frozen_reference"]
    return cfg


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Load a JSON config (or defaults) and apply CLI overrides on top."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = config_from_dict(doc)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown keys in overrides: {key}")
        setattr(cfg, key, copy.deepcopy(value))
    return cfg.validate()


def _curve(spec) -> ReluctivityCurve:
    if isinstance(spec, ReluctivityCurve):
        return spec
    spec = dict(spec)
    if spec.get("model") == "constant":
        if "mu_r" in spec:
            return ReluctivityCurve.relative_permeability(float(spec["mu_r"]))
        return ReluctivityCurve.constant(float(spec["nu"]))
    return ReluctivityCurve(float(spec["k1"]), float(spec["k2"]), float(spec["k3"]))


def coax_params(params: dict) -> CoaxCableParams:
    allowed = {"radii", "conductivities", "curves", "source_region", "current", "frequency", "n_r"}
    _reject_unknown("problem.params", params, allowed)
    kw = dict(params)
    if "radii" in kw:
        kw["radii"] = tuple(float(r) for r in kw["radii"])
    if "conductivities" in kw:
        kw["conductivities"] = tuple(float(s) for s in kw["conductivities"])
    if "curves" in kw:
        kw["curves"] = tuple(_curve(c) for c in kw["curves"])
    return CoaxCableParams(**kw)


def build_problem(cfg: RunConfig) -> PeriodicProblem:
    params = cfg.problem_params
    if cfg.problem in ("coax", "coax_linear"):
        p = coax_params(params)
        return build_coax_cable(p.linear() if cfg.problem == "coax_linear" else p)
    if cfg.problem == "scalar":
        _reject_unknown("problem.params", params, {"m", "k", "amplitude", "frequency"})
        return build_scalar_test(float(params.get("m", 1.0)), float(params.get("k", 1.0)),
                                 float(params.get("amplitude", 1.0)), float(params.get("frequency", 50.0)))
    if cfg.problem == "dae_pair":
        _reject_unknown("problem.params", params, {"frequency"})
        return build_dae_pair(float(params.get("frequency", 50.0)))
    return load_problem(cfg.mass, cfg.stiffness, cfg.excitation)
