"""YAML run and sweep configuration.

A complete annotated example lives in ``configs/example_run.yaml``.
Parsing fills defaults, so the canonical form (``to_dict``) is what gets
hashed and written back; ``dump(parse(text))`` round-trips exactly.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .core import BCMode, BoundaryData, Params, SpatialGrid, constant_boundary, face_boundary, make_grid
from .kinetic import KineticSolverConfig
from .quadrature import AngularQuadrature, build_quadrature


class ConfigError(ValueError):
    pass


PROFILES = ("uniform", "sine", "gaussian")


@dataclass
class RunConfig:
    scenario: str
    grid: dict
    quadrature: dict
    params: dict
    initial: dict
    boundary: dict
    solver: dict
    t_end: float
    output: str = "out"
    seed: int = 0
    record_every: int = 1
    snapshot_every: int = 0

    # ---- construction -------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("run config must be a mapping")
        raw = copy.deepcopy(raw)
        known = {"scenario", "grid", "quadrature", "params", "initial", "boundary", "solver",
                 "t_end", "output", "seed", "record_every", "snapshot_every"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            grid = _norm_grid(raw["grid"])
            params = _norm_params(raw.get("params", {}))
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None
        if "t_end" not in raw:
            raise ConfigError("missing config key 't_end'")
        cfg = cls(
            scenario=str(raw.get("scenario", "run")),
            grid=grid,
            quadrature=_norm_quad(raw.get("quadrature", {})),
            params=params,
            initial=_norm_initial(raw.get("initial", {"profile": "uniform", "c": 1.0})),
            boundary=_norm_boundary(raw.get("boundary", {}), params["bc_mode"]),
            solver=_norm_solver(raw.get("solver", {})),
            t_end=float(raw["t_end"]),
            output=str(raw.get("output", "out")),
            seed=int(raw.get("seed", 0)),
            record_every=int(raw.get("record_every", 1)),
            snapshot_every=int(raw.get("snapshot_every", 0)),
        )
        cfg.validate()
        return cfg

    def validate(self):
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        try:
            grid = self.build_grid()
            grid.check_bc_mode(self.build_params().bc_mode)
            self.build_quadrature()
            self.build_solver_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "grid": copy.deepcopy(self.grid),
            "quadrature": dict(self.quadrature), "params": dict(self.params),
            "initial": copy.deepcopy(self.initial), "boundary": copy.deepcopy(self.boundary),
            "solver": dict(self.solver), "t_end": self.t_end, "output": self.output,
            "seed": self.seed, "record_every": self.record_every,
            "snapshot_every": self.snapshot_every,
        }

    def with_epsilon(self, eps: float) -> "RunConfig":
        raw = self.to_dict()
        raw["params"]["epsilon"] = float(eps)
        return RunConfig.from_dict(raw)

    def hash(self) -> str:
        return config_hash(self.to_dict())

    # ---- builders -----------------------------------------------------
    def build_grid(self) -> SpatialGrid:
        g = self.grid
        return make_grid(g["dim"], g["cells"], g["extent"], g["periodic"])

    def build_quadrature(self) -> AngularQuadrature:
        return build_quadrature(self.quadrature["n_polar"], self.quadrature["n_azimuth"])

    def build_params(self) -> Params:
        p = self.params
        return Params(p["epsilon"], p["alpha"], p["robin_r"], BCMode.parse(p["bc_mode"]))

    def build_solver_config(self) -> KineticSolverConfig:
        s = self.solver
        return KineticSolverConfig(cfl=s["cfl"], newton_tol=s["newton_tol"],
                                   newton_max_iter=s["newton_max_iter"], dt_override=s["dt"],
                                   galerkin_modes=s["galerkin_modes"])

    def build_initial(self, grid: Optional[SpatialGrid] = None, base_dir: Optional[Path] = None):
        grid = self.build_grid() if grid is None else grid
        return initial_profile(self.initial, grid, base_dir)

    def build_boundary(self) -> Optional[BoundaryData]:
        if BCMode.parse(self.params["bc_mode"]) is BCMode.TORUS:
            return None
        b = self.boundary
        if "faces" in b:
            return face_boundary(b["faces"], self.grid["extent"], b.get("psi_faces"))
        return constant_boundary(b["t_b"], b["psi_b"])


@dataclass
class SweepConfig:
    base: RunConfig
    epsilon_list: list
    limit: dict = field(default_factory=dict)
    synthetic: Optional[dict] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        if not isinstance(raw, dict) or "base" not in raw:
            raise ConfigError("sweep config needs a 'base' run config")
        eps = [float(e) for e in raw.get("epsilon_list", [])]
        if len(eps) < 3:
            raise ConfigError("epsilon_list needs at least three values")
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon_list must be positive and strictly decreasing")
        limit = dict(raw.get("limit") or {})
        limit = {"dt": None if limit.get("dt") is None else float(limit["dt"])}
        synthetic = raw.get("synthetic")
        if synthetic is not None:
            synthetic = {"s": float(synthetic["s"]), "scale": float(synthetic.get("scale", 1.0))}
        unknown = set(raw) - {"base", "epsilon_list", "limit", "synthetic"}
        if unknown:
            raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
        return cls(RunConfig.from_dict(raw["base"]), eps, limit, synthetic)

    def to_dict(self) -> dict:
        out = {"base": self.base.to_dict(), "epsilon_list": list(self.epsilon_list),
               "limit": dict(self.limit)}
        if self.synthetic is not None:
            out["synthetic"] = dict(self.synthetic)
        return out

    def hash(self) -> str:
        return config_hash(self.to_dict())


# --------------------------------------------------------------------------
# normalisers

def _as_list(value, n, cast, name):
    if not isinstance(value, (list, tuple)):
        value = [value] * n
    if len(value) != n:
        raise ConfigError(f"grid.{name} needs {n} entries")
    return [cast(v) for v in value]


def _norm_grid(g):
    dim = int(g["dim"])
    return {"dim": dim, "cells": _as_list(g["cells"], dim, int, "cells"),
            "extent": _as_list(g.get("extent", 1.0), dim, float, "extent"),
            "periodic": _as_list(g.get("periodic", True), dim, bool, "periodic")}


def _norm_quad(q):
    return {"n_polar": int(q.get("n_polar", 8)), "n_azimuth": int(q.get("n_azimuth", 8))}


def _norm_params(p):
    return {"epsilon": float(p["epsilon"]), "alpha": float(p.get("alpha", 0.5)),
            "robin_r": float(p.get("robin_r", 1.0)),
            "bc_mode": BCMode.parse(p.get("bc_mode", "torus")).value}


def _norm_initial(ic):
    ic = dict(ic)
    if "file" in ic:
        return {"file": str(ic["file"])}
    kind = ic.get("profile", "uniform")
    if kind == "uniform":
        return {"profile": "uniform", "c": float(ic.get("c", 1.0))}
    if kind == "sine":
        k = ic.get("k", 1.0)
        k = [float(v) for v in k] if isinstance(k, (list, tuple)) else [float(k)]
        return {"profile": "sine", "c0": float(ic.get("c0", 1.0)),
                "amp": float(ic.get("amp", 0.1)), "k": k}
    if kind == "gaussian":
        return {"profile": "gaussian", "c0": float(ic.get("c0", 1.0)),
                "amp": float(ic.get("amp", 0.1)), "width": float(ic.get("width", 0.1))}
    raise ConfigError(f"unknown initial profile {kind!r}; expected one of {PROFILES} or file")


def _norm_boundary(b, mode):
    b = dict(b or {})
    if BCMode.parse(mode) is BCMode.TORUS:
        return {}
    if "faces" in b:
        out = {"faces": {str(k): float(v) for k, v in b["faces"].items()}}
        if b.get("psi_faces") is not None:
            out["psi_faces"] = {str(k): float(v) for k, v in b["psi_faces"].items()}
        return out
    if "t_b" not in b:
        raise ConfigError("walls need boundary.t_b or boundary.faces")
    return {"t_b": float(b["t_b"]),
            "psi_b": None if b.get("psi_b") is None else float(b["psi_b"])}


def _norm_solver(s):
    def opt(key, cast):
        return None if s.get(key) is None else cast(s[key])
    return {"cfl": float(s.get("cfl", 0.5)), "newton_tol": float(s.get("newton_tol", 1e-12)),
            "newton_max_iter": int(s.get("newton_max_iter", 50)), "dt": opt("dt", float),
            "galerkin_modes": opt("galerkin_modes", int)}


# --------------------------------------------------------------------------
# profiles

def initial_profile(entry: dict, grid: SpatialGrid, base_dir: Optional[Path] = None) -> np.ndarray:
    """Evaluate a named initial temperature at the cell centres.

    ``uniform``: ``c``.
    ``sine``: ``c0 + amp * prod_a sin(2 pi k_a x_a / L_a)`` over axes with
    ``k_a != 0`` (``k`` shorter than ``dim`` is padded with zeros);
    ``k = 0.5`` on ``[0, L]`` vanishes at both walls.
    ``gaussian``: ``c0 + amp * exp(-|x - centre|^2 / (2 width^2))``.
    ``file``: a ``.npy`` array of the grid shape.
    """
    if "file" in entry:
        path = Path(entry["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        arr = np.load(path)
        if arr.shape != grid.shape:
            raise ConfigError(f"initial file has shape {arr.shape}, grid is {grid.shape}")
        return np.asarray(arr, float)
    mesh = grid.mesh()
    kind = entry["profile"]
    if kind == "uniform":
        return np.full(grid.shape, entry["c"])
    if kind == "sine":
        k = list(entry["k"]) + [0.0] * (grid.dim - len(entry["k"]))
        if len(k) > grid.dim:
            raise ConfigError("sine profile has more wavenumbers than axes")
        prod = np.ones(grid.shape)
        for a, ka in enumerate(k):
            if ka != 0:
                prod = prod * np.sin(2 * np.pi * ka * mesh[a] / grid.extent_per_axis[a])
        return entry["c0"] + entry["amp"] * prod
    if kind == "gaussian":
        r2 = sum((mesh[a] - 0.5 * grid.extent_per_axis[a]) ** 2 for a in range(grid.dim))
        return entry["c0"] + entry["amp"] * np.exp(-r2 / (2 * entry["width"] ** 2))
    raise ConfigError(f"unknown profile {kind!r}")


# --------------------------------------------------------------------------
# text I/O

def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_yaml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raise ConfigError(f"config file is empty: {path}")
    return raw


def parse_run(text: str) -> RunConfig:
    return RunConfig.from_dict(yaml.safe_load(text))


def parse_sweep(text: str) -> SweepConfig:
    return SweepConfig.from_dict(yaml.safe_load(text))


def dump(cfg: Any) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def load_config(path):
    """Load a run or a sweep config; sweeps are recognised by ``epsilon_list``."""
    raw = load_yaml(path)
    if isinstance(raw, dict) and "epsilon_list" in raw:
        return SweepConfig.from_dict(raw)
    return RunConfig.from_dict(raw)
