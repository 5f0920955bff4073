"""Run configuration: a single TOML file drives every subcommand.

All numerics live in the file as plain decimal text (TOML numbers are
locale-independent); outputs use '.' decimals and '\n' newlines so re-running
an identical config reproduces identical bytes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover - environment dependent
    import tomli as tomllib

import numpy as np

from .cascade import CascadeModel
from .errors import ConfigError
from .operators import OperatorParams


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    step: float
    points: tuple[float, ...] | None = None

    def values(self) -> np.ndarray:
        if self.points is not None:
            return np.asarray(sorted(self.points), dtype=float)
        n = int(round((self.hi - self.lo) / self.step))
        return self.lo + self.step * np.arange(n + 1)


@dataclass(frozen=True)
class RunConfig:
    model: CascadeModel
    rho: float
    eta: float
    j_analysis: int
    j_sim: int
    tau_levels: tuple[int, ...]
    q_grid: GridSpec
    h_grid: GridSpec | None
    ld_epsilons: tuple[float, ...]
    ld_levels: tuple[int, ...]
    seeds: tuple[int, ...]
    output_dir: str
    emit_csv: bool = True
    emit_json: bool = True
    emit_svg: bool = False
    tau_tol: float = 0.5
    ld_tol: float = 0.25
    oracle_tol: float = 5e-3
    ld_min_count: int = 10
    improve_from_level: int | None = None
    oracle_density: int = 2001
    conj_q_min: float = -60.0
    conj_q_max: float = 60.0
    conj_q_step: float = 1e-3
    config_sha256: str = ""

    def operator_params(self) -> OperatorParams:
        return OperatorParams(rho=self.rho, eta=self.eta,
                              j_analysis=self.j_analysis, j_sim=self.j_sim)


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigError(f"missing '{key}' in [{section}]")
    return table[key]


def config_from_dict(raw: dict, sha256: str = "") -> RunConfig:
    try:
        mt = raw.get("model", {})
        model = CascadeModel(d=int(_require(mt, "d", "model")),
                             weights=tuple(float(w) for w in _require(mt, "weights", "model")),
                             gamma=float(mt.get("gamma", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"bad [model]: {exc}") from exc

    op = raw.get("operator", {})
    rho = float(_require(op, "rho", "operator"))
    eta = float(_require(op, "eta", "operator"))
    if not 0.0 < eta <= 1.0:
        raise ConfigError("operator.eta must lie in (0, 1]")
    if not 0.0 < rho <= 1.0 / eta + 1e-12:
        raise ConfigError("operator.rho must lie in (0, 1/eta]")

    depths = raw.get("depths", {})
    j_analysis = int(_require(depths, "j_analysis", "depths"))
    if j_analysis < 1:
        raise ConfigError("depths.j_analysis must be >= 1")
    if "j_sim" in depths:
        j_sim = int(depths["j_sim"])
    else:
        j_sim = OperatorParams(rho=rho, eta=eta, j_analysis=j_analysis).j_sim
    levels = depths.get("tau_levels")
    if levels is None:
        levels = sorted(set(range(2, j_analysis + 1, 2)) | {j_analysis})
    tau_levels = tuple(int(x) for x in levels)
    if any(not 1 <= j <= j_analysis for j in tau_levels):
        raise ConfigError("depths.tau_levels must lie in [1, j_analysis]")

    qg = raw.get("q_grid", {})
    if "points" in qg:
        q_grid = GridSpec(0.0, 0.0, 1.0, points=tuple(float(x) for x in qg["points"]))
    else:
        q_grid = GridSpec(float(qg.get("min", -10.0)), float(qg.get("max", 10.0)),
                          float(qg.get("step", 0.1)))
        if q_grid.step <= 0 or q_grid.hi <= q_grid.lo:
            raise ConfigError("q_grid needs step > 0 and max > min")

    hg = raw.get("h_grid")
    h_grid = None
    if hg:
        h_grid = GridSpec(float(hg["min"]), float(hg["max"]), float(hg.get("step", 1e-3)))

    ld = raw.get("ld", {})
    ld_eps = tuple(float(x) for x in ld.get("epsilons", [0.05]))
    ld_levels = tuple(int(x) for x in ld.get("levels", [j_analysis]))
    if any(e <= 0 for e in ld_eps):
        raise ConfigError("ld.epsilons must be positive")
    if any(not 1 <= j <= j_analysis for j in ld_levels):
        raise ConfigError("ld.levels must lie in [1, j_analysis]")

    run = raw.get("run", {})
    seeds = tuple(int(s) for s in run.get("seeds", []))
    output_dir = str(run.get("output_dir", "out"))

    emit = raw.get("emit", {})
    cmp_ = raw.get("compare", {})
    oracle = raw.get("oracle", {})
    conj = raw.get("conjugate", {})

    cfg = RunConfig(
        model=model, rho=rho, eta=eta,
        j_analysis=j_analysis, j_sim=j_sim, tau_levels=tau_levels,
        q_grid=q_grid, h_grid=h_grid,
        ld_epsilons=ld_eps, ld_levels=ld_levels,
        seeds=seeds, output_dir=output_dir,
        emit_csv=bool(emit.get("csv", True)),
        emit_json=bool(emit.get("json", True)),
        emit_svg=bool(emit.get("svg", False)),
        tau_tol=float(cmp_.get("tau_tol", 0.5)),
        ld_tol=float(cmp_.get("ld_tol", 0.25)),
        oracle_tol=float(cmp_.get("oracle_tol", 5e-3)),
        ld_min_count=int(cmp_.get("ld_min_count", 10)),
        improve_from_level=(int(cmp_["improve_from_level"])
                            if "improve_from_level" in cmp_ else None),
        oracle_density=int(oracle.get("grid_density", 2001)),
        conj_q_min=float(conj.get("q_min", -60.0)),
        conj_q_max=float(conj.get("q_max", 60.0)),
        conj_q_step=float(conj.get("q_step", 1e-3)),
        config_sha256=sha256,
    )
    # eagerly validate the operator depths so errors surface as ConfigError
    cfg.operator_params()
    if cfg.improve_from_level is not None and cfg.improve_from_level not in cfg.tau_levels:
        raise ConfigError("compare.improve_from_level must be in depths.tau_levels")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    data = Path(path).read_bytes()
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(raw, sha256=hashlib.sha256(data).hexdigest())


def default_h_grid(cfg: RunConfig, domain: tuple[float, float]) -> np.ndarray:
    if cfg.h_grid is not None:
        return cfg.h_grid.values()
    lo, hi = domain
    pad = 0.05 * (hi - lo)
    step = 1e-3
    n = int(math.ceil((hi - lo + 2 * pad) / step))
    return max(0.0, lo - pad) + step * np.arange(n + 1)
