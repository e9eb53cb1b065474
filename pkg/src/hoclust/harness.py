"""Monte-Carlo experiment runner, threshold formulas and phase-diagram grids.

Cells are points ``(alpha, beta)`` of the regime ``k = round(n^alpha)``,
``lambda = n^-beta`` (CHC) or ``mu = n^-beta k^(d/2)`` (ROHC).  Every trial
draws from its own stream ``RngStream(seed, (cell, trial, ...))`` so results
do not depend on scheduling.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from hoclust.detection import chc_detect, default_W, max_test, rohc_detect, scan_test, sum_test
from hoclust.errors import HoclustError, ParameterError
from hoclust.io import dump_json
from hoclust.models import ChcParams, RohcParams, sample_chc, sample_rohc
from hoclust.recovery import (
    aggregated_svd_recover,
    chc_search,
    power_iteration_recover,
    rohc_search,
    threshold_recover,
)
from hoclust.rng import RngStream

CSV_COLUMNS = ["model", "problem", "algorithm", "d", "n", "alpha", "beta", "k", "param",
               "trials", "success_rate", "std_err", "seed"]
RATE_DECIMALS = 6

ALGORITHMS = {
    ("chc", "detect"): ("sum", "scan", "max", "chc_statistical", "chc_polynomial"),
    ("rohc", "detect"): ("rohc_statistical", "rohc_polynomial"),
    ("chc", "recover"): ("search", "threshold", "power", "aggregated_svd", "threshold+power"),
    ("rohc", "recover"): ("search", "power"),
}
EXHAUSTIVE = {"search", "scan", "chc_statistical", "rohc_statistical"}
EXHAUSTIVE_MAX_N = 40
DEFAULT_MAX_N = 200


# ---------------------------------------------------------------- thresholds

@dataclass(frozen=True)
class ThresholdSet:
    beta_s_det: float
    beta_c_det: float
    beta_s_rec: float
    beta_c_rec: float

    def for_problem(self, problem: str) -> tuple[float, float]:
        """``(beta_s, beta_c)`` for ``detect`` or ``recover``."""
        if problem == "detect":
            return self.beta_s_det, self.beta_c_det
        if problem == "recover":
            return self.beta_s_rec, self.beta_c_rec
        raise ParameterError(f"unknown problem {problem!r}")


def theoretical_thresholds(d: int, alpha: float, problem: str) -> ThresholdSet:
    """Statistical and computational signal exponents for ``chc_d``/``chc_r`` (CHC) or ``rohc``."""
    if not 0 <= alpha <= 1:
        raise ParameterError("alpha must be in [0, 1]")
    if d < 2:
        raise ParameterError("d must be >= 2")
    if problem in ("chc_d", "chc_r", "chc"):
        return ThresholdSet(
            beta_s_det=max(d * alpha - d / 2, (d - 1) * alpha / 2),
            beta_c_det=max(d * alpha - d / 2, 0.0),
            beta_s_rec=(d - 1) * alpha / 2,
            beta_c_rec=max((d - 1) * alpha - (d - 1) / 2, 0.0),
        )
    if problem == "rohc":
        bs = (d - 1) * alpha / 2
        bc = max(alpha * d / 2 - d / 4, 0.0)
        return ThresholdSet(bs, bc, bs, bc)
    raise ParameterError(f"unknown problem {problem!r}")


# ---------------------------------------------------------------- cells

@dataclass(frozen=True)
class AsymptoticPoint:
    alpha: float
    beta: float
    d: int
    n: int

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ParameterError("alpha must be in [0, 1]")
        if self.d < 2 or self.n < 1:
            raise ParameterError("need d >= 2 and n >= 1")

    @property
    def k(self) -> int:
        return int(min(max(round(self.n**self.alpha), 1), self.n))

    @property
    def lam(self) -> float:
        return float(self.n ** (-self.beta))

    @property
    def mu(self) -> float:
        return float(self.n ** (-self.beta) * self.k ** (self.d / 2))

    def param(self, model: str) -> float:
        return self.lam if model == "chc" else self.mu


@dataclass
class ExperimentConfig:
    model: str
    problem: str
    algorithm: str
    d: int
    n: int
    points: list
    trials: int = 50
    seed: int = 0
    jobs: int = 1
    force: bool = False

    def __post_init__(self):
        self.points = [tuple(float(v) for v in p) for p in self.points]
        if (self.model, self.problem) not in ALGORITHMS:
            raise ParameterError(f"unknown model/problem {self.model}/{self.problem}")
        if self.algorithm not in ALGORITHMS[(self.model, self.problem)]:
            raise ParameterError(f"algorithm {self.algorithm!r} not available for {self.model}/{self.problem}")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.jobs < 1:
            raise ParameterError("jobs must be >= 1")
        limit = EXHAUSTIVE_MAX_N if self.algorithm in EXHAUSTIVE else DEFAULT_MAX_N
        if self.n > limit and not self.force:
            raise ParameterError(f"n = {self.n} exceeds the desk-scale limit {limit}; use force")

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        if "points" not in obj:
            alphas, betas = obj.pop("alphas"), obj.pop("betas")
            obj["points"] = [(a, b) for a in alphas for b in betas]
        return cls(**obj)

    def to_json(self) -> dict:
        out = asdict(self)
        out["points"] = [list(p) for p in self.points]
        return out


@dataclass(frozen=True)
class CellResult:
    model: str
    problem: str
    algorithm: str
    d: int
    n: int
    alpha: float
    beta: float
    k: int
    param: float | None
    trials: int
    success_rate: float | None
    std_err: float | None
    seed: str

    @property
    def risk(self) -> float | None:
        """Type I plus Type II error for detection cells."""
        if self.problem != "detect" or self.success_rate is None:
            return None
        return 2 * (1 - self.success_rate)


@dataclass
class PhaseDiagram:
    cells: list = field(default_factory=list)
    overlay: list = field(default_factory=list)

    def rows(self) -> list:
        return list(self.cells) + list(self.overlay)


def _shape(cfg):
    return (cfg.n,) * cfg.d


def _sample(cfg, pt, hypothesis, stream):
    shape = _shape(cfg)
    ks = (pt.k,) * cfg.d
    if cfg.model == "chc":
        return sample_chc(ChcParams(shape, ks, pt.lam), hypothesis, stream)
    return sample_rohc(RohcParams(shape, ks, pt.mu), hypothesis, stream)


def _reject(cfg, pt, Y, stream) -> bool:
    ks = (pt.k,) * cfg.d
    a = cfg.algorithm
    if a == "sum":
        return sum_test(Y, default_W(Y.shape, ks, pt.lam)).reject
    if a == "scan":
        return scan_test(Y, ks).reject
    if a == "max":
        return max_test(Y).reject
    if a in ("chc_statistical", "chc_polynomial"):
        return chc_detect(Y, ks, pt.lam, regime=a.split("_")[1]).reject
    return rohc_detect(Y, ks, pt.mu, regime=a.split("_")[1], rng=stream).reject


def _recover(cfg, pt, Y, stream):
    ks = (pt.k,) * cfg.d
    a = cfg.algorithm
    if a == "threshold+power":
        a = "threshold" if pt.k < math.sqrt(cfg.n) else "power"
    if a == "search":
        return chc_search(Y, ks) if cfg.model == "chc" else rohc_search(Y, ks, pt.mu, stream)
    if a == "threshold":
        return threshold_recover(Y)
    if a == "power":
        return power_iteration_recover(Y, cfg.model, None, stream)
    return aggregated_svd_recover(Y, stream)


def _trial(cfg, pt, root: RngStream, t: int) -> int:
    """Number of correct outcomes in trial ``t`` (out of 2 for detection, 1 for recovery)."""
    if cfg.problem == "detect":
        correct = 0
        for h, hyp in enumerate(("null", "planted")):
            Y, _ = _sample(cfg, pt, hyp, root.child(t, h, 0))
            try:
                rej = _reject(cfg, pt, Y, root.child(t, h, 1))
            except HoclustError:
                continue
            correct += rej == (hyp == "planted")
        return correct
    Y, S = _sample(cfg, pt, "planted", root.child(t, 0, 0))
    try:
        res = _recover(cfg, pt, Y, root.child(t, 0, 1))
    except HoclustError:
        return 0
    return int(res.matches(S))


def run_trials(config: ExperimentConfig, point=None, cell_index: int = 0) -> CellResult:
    """Run one cell: ``point`` is an ``(alpha, beta)`` pair or an :class:`AsymptoticPoint`
    (default: the config's first point)."""
    if config.trials < 1:
        raise ParameterError("trials must be >= 1")
    if point is None:
        point = config.points[0]
    pt = point if isinstance(point, AsymptoticPoint) else AsymptoticPoint(point[0], point[1], config.d, config.n)
    root = RngStream(config.seed, (cell_index,))
    correct = sum(_trial(config, pt, root, t) for t in range(config.trials))
    m = config.trials * (2 if config.problem == "detect" else 1)
    rate = correct / m
    se = math.sqrt(rate * (1 - rate) / m)
    return CellResult(config.model, config.problem, config.algorithm, config.d, config.n, pt.alpha, pt.beta,
                      pt.k, pt.param(config.model), config.trials, round(rate, RATE_DECIMALS),
                      round(se, RATE_DECIMALS), f"{config.seed}:{cell_index}")


def _run_cell(args):
    cfg, i = args
    return run_trials(cfg, cfg.points[i], i)


def overlay_rows(config: ExperimentConfig) -> list:
    """Threshold rows, one pair per distinct alpha of the grid."""
    problem = {"chc": "chc_d" if config.problem == "detect" else "chc_r", "rohc": "rohc"}[config.model]
    rows = []
    for alpha in sorted({p[0] for p in config.points}):
        bs, bc = theoretical_thresholds(config.d, alpha, problem).for_problem(config.problem)
        k = AsymptoticPoint(alpha, 0.0, config.d, config.n).k
        for name, b in (("theory:β^s", bs), ("theory:β^c", bc)):
            rows.append(CellResult(config.model, config.problem, name, config.d, config.n, alpha, float(b), k,
                                   None, 0, None, None, str(config.seed)))
    return rows


def phase_grid(config: ExperimentConfig) -> PhaseDiagram:
    """All cells of the grid (in config order) plus the threshold overlay."""
    if not config.points:
        raise ParameterError("grid is empty")
    tasks = [(config, i) for i in range(len(config.points))]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            cells = list(ex.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]
    return PhaseDiagram(cells, overlay_rows(config))


# ---------------------------------------------------------------- persistence

def _fmt(name, v) -> str:
    if v is None:
        return ""
    if name in ("success_rate", "std_err"):
        return f"{v:.{RATE_DECIMALS}f}"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_INT = {"d", "n", "k", "trials"}
_FLOAT = {"alpha", "beta", "param", "success_rate", "std_err"}


def _parse(name, s):
    if name in _INT:
        return int(s)
    if name in _FLOAT:
        return None if s == "" else float(s)
    return s


def diagram_to_csv(diagram: PhaseDiagram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in diagram.rows():
        w.writerow([_fmt(c, getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _json_record(c: CellResult) -> dict:
    # JSON has no infinity; beta = inf (no signal) is written as the string "inf"
    return {k: (repr(v) if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(c).items()}


def _from_json_record(obj: dict) -> CellResult:
    return CellResult(**{k: (float(v) if k in _FLOAT and isinstance(v, str) else v) for k, v in obj.items()})


def diagram_to_json(diagram: PhaseDiagram) -> str:
    return dump_json({"cells": [_json_record(c) for c in diagram.cells],
                      "overlay": [_json_record(c) for c in diagram.overlay]})


def export(diagram: PhaseDiagram, format: str, path) -> None:
    if format == "csv":
        text = diagram_to_csv(diagram)
    elif format == "json":
        text = diagram_to_json(diagram)
    else:
        raise ParameterError(f"unknown format {format!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def import_diagram(path, format: str | None = None) -> PhaseDiagram:
    path = str(path)
    format = format or ("json" if path.endswith(".json") else "csv")
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if format == "json":
        obj = json.loads(text)
        return PhaseDiagram([_from_json_record(c) for c in obj["cells"]],
                            [_from_json_record(c) for c in obj["overlay"]])
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_COLUMNS:
        raise ParameterError("unexpected CSV header")
    d = PhaseDiagram()
    for row in reader:
        rec = CellResult(**{c: _parse(c, s) for c, s in zip(CSV_COLUMNS, row)})
        (d.overlay if rec.algorithm.startswith("theory:") else d.cells).append(rec)
    return d


def sweep_threshold_order(d: int, problem: str, points: int = 1000) -> bool:
    """Whether ``beta_c <= beta_s`` holds on an even alpha grid for both problems."""
    for a in np.linspace(0.0, 1.0, points):
        t = theoretical_thresholds(d, float(a), problem)
        if t.beta_c_det > t.beta_s_det + 1e-15 or t.beta_c_rec > t.beta_s_rec + 1e-15:
            return False
    return True
