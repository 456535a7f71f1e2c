"""Experiment runner: algorithm registry, cross-validated grid search, and the
report rows written by the command-line tool."""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .baselines import BaselineConfig, BaselineKind
from .data_io import (
    DataError,
    SparseExample,
    SyntheticSpec,
    generate_synthetic,
    load_libsvm,
    meta_of,
    permuted_stream,
    write_libsvm,
)
from .evaluation import (
    ImbalanceSpec,
    SweepCell,
    build_learner,
    evaluate,
    example_losses,
    metrics,
    offline_comparator,
    regret_trace,
    run_cell,
    train_online,
)
from .learners import ConfigError, Kind, LearnerConfig, Schedule

log = logging.getLogger(__name__)

ETA_GRID = tuple(2.0 ** k for k in range(-1, 10))
SECONDARY_GRID = tuple(2.0 ** k for k in range(-5, 6))

# CLI name -> learner/baseline kind. "ssol" is the full-matrix learner;
# "cs-ssol" is the diagonal cost-sensitive learner used in practice.
ALGORITHMS: dict[str, Kind | BaselineKind] = {
    "fsol": Kind.FSOL,
    "ssol": Kind.SSOL_FULL,
    "ssol-diag": Kind.SSOL_DIAG,
    "cs-fsol": Kind.CS_FSOL,
    "cs-ssol": Kind.CS_SSOL_DIAG,
    "cs-ssol-full": Kind.CS_SSOL_FULL,
    "stg": BaselineKind.STG,
    "fobos": BaselineKind.FOBOS,
    "ada-fobos": BaselineKind.ADA_FOBOS,
    "ada-rda": BaselineKind.ADA_RDA,
    "cs-ogd": BaselineKind.CS_OGD,
    "cpa": BaselineKind.CPA,
    "paum": BaselineKind.PAUM,
}

# parameter tuned on the secondary grid, if any
SECONDARY_PARAM = {
    "ssol": "r", "ssol-diag": "r", "cs-ssol": "r", "cs-ssol-full": "r",
    "ada-fobos": "delta", "ada-rda": "delta",
    "paum": "tau_pos",
    "cpa": "C",
}
NO_ETA = {"cpa"}


class SpecError(ValueError):
    """Invalid experiment specification (exit status 2)."""


class Task(str, enum.Enum):
    TRAIN_EVAL = "train"
    GRID_SEARCH = "grid-search"
    SPARSITY_SWEEP = "sweep"
    SYNTH_GEN = "synth"
    REGRET = "regret"


@dataclass(frozen=True)
class AlgoParams:
    """Hyperparameters shared by every algorithm; each kind reads what it needs."""

    eta: float = 1.0
    lam: float = 0.0
    r: float = 1.0
    c_pos: float = 1.0
    c_neg: float = 1.0
    schedule: str | None = None
    delta: float = 1.0
    k_period: int = 10
    tau_pos: float = 1.0
    tau_neg: float = 0.0


def is_cost_sensitive(algo: str) -> bool:
    return ALGORITHMS[algo].cost_sensitive


def make_config(algo: str, p: AlgoParams = AlgoParams(), full_dim_cap: int | None = None):
    if algo not in ALGORITHMS:
        raise SpecError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    kind = ALGORITHMS[algo]
    try:
        if isinstance(kind, Kind):
            extra = {} if full_dim_cap is None else {"full_dim_cap": full_dim_cap}
            sched = Schedule(p.schedule) if p.schedule else None
            return LearnerConfig(kind, eta=p.eta, lam=p.lam, r=p.r, c_pos=p.c_pos,
                                 c_neg=p.c_neg, schedule=sched, **extra)
        if p.schedule:
            raise SpecError(f"--schedule does not apply to {algo}")
        if not kind.cost_sensitive and (p.c_pos != 1.0 or p.c_neg != 1.0):
            raise SpecError(f"{algo} is cost-insensitive; --cpos/--cneg must be 1")
        return BaselineConfig(kind, eta=p.eta, lam=p.lam, k_period=p.k_period, delta=p.delta,
                              tau_pos=p.tau_pos, tau_neg=p.tau_neg, c_pos=p.c_pos, c_neg=p.c_neg)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(str(exc)) from exc


# -- report rows -------------------------------------------------------------

REPORT_COLUMNS = (
    "algorithm", "lambda", "eta", "r", "c_pos", "c_neg", "seed",
    "achieved_sparsity", "test_error", "weighted_sum", "train_time_seconds", "updates_count",
)
WALL_CLOCK_COLUMNS = ("train_time_seconds",)


@dataclass
class ReportRow:
    algorithm: str
    lam: float
    eta: float
    r: float
    c_pos: float
    c_neg: float
    seed: int | str
    achieved_sparsity: float
    test_error: float
    weighted_sum: float | None
    train_time_seconds: float
    updates_count: float

    def values(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in REPORT_COLUMNS}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def row_from_cell(cell: SweepCell, algo: str, p: AlgoParams) -> ReportRow:
    return ReportRow(algo, cell.lam, p.eta, p.r, p.c_pos, p.c_neg, cell.seed, cell.sparsity,
                     cell.test_error, cell.weighted_sum, cell.train_time, cell.updates)


def summary_rows(rows: Sequence[ReportRow]) -> list[ReportRow]:
    """Mean and population std per (algorithm, lambda)."""
    groups: dict[tuple[str, float], list[ReportRow]] = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.lam), []).append(r)
    out = []
    for key in sorted(groups):
        g = groups[key]
        first = g[0]
        for label, fn in (("mean", np.mean), ("std", np.std)):
            def agg(attr):
                vals = [getattr(r, attr) for r in g]
                if any(v is None for v in vals):
                    return None
                return float(fn(vals))
            out.append(ReportRow(first.algorithm, first.lam, first.eta, first.r, first.c_pos,
                                 first.c_neg, label, agg("achieved_sparsity"), agg("test_error"),
                                 agg("weighted_sum"), agg("train_time_seconds"),
                                 agg("updates_count")))
    return out


def sort_rows(rows: Sequence[ReportRow]) -> list[ReportRow]:
    def key(r):
        # per-seed rows first (numeric order), then mean, then std
        s = (0, r.seed, "") if isinstance(r.seed, int) else (1, 0, r.seed)
        return (r.algorithm, r.lam, s)
    return sorted(rows, key=key)


def render_rows(rows: Sequence[dict], columns: Sequence[str], fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps([{c: r[c] for c in columns} for r in rows], indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_report(rows: Sequence[ReportRow], path, fmt: str = "csv", deterministic: bool = False) -> str:
    cols = [c for c in REPORT_COLUMNS if not (deterministic and c in WALL_CLOCK_COLUMNS)]
    text = render_rows([r.values() for r in rows], cols, fmt)
    _write_text(path, text)
    return text


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        print(text, end="")
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- datasets ------------------------------------------------------------------

@dataclass
class Data:
    train: list[SparseExample]
    test: list[SparseExample]
    ambient_dim: int


def load_data(train_path=None, test_path=None, synthetic: SyntheticSpec | None = None,
              ambient_dim: int | None = None) -> Data:
    if synthetic is not None:
        train, test, _ = generate_synthetic(synthetic)
        dim = synthetic.ambient_dim
    else:
        if train_path is None:
            raise SpecError("a training file or a synthetic spec is required")
        train = load_libsvm(train_path)
        test = load_libsvm(test_path) if test_path else []
        dim = max(meta_of(train).ambient_dim, meta_of(test).ambient_dim)
    if ambient_dim is not None:
        if ambient_dim < dim:
            raise SpecError(f"--dim {ambient_dim} is smaller than the data's dimension {dim}")
        dim = ambient_dim
    if not train:
        raise DataError("training set is empty")
    return Data(train, test, dim)


def load_synthetic_spec(path) -> SyntheticSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return SyntheticSpec.from_dict(d)
    except (TypeError, DataError) as exc:
        raise SpecError(f"{path}: {exc}") from exc


# -- cross-validated grid search ----------------------------------------------

def fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded partition of range(n) into ``folds`` near-equal parts."""
    if folds < 2:
        raise SpecError("cross validation needs at least 2 folds")
    if n < folds:
        raise DataError(f"{n} examples cannot be split into {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(order, folds)]


def cv_score(cfg, data: Sequence[SparseExample], folds: Sequence[np.ndarray], ambient_dim: int,
             cost_sensitive: bool, seed: int, passes: int = 1) -> float:
    """Mean held-out error (or 1 - balanced accuracy for cost-sensitive runs)."""
    n = len(data)
    scores = []
    for k, held in enumerate(folds):
        mask = np.ones(n, dtype=bool)
        mask[held] = False
        train = permuted_stream([data[i] for i in np.flatnonzero(mask)], seed + k)
        learner = build_learner(cfg, ambient_dim)
        train_online(learner, train, passes)
        conf = evaluate(learner.weights(), [data[i] for i in held], ambient_dim)
        m = metrics(conf, ImbalanceSpec(0.5, 0.5))
        if cost_sensitive and m.weighted_sum is not None:
            scores.append(1.0 - m.weighted_sum)
        else:
            scores.append(m.error_rate)
    return float(np.mean(scores))


@dataclass
class GridResult:
    algorithm: str
    best: AlgoParams
    best_score: float
    table: list[dict] = field(default_factory=list)


def _grid_points(algo: str, base: AlgoParams, eta_grid, secondary_grid) -> list[AlgoParams]:
    etas = [base.eta] if algo in NO_ETA else list(eta_grid)
    sec = SECONDARY_PARAM.get(algo)
    secs = list(secondary_grid) if sec else [None]
    points = []
    for eta in etas:
        for s in secs:
            p = replace(base, eta=float(eta), lam=0.0)
            if sec == "C":
                p = replace(p, c_pos=base.c_pos * s, c_neg=base.c_neg * s)
            elif sec is not None:
                p = replace(p, **{sec: float(s)})
            points.append(p)
    return points


def _secondary_value(algo: str, p: AlgoParams, base: AlgoParams) -> float | None:
    sec = SECONDARY_PARAM.get(algo)
    if sec is None:
        return None
    if sec == "C":
        return p.c_neg / base.c_neg
    return getattr(p, sec)


def _score_point(args):
    algo, p, data, folds, dim, cs, seed, passes, cap = args
    return cv_score(make_config(algo, p, cap), data, folds, dim, cs, seed, passes)


def grid_search(
    algo: str,
    data: Sequence[SparseExample],
    ambient_dim: int,
    base: AlgoParams = AlgoParams(),
    folds: int = 5,
    seed: int = 0,
    eta_grid: Sequence[float] = ETA_GRID,
    secondary_grid: Sequence[float] = SECONDARY_GRID,
    passes: int = 1,
    workers: int = 1,
    full_dim_cap: int | None = None,
) -> GridResult:
    """k-fold CV over (eta, secondary) with lambda fixed at 0.

    Ties go to the smaller eta, then the smaller secondary parameter.
    """
    if not data:
        raise DataError("cannot grid-search on an empty dataset")
    parts = fold_indices(len(data), folds, seed)
    cs = is_cost_sensitive(algo)
    points = _grid_points(algo, base, eta_grid, secondary_grid)
    for p in points:
        make_config(algo, p, full_dim_cap)  # validate before doing any work
    jobs = [(algo, p, data, parts, ambient_dim, cs, seed, passes, full_dim_cap) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(_score_point, jobs))
    else:
        scores = [_score_point(j) for j in jobs]
    table = []
    for p, s in zip(points, scores):
        table.append({"algorithm": algo, "eta": p.eta,
                      "param": SECONDARY_PARAM.get(algo, ""),
                      "value": _secondary_value(algo, p, base), "cv_score": s})
    order = sorted(range(len(points)), key=lambda i: (
        scores[i], points[i].eta, _secondary_value(algo, points[i], base) or 0.0))
    best = order[0]
    return GridResult(algo, points[best], scores[best], table)


# -- experiment tasks ---------------------------------------------------------

@dataclass
class ExperimentSpec:
    task: Task
    algorithms: list[str]
    params: AlgoParams = AlgoParams()
    train_path: str | None = None
    test_path: str | None = None
    synthetic: SyntheticSpec | None = None
    ambient_dim: int | None = None
    lambda_grid: list[float] = field(default_factory=lambda: [0.0])
    seeds: int = 5
    seed: int = 0
    folds: int = 5
    passes: int = 1
    checkpoints: list[int] = field(default_factory=list)
    output: str | None = None
    fmt: str = "csv"
    deterministic: bool = False
    workers: int = 1
    full_dim_cap: int | None = None
    comparator_epochs: int = 500
    comparator_method: str = "lp"

    def __post_init__(self):
        self.task = Task(self.task)
        if self.seeds < 1:
            raise SpecError("seeds must be >= 1")
        if self.passes < 1:
            raise SpecError("passes must be >= 1")
        if self.task is Task.GRID_SEARCH and self.folds < 2:
            raise SpecError("grid search needs folds >= 2")
        if self.comparator_method not in ("lp", "subgradient"):
            raise SpecError(f"unknown comparator method {self.comparator_method!r}")
        if self.fmt not in ("csv", "json"):
            raise SpecError(f"unknown output format {self.fmt!r}")
        if self.task is not Task.SYNTH_GEN:
            if not self.algorithms:
                raise SpecError("no algorithm given")
            for a in self.algorithms:
                if a not in ALGORITHMS:
                    raise SpecError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        if not self.lambda_grid or any(not math.isfinite(l) or l < 0 for l in self.lambda_grid):
            raise SpecError("lambda grid must be non-empty and non-negative")
        if self.task is Task.REGRET:
            if not self.checkpoints or any(c < 1 for c in self.checkpoints):
                raise SpecError("regret needs positive checkpoints")

    @property
    def seed_list(self) -> list[int]:
        return list(range(self.seed, self.seed + self.seeds))


def _cell_job(args):
    cfg, data, seed, passes = args
    return run_cell(cfg, data.train, data.test, data.ambient_dim, seed, passes)


def _check_finite(rows: Sequence[ReportRow]) -> None:
    for r in rows:
        for v in (r.achieved_sparsity, r.test_error):
            if v is None or not math.isfinite(v):
                raise FloatingPointError(f"non-finite result for {r.algorithm} lambda={r.lam}")


def sweep_rows(spec: ExperimentSpec, data: Data) -> list[ReportRow]:
    if not data.test:
        raise SpecError("a test set is required for evaluation")
    jobs, meta = [], []
    for algo in spec.algorithms:
        for lam in spec.lambda_grid:
            p = replace(spec.params, lam=float(lam))
            cfg = make_config(algo, p, spec.full_dim_cap)
            for s in spec.seed_list:
                jobs.append((cfg, data, s, spec.passes))
                meta.append((algo, p))
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            cells = list(pool.map(_cell_job, jobs))
    else:
        cells = [_cell_job(j) for j in jobs]
    rows = [row_from_cell(c, a, p) for c, (a, p) in zip(cells, meta)]
    _check_finite(rows)
    return sort_rows(rows)


def run_sweep(spec: ExperimentSpec, data: Data | None = None) -> list[ReportRow]:
    data = data or load_data(spec.train_path, spec.test_path, spec.synthetic, spec.ambient_dim)
    rows = sweep_rows(spec, data)
    out = rows + summary_rows(rows)
    write_report(sort_rows(out), spec.output, spec.fmt, spec.deterministic)
    return out


def run_grid_search(spec: ExperimentSpec, data: Data | None = None,
                    eta_grid=ETA_GRID, secondary_grid=SECONDARY_GRID) -> list[GridResult]:
    data = data or load_data(spec.train_path, spec.test_path, spec.synthetic, spec.ambient_dim)
    results = [
        grid_search(a, data.train, data.ambient_dim, spec.params, spec.folds, spec.seed,
                    eta_grid, secondary_grid, spec.passes, spec.workers, spec.full_dim_cap)
        for a in spec.algorithms
    ]
    rows = [dict(row, best=False) for res in results for row in res.table]
    k = 0
    for res in results:
        n = len(res.table)
        best_eta, best_val = res.best.eta, _secondary_value(res.algorithm, res.best, spec.params)
        for row in rows[k:k + n]:
            row["best"] = row["eta"] == best_eta and row["value"] == best_val
        k += n
    cols = ("algorithm", "eta", "param", "value", "cv_score", "best")
    _write_text(spec.output, render_rows(rows, cols, spec.fmt))
    return results


def run_regret(spec: ExperimentSpec, data: Data | None = None) -> list[dict]:
    data = data or load_data(spec.train_path, spec.test_path, spec.synthetic, spec.ambient_dim)
    horizon = max(spec.checkpoints)
    if horizon > len(data.train):
        raise SpecError(f"checkpoint {horizon} exceeds the {len(data.train)} training examples")
    rows = []
    for algo in spec.algorithms:
        cfg = make_config(algo, spec.params, spec.full_dim_cap)
        c_pos, c_neg = (cfg.c_pos, cfg.c_neg) if is_cost_sensitive(algo) else (1.0, 1.0)
        for s in spec.seed_list:
            stream = permuted_stream(data.train, s)[:horizon]
            learner = build_learner(cfg, data.ambient_dim)
            stats = train_online(learner, stream)
            w_star = offline_comparator(stream, spec.params.lam, c_pos, c_neg,
                                        epochs=spec.comparator_epochs, dim=data.ambient_dim,
                                        method=spec.comparator_method)
            trace = regret_trace(stats["losses"], example_losses(w_star, stream, c_pos, c_neg),
                                 spec.checkpoints)
            for t, reg in zip(trace.checkpoints, trace.regret):
                rows.append({
                    "algorithm": algo, "seed": s, "T": t,
                    "online_loss": float(trace.online_cumulative[t - 1]),
                    "comparator_loss": float(trace.comparator_cumulative[t - 1]),
                    "regret": reg, "regret_per_round": reg / t,
                })
    cols = ("algorithm", "seed", "T", "online_loss", "comparator_loss", "regret", "regret_per_round")
    _write_text(spec.output, render_rows(rows, cols, spec.fmt))
    return rows


def run_synth(spec: SyntheticSpec, out_dir) -> dict:
    """Write train/test LIBSVM files plus a JSON sidecar with spec, counts and plane."""
    train, test, plane = generate_synthetic(spec)
    os.makedirs(out_dir, exist_ok=True)
    write_libsvm(train, os.path.join(out_dir, "train.libsvm"))
    write_libsvm(test, os.path.join(out_dir, "test.libsvm"))
    meta = {
        "spec": spec.to_dict(),
        "rng": "numpy PCG64",
        "train": asdict(meta_of(train)),
        "test": asdict(meta_of(test)),
        "true_plane": plane.to_array()[: spec.n_effective].tolist(),
    }
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return meta


def run_experiment(spec: ExperimentSpec) -> object:
    if spec.task is Task.SYNTH_GEN:
        if spec.synthetic is None or spec.output is None:
            raise SpecError("synth needs a synthetic spec and an output directory")
        return run_synth(spec.synthetic, spec.output)
    if spec.task in (Task.SPARSITY_SWEEP, Task.TRAIN_EVAL):
        return run_sweep(spec)
    if spec.task is Task.GRID_SEARCH:
        return run_grid_search(spec)
    return run_regret(spec)
