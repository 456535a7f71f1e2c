"""Online evaluation: confusion counts, cost-sensitive metrics, empirical regret
against an offline comparator, and error-vs-sparsity sweeps."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .baselines import BaselineConfig, BaselineLearner
from .data_io import SparseExample, permuted_stream, to_csr
from .learners import LearnerConfig, SparseOnlineLearner
from .sparse_core import DenseWeights, model_sparsity

__all__ = [
    "ConfusionCounts",
    "ImbalanceSpec",
    "Metrics",
    "RegretTrace",
    "record",
    "metrics",
    "rho_from_priors",
    "build_learner",
    "train_online",
    "evaluate",
    "hinge_objective",
    "offline_comparator",
    "example_losses",
    "regret_trace",
    "SweepCell",
    "SweepPoint",
    "run_cell",
    "sparsity_sweep",
    "aggregate",
]


@dataclass
class ConfusionCounts:
    t_pos: int = 0
    t_neg: int = 0
    m_pos: int = 0  # false negatives
    m_neg: int = 0  # false positives

    @property
    def total(self) -> int:
        return self.t_pos + self.t_neg

    @property
    def mistakes(self) -> int:
        return self.m_pos + self.m_neg


@dataclass(frozen=True)
class ImbalanceSpec:
    mu_pos: float = 0.5
    mu_neg: float = 0.5
    t_pos: int | None = None
    t_neg: int | None = None

    def __post_init__(self):
        if not (0 <= self.mu_pos <= 1 and 0 <= self.mu_neg <= 1):
            raise ValueError("mu_pos and mu_neg must lie in [0, 1]")
        if not math.isclose(self.mu_pos + self.mu_neg, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("mu_pos + mu_neg must equal 1")


@dataclass(frozen=True)
class Metrics:
    error_rate: float
    sensitivity: float | None
    specificity: float | None
    weighted_sum: float | None


def record(conf: ConfusionCounts, y: int, y_hat: int) -> ConfusionCounts:
    if y == 1:
        conf.t_pos += 1
        if y_hat != 1:
            conf.m_pos += 1
    elif y == -1:
        conf.t_neg += 1
        if y_hat != -1:
            conf.m_neg += 1
    else:
        raise ValueError(f"label must be +1 or -1, got {y!r}")
    return conf


def metrics(conf: ConfusionCounts, spec: ImbalanceSpec = ImbalanceSpec()) -> Metrics:
    """Error rate, sensitivity, specificity and their mu-weighted sum.

    Sensitivity / specificity (and hence the sum) are ``None`` when the
    corresponding class is absent.
    """
    if conf.total == 0:
        raise ValueError("no examples recorded")
    err = conf.mistakes / conf.total
    sens = (conf.t_pos - conf.m_pos) / conf.t_pos if conf.t_pos else None
    spec_ = (conf.t_neg - conf.m_neg) / conf.t_neg if conf.t_neg else None
    wsum = None
    if sens is not None and spec_ is not None:
        wsum = spec.mu_pos * sens + spec.mu_neg * spec_
    return Metrics(err, sens, spec_, wsum)


def rho_from_priors(spec: ImbalanceSpec) -> float:
    """Positive-class cost ratio mu+ T- / (mu- T+); use c_pos = rho, c_neg = 1."""
    if spec.t_pos is None or spec.t_neg is None:
        raise ValueError("class totals t_pos and t_neg are required")
    if spec.t_pos <= 0 or spec.t_neg <= 0:
        raise ValueError("class totals must be positive")
    if spec.mu_neg <= 0:
        raise ValueError("mu_neg must be positive")
    return spec.mu_pos * spec.t_neg / (spec.mu_neg * spec.t_pos)


# -- training / testing ------------------------------------------------------

AlgoConfig = LearnerConfig | BaselineConfig


def build_learner(cfg: AlgoConfig, ambient_dim_hint: int = 0):
    if isinstance(cfg, LearnerConfig):
        return SparseOnlineLearner(cfg, ambient_dim_hint)
    if isinstance(cfg, BaselineConfig):
        return BaselineLearner(cfg, ambient_dim_hint)
    raise TypeError(f"unknown config type {type(cfg).__name__}")


def train_online(learner, stream: Sequence[SparseExample], passes: int = 1) -> dict:
    """Run the online protocol; returns cumulative stats for the run."""
    conf = ConfusionCounts()
    losses = np.empty(len(stream) * passes)
    k = 0
    t0 = time.perf_counter()
    for _ in range(passes):
        for ex in stream:
            out = learner.step(ex.x, ex.y)
            record(conf, ex.y, out.predicted)
            losses[k] = out.loss
            k += 1
    elapsed = time.perf_counter() - t0
    return {"online": conf, "losses": losses, "train_time": elapsed}


def evaluate(w: DenseWeights, data: Sequence[SparseExample], dim: int | None = None) -> ConfusionCounts:
    """Confusion counts of the frozen weights ``w`` on ``data``."""
    X, y = to_csr(data, dim)
    wv = w.to_array(X.shape[1])
    margins = X @ wv
    pred = np.where(margins >= 0, 1, -1)
    pos = y == 1
    return ConfusionCounts(
        t_pos=int(pos.sum()),
        t_neg=int((~pos).sum()),
        m_pos=int((pred[pos] != 1).sum()),
        m_neg=int((pred[~pos] != -1).sum()),
    )


# -- regret ------------------------------------------------------------------

def _costs(y: np.ndarray, c_pos: float, c_neg: float) -> np.ndarray:
    return np.where(y == 1, c_pos, c_neg).astype(np.float64)


def hinge_objective(w: np.ndarray, X, y: np.ndarray, lam: float = 0.0,
                    c_pos: float = 1.0, c_neg: float = 1.0) -> float:
    """sum_t c_t [1 - y_t w.x_t]_+ + lam ||w||_1."""
    m = X @ w
    return float(_costs(y, c_pos, c_neg) @ np.maximum(1.0 - y * m, 0.0) + lam * np.abs(w).sum())


def offline_comparator(
    dataset: Sequence[SparseExample],
    lam: float = 0.0,
    c_pos: float = 1.0,
    c_neg: float = 1.0,
    epochs: int = 500,
    dim: int | None = None,
    method: str = "lp",
) -> DenseWeights:
    """Minimiser of sum_t c_t [1 - y_t w.x_t]_+ + lam ||w||_1.

    ``method="lp"`` solves the problem exactly as a linear program (w split
    into positive and negative parts, one slack per example) with HiGHS.
    ``method="subgradient"`` runs ``epochs`` normalised full-batch subgradient
    steps w -= (R / sqrt(k)) g / ||g||, with R = f(0) / ||g(0)|| as the
    distance scale, and keeps the best iterate; it needs no LP solver but only
    approximates the minimum. Both are deterministic.
    """
    X, y = to_csr(dataset, dim)
    n, d = X.shape
    if n == 0 or d == 0:
        return DenseWeights(np.zeros(d))
    c = _costs(y, c_pos, c_neg)
    if method == "lp":
        return DenseWeights(_comparator_lp(X, y, c, lam))
    if method != "subgradient":
        raise ValueError(f"unknown comparator method {method!r}")
    Xt = X.T.tocsr()
    w = np.zeros(d)
    best_w, best_obj = w.copy(), hinge_objective(w, X, y, lam, c_pos, c_neg)
    radius = None
    for k in range(1, epochs + 1):
        active = (1.0 - y * (X @ w)) > 0
        g = -(Xt @ (c * y * active)) + lam * np.sign(w)
        gn = math.sqrt(float(g @ g))
        if gn == 0.0:
            break
        if radius is None:
            radius = best_obj / gn
        w = w - (radius / math.sqrt(k) / gn) * g
        obj = hinge_objective(w, X, y, lam, c_pos, c_neg)
        if obj < best_obj:
            best_obj, best_w = obj, w.copy()
    return DenseWeights(best_w)


def _comparator_lp(X, y: np.ndarray, c: np.ndarray, lam: float) -> np.ndarray:
    # variables: w+ (d), w- (d), xi (n); min lam 1'(w+ + w-) + c'xi
    # s.t. xi_t >= 1 - y_t x_t'(w+ - w-), all >= 0
    n, d = X.shape
    yx = sp.diags(y.astype(np.float64)) @ X
    a_ub = sp.hstack([-yx, yx, -sp.identity(n)], format="csc")
    cost = np.concatenate([np.full(2 * d, lam), c])
    res = linprog(cost, A_ub=a_ub, b_ub=-np.ones(n), bounds=(0, None), method="highs")
    if res.status != 0:
        raise FloatingPointError(f"comparator LP failed: {res.message}")
    return res.x[:d] - res.x[d:2 * d]


def example_losses(w: DenseWeights, dataset: Sequence[SparseExample],
                   c_pos: float = 1.0, c_neg: float = 1.0) -> np.ndarray:
    """Per-round (c-weighted) hinge losses of a fixed comparator."""
    X, y = to_csr(dataset)
    m = X @ w.to_array(X.shape[1])
    return _costs(y, c_pos, c_neg) * np.maximum(1.0 - y * m, 0.0)


@dataclass
class RegretTrace:
    online_cumulative: np.ndarray
    comparator_cumulative: np.ndarray
    checkpoints: list[int]
    regret: list[float]

    @property
    def average_regret(self) -> list[float]:
        return [r / t for r, t in zip(self.regret, self.checkpoints)]


def regret_trace(online_losses, comparator_losses, checkpoints: Sequence[int]) -> RegretTrace:
    online = np.asarray(online_losses, dtype=np.float64)
    comp = np.asarray(comparator_losses, dtype=np.float64)
    if online.shape != comp.shape:
        raise ValueError(f"loss series differ in length: {online.size} vs {comp.size}")
    cum_on = np.cumsum(online)
    cum_cmp = np.cumsum(comp)
    cps = [int(t) for t in checkpoints]
    for t in cps:
        if not 1 <= t <= online.size:
            raise ValueError(f"checkpoint {t} outside 1..{online.size}")
    # summing the differences keeps R_T exactly linear in the inputs
    diff = np.cumsum(online - comp)
    return RegretTrace(cum_on, cum_cmp, cps, [float(diff[t - 1]) for t in cps])


# -- sparsity sweeps ---------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    algorithm: str
    lam: float
    seed: int
    sparsity: float
    test_error: float
    weighted_sum: float | None
    train_time: float
    updates: int
    nonzeros: int


@dataclass(frozen=True)
class SweepPoint:
    algorithm: str
    lam: float
    sparsity_mean: float
    sparsity_std: float
    error_mean: float
    error_std: float
    cells: tuple[SweepCell, ...] = field(repr=False, default=())


def with_lambda(cfg: AlgoConfig, lam: float) -> AlgoConfig:
    return replace(cfg, lam=float(lam))


def algo_name(cfg: AlgoConfig) -> str:
    return cfg.kind.value


def run_cell(cfg: AlgoConfig, train: Sequence[SparseExample], test: Sequence[SparseExample],
             ambient_dim: int, seed: int, passes: int = 1,
             imbalance: ImbalanceSpec = ImbalanceSpec()) -> SweepCell:
    """One pass over a seeded permutation of ``train``, then frozen-weight test."""
    learner = build_learner(cfg, ambient_dim)
    stream = permuted_stream(train, seed)
    stats = train_online(learner, stream, passes)
    w = learner.weights()
    conf = evaluate(w, test, ambient_dim)
    m = metrics(conf, imbalance)
    return SweepCell(
        algorithm=algo_name(cfg),
        lam=float(cfg.lam),
        seed=int(seed),
        sparsity=model_sparsity(w, max(ambient_dim, w.dim)),
        test_error=m.error_rate,
        weighted_sum=m.weighted_sum,
        train_time=stats["train_time"],
        updates=learner.updates,
        nonzeros=w.nnz(),
    )


def _run_cell_args(args):
    return run_cell(*args)


def aggregate(cells: Sequence[SweepCell]) -> list[SweepPoint]:
    groups: dict[tuple[str, float], list[SweepCell]] = {}
    for c in cells:
        groups.setdefault((c.algorithm, c.lam), []).append(c)
    out = []
    for (name, lam) in sorted(groups):
        cs = sorted(groups[(name, lam)], key=lambda c: c.seed)
        sp_ = np.array([c.sparsity for c in cs])
        er = np.array([c.test_error for c in cs])
        out.append(SweepPoint(name, lam, float(sp_.mean()), float(sp_.std()),
                              float(er.mean()), float(er.std()), tuple(cs)))
    return out


def sparsity_sweep(
    template: AlgoConfig,
    train: Sequence[SparseExample],
    test: Sequence[SparseExample],
    lambda_grid: Sequence[float],
    seeds: Sequence[int],
    ambient_dim: int,
    passes: int = 1,
    workers: int = 1,
) -> list[SweepPoint]:
    """Error-vs-sparsity curve: one cell per (lambda, seed), aggregated per lambda."""
    if not len(lambda_grid):
        raise ValueError("lambda grid is empty")
    jobs = [(with_lambda(template, lam), train, test, ambient_dim, s, passes)
            for lam in lambda_grid for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell_args, jobs))
    else:
        cells = [run_cell(*j) for j in jobs]
    return aggregate(cells)
