"""Dual-averaging sparse online learners: FSOL, SSOL (full and diagonal) and
their cost-sensitive variants.

Each round follows the same driver contract: receive ``x``, materialise the
weights on ``x``'s support, predict, then use the label to suffer the hinge
loss and update the dual accumulator ``theta``. The label is never read before
the prediction is fixed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .sparse_core import DenseWeights, SparseVector, soft_threshold_array

__all__ = [
    "Kind",
    "Schedule",
    "LearnerConfig",
    "ModelState",
    "RoundOutcome",
    "ConfigError",
    "predict",
    "hinge_loss",
    "lambda_schedule",
    "fsol_step",
    "ssol_full_step",
    "ssol_diag_step",
    "step",
    "make_learner",
    "materialize",
    "SparseOnlineLearner",
]

DEFAULT_FULL_DIM_CAP = 4096


class ConfigError(ValueError):
    """Invalid learner configuration."""


class Kind(str, enum.Enum):
    FSOL = "fsol"
    SSOL_FULL = "ssol-full"
    SSOL_DIAG = "ssol-diag"
    CS_FSOL = "cs-fsol"
    CS_SSOL_FULL = "cs-ssol-full"
    CS_SSOL_DIAG = "cs-ssol-diag"

    @property
    def cost_sensitive(self) -> bool:
        return self in (Kind.CS_FSOL, Kind.CS_SSOL_FULL, Kind.CS_SSOL_DIAG)

    @property
    def second_order(self) -> bool:
        return self not in (Kind.FSOL, Kind.CS_FSOL)

    @property
    def full_matrix(self) -> bool:
        return self in (Kind.SSOL_FULL, Kind.CS_SSOL_FULL)


class Schedule(str, enum.Enum):
    CONST_ETA_LAMBDA = "eta-lambda"  # lambda_t = eta * lambda
    INV_T = "inv-t"  # lambda_t = lambda / t
    CONSTANT = "const"  # lambda_t = lambda


@dataclass(frozen=True)
class LearnerConfig:
    kind: Kind
    eta: float = 1.0
    lam: float = 0.0
    r: float = 1.0
    c_pos: float = 1.0
    c_neg: float = 1.0
    schedule: Schedule | None = None  # None: bound to kind
    full_dim_cap: int = DEFAULT_FULL_DIM_CAP

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.schedule is not None:
            object.__setattr__(self, "schedule", Schedule(self.schedule))
        for name in ("eta", "r", "c_pos", "c_neg"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lam must be non-negative, got {self.lam}")
        if not self.kind.cost_sensitive and (self.c_pos != 1.0 or self.c_neg != 1.0):
            raise ConfigError(
                f"{self.kind.value} is cost-insensitive: c_pos and c_neg must both be 1 "
                f"(got {self.c_pos}, {self.c_neg}); use the cs- variant"
            )

    @property
    def effective_schedule(self) -> Schedule:
        if self.schedule is not None:
            return self.schedule
        return Schedule.INV_T if self.kind.second_order else Schedule.CONST_ETA_LAMBDA

    def cost(self, y: int) -> float:
        return self.c_pos if y == 1 else self.c_neg


class RoundOutcome(NamedTuple):
    margin: float
    predicted: int
    loss: float
    updated: bool


@dataclass
class ModelState:
    """Mutable per-stream learner state.

    ``a_inv`` is a dense ``(d, d)`` array for the full second-order kinds, a
    ``DenseWeights`` with fill 1.0 for the diagonal kinds, and ``None`` for the
    first-order kinds. ``t`` is the index of the next round (starts at 1).
    """

    cfg: LearnerConfig
    theta: DenseWeights = field(default_factory=DenseWeights)
    a_inv: np.ndarray | DenseWeights | None = None
    t: int = 1
    updates: int = 0

    @property
    def w(self) -> DenseWeights:
        """Weights materialised with the threshold of the last processed round."""
        return materialize(self)

    def copy(self) -> "ModelState":
        a = self.a_inv
        if a is not None:
            a = a.copy()
        return ModelState(self.cfg, self.theta.copy(), a, self.t, self.updates)


def _check_label(y) -> int:
    if y not in (1, -1):
        raise ValueError(f"label must be +1 or -1, got {y!r}")
    return int(y)


def hinge_loss(margin: float, y: int, c_y: float = 1.0) -> float:
    """c_y * max(1 - y * margin, 0)."""
    return c_y * max(1.0 - y * margin, 0.0)


def lambda_schedule(cfg: LearnerConfig, t: int) -> float:
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    sched = cfg.effective_schedule
    if sched is Schedule.CONST_ETA_LAMBDA:
        return cfg.eta * cfg.lam
    if sched is Schedule.INV_T:
        return cfg.lam / t
    return cfg.lam


def make_learner(cfg: LearnerConfig, ambient_dim_hint: int = 0) -> ModelState:
    """Fresh state: theta = 0, t = 1 and an identity inverse for second-order kinds."""
    if not isinstance(cfg, LearnerConfig):
        raise ConfigError("expected a LearnerConfig")
    a_inv = None
    if cfg.kind.full_matrix:
        if ambient_dim_hint > cfg.full_dim_cap:
            raise ConfigError(
                f"full-matrix {cfg.kind.value} needs O(d^2) memory; d={ambient_dim_hint} "
                f"exceeds the cap of {cfg.full_dim_cap}. Use ssol-diag for large d."
            )
        a_inv = np.eye(max(ambient_dim_hint, 0))
    elif cfg.kind.second_order:
        a_inv = DenseWeights.zeros(max(ambient_dim_hint, 0), fill=1.0)
    return ModelState(cfg=cfg, a_inv=a_inv)


def _grow_full(state: ModelState, dim: int) -> np.ndarray:
    a = state.a_inv
    d = a.shape[0]
    if dim <= d:
        return a
    if dim > state.cfg.full_dim_cap:
        raise ConfigError(
            f"feature index {dim - 1} pushes full-matrix {state.cfg.kind.value} past its "
            f"dimension cap of {state.cfg.full_dim_cap}. Use ssol-diag for large d."
        )
    grown = np.eye(dim)
    grown[:d, :d] = a
    state.a_inv = grown
    return grown


def _support_u(state: ModelState, idx: np.ndarray) -> np.ndarray:
    """u = A^{-1} theta restricted to ``idx`` (u = theta for first order)."""
    theta_s = state.theta.gather(idx)
    kind = state.cfg.kind
    if not kind.second_order:
        return theta_s
    if kind.full_matrix:
        a = state.a_inv
        d = a.shape[0]
        if idx.size == 0:
            return theta_s
        theta = state.theta.to_array(d)
        return a[idx, :] @ theta
    return state.a_inv.gather(idx) * theta_s


def materialize(state: ModelState, lam_t: float | None = None) -> DenseWeights:
    """Full weight vector w = soft_threshold(u, lambda_t).

    With ``lam_t`` omitted the threshold of the last processed round is used
    (round 1 if nothing has been processed yet).
    """
    if lam_t is None:
        lam_t = lambda_schedule(state.cfg, max(state.t - 1, 1))
    kind = state.cfg.kind
    if not kind.second_order:
        u = state.theta.to_array()
    elif kind.full_matrix:
        d = state.a_inv.shape[0]
        u = state.a_inv @ state.theta.to_array(d)
    else:
        d = state.theta.dim
        u = state.a_inv.to_array(d) * state.theta.to_array(d)
    return DenseWeights(soft_threshold_array(u, lam_t))


def predict(state: ModelState, x: SparseVector) -> tuple[float, int]:
    """Margin and label (+1 on ties) from the currently materialised weights."""
    lam_t = lambda_schedule(state.cfg, max(state.t - 1, 1))
    w_s = soft_threshold_array(_support_u(state, x.indices), lam_t)
    margin = float(x.values @ w_s) if x.indices.size else 0.0
    return margin, (1 if margin >= 0 else -1)


def _finish_round(state: ModelState, x: SparseVector, y, lam_t: float) -> RoundOutcome:
    # Prediction is fixed here, before the label is inspected.
    w_s = soft_threshold_array(_support_u(state, x.indices), lam_t)
    margin = float(x.values @ w_s) if x.indices.size else 0.0
    predicted = 1 if margin >= 0 else -1

    y = _check_label(y)
    c_y = state.cfg.cost(y)
    loss = hinge_loss(margin, y, c_y)
    updated = loss > 0.0
    if updated:
        state.theta.scatter_add(x.indices, (state.cfg.eta * c_y * y) * x.values)
        state.updates += 1
    state.t += 1
    return RoundOutcome(margin, predicted, loss, updated)


def _require(state: ModelState, cfg: LearnerConfig | None, kinds) -> None:
    if cfg is not None and cfg is not state.cfg and cfg != state.cfg:
        raise ConfigError("cfg does not match the state's configuration")
    if state.cfg.kind not in kinds:
        raise ConfigError(f"{state.cfg.kind.value} state passed to the wrong step function")


def fsol_step(state: ModelState, x: SparseVector, y: int, cfg: LearnerConfig | None = None) -> RoundOutcome:
    _require(state, cfg, (Kind.FSOL, Kind.CS_FSOL))
    return _finish_round(state, x, y, lambda_schedule(state.cfg, state.t))


def ssol_full_step(state: ModelState, x: SparseVector, y: int, cfg: LearnerConfig | None = None) -> RoundOutcome:
    _require(state, cfg, (Kind.SSOL_FULL, Kind.CS_SSOL_FULL))
    _check_label(y)
    idx, xv = x.indices, x.values
    if idx.size:
        a = _grow_full(state, int(idx[-1]) + 1)
        v = a[:, idx] @ xv
        denom = state.cfg.r + xv @ v[idx]
        a -= np.outer(v, v) / denom
    return _finish_round(state, x, y, lambda_schedule(state.cfg, state.t))


def ssol_diag_step(state: ModelState, x: SparseVector, y: int, cfg: LearnerConfig | None = None) -> RoundOutcome:
    _require(state, cfg, (Kind.SSOL_DIAG, Kind.CS_SSOL_DIAG))
    _check_label(y)
    idx, xv = x.indices, x.values
    if idx.size:
        a_s = state.a_inv.gather(idx)
        ax = a_s * xv
        denom = state.cfg.r + xv @ ax
        state.a_inv.scatter_set(idx, a_s - ax * ax / denom)
    return _finish_round(state, x, y, lambda_schedule(state.cfg, state.t))


_STEPS = {
    Kind.FSOL: fsol_step,
    Kind.CS_FSOL: fsol_step,
    Kind.SSOL_FULL: ssol_full_step,
    Kind.CS_SSOL_FULL: ssol_full_step,
    Kind.SSOL_DIAG: ssol_diag_step,
    Kind.CS_SSOL_DIAG: ssol_diag_step,
}


def step(state: ModelState, x: SparseVector, y: int) -> RoundOutcome:
    return _STEPS[state.cfg.kind](state, x, y)


class SparseOnlineLearner:
    """Object wrapper over ``ModelState`` used by the benchmark drivers."""

    def __init__(self, cfg: LearnerConfig, ambient_dim_hint: int = 0):
        self.cfg = cfg
        self.state = make_learner(cfg, ambient_dim_hint)
        self._step = _STEPS[cfg.kind]

    @property
    def name(self) -> str:
        return self.cfg.kind.value

    @property
    def updates(self) -> int:
        return self.state.updates

    def step(self, x: SparseVector, y: int) -> RoundOutcome:
        return self._step(self.state, x, y)

    def predict(self, x: SparseVector) -> tuple[float, int]:
        return predict(self.state, x)

    def weights(self) -> DenseWeights:
        return materialize(self.state)
