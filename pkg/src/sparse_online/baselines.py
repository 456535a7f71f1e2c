"""Comparison learners: truncated-gradient and adaptive sparse methods plus the
non-sparse cost-sensitive baselines.

The per-round L1 shrinkage of STG, FOBOS and Ada-FOBOS is applied lazily:
soft-thresholding composes additively (S_a(S_b(v)) == S_{a+b}(v)) and a
coordinate's per-round shrink amount only changes on rounds that touch it, so
pending shrinkage is settled when the coordinate is next read.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .learners import ConfigError, RoundOutcome, hinge_loss
from .sparse_core import DenseWeights, SparseVector, soft_threshold_array

__all__ = ["BaselineKind", "BaselineConfig", "BaselineState", "baseline_step", "BaselineLearner"]


class BaselineKind(str, enum.Enum):
    STG = "stg"
    FOBOS = "fobos"
    ADA_FOBOS = "ada-fobos"
    ADA_RDA = "ada-rda"
    CS_OGD = "cs-ogd"
    CPA = "cpa"
    PAUM = "paum"

    @property
    def cost_sensitive(self) -> bool:
        return self in (BaselineKind.CS_OGD, BaselineKind.CPA, BaselineKind.PAUM)

    @property
    def sparse(self) -> bool:
        return not self.cost_sensitive


@dataclass(frozen=True)
class BaselineConfig:
    kind: BaselineKind
    eta: float = 1.0
    lam: float = 0.0
    k_period: int = 10
    trunc_ceiling: float = math.inf
    delta: float = 1.0
    tau_pos: float = 1.0
    tau_neg: float = 0.0
    c_pos: float = 1.0
    c_neg: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BaselineKind(self.kind))
        for name in ("eta", "delta", "c_pos", "c_neg", "trunc_ceiling"):
            v = getattr(self, name)
            if not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lam must be non-negative, got {self.lam}")
        if int(self.k_period) != self.k_period or self.k_period < 1:
            raise ConfigError(f"k_period must be a positive integer, got {self.k_period}")
        if not (np.isfinite(self.tau_pos) and np.isfinite(self.tau_neg)):
            raise ConfigError("PAUM margins must be finite")

    def cost(self, y: int) -> float:
        return self.c_pos if y == 1 else self.c_neg


class BaselineState:
    """w plus whatever accumulators the kind needs.

    ``last`` records, per coordinate, the round through which pending lazy
    shrinkage has been settled.
    """

    def __init__(self, cfg: BaselineConfig):
        self.cfg = cfg
        self.w = DenseWeights()
        self.sq_grad = DenseWeights()  # G_i, adaptive kinds
        self.grad_sum = DenseWeights()  # ADA_RDA only
        self.last = DenseWeights()
        self.t = 1
        self.updates = 0

    # -- lazy shrinkage ----------------------------------------------------
    def _shrink_per_event(self, idx: np.ndarray) -> np.ndarray | float:
        cfg = self.cfg
        if cfg.kind is BaselineKind.STG:
            return cfg.eta * cfg.lam * cfg.k_period
        if cfg.kind is BaselineKind.FOBOS:
            return cfg.eta * cfg.lam
        return cfg.eta * cfg.lam / (cfg.delta + np.sqrt(self.sq_grad.gather(idx)))

    def _events(self, last: np.ndarray, upto: int) -> np.ndarray:
        """Number of shrink events in rounds (last, upto]."""
        k = self.cfg.k_period if self.cfg.kind is BaselineKind.STG else 1
        return upto // k - last // k

    def _settle(self, idx: np.ndarray, upto: int) -> np.ndarray:
        """Apply shrinkage pending through round ``upto``; return current w on idx."""
        w = self.w.gather(idx)
        if self.cfg.lam == 0.0 or idx.size == 0:
            return w
        last = self.last.gather(idx).astype(np.int64)
        n = self._events(last, upto)
        if not n.any():
            return w
        amount = n * self._shrink_per_event(idx)
        shrunk = soft_threshold_array(w, amount)
        if self.cfg.trunc_ceiling != math.inf:
            shrunk = np.where(np.abs(w) <= self.cfg.trunc_ceiling, shrunk, w)
        self.w.scatter_set(idx, shrunk)
        self.last.scatter_set(idx, np.full(idx.size, float(upto)))
        return shrunk

    def flush(self) -> DenseWeights:
        """Settle every coordinate through the last processed round and return w."""
        if self.cfg.kind is BaselineKind.ADA_RDA:
            return DenseWeights(self._rda_weights_on(np.arange(self.grad_sum.dim)))
        idx = np.arange(self.w.dim)
        if self.cfg.kind.sparse:
            self._settle(idx, self.t - 1)
        return self.w.copy()

    def current_weights(self, idx: np.ndarray) -> np.ndarray:
        if self.cfg.kind is BaselineKind.ADA_RDA:
            return self._rda_weights_on(idx)
        if self.cfg.kind.sparse:
            return self._settle(idx, self.t - 1)
        return self.w.gather(idx)

    def _rda_weights_on(self, idx: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        rounds = self.t - 1
        if rounds == 0 or idx.size == 0:
            return np.zeros(idx.size)
        g = self.grad_sum.gather(idx)
        scale = cfg.eta * rounds / (cfg.delta + np.sqrt(self.sq_grad.gather(idx)))
        return -np.sign(g) * scale * np.maximum(np.abs(g) / rounds - cfg.lam, 0.0)


def baseline_step(state: BaselineState, x: SparseVector, y: int, cfg: BaselineConfig | None = None) -> RoundOutcome:
    if cfg is not None and cfg != state.cfg:
        raise ConfigError("cfg does not match the state's configuration")
    cfg = state.cfg
    kind = cfg.kind
    idx, xv = x.indices, x.values
    t = state.t

    w_s = state.current_weights(idx)
    margin = float(xv @ w_s) if idx.size else 0.0
    predicted = 1 if margin >= 0 else -1

    if y not in (1, -1):
        raise ValueError(f"label must be +1 or -1, got {y!r}")
    updated = False

    if kind is BaselineKind.PAUM:
        tau = cfg.tau_pos if y == 1 else cfg.tau_neg
        loss = hinge_loss(margin, y)
        if y * margin <= tau:
            state.w.scatter_add(idx, (cfg.eta * y) * xv)
            updated = True
    elif kind is BaselineKind.CPA:
        loss = hinge_loss(margin, y)
        sq = float(xv @ xv)
        if loss > 0.0 and sq > 0.0:
            tau = min(cfg.cost(y), loss / sq)
            state.w.scatter_add(idx, (tau * y) * xv)
            updated = True
    elif kind is BaselineKind.CS_OGD:
        loss = hinge_loss(margin, y, cfg.cost(y))
        if loss > 0.0:
            state.w.scatter_add(idx, (cfg.eta * cfg.cost(y) * y) * xv)
            updated = True
    elif kind is BaselineKind.ADA_RDA:
        loss = hinge_loss(margin, y)
        if loss > 0.0:
            # subgradient of the hinge loss is -y x
            state.grad_sum.scatter_add(idx, -y * xv)
            state.sq_grad.scatter_add(idx, xv * xv)
            updated = True
    else:
        loss = hinge_loss(margin, y)
        if kind is BaselineKind.ADA_FOBOS:
            if loss > 0.0:
                state.sq_grad.scatter_add(idx, xv * xv)
                denom = cfg.delta + np.sqrt(state.sq_grad.gather(idx))
                state.w.scatter_add(idx, cfg.eta * y * xv / denom)
                updated = True
        elif loss > 0.0:
            state.w.scatter_add(idx, (cfg.eta * y) * xv)
            updated = True
        # this round's shrink for the coordinates we just touched
        if idx.size and cfg.lam > 0.0:
            state._settle(idx, t)

    if updated:
        state.updates += 1
    state.t = t + 1
    return RoundOutcome(margin, predicted, loss, updated)


class BaselineLearner:
    def __init__(self, cfg: BaselineConfig, ambient_dim_hint: int = 0):
        self.cfg = cfg
        self.state = BaselineState(cfg)

    @property
    def name(self) -> str:
        return self.cfg.kind.value

    @property
    def updates(self) -> int:
        return self.state.updates

    def step(self, x: SparseVector, y: int) -> RoundOutcome:
        return baseline_step(self.state, x, y)

    def predict(self, x: SparseVector) -> tuple[float, int]:
        w_s = self.state.current_weights(x.indices)
        margin = float(x.values @ w_s) if x.indices.size else 0.0
        return margin, (1 if margin >= 0 else -1)

    def weights(self) -> DenseWeights:
        return self.state.flush()
