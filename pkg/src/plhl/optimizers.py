"""Counting first-order oracle and the three zero-respecting methods.

Every method issues exactly one gradient query per iteration, and the value
returned by the same call is what the trace records. Record ``k`` describes the
``k``-th query point, i.e. the point produced after ``k`` earlier gradients,
so ``len(trace) == oracle.query_count`` always.

AGD and Heavy-ball use the textbook constant-momentum tunings for an
``L``-smooth, ``mu_hat``-strongly convex function:

* AGD: ``beta = (sqrt(k) - 1) / (sqrt(k) + 1)``, step ``1/L``.
* Heavy-ball: ``alpha = 4 / (sqrt(L) + sqrt(mu_hat))^2``, ``beta = beta_agd^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DIVERGENCE_FACTOR = 1e6


class Method(str, enum.Enum):
    GD = "gd"
    AGD = "agd"
    HEAVY_BALL = "hb"


class Status(str, enum.Enum):
    REACHED_TARGET = "ReachedTarget"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    DIVERGED = "Diverged"


class CountingOracle:
    """Wraps ``fn(x) -> (value, grad)`` and counts gradient queries."""

    def __init__(self, fn: Callable, dim: int):
        self._fn = fn
        self.dim = int(dim)
        self._count = 0

    @property
    def query_count(self) -> int:
        return self._count

    def __call__(self, x):
        self._count += 1
        value, grad = self._fn(x)
        return float(value), np.asarray(grad, dtype=float)


@dataclass(frozen=True)
class OptimizerConfig:
    method: Method
    L: float
    mu_hat: float
    max_queries: int
    target_relgap: float
    support_tolerance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.L > 0 or not self.mu_hat > 0:
            raise ValueError("L and mu_hat must be positive")
        if self.mu_hat > self.L:
            raise ValueError(f"mu_hat={self.mu_hat} exceeds L={self.L}")
        if self.max_queries < 1:
            raise ValueError("max_queries must be positive")
        if not 0 < self.target_relgap < 1:
            raise ValueError("target_relgap must lie in (0, 1)")
        if self.support_tolerance < 0:
            raise ValueError("support_tolerance must be nonnegative")

    @property
    def momentum(self) -> float:
        root = math.sqrt(self.L / self.mu_hat)
        return (root - 1.0) / (root + 1.0)


@dataclass
class Trace:
    query: np.ndarray
    value_gap: np.ndarray
    rel_gap: np.ndarray
    grad_norm: np.ndarray
    support_size: np.ndarray
    status: Status
    method: Method
    zero_respecting: bool = True
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.query)

    def queries_to_target(self, epsilon: float) -> int | None:
        """First query index whose relative gap is ``<= epsilon``."""
        hit = np.flatnonzero(self.rel_gap <= epsilon)
        return int(self.query[hit[0]]) if hit.size else None

    def rel_gap_at(self, k: int) -> float:
        """Relative gap after ``k`` queries, or the final one if the run stopped earlier."""
        return float(self.rel_gap[min(k, len(self) - 1)])


def support_of(x, tol: float = 0.0) -> set[int]:
    """1-based indices with ``|x_i| > tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return {int(i) + 1 for i in np.flatnonzero(np.abs(np.asarray(x)) > tol)}


FLUSH_EVERY = 1 << 16


class _Recorder:
    """Accumulates records in fixed-size chunks; hands full chunks to ``sink``."""

    def __init__(self, cfg: OptimizerConfig, x0: np.ndarray, f_star: float, sink=None):
        self.cfg = cfg
        self.f_star = f_star
        self.x0 = x0
        self.sink = sink
        self.chunks: list[np.ndarray] = []
        self.buf = np.empty((FLUSH_EVERY, 5))
        self.fill = 0
        self.count = 0
        self.gap0 = None
        self.status = Status.BUDGET_EXHAUSTED
        self.seen = np.zeros(x0.size, dtype=bool)
        self.zero_respecting = True

    def _push(self, row):
        self.buf[self.fill] = row
        self.fill += 1
        self.count += 1
        if self.fill == FLUSH_EVERY:
            self._flush()

    def _flush(self):
        if self.fill:
            chunk = self.buf[:self.fill].copy()
            self.chunks.append(chunk)
            if self.sink is not None:
                self.sink(chunk)
            self.fill = 0

    def record(self, x, value, grad) -> bool:
        """Append one record; return True when the run must stop."""
        k = self.count
        moved = np.abs(x - self.x0) > self.cfg.support_tolerance
        if self.zero_respecting and np.any(moved & ~self.seen):
            self.zero_respecting = False
        if not (math.isfinite(value) and np.all(np.isfinite(grad))):
            self._push((k, math.inf, math.inf, math.inf, moved.sum()))
            self.status = Status.DIVERGED
            return True
        gap = max(value - self.f_star, 0.0)
        if self.gap0 is None:
            self.gap0 = gap
        rel = gap / self.gap0 if self.gap0 > 0 else 0.0
        self._push((k, gap, rel, math.sqrt(float(np.dot(grad, grad))), moved.sum()))
        self.seen |= grad != 0
        if rel <= self.cfg.target_relgap:
            self.status = Status.REACHED_TARGET
            return True
        if gap > DIVERGENCE_FACTOR * self.gap0:
            self.status = Status.DIVERGED
            return True
        return False

    def trace(self) -> Trace:
        self._flush()
        data = np.concatenate(self.chunks) if self.chunks else np.empty((0, 5))
        return Trace(
            query=data[:, 0].astype(np.int64),
            value_gap=data[:, 1].copy(),
            rel_gap=data[:, 2].copy(),
            grad_norm=data[:, 3].copy(),
            support_size=data[:, 4].astype(np.int64),
            status=self.status,
            method=self.cfg.method,
            zero_respecting=self.zero_respecting,
        )


def _prepare(oracle: CountingOracle, cfg: OptimizerConfig, x0, method: Method):
    if cfg.method is not method:
        raise ValueError(f"config is for {cfg.method.value}, not {method.value}")
    x0 = np.array(x0, dtype=float)
    if x0.shape != (oracle.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, oracle dim is {oracle.dim}")
    return x0


def run_gd(oracle: CountingOracle, cfg: OptimizerConfig, x0, f_star: float = 0.0,
           callback: Callable | None = None, sink=None) -> Trace:
    """``x_{k+1} = x_k - grad f(x_k) / L``."""
    x = _prepare(oracle, cfg, x0, Method.GD)
    rec = _Recorder(cfg, x.copy(), f_star, sink)
    step = 1.0 / cfg.L
    for _ in range(cfg.max_queries):
        value, grad = oracle(x)
        if callback is not None:
            callback(x, value, grad)
        if rec.record(x, value, grad):
            break
        x = x - step * grad
    return rec.trace()


def run_agd(oracle: CountingOracle, cfg: OptimizerConfig, x0, f_star: float = 0.0,
            callback: Callable | None = None, sink=None) -> Trace:
    """Constant-momentum Nesterov; the gradient is queried at the extrapolated point."""
    x_prev = _prepare(oracle, cfg, x0, Method.AGD)
    rec = _Recorder(cfg, x_prev.copy(), f_star, sink)
    step = 1.0 / cfg.L
    beta = cfg.momentum
    point = x_prev.copy()
    for _ in range(cfg.max_queries):
        value, grad = oracle(point)
        if callback is not None:
            callback(point, value, grad)
        if rec.record(point, value, grad):
            break
        x_next = point - step * grad
        point = x_next + beta * (x_next - x_prev)
        x_prev = x_next
    return rec.trace()


def run_heavy_ball(oracle: CountingOracle, cfg: OptimizerConfig, x0, f_star: float = 0.0,
                   callback: Callable | None = None, sink=None) -> Trace:
    """Polyak momentum; not guaranteed to converge on nonconvex instances."""
    x = _prepare(oracle, cfg, x0, Method.HEAVY_BALL)
    rec = _Recorder(cfg, x.copy(), f_star, sink)
    alpha = 4.0 / (math.sqrt(cfg.L) + math.sqrt(cfg.mu_hat)) ** 2
    beta = cfg.momentum**2
    x_prev = x.copy()
    for _ in range(cfg.max_queries):
        value, grad = oracle(x)
        if callback is not None:
            callback(x, value, grad)
        if rec.record(x, value, grad):
            break
        x, x_prev = x - alpha * grad + beta * (x - x_prev), x
    return rec.trace()


RUNNERS = {Method.GD: run_gd, Method.AGD: run_agd, Method.HEAVY_BALL: run_heavy_ball}


def run(oracle: CountingOracle, cfg: OptimizerConfig, x0, **kwargs) -> Trace:
    return RUNNERS[cfg.method](oracle, cfg, x0, **kwargs)
