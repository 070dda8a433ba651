"""The hard smooth PL instance family.

The chain function on ``R^(T*t)`` is

    g(u) = q(u) + sum_i v_{y_i}(u_i),

with ``q`` a block-chained quadratic and ``v_y`` a smooth scalar with a narrow
nonconvex dent around ``u = y``. The scaled instance used against optimizers is

    f(x) = c * g(y - s * x),   c = L D^2 / (37 T),   s = sqrt(T) / D,

which is L-smooth, has minimum 0 at ``x = y / s`` and starts from ``x0 = 0``.

Indices in docstrings are 1-based like the math; arrays are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import kernels

C3_EXACT = Fraction(21344400, 1083)
C3 = float(C3_EXACT)
C4 = 370.0 * C3
SMOOTHNESS = 37.0
BLOCK_RATIO = 7.0 / 8.0
EPSILON_MAX = 0.01


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class DimensionError(ValueError):
    """Vector length does not match the instance dimension."""


class EvalResult(NamedTuple):
    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class ChainShape:
    T: int
    t: int
    override: bool = False
    below_regime: bool = False

    def __post_init__(self):
        if int(self.T) != self.T or int(self.t) != self.t or self.T < 1 or self.t < 1:
            raise DomainError(f"block length and count must be positive integers, got T={self.T}, t={self.t}")

    @property
    def dim(self) -> int:
        return self.T * self.t


def chain_shape(T: int, t: int) -> ChainShape:
    """Explicit (T, t) override; flagged as such in every report."""
    return ChainShape(int(T), int(t), override=True)


def shape_from_target(kappa: float, epsilon: float) -> ChainShape:
    """Block length from the condition number, block count from the accuracy.

    ``T = floor(kappa / (37 C3))`` and ``t = 2 floor(log_{8/7}(3 / (2 eps)))``.
    ``below_regime`` is set when ``kappa <= C4``; the instance is still valid
    there, only the asymptotic statement does not cover it.
    """
    if not epsilon > 0 or not epsilon < EPSILON_MAX:
        raise DomainError(f"epsilon must lie in (0, {EPSILON_MAX}), got {epsilon}")
    if not kappa > SMOOTHNESS * C3:
        raise DomainError(
            f"condition number too small for chain construction: kappa={kappa} <= 37*C3={SMOOTHNESS * C3:.6g}"
        )
    T = math.floor(kappa / (SMOOTHNESS * C3))
    t = 2 * math.floor(math.log(3.0 / (2.0 * epsilon)) / math.log(8.0 / 7.0))
    return ChainShape(T, t, below_regime=kappa <= C4)


@lru_cache(maxsize=64)
def _arrays(T: int, t: int) -> tuple[np.ndarray, np.ndarray]:
    n = T * t
    y = np.empty(n)
    level = 1.0
    for q in range(t):
        y[q * T:(q + 1) * T] = level
        level *= BLOCK_RATIO
    # a[k] couples u[k] to u[k-1]; 7/8 across a block boundary, u_0 = 0 before index 0
    a = np.ones(n)
    a[::T] = BLOCK_RATIO
    a[0] = 0.0
    y.flags.writeable = False
    a.flags.writeable = False
    return y, a


def reference_vector(shape: ChainShape) -> np.ndarray:
    """``y_{qT+b} = (7/8)^q``, built as a running product so block ratios are exact."""
    return _arrays(shape.T, shape.t)[0].copy()


def coupling(shape: ChainShape) -> np.ndarray:
    return _arrays(shape.T, shape.t)[1]


def component_v(y: float, x: float) -> tuple[float, float]:
    if not y > 0:
        raise DomainError(f"y must be positive, got {y}")
    from ._pykernels import v_pieces

    value, deriv = v_pieces(y, x)
    return float(value), float(deriv)


def component_b(y: float, x: float) -> float:
    if not y > 0:
        raise DomainError(f"y must be positive, got {y}")
    from ._pykernels import b_spike

    return float(b_spike(y, x))


def _check(shape: ChainShape, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (shape.dim,):
        raise DimensionError(f"expected length {shape.dim}, got shape {x.shape}")
    return x


def quadratic_oracle(shape: ChainShape, x) -> tuple[float, np.ndarray]:
    """``(q(x), B x)`` from the O(dim) stencil; ``B`` is never formed."""
    x = _check(shape, x)
    from ._pykernels import quad_value

    a = coupling(shape)
    return quad_value(x, a), kernels.b_matvec(x, a)


def chain_oracle(shape: ChainShape, x) -> EvalResult:
    """Unscaled chain function and gradient ``B x + x - b(x)``. Accepts batches."""
    x = _check(shape, x)
    y, a = _arrays(shape.T, shape.t)
    return EvalResult(*kernels.chain_value_grad(x, y, a))


def unscaled_gap(shape: ChainShape) -> float:
    """``g(y) = 1/2 + (31/15) T (1 - (49/64)^t)``."""
    return 0.5 + (31.0 / 15.0) * shape.T * (1.0 - (49.0 / 64.0) ** shape.t)


def support_floor(shape: ChainShape, k: int) -> float:
    """Lower bound on ``g(u)`` when ``u`` agrees with ``y`` beyond index ``k``.

    Equals ``(31/64) sum_{i>k} y_i^2``: the untouched ``v`` terms at their
    reference values, with ``q >= 0`` and ``v >= 0`` dropped elsewhere.
    """
    if int(k) != k or not 0 <= k <= shape.dim:
        raise DomainError(f"k must be an integer in [0, {shape.dim}], got {k}")
    T, t = shape.T, shape.t
    rho = 49.0 / 64.0
    q, r = divmod(int(k), T)
    if q >= t:
        return 0.0
    partial = (T - r) * rho**q
    whole = T * (rho ** (q + 1) - rho**t) / (1.0 - rho)
    return (31.0 / 64.0) * (partial + whole)


@dataclass(frozen=True)
class HardInstance:
    shape: ChainShape
    L: float
    D: float
    c: float = field(init=False)
    s: float = field(init=False)

    def __post_init__(self):
        if not self.L > 0 or not self.D > 0:
            raise DomainError(f"L and D must be positive, got L={self.L}, D={self.D}")
        T = self.shape.T
        object.__setattr__(self, "c", self.L * self.D**2 / (SMOOTHNESS * T))
        object.__setattr__(self, "s", math.sqrt(T) / self.D)

    @property
    def dim(self) -> int:
        return self.shape.dim

    @property
    def y(self) -> np.ndarray:
        return _arrays(self.shape.T, self.shape.t)[0]

    @property
    def mu_claimed(self) -> float:
        """``L / (37 C3 T)``, the PL constant the construction guarantees."""
        return self.L / (SMOOTHNESS * C3 * self.shape.T)

    @property
    def minimizer(self) -> np.ndarray:
        return self.y / self.s


def make_instance(shape: ChainShape, L: float = SMOOTHNESS, D: float | None = None,
                  delta: float | None = None) -> HardInstance:
    """Build the scaled instance.

    ``D`` defaults to ``sqrt(T)`` (so ``s = 1``). Passing ``delta`` instead picks
    ``D`` so that the initial gap ``f(0) - f*`` equals ``delta``.
    """
    if D is not None and delta is not None:
        raise DomainError("give at most one of D and delta")
    if delta is not None:
        if not delta > 0:
            raise DomainError(f"delta must be positive, got {delta}")
        D = math.sqrt(delta * SMOOTHNESS * shape.T / (L * unscaled_gap(shape)))
    elif D is None:
        D = math.sqrt(shape.T)
    return HardInstance(shape, float(L), float(D))


def hard_oracle(inst: HardInstance, x) -> EvalResult:
    """``f(x) = c g(y - s x)`` and ``grad f(x) = -c s grad g(y - s x)``."""
    x = _check(inst.shape, x)
    y, a = _arrays(inst.shape.T, inst.shape.t)
    u = y - inst.s * x
    value, grad = kernels.chain_value_grad(u, y, a)
    grad *= -inst.c * inst.s
    return EvalResult(inst.c * value, grad)


def initial_gap(inst: HardInstance) -> float:
    return inst.c * unscaled_gap(inst.shape)


def nesterov_worst_oracle(k: int, x) -> EvalResult:
    """``1/2 (x_1 - 1)^2 + sum_{i<k} (x_{i+1} - x_i)^2`` on the first ``k`` coordinates."""
    x = np.asarray(x, dtype=float)
    if int(k) != k or k < 1 or x.ndim != 1 or x.size < k:
        raise DomainError(f"need integer k >= 1 and a vector of length >= k, got k={k}, shape {x.shape}")
    head = x[:k]
    diff = np.diff(head)
    value = 0.5 * (head[0] - 1.0) ** 2 + float(np.sum(diff * diff))
    grad = np.zeros_like(x)
    grad[0] = head[0] - 1.0
    grad[:k - 1] -= 2.0 * diff
    grad[1:k] += 2.0 * diff
    return EvalResult(value, grad)


def dense_b(shape: ChainShape) -> np.ndarray:
    """Dense ``B`` for tests and small diagnostics (dim <= 64)."""
    if shape.dim > 64:
        raise DomainError("dense builder is limited to dim <= 64")
    return np.column_stack([kernels.b_matvec(e, coupling(shape)) for e in np.eye(shape.dim)])
