"""Numerical probes for the claimed properties of the chain instance.

Every probe is one-sided: it samples points and reports the worst value seen
against the claimed bound. A pass means no counterexample was found, which is
all sampling can say. All randomness comes from ``numpy.random.default_rng``
seeded by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import instance as inst_mod
from . import kernels
from .instance import C3, SMOOTHNESS, ChainShape, HardInstance

BREAKPOINT_FACTORS = (0.96875, 1.0, 1.03125)


@dataclass
class ProbeReport:
    name: str
    samples: int
    worst_value: float
    bound: float
    passed: bool
    witness: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.name}: worst={self.worst_value:.6g} bound={self.bound:.6g} samples={self.samples}"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "worst_value": self.worst_value,
            "bound": self.bound,
            "passed": self.passed,
            "details": self.details,
        }


def _batches(n: int, size: int):
    for start in range(0, n, size):
        yield start, min(n, start + size)


# ---------------------------------------------------------------- gradients


def fd_check(fn: Callable, x, h: float = 1e-6) -> float:
    """Max over coordinates of ``|fd - analytic| / (1 + |analytic|)``, central differences."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    _, grad = fn(x)
    grad = np.asarray(grad, dtype=float)
    worst = 0.0
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        # divide by the representable step so linear functions come out exact
        fd = (fn(xp)[0] - fn(xm)[0]) / (xp[i] - xm[i])
        worst = max(worst, abs(fd - grad[i]) / (1.0 + abs(grad[i])))
    return worst


def off_breakpoint_points(shape: ChainShape, n: int, rng, low=-2.0, high=2.0, margin=1e-4) -> np.ndarray:
    """Uniform points with every coordinate at least ``margin * y_i`` from a breakpoint."""
    y = inst_mod.reference_vector(shape)
    pts = rng.uniform(low, high, size=(n, shape.dim))
    while True:
        near = np.zeros(pts.shape, dtype=bool)
        for f in BREAKPOINT_FACTORS:
            near |= np.abs(pts - f * y) < margin * y
        if not near.any():
            return pts
        pts[near] = rng.uniform(low, high, size=int(near.sum()))


# ---------------------------------------------------------------- zero chain


def zero_chain_check(inst: HardInstance, k: int, trials: int, rng=None) -> ProbeReport:
    """Points supported on the first ``k`` coordinates get gradients supported on the first ``k+1``."""
    n = inst.dim
    if not 0 <= k < n:
        raise ValueError(f"k must lie in [0, {n}), got {k}")
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0
    witness = None
    for trial in range(max(trials, 1)):
        x = np.zeros(n)
        if trial > 0 or k > 0:
            x[:k] = rng.uniform(-2.0, 2.0, size=k)
        _, grad = inst_mod.hard_oracle(inst, x)
        tol = 1e-12 * np.max(np.abs(grad))
        idx = np.flatnonzero(np.abs(grad) > tol)
        top = int(idx[-1]) + 1 if idx.size else 0
        if top > worst:
            worst, witness = top, x
    return ProbeReport(f"zero_chain(k={k})", max(trials, 1), float(worst), float(k + 1), worst <= k + 1, witness)


def zero_chain_all(inst: HardInstance, trials: int, rng=None) -> ProbeReport:
    rng = np.random.default_rng(0) if rng is None else rng
    failed = []
    for k in range(inst.dim):
        rep = zero_chain_check(inst, k, trials, rng)
        if not rep.passed:
            failed.append(k)
    return ProbeReport("zero_chain(all k)", inst.dim * trials, float(len(failed)), 0.0, not failed,
                       details={"failed_k": failed})


# ---------------------------------------------------------------- smoothness


def lipschitz_pairs(shape: ChainShape, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random far pairs, breakpoint-straddling pairs and close pairs around ``y``."""
    y = inst_mod.reference_vector(shape)
    d = shape.dim
    n1 = n // 3
    n2 = n // 3
    n3 = n - n1 - n2
    far1 = rng.uniform(-2.0, 2.0, size=(n1, d))
    far2 = rng.uniform(-2.0, 2.0, size=(n1, d))
    bp = np.asarray(BREAKPOINT_FACTORS)[rng.integers(0, 3, size=(n2, d))] * y
    width = 1e-2 * y * rng.uniform(0.0, 1.0, size=(n2, d))
    s1 = bp - width * rng.uniform(0.0, 1.0, size=(n2, d))
    s2 = bp + width * rng.uniform(0.0, 1.0, size=(n2, d))
    base = y * rng.uniform(0.9, 1.1, size=(n3, d))
    near = base + 1e-3 * y * rng.standard_normal(size=(n3, d))
    return np.vstack([far1, s1, base]), np.vstack([far2, s2, near])


def lipschitz_probe(grad_fn: Callable, x1, x2, bound: float) -> ProbeReport:
    """Max of ``||grad(x1) - grad(x2)|| / ||x1 - x2||`` over the given pairs (batched)."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    worst, witness, used = 0.0, None, 0
    for lo, hi in _batches(len(x1), 8192):
        a, b = x1[lo:hi], x2[lo:hi]
        dx = np.linalg.norm(a - b, axis=1)
        keep = dx > 0
        if not keep.any():
            continue
        dg = np.linalg.norm(grad_fn(a[keep]) - grad_fn(b[keep]), axis=1)
        ratio = dg / dx[keep]
        used += int(keep.sum())
        i = int(np.argmax(ratio))
        if ratio[i] > worst:
            worst = float(ratio[i])
            witness = np.stack([a[keep][i], b[keep][i]])
    return ProbeReport("lipschitz", used, worst, bound, worst <= bound * (1 + 1e-9), witness)


def chain_grad_batch(shape: ChainShape) -> Callable:
    def grad(u):
        return inst_mod.chain_oracle(shape, u).gradient

    return grad


# ---------------------------------------------------------------- PL


def pl_points(shape: ChainShape, n: int, rng) -> np.ndarray:
    """Points in the chain variable ``u = y - x``: ``x`` uniform on ``[-2, 2]^dim``
    for most, and a fifth clustered near ``y`` where the nonconvex dents act."""
    y = inst_mod.reference_vector(shape)
    n_near = n // 5
    far = y - rng.uniform(-2.0, 2.0, size=(n - n_near, shape.dim))
    near = y * rng.uniform(0.6, 1.2, size=(n_near, shape.dim))
    return np.vstack([far, near])


def pl_probe(value_grad: Callable, f_star: float, points, claimed: float) -> ProbeReport:
    """Min of ``||grad f||^2 / (2 (f - f*))`` over points with ``f > f*`` (batched)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    worst, witness, used = math.inf, None, 0
    for lo, hi in _batches(len(pts), 8192):
        vals, grads = value_grad(pts[lo:hi])
        vals = np.atleast_1d(vals) - f_star
        keep = vals > 0
        if not keep.any():
            continue
        ratio = np.sum(grads[keep] ** 2, axis=1) / (2.0 * vals[keep])
        used += int(keep.sum())
        i = int(np.argmin(ratio))
        if ratio[i] < worst:
            worst = float(ratio[i])
            witness = pts[lo:hi][keep][i]
    return ProbeReport("pl", used, worst, claimed, worst >= claimed - 1e-12, witness)


def chain_pl_constant(shape: ChainShape) -> float:
    """``1 / (C3 T)``, the claimed PL constant of the unscaled chain."""
    return 1.0 / (C3 * shape.T)


# ---------------------------------------------------------------- GD rate


def gd_rate_check(trace, L: float, mu: float) -> ProbeReport:
    """``gap_{k+1} <= (1 - mu/L) gap_k`` for every consecutive record."""
    gaps = np.asarray(trace.value_gap, dtype=float)
    rate = 1.0 - mu / L
    if gaps.size < 2:
        return ProbeReport("gd_rate", 0, 0.0, rate, True)
    excess = gaps[1:] - (rate * gaps[:-1] + 1e-30)
    i = int(np.argmax(excess))
    ratios = np.divide(gaps[1:], gaps[:-1], out=np.zeros(gaps.size - 1), where=gaps[:-1] > 0)
    return ProbeReport(
        "gd_rate",
        gaps.size - 1,
        float(ratios.max()),
        rate,
        bool(excess[i] <= 0),
        details={"first_violation": int(np.flatnonzero(excess > 0)[0]) if (excess > 0).any() else None},
    )


# ---------------------------------------------------------------- spectrum


def gershgorin_rows(shape: ChainShape) -> np.ndarray:
    """Absolute row sums of ``B = D^T D`` read off the stencil."""
    a = inst_mod.coupling(shape)
    a_next = np.append(a[1:], 0.0)
    return (1.0 + a_next**2) + np.abs(a) + np.abs(a_next)


def power_iteration(matvec: Callable, dim: int, rng, iters: int = 20000, tol: float = 1e-13) -> float:
    """Largest eigenvalue of a symmetric PSD operator by Rayleigh quotients."""
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = matvec(v)
        new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        if abs(new - lam) <= tol * max(abs(new), 1.0):
            return new
        lam = new
    return lam


def spectrum_check(shape: ChainShape, rng=None, max_power_dim: int = 10_000) -> ProbeReport:
    rng = np.random.default_rng(0) if rng is None else rng
    rows = gershgorin_rows(shape)
    details = {"gershgorin_max": float(rows.max())}
    ok = bool(rows.max() <= 4.0)
    worst = float(rows.max())
    if shape.dim <= max_power_dim:
        a = inst_mod.coupling(shape)
        lam_max = power_iteration(lambda v: kernels.b_matvec(v, a), shape.dim, rng)
        shifted = power_iteration(lambda v: 4.0 * v - kernels.b_matvec(v, a), shape.dim, rng)
        lam_min = 4.0 - shifted
        details.update(lambda_max=lam_max, lambda_min=lam_min)
        ok = ok and lam_max <= 4.0 + 1e-9 and lam_min >= -1e-9
        worst = max(worst, lam_max)
    return ProbeReport("spectrum", shape.dim, worst, 4.0, ok, details=details)


# ---------------------------------------------------------------- lower-bound floor


def subspace_min_oracle(shape: ChainShape, k: int, iters: int = 20000) -> float:
    """Best chain value found with ``u`` equal to ``y`` beyond index ``k``.

    Projected gradient descent, step ``1/37``, from ``u = y``.
    """
    if not 0 <= k <= shape.dim:
        raise ValueError(f"k must lie in [0, {shape.dim}]")
    y = inst_mod.reference_vector(shape)
    a = inst_mod.coupling(shape)
    u = y.copy()
    value, grad = kernels.chain_value_grad(u, y, a)
    if k == 0:
        return float(value)
    for _ in range(iters):
        u[:k] -= grad[:k] / SMOOTHNESS
        value, grad = kernels.chain_value_grad(u, y, a)
    return float(value)


def floor_kmin(shape: ChainShape, epsilon: float) -> int:
    """Fewest queries a zero-respecting method needs before the floor allows a relative gap ``epsilon``."""
    target = epsilon * inst_mod.unscaled_gap(shape)
    lo, hi = 0, shape.dim
    while lo < hi:
        mid = (lo + hi) // 2
        if inst_mod.support_floor(shape, mid) <= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def gd_ceiling(epsilon: float, mu: float, L: float) -> int:
    """``ceil(ln eps / ln(1 - mu/L))``: GD's guaranteed query count."""
    return math.ceil(math.log(epsilon) / math.log1p(-mu / L))


# ---------------------------------------------------------------- full suite


def gd_trajectory(inst: HardInstance, max_queries: int = 20000, target: float = 1e-3):
    """Run GD from 0 on ``inst``; returns the trace and the visited points."""
    from .optimizers import CountingOracle, OptimizerConfig, run_gd

    points = []
    oracle = CountingOracle(lambda x: inst_mod.hard_oracle(inst, x), inst.dim)
    cfg = OptimizerConfig("gd", inst.L, inst.mu_claimed, max_queries, target)
    trace = run_gd(oracle, cfg, np.zeros(inst.dim), callback=lambda x, v, g: points.append(x.copy()))
    return trace, np.array(points)


def certificate_probe(shape: ChainShape, n: int, rng) -> ProbeReport:
    """Case-A ratios and ``sum UB <= ||grad||^2`` asserted; case B/C violations only logged."""
    from .certificate import CASE_A_BOUND, pl_certificate

    y = inst_mod.reference_vector(shape)
    worst_sum = -np.inf
    worst_a = np.inf
    logged, flags, witness = [], [], None
    ok = True
    for i in range(n):
        if i % 2:
            x = rng.uniform(-2.0, 2.0, size=shape.dim)
        else:
            x = y * rng.uniform(0.6, 1.3, size=shape.dim)
        rep = pl_certificate(shape, x)
        excess = rep.sum_ub - rep.grad_norm_sq
        if excess > worst_sum:
            worst_sum = excess
        a_min = rep.case_min_ratio("A")
        worst_a = min(worst_a, a_min)
        if excess > 1e-12 * max(rep.grad_norm_sq, 1.0) or a_min < CASE_A_BOUND - 1e-12:
            ok = False
            witness = x
        for v in rep.violations:
            if v["case"] != "A":
                logged.append({**v, "point": x.tolist()})
        flags.extend(rep.flags)
    return ProbeReport(
        "pl_certificate",
        n,
        float(worst_a),
        CASE_A_BOUND,
        ok,
        witness,
        details={"max_sum_excess": float(worst_sum), "bc_violations": logged, "flags": flags},
    )


def verify_suite(shape: ChainShape, seed: int = 0, n_fd: int = 100, n_lip: int = 100_000,
                 n_pl: int = 100_000, zc_trials: int = 20, n_cert: int = 1000) -> list[ProbeReport]:
    """Every asserted property probe on one shape, in a fixed order."""
    rng = np.random.default_rng(seed)
    inst = inst_mod.make_instance(shape)
    reports = []

    pts = off_breakpoint_points(shape, n_fd, rng)
    worst = 0.0
    for p in pts:
        worst = max(worst, fd_check(lambda u: inst_mod.chain_oracle(shape, u), p))
        worst = max(worst, fd_check(lambda x: inst_mod.hard_oracle(inst, x), (inst.y - p) / inst.s))
    reports.append(ProbeReport("fd_gradient", 2 * n_fd, worst, 1e-5, worst <= 1e-5))

    reports.append(zero_chain_all(inst, zc_trials, rng))

    trace, path = gd_trajectory(inst)
    u_path = inst.y - inst.s * path
    x1, x2 = lipschitz_pairs(shape, n_lip, rng)
    if len(u_path) > 1:
        x1, x2 = np.vstack([x1, u_path[:-1]]), np.vstack([x2, u_path[1:]])
    reports.append(lipschitz_probe(chain_grad_batch(shape), x1, x2, SMOOTHNESS))

    points = np.vstack([pl_points(shape, n_pl, rng), u_path])
    reports.append(pl_probe(lambda u: inst_mod.chain_oracle(shape, u), 0.0, points, chain_pl_constant(shape)))

    reports.append(spectrum_check(shape, rng))

    reports.append(gd_rate_check(trace, inst.L, inst.mu_claimed))
    control = gd_rate_check(trace, inst.L, inst.L)
    reports.append(ProbeReport("gd_rate_negative_control", control.samples, control.worst_value, control.bound,
                               not control.passed))

    reports.append(certificate_probe(shape, n_cert, rng))
    return reports
