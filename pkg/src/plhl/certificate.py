"""Per-coordinate PL certificate for the unscaled chain function.

Each coordinate ``n`` of a point ``x`` gets a budget ``UB(n)`` charged to one
gradient coordinate, so that ``sum UB <= ||grad g(x)||^2`` while
``UB(n) / x_n^2`` stays above a fixed constant. The bookkeeping works on the
padded vectors ``xp = (0, x, x_last)``, ``yp = (1, y, y_last)`` and the ratios
``z = xp / yp``:

* case A (dominant): ``|grad_n / x_n| > 0.19`` or ``x_n == 0``;
* case B: a ``next`` pointer walks to neighbours where ``z`` grows until a
  dominant index is reached;
* case C: ``z_n`` sits in ``[31/32, 33/32]`` with no larger neighbour; charge the
  dominant index left of ``n`` with the largest ``z``.

Nothing here raises on a failed inequality: violations and structural
anomalies are collected on the report for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import instance as inst_mod
from .instance import ChainShape, DomainError

DOMINATE_THRESHOLD = 0.19
GROWTH = 4.0 / 3.0
BAND_LO = 31.0 / 32.0
BAND_HI = 33.0 / 32.0
WITNESS_FLOOR = 5.0 / 7.0

CASE_A_BOUND = 361.0 / 40000.0
CASE_B_BOUND = 4693.0 / 2560000.0


def case_c_bound(T: int) -> float:
    return 1083.0 / (4268880.0 * T)


@dataclass
class CertificateReport:
    x: np.ndarray
    x_tilde: np.ndarray
    y_tilde: np.ndarray
    z: np.ndarray
    grad: np.ndarray
    dominate: np.ndarray
    next: np.ndarray
    ub_index: np.ndarray
    dist: np.ndarray
    case: np.ndarray
    ub: np.ndarray
    ratio: np.ndarray
    sum_ub: float
    grad_norm_sq: float
    min_ratio: float
    violations: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def case_min_ratio(self, which: str) -> float:
        mask = (self.case == which) & np.isfinite(self.ratio)
        return float(self.ratio[mask].min()) if mask.any() else np.inf


def pl_certificate(shape: ChainShape, x) -> CertificateReport:
    x = np.asarray(x, dtype=float)
    n = shape.dim
    if x.shape != (n,):
        raise inst_mod.DimensionError(f"expected length {n}, got shape {x.shape}")
    if not np.any(x):
        raise DomainError("certificate is undefined at x = 0")
    T = shape.T
    y = inst_mod.reference_vector(shape)
    _, grad = inst_mod.chain_oracle(shape, x)

    # 1-based padded arrays: index 0 and n+1 are the boundary pads
    xt = np.concatenate(([0.0], x, [x[-1]]))
    yt = np.concatenate(([1.0], y, [y[-1]]))
    z = xt / yt
    g = np.concatenate(([0.0], grad, [0.0]))

    dom = np.zeros(n + 2, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        dom[1:n + 1] = (xt[1:n + 1] == 0) | (np.abs(g[1:n + 1] / xt[1:n + 1]) > DOMINATE_THRESHOLD)
    in_band = (z >= BAND_LO) & (z <= BAND_HI)

    flags: list = []
    nxt = np.full(n + 2, -1, dtype=np.int64)
    for k in range(1, n + 1):
        if dom[k]:
            continue
        if in_band[k]:
            cands = [j for j in (k - 1, k + 1) if 1 <= j <= n and z[j] > BAND_HI]
            key = lambda j: z[j]
        else:
            cands = [j for j in (k - 1, k + 1) if 1 <= j <= n and z[j] / z[k] >= GROWTH]
            key = lambda j: abs(z[j])
            if not cands:
                flags.append((k, "no_growth_neighbour", float(z[k])))
        if cands:
            # both neighbours qualify: take the larger one
            nxt[k] = max(cands, key=key)

    ub_index = np.full(n + 2, -1, dtype=np.int64)
    dist = np.full(n + 2, -1, dtype=np.int64)
    case = np.full(n + 2, "", dtype="<U1")
    ub = np.zeros(n + 2)
    for k in range(1, n + 1):
        if dom[k]:
            case[k] = "A"
            ub[k] = 0.25 * g[k] ** 2
            continue
        if nxt[k] >= 0:
            case[k] = "B"
            m, seen = k, {k}
            while not dom[m]:
                m = nxt[m]
                if m < 0 or m in seen:
                    flags.append((k, "next_chain_broken", int(m)))
                    m = -1
                    break
                seen.add(m)
            if m >= 0:
                ub_index[k] = m
                dist[k] = abs(k - m)
                ub[k] = 0.25 * (13.0 / 49.0) * (36.0 / 49.0) ** (dist[k] - 1) * g[m] ** 2
            continue
        case[k] = "C"
        left = np.flatnonzero(dom[1:k]) + 1
        if left.size == 0:
            flags.append((k, "no_dominant_left", None))
            continue
        m = int(left[np.argmax(z[left])])
        ub_index[k] = m
        dist[k] = k - m
        if not z[m] > WITNESS_FLOOR:
            flags.append((k, "no_qualifying_left_index", float(z[m])))
        witness = _constructive_witness(k, z, dom, in_band, ub_index)
        if witness is None:
            flags.append((k, "constructive_witness_failed", None))
        ub[k] = (1.0 / (4.0 * T)) * (15.0 / 64.0) * (yt[k] / yt[m]) ** 2 * g[m] ** 2

    inner = slice(1, n + 1)
    ratio = np.full(n, np.inf)
    nz = x != 0
    ratio[nz] = ub[inner][nz] / x[nz] ** 2
    violations = []
    bounds = {"A": CASE_A_BOUND, "B": CASE_B_BOUND, "C": case_c_bound(T)}
    for i in np.flatnonzero(nz):
        c = case[i + 1]
        if ratio[i] < bounds[c] - 1e-12:
            violations.append({"index": int(i + 1), "case": c, "ratio": float(ratio[i]), "bound": bounds[c]})
    sum_ub = float(np.sum(ub[inner]))
    return CertificateReport(
        x=x,
        x_tilde=xt,
        y_tilde=yt,
        z=z,
        grad=grad,
        dominate=dom[inner].copy(),
        next=nxt[inner].copy(),
        ub_index=ub_index[inner].copy(),
        dist=dist[inner].copy(),
        case=case[inner].copy(),
        ub=ub[inner].copy(),
        ratio=ratio,
        sum_ub=sum_ub,
        grad_norm_sq=float(grad @ grad),
        min_ratio=float(ratio[nz].min()),
        violations=violations,
        flags=flags,
    )


def _constructive_witness(n, z, dom, in_band, ub_index):
    """Index ``k < n`` with ``dom[k]`` and ``z[k] > 5/7`` built the constructive way, or None.

    Take the last ``m < n`` outside the band. Large ``z[m]`` charges ``m`` itself
    (or its already resolved ``ub_index``); small ``z[m]`` charges ``m + 1``.
    """
    outside = [m for m in range(n) if not in_band[m]]
    if not outside:
        return None
    m = outside[-1]
    if z[m] < WITNESS_FLOOR:
        k = m + 1
    elif dom[m]:
        k = m
    else:
        k = int(ub_index[m])
    if 1 <= k < n and dom[k] and z[k] > WITNESS_FLOOR:
        return k
    return None
