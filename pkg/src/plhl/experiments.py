"""End-to-end runs of GD, AGD and Heavy-ball on the hard instance, plus the audit.

Outputs under ``output_dir``: one CSV per method (``trace_<method>.csv``) and
``summary.json``. Stopping is on the relative gap ``(f(x) - f*) / (f(x0) - f*)``
unless ``stop = absolute``, in which case ``epsilon`` is an absolute gap and the
initial gap is set with ``delta``.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import instance as inst_mod
from . import verifier
from .instance import C3, C3_EXACT, C4, ChainShape, DomainError
from .optimizers import CountingOracle, Method, OptimizerConfig, Status, Trace, run

log = logging.getLogger(__name__)

CSV_HEADER = "query,value_gap,rel_gap,grad_norm,support_size"
_CSV_FMT = ["%d", "%.17g", "%.17g", "%.17g", "%d"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    epsilon: float
    kappa: float | None = None
    T: int | None = None
    t: int | None = None
    L: float = inst_mod.SMOOTHNESS
    delta: float | None = None
    methods: tuple[Method, ...] = (Method.GD, Method.AGD, Method.HEAVY_BALL)
    max_queries: int = 100_000
    seed: int = 0
    output_dir: Path = Path("out")
    stop: str = "relative"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        override = self.T is not None or self.t is not None
        if override and (self.T is None or self.t is None):
            raise ConfigError("override needs both T and t")
        if not override and self.kappa is None:
            raise ConfigError("give kappa, or both T and t")
        if self.stop not in ("relative", "absolute"):
            raise ConfigError(f"stop must be 'relative' or 'absolute', got {self.stop!r}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.stop == "relative":
            if not override and not self.epsilon < inst_mod.EPSILON_MAX:
                raise ConfigError(f"epsilon must lie in (0, {inst_mod.EPSILON_MAX}) when resolving from kappa")
            if not self.epsilon < 1:
                raise ConfigError("relative epsilon must be below 1")
        else:
            if self.delta is None:
                raise ConfigError("absolute stopping needs delta (the initial gap)")
            if self.epsilon > self.delta / 16.0:
                raise ConfigError("absolute epsilon must not exceed delta / 16")
            if not override and not self.epsilon / self.delta < inst_mod.EPSILON_MAX:
                raise ConfigError(f"epsilon / delta must lie below {inst_mod.EPSILON_MAX} when resolving from kappa")
        if not self.L > 0:
            raise ConfigError("L must be positive")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.max_queries < 1:
            raise ConfigError("max_queries must be positive")
        if not self.methods:
            raise ConfigError("no methods selected")

    @property
    def override(self) -> bool:
        return self.T is not None

    def shape(self) -> ChainShape:
        if self.override:
            return inst_mod.chain_shape(self.T, self.t)
        return inst_mod.shape_from_target(self.kappa, self.relative_epsilon)

    @property
    def relative_epsilon(self) -> float:
        return self.epsilon if self.stop == "relative" else self.epsilon / self.delta


@dataclass
class RunReport:
    params: dict
    methods: dict
    audit: dict
    traces: dict = field(default_factory=dict, repr=False)
    summary_path: Path | None = None

    def to_json(self) -> dict:
        return {
            "params": self.params,
            "constants": {"C3": C3, "C3_fraction": f"{C3_EXACT.numerator}/{C3_EXACT.denominator}", "C4": C4},
            "methods": self.methods,
            "audit": self.audit,
        }

    @classmethod
    def load(cls, summary: str | os.PathLike) -> "RunReport":
        """Read ``summary.json`` and the CSV traces it points to."""
        path = Path(summary)
        data = json.loads(path.read_text())
        traces = {}
        for name, info in data["methods"].items():
            csv = Path(info["csv"])
            if not csv.is_absolute():
                csv = path.parent / csv
            traces[Method(name)] = read_trace_csv(csv, Method(name), Status(info["status"]))
        return cls(data["params"], data["methods"], data["audit"], traces, path)


def read_trace_csv(path: Path, method: Method, status: Status) -> Trace:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.empty((0, 5))
    return Trace(
        query=data[:, 0].astype(np.int64),
        value_gap=data[:, 1],
        rel_gap=data[:, 2],
        grad_norm=data[:, 3],
        support_size=data[:, 4].astype(np.int64),
        status=status,
        method=method,
    )


def worker_threads() -> int:
    env = os.environ.get("PLHL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"PLHL_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _run_method(inst, method, cfg, target_rel, csv_path):
    oracle = CountingOracle(lambda x: inst_mod.hard_oracle(inst, x), inst.dim)
    ocfg = OptimizerConfig(method, inst.L, inst.mu_claimed, cfg.max_queries, target_rel)
    try:
        fh = open(csv_path, "w")
    except OSError as exc:
        raise OSError(f"cannot write trace {csv_path}: {exc}") from exc
    with fh:
        fh.write(CSV_HEADER + "\n")

        def sink(chunk):
            np.savetxt(fh, chunk, fmt=_CSV_FMT, delimiter=",")
            fh.flush()

        trace = run(oracle, ocfg, np.zeros(inst.dim), sink=sink)
    trace.meta["query_count"] = oracle.query_count
    return trace


def resolve(cfg: ExperimentConfig):
    shape = cfg.shape()
    inst = inst_mod.make_instance(shape, L=cfg.L, delta=cfg.delta)
    gap0 = inst_mod.initial_gap(inst)
    target_rel = cfg.epsilon if cfg.stop == "relative" else cfg.epsilon / gap0
    return shape, inst, gap0, target_rel


def run_suite(cfg: ExperimentConfig) -> RunReport:
    shape, inst, gap0, target_rel = resolve(cfg)
    if shape.below_regime:
        log.warning("kappa=%g is at most C4=%.6g; the asymptotic regime is not met", cfg.kappa, C4)
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    jobs = {m: out / f"trace_{m.value}.csv" for m in cfg.methods}
    with ThreadPoolExecutor(max_workers=min(len(jobs), worker_threads())) as pool:
        futures = {m: pool.submit(_run_method, inst, m, cfg, target_rel, p) for m, p in jobs.items()}
        traces = {m: f.result() for m, f in futures.items()}

    half = shape.dim // 2
    kmin = verifier.floor_kmin(shape, target_rel)
    ceiling = verifier.gd_ceiling(target_rel, inst.mu_claimed, inst.L)
    params = {
        "T": shape.T,
        "t": shape.t,
        "dim": shape.dim,
        "L": inst.L,
        "D": inst.D,
        "mu_claimed": inst.mu_claimed,
        "kappa": cfg.kappa if cfg.kappa is not None else inst.L / inst.mu_claimed,
        "epsilon": cfg.epsilon,
        "seed": cfg.seed,
        "gap0": gap0,
        "target_relgap": target_rel,
        "stop": cfg.stop,
        "delta": cfg.delta,
        "max_queries": cfg.max_queries,
        "override": shape.override,
        "below_regime": shape.below_regime,
        "momentum": "constant",
    }
    methods = {}
    for m, tr in traces.items():
        methods[m.value] = {
            "status": tr.status.value,
            "queries_to_target": tr.queries_to_target(target_rel) if tr.status is Status.REACHED_TARGET else None,
            "queries": len(tr),
            "csv": jobs[m].name,
        }
    audit = {
        "floor_kmin": kmin,
        "half_chain": half,
        "relgap_at_half_chain": {m.value: tr.rel_gap_at(half) for m, tr in traces.items()},
        "half_chain_observed": {m.value: len(tr) > half for m, tr in traces.items()},
        "gd_ceiling": ceiling,
    }
    report = RunReport(params, methods, audit, traces)
    report.summary_path = out / "summary.json"
    report.summary_path.write_text(json.dumps(report.to_json(), indent=2) + "\n")
    return report


def lower_bound_audit(report: RunReport) -> dict:
    """Per-method verdicts: half-chain gap, floor on queries, GD ceiling."""
    if not report.traces:
        raise ValueError("report has no traces")
    eps = report.params["target_relgap"]
    half = report.audit["half_chain"]
    kmin = report.audit["floor_kmin"]
    ceiling = report.audit["gd_ceiling"]
    verdict = {}
    for method, tr in report.traces.items():
        reached = tr.status is Status.REACHED_TARGET
        qtt = tr.queries_to_target(eps) if reached else None
        if len(tr) > half:
            half_ok = tr.rel_gap[half] > eps
        elif reached:
            half_ok = False
        else:
            half_ok = None
        entry = {
            "relgap_at_half_chain": tr.rel_gap_at(half),
            "half_chain_gap_above_eps": half_ok,
            "queries_to_target": qtt,
            "above_floor": None if qtt is None else qtt >= kmin,
            "below_ceiling": None,
        }
        if method is Method.GD and qtt is not None:
            entry["below_ceiling"] = qtt <= ceiling
        verdict[method.value] = entry
    return verdict


def format_audit(report: RunReport, verdict: dict) -> str:
    kmin, ceiling = report.audit["floor_kmin"], report.audit["gd_ceiling"]
    lines = [f"sandwich: floor_kmin={kmin} <= queries_to_target <= gd_ceiling={ceiling} (GD)",
             f"half chain: {report.audit['half_chain']} queries, epsilon={report.params['target_relgap']:g}"]
    for name, e in verdict.items():
        lines.append(
            f"{name}: measured={e['queries_to_target']} relgap@half={e['relgap_at_half_chain']:.3e} "
            f"half_ok={e['half_chain_gap_above_eps']} floor_ok={e['above_floor']} ceiling_ok={e['below_ceiling']}"
        )
    return "\n".join(lines)


def audit_passed(verdict: dict) -> bool:
    checks = [v for e in verdict.values()
              for v in (e["half_chain_gap_above_eps"], e["above_floor"], e["below_ceiling"])]
    return all(c is not False for c in checks)


def tail_linearity(trace: Trace, frac: float = 0.5) -> float:
    """R^2 of a least-squares line through ``log10(rel_gap)`` over the last ``frac`` of records."""
    n = len(trace)
    start = int(math.floor(n * (1.0 - frac)))
    q = trace.query[start:].astype(float)
    lg = np.log10(trace.rel_gap[start:])
    keep = np.isfinite(lg)
    q, lg = q[keep], lg[keep]
    if q.size < 3:
        raise ValueError("tail has fewer than three usable records")
    slope, icpt = np.polyfit(q, lg, 1)
    resid = lg - (slope * q + icpt)
    ss_tot = float(np.sum((lg - lg.mean()) ** 2))
    return 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0


# ---------------------------------------------------------------- config files

CONFIG_KEYS = {
    "kappa": float,
    "epsilon": float,
    "T": int,
    "t": int,
    "L": float,
    "delta": float,
    "methods": str,
    "max_queries": int,
    "seed": int,
    "out": str,
    "stop": str,
}


def parse_methods(text: str) -> tuple[Method, ...]:
    try:
        return tuple(Method(p.strip().lower()) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"unknown method in {text!r}; choose from gd, agd, hb") from exc


def read_config(path: str | os.PathLike) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; unknown keys are rejected."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](float(value)) if CONFIG_KEYS[key] is int else CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return values


def config_from_values(values: dict) -> ExperimentConfig:
    v = dict(values)
    kwargs = {}
    for key in ("kappa", "epsilon", "T", "t", "L", "delta", "max_queries", "seed", "stop"):
        if v.get(key) is not None:
            kwargs[key] = v[key]
    if v.get("methods"):
        m = v["methods"]
        kwargs["methods"] = parse_methods(m) if isinstance(m, str) else tuple(m)
    if v.get("out"):
        kwargs["output_dir"] = Path(v["out"])
    if "epsilon" not in kwargs:
        raise ConfigError("epsilon is required")
    try:
        return ExperimentConfig(**kwargs)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
