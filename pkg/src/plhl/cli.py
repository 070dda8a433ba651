"""Command line entry point: ``plhl {params,verify,run,audit,plot}``.

Exit codes: 0 success, 1 a checked property or audit failed, 2 usage or
configuration error. Values from ``--config FILE`` are overridden by flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as exp
from . import instance as inst_mod
from . import kernels, verifier
from .plot import emit_plot

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa", type=float, help="target condition number L/mu")
    p.add_argument("--epsilon", type=float, help="target relative gap (absolute with stop=absolute)")
    p.add_argument("--T", dest="T", type=int, help="block length override (needs --t)")
    p.add_argument("--t", dest="t", type=int, help="block count override (needs --T)")
    p.add_argument("--L", dest="L", type=float, help="smoothness constant of the scaled instance (default 37)")
    p.add_argument("--delta", type=float, help="initial gap f(0) - f*; sets the distance scale D")
    p.add_argument("--methods", help="comma list from gd,agd,hb (default all)")
    p.add_argument("--max-queries", dest="max_queries", type=int, help="gradient query budget per method")
    p.add_argument("--seed", type=int, help="PRNG seed for probes (default 0)")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--config", help="flat 'key = value' file; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plhl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("params", "print the resolved instance parameters"),
        ("verify", "run the property probes; exit 0 iff all pass"),
        ("run", "run the optimizers and write CSV traces plus summary.json"),
    ):
        _common(sub.add_parser(name, help=help_))
    for name, help_ in (("audit", "audit a summary.json"), ("plot", "render convergence.svg from a summary.json")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--summary", help="path to summary.json (default OUT/summary.json)")
        p.add_argument("--out", help="output directory (default ./out)")
    return parser


def _values(args) -> dict:
    values = exp.read_config(args.config) if getattr(args, "config", None) else {}
    for key in ("kappa", "epsilon", "T", "t", "L", "delta", "methods", "max_queries", "seed", "out"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def _shape(values: dict) -> inst_mod.ChainShape:
    if values.get("T") is not None or values.get("t") is not None:
        if values.get("T") is None or values.get("t") is None:
            raise UsageError("--T and --t must be given together")
        return inst_mod.chain_shape(values["T"], values["t"])
    if values.get("kappa") is None or values.get("epsilon") is None:
        raise UsageError("need --kappa and --epsilon, or --T and --t")
    return inst_mod.shape_from_target(values["kappa"], values["epsilon"])


def cmd_params(args) -> int:
    values = _values(args)
    if values.get("epsilon") is None:
        raise UsageError("--epsilon is required")
    cfg = exp.config_from_values(values)
    shape, inst, gap0, target = exp.resolve(cfg)
    print(f"T={shape.T} t={shape.t} dim={shape.dim}")
    print(f"L={inst.L:.10g} D={inst.D:.10g} mu_claimed={inst.mu_claimed:.10g} kappa_claimed={inst.L / inst.mu_claimed:.10g}")
    print(f"gap0={gap0:.10g} target_relgap={target:.6g}")
    print(f"floor_kmin={verifier.floor_kmin(shape, target)} half_chain={shape.dim // 2} "
          f"gd_ceiling={verifier.gd_ceiling(target, inst.mu_claimed, inst.L)}")
    if shape.override:
        print("note: (T, t) override in effect")
    if shape.below_regime:
        print(f"note: kappa <= C4 = {inst_mod.C4:.6g}; construction valid, asymptotic regime not met")
    print(f"backend={kernels.BACKEND}")
    return EXIT_OK


def cmd_verify(args) -> int:
    values = _values(args)
    shape = _shape(values)
    seed = int(values.get("seed", 0))
    reports = verifier.verify_suite(shape, seed=seed)
    for r in reports:
        print(r.line())
    cert = reports[-1].details
    if cert["bc_violations"] or cert["flags"]:
        print(f"note: certificate logged {len(cert['bc_violations'])} case B/C violations, "
              f"{len(cert['flags'])} structural flags (diagnostic)")
    out = Path(values.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(
        {"T": shape.T, "t": shape.t, "seed": seed, "reports": [r.as_dict() for r in reports]}, indent=2, default=str))
    ok = all(r.passed for r in reports)
    print("verify: " + ("all probes passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(args) -> int:
    cfg = exp.config_from_values(_values(args))
    report = exp.run_suite(cfg)
    for name, info in report.methods.items():
        print(f"{name}: status={info['status']} queries={info['queries']} queries_to_target={info['queries_to_target']}")
    print(exp.format_audit(report, exp.lower_bound_audit(report)))
    svg = emit_plot(report, cfg.output_dir / "convergence.svg")
    print(f"wrote {report.summary_path} and {svg}")
    return EXIT_OK


def _load(args) -> exp.RunReport:
    path = Path(args.summary) if args.summary else Path(args.out or "out") / "summary.json"
    if not path.is_file():
        raise UsageError(f"summary not found: {path}")
    try:
        return exp.RunReport.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load {path}: {exc}") from exc


def cmd_audit(args) -> int:
    report = _load(args)
    verdict = exp.lower_bound_audit(report)
    print(exp.format_audit(report, verdict))
    return EXIT_OK if exp.audit_passed(verdict) else EXIT_FAIL


def cmd_plot(args) -> int:
    report = _load(args)
    out = Path(args.out) if args.out else report.summary_path.parent
    out.mkdir(parents=True, exist_ok=True)
    print(f"wrote {emit_plot(report, out / 'convergence.svg')}")
    return EXIT_OK


COMMANDS = {"params": cmd_params, "verify": cmd_verify, "run": cmd_run, "audit": cmd_audit, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, exp.ConfigError, inst_mod.DomainError) as exc:
        print(f"plhl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
