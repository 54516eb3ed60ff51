"""Command-line entry point ``radlimit``.

Subcommands: run-kinetic, run-limit, rate-study, audit, selftest.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, SweepConfig, load_config


def _load(args, kind):
    cfg = load_config(args.config)
    if kind is RunConfig and isinstance(cfg, SweepConfig):
        cfg = cfg.base
    if kind is SweepConfig and not isinstance(cfg, SweepConfig):
        raise ConfigError("rate-study needs a sweep config (with epsilon_list)")
    if args.seed is not None:
        target = cfg.base if isinstance(cfg, SweepConfig) else cfg
        target.seed = args.seed
    if args.epsilon is not None:
        if isinstance(cfg, SweepConfig):
            raise ConfigError("--epsilon does not apply to a sweep")
        cfg = cfg.with_epsilon(args.epsilon)
    return cfg


def _out(args, cfg):
    if args.out is not None:
        return Path(args.out)
    base = cfg.base if isinstance(cfg, SweepConfig) else cfg
    return Path(base.output)


def cmd_run_kinetic(args):
    from .runs import run_kinetic
    cfg = _load(args, RunConfig)
    out = _out(args, cfg)
    res = run_kinetic(cfg, out, Path(args.config).parent)
    print(f"t={res.state.time:.6g} steps={len(res.steps)} "
          f"max_audit_residual={res.audit.max_residual:.3e} -> {out}")
    return 0


def cmd_run_limit(args):
    from .runs import run_limit
    cfg = _load(args, RunConfig)
    out = _out(args, cfg)
    hist = run_limit(cfg, out, Path(args.config).parent)
    print(f"t={hist.times[-1]:.6g} levels={len(hist)} -> {out}")
    return 0


def cmd_rate_study(args):
    from .runs import rate_study
    sweep = _load(args, SweepConfig)
    out = _out(args, sweep)
    report = rate_study(sweep, out, Path(args.config).parent, threads=args.threads)
    summary = {k: report.get(k) for k in ("regime", "expected_rate", "slope", "r2", "errors")}
    print(json.dumps(summary, indent=2))
    return 0


def cmd_audit(args):
    from .runs import audit_snapshots
    run_dir = Path(args.run_dir)
    cfg_path = Path(args.config) if args.config else run_dir / "config.yaml"
    args.config = cfg_path
    cfg = _load(args, RunConfig)
    audit = audit_snapshots(run_dir, cfg, args.out)
    print(f"records={len(audit.times)} max_residual={audit.max_residual:.3e} "
          f"terms_nonnegative={audit.terms_nonnegative} c_fit={audit.c_fit}")
    return 0


def cmd_selftest(args):
    from .runs import selftest
    results = selftest(args.seed or 0)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radlimit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML config file")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--epsilon", type=float, default=None, help="override params.epsilon")
        p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--seed", type=int, default=None)

    common(sub.add_parser("run-kinetic", help="run the kinetic solver"))
    common(sub.add_parser("run-limit", help="run the diffusion-limit solver"))
    common(sub.add_parser("rate-study", help="epsilon sweep and rate fit"))
    p = sub.add_parser("audit", help="recompute energy diagnostics from snapshots")
    p.add_argument("run_dir", help="directory written by run-kinetic")
    common(p, config_required=False)
    common(sub.add_parser("selftest", help="fast invariant checks"), config_required=False)
    return parser


COMMANDS = {"run-kinetic": cmd_run_kinetic, "run-limit": cmd_run_limit,
            "rate-study": cmd_rate_study, "audit": cmd_audit, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver failures surface as a nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
