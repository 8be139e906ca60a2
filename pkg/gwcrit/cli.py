import argparse
import json
import os
import sys
import numpy as np
from typing import Any, Dict, List, Optional
from dotmap import DotMap
from ._version import __version__
from .campaign import Campaign, CheckResult, Checks, run_checks, write_results
from .core.errors import ConfigError, GWCritError, UnknownCheckError
from .invariant import InvariantMeasure, U_of
from .iteration import initial_population, iterate_scalar, iterate_series, survival_from
from .montecarlo import SimConfig, simulate
from .utils.config import family_from_config, load_config, merge_flags
from .utils.report_log import ReportLog, to_jsonable


DEFAULTS = {
    "family": "stable",
    "nu": 0.5,
    "c": 0.5,
    "n": 20,
    "nmax": 10**6,
    "order": 512,
    "jmax": 8,
    "reps": 10**5,
    "seed": 0,
    "format": "csv",
    "depth": 10_000,
    "initial": 1,
    "policy": "exclude",
}
CONFIG_KEYS = set(DEFAULTS) | {"s", "d", "out", "workers", "verbose", "checks"}


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value or YAML file; flags override its values")
    p.add_argument("--family", choices=["stable", "perturbed"])
    p.add_argument("--nu", type=float, help="tail index in (0, 1)")
    p.add_argument("--c", type=float, help="scale of the (1-s)^(1+nu) term")
    p.add_argument("--d", type=float, help="relative weight of the perturbation term")
    p.add_argument("--n", type=int, help="generation / horizon")
    p.add_argument("--nmax", type=int, help="largest generation of asymptotic grids")
    p.add_argument("--s", type=float, help="argument s in [0, 1)")
    p.add_argument("--order", type=int, help="series truncation order K")
    p.add_argument("--jmax", type=int, help="largest index j reported")
    p.add_argument("--depth", type=int, help="coefficient validation depth")
    p.add_argument("--reps", type=int, help="Monte Carlo replicates")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")
    p.add_argument("--out", help="output file (directory for `report`)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--verbose", action="store_true", default=None)
    return p


def _parser() -> argparse.ArgumentParser:
    common = _common_flags()
    p = argparse.ArgumentParser(prog="gwcrit", description="Critical Galton-Watson processes with infinite variance.")
    p.add_argument("--version", action="version", version=f"gwcrit {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    fam = sub.add_parser("family", parents=[common], help="Validate an offspring family.")
    fam.add_argument("action", choices=["validate"])

    it = sub.add_parser("iterate", parents=[common], help="Scalar trace of f_n(0), Q_n, p_1(n).")
    it.add_argument("--initial", type=int, help="initial population i")

    co = sub.add_parser("coeffs", parents=[common], help="Coefficients p_j(n) of f_n.")
    co.add_argument("--initial", type=int, help="initial population i")

    sub.add_parser("invariant", parents=[common], help="Invariant measure coefficients u_j.")

    asym = sub.add_parser("asym", parents=[common], help="Run one registered check.")
    asym.add_argument("check", help=f"one of {', '.join(Checks)}")

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates of Q_n and p_j(n).")
    sim.add_argument("--policy", choices=["censor", "exclude"])

    rep = sub.add_parser("report", parents=[common], help="Run a full campaign.")
    rep.add_argument("--checks", help="comma-separated subset of checks")
    return p


def _settings(args: argparse.Namespace) -> DotMap:
    flags = {k: v for k, v in vars(args).items() if k not in ("cmd", "config", "action", "check")}
    config = None
    if args.config:
        config = load_config(args.config)
        unknown = sorted(set(config.keys()) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}.")
    merged = merge_flags(config, flags)
    for key, value in DEFAULTS.items():
        if merged.get(key) is None:
            merged[key] = value
    merged["verbose"] = bool(merged.get("verbose"))
    return merged


def _emit(cfg: DotMap, columns: Dict[str, Any], summary: Dict[str, Any]):
    """Write to `--out` (format from the suffix, else `--format`) or to stdout."""
    out = cfg.get("out")
    fmt = cfg.format
    if out and out.endswith((".csv", ".json")):
        fmt = out.rsplit(".", 1)[1]
    log = ReportLog(None, fmt, verbose=cfg.verbose)
    if out:
        if fmt == "csv":
            log.save_csv(columns, out)
        else:
            log.save_json({"columns": columns, "summary": summary}, out)
    elif fmt == "csv":
        sys.stdout.write(log.dumps_csv(columns))
    else:
        sys.stdout.write(json.dumps(to_jsonable({"columns": columns, "summary": summary}), indent=2) + "\n")


def _s(cfg: DotMap) -> float:
    """The given `s`, else 0; campaigns instead default to both s = 0 and s = 0.5."""
    return float(cfg.s) if cfg.get("s") is not None else 0.0


def _campaign(cfg: DotMap, fam, checks) -> Campaign:
    s_values = (_s(cfg),) if cfg.get("s") is not None else (0.0, 0.5)
    return Campaign(
        family=fam,
        checks=tuple(checks),
        n_max=int(cfg.nmax),
        s_values=s_values,
        order=int(cfg.order),
        jmax=int(cfg.jmax),
        depth=int(cfg.depth),
        reps=int(cfg.reps),
        seed=int(cfg.seed),
        out_dir=cfg.get("out") or "gwcrit_report",
        fmt=cfg.format,
        workers=cfg.get("workers"),
        verbose=cfg.verbose,
    )


def _report_failures(results: List[CheckResult]) -> int:
    failed = [name for r in results for name in r.failures()]
    for name in failed:
        print(f"gwcrit: failed criterion {name}", file=sys.stderr)
    return 1 if failed else 0


def cmd_family(cfg: DotMap, fam) -> int:
    result = Checks["family"](fam, _campaign(cfg, fam, ["family"]))
    s = result.summary
    p = np.asarray(result.columns["p_k"])
    print(f"{fam!r}")
    print("p_0..p_5: " + " ".join(format(float(x), ".10g") for x in p[:6]))
    print(
        f"depth={s['depth']} min p_k={s['min_coefficient']:.3e} (k={s['argmin']})"
        f" mass={s['truncated_mass']:.15g} tail={s['tail_bound']:.3e}"
        f" tail_certified={s['tail_certified']}"
    )
    if cfg.get("out"):
        _emit(cfg, result.columns, s)
    return _report_failures([result])


def cmd_iterate(cfg: DotMap, fam) -> int:
    trace = iterate_scalar(fam, _s(cfg), int(cfg.n))
    cols = trace.columns()
    i = int(cfg.initial)
    if i > 1:
        cols[f"Qn_{i}"] = survival_from(trace, i)
    _emit(cfg, cols, {"family": fam.config(), "s": trace.s, "truncated": trace.truncated, "initial": i})
    return 0


def cmd_coeffs(cfg: DotMap, fam) -> int:
    series = initial_population(iterate_series(fam, int(cfg.n), int(cfg.order)), int(cfg.initial))
    coeffs = np.asarray(series.coeffs)
    jmax = min(int(cfg.jmax), series.order)
    summary = {
        "family": fam.config(),
        "n": int(cfg.n),
        "order": series.order,
        "initial": int(cfg.initial),
        "mass": series.mass(),
        "tail_mass": float(series.tail_mass),
    }
    _emit(cfg, {"j": np.arange(jmax + 1), "p_j": coeffs[: jmax + 1]}, summary)
    return 0


def cmd_invariant(cfg: DotMap, fam) -> int:
    measure = InvariantMeasure(fam, int(cfg.jmax))
    u, provenance = measure.coefficients()
    cols = {"j": np.arange(u.shape[0]), "u_j": u}
    emp, _ = measure.coefficients(int(cfg.n))
    cols["u_j_empirical"] = emp
    summary = {
        "family": fam.config(),
        "u1": measure.u1,
        "provenance": provenance[0],
        "U_s": U_of(fam, _s(cfg)),
        "s": _s(cfg),
        "n_empirical": int(cfg.n),
    }
    _emit(cfg, cols, summary)
    return 0


def cmd_asym(cfg: DotMap, fam, check: str) -> int:
    if check not in Checks:
        raise UnknownCheckError(f"Unknown check '{check}'; choose from {', '.join(Checks)}.")
    result = Checks[check](fam, _campaign(cfg, fam, [check]))
    _emit(cfg, result.columns, {**result.summary, "pass": result.passed})
    return _report_failures([result])


def cmd_simulate(cfg: DotMap, fam) -> int:
    sim_cfg = SimConfig(
        family=fam,
        horizon=int(cfg.n),
        replicates=int(cfg.reps),
        seed=int(cfg.seed),
        jmax=int(cfg.jmax),
        workers=cfg.get("workers"),
        policy=cfg.policy,
        verbose=cfg.verbose,
    )
    payload = to_jsonable(simulate(sim_cfg).to_json(sim_cfg))
    out = cfg.get("out")
    if out:
        ReportLog(None, "json", verbose=cfg.verbose).save_json(payload, out)
    else:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_report(cfg: DotMap, fam) -> int:
    checks = [k.strip() for k in str(cfg.checks).split(",") if k.strip()] if cfg.get("checks") else list(Checks)
    campaign = _campaign(cfg, fam, checks)
    results = run_checks(campaign)
    write_results(campaign, results)
    if cfg.verbose:
        print(f"Campaign: wrote {os.path.abspath(campaign.out_dir)}")
    return _report_failures(results)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns 0 on success, 1 on numeric failure, 2 on usage errors."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _settings(args)
        fam = family_from_config(cfg, verbose=cfg.verbose)
        if args.cmd == "family":
            return cmd_family(cfg, fam)
        if args.cmd == "iterate":
            return cmd_iterate(cfg, fam)
        if args.cmd == "coeffs":
            return cmd_coeffs(cfg, fam)
        if args.cmd == "invariant":
            return cmd_invariant(cfg, fam)
        if args.cmd == "asym":
            return cmd_asym(cfg, fam, args.check)
        if args.cmd == "simulate":
            return cmd_simulate(cfg, fam)
        return cmd_report(cfg, fam)
    except (UnknownCheckError, ConfigError) as exc:
        print(f"gwcrit: {exc}", file=sys.stderr)
        return 2
    except GWCritError as exc:
        print(f"gwcrit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
