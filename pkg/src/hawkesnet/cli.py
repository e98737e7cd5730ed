"""Command-line experiment runner.

Each subcommand resolves its parameters from built-in defaults, then an
optional JSON config file, then explicit flags (flags win).  Outputs go to
``--output-dir``, ``$HAWKESNET_OUTPUT_DIR`` or the working directory, and
every file starts with the tool version, the hash of the resolved config and
the seed.  Exit codes: 0 success, 1 failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import impulsion, io, lattice, meanfield
from . import kernels as K
from .engine import SystemSpec, audit_log, impulsion_spec, simulate
from .exceptions import HawkesError
from .graph import LatticeBox, make_baseline, topology_from_config, validate_assumption
from .rng import generator
from .volterra import growth_constants, solve_mean

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- parsing helpers -------------------------------------------------------------

def parse_topology(value):
    """``complete:N``, ``lattice:d,L[,boundary]`` or a config dict."""
    if isinstance(value, dict):
        return topology_from_config(value)
    kind, _, args = str(value).partition(":")
    parts = [p.strip() for p in args.split(",") if p.strip()]
    kind = kind.strip().lower()
    if kind == "complete" and len(parts) == 1:
        return topology_from_config({"kind": "complete", "N": int(parts[0])})
    if kind == "lattice" and len(parts) in (2, 3):
        cfg = {"kind": "lattice", "d": int(parts[0]), "L": int(parts[1])}
        if len(parts) == 3:
            cfg["boundary"] = parts[2]
        return topology_from_config(cfg)
    raise ValueError(f"cannot parse topology {value!r}")


def parse_baseline(value):
    """A number, a list, a dict, or ``alternating[:low,high]``,
    ``uniform:low,high[,seed]``, ``indicator[:value]``."""
    if isinstance(value, (int, float, list, dict)):
        return value
    s = str(value).strip()
    try:
        return float(s)
    except ValueError:
        pass
    kind, _, args = s.partition(":")
    vals = [float(x) for x in args.split(",") if x.strip()]
    if kind == "alternating":
        low, high = vals if vals else (0.0, 2.0)
        return {"kind": "alternating", "low": low, "high": high}
    if kind == "uniform" and len(vals) in (2, 3):
        out = {"kind": "uniform", "low": vals[0], "high": vals[1]}
        out["seed"] = int(vals[2]) if len(vals) == 3 else 0
        return out
    if kind == "indicator":
        return {"kind": "indicator", "value": vals[0] if vals else 1.0}
    if kind == "constant" and len(vals) == 1:
        return vals[0]
    raise ValueError(f"cannot parse baseline {value!r}")


def _kernel_cfg(value):
    return K.kernel_from_config(value).to_config()


def _topology_cfg(value):
    return parse_topology(value).to_config()


# -- subcommand table --------------------------------------------------------------
# name -> {param: (default, normalizer)}; flags mirror the param names

_float_list = lambda v: [float(x) for x in v]  # noqa: E731
_int_list = lambda v: [int(x) for x in v]  # noqa: E731
_opt_int_list = lambda v: None if v is None else _int_list(v)  # noqa: E731
_opt_float = lambda v: None if v is None else float(v)  # noqa: E731

PARAMS = {
    "validate": {
        "topology": ("complete:10", _topology_cfg),
        "kernel": ("exponential:1,2", _kernel_cfg),
        "lipschitz": (1.0, float),
        "weights": (1.0, float),
        "h0": (1.0, float),
        "envelope": (1.0, _opt_float),
    },
    "volterra": {
        "kernel": ("exponential:2,1", _kernel_cfg),
        "mu": (1.0, float),
        "T": (1.0, float),
        "dt": (1e-3, float),
    },
    "simulate": {
        "topology": ("complete:10", _topology_cfg),
        "kernel": ("exponential:1,2", _kernel_cfg),
        "mu": (1.0, parse_baseline),
        "T": (10.0, float),
        "impulse": (False, bool),
        "method": ("auto", str),
        "audit": (False, bool),
        "audit_every": (100, int),
        "cap": (10**7, int),
    },
    "chaos": {
        "kernel": ("exponential:1,2", _kernel_cfg),
        "mu": (1.0, float),
        "T": (10.0, float),
        "N": ([10, 100, 1000], _int_list),
        "replicas": (200, int),
        "dt": (1e-3, float),
        "epoch": (meanfield.DEFAULT_EPOCH, float),
        "slope_range": ([-0.65, -0.35], _float_list),
    },
    "clt": {
        "kernel": ("exponential:1,2", _kernel_cfg),
        "mu": (1.0, float),
        "T": (200.0, float),
        "N": (200, int),
        "ell": (2, int),
        "replicas": (1000, int),
        "alpha": (0.01, float),
    },
    "lattice-lln": {
        "topology": ("lattice:1,201", _topology_cfg),
        "kernel": ("exponential:1,2", _kernel_cfg),
        "mu": ("alternating:0,2", parse_baseline),
        "T": (200.0, float),
        "replicas": (200, int),
        "monitored": (None, _opt_int_list),
        "tolerance": (None, _opt_float),
        "flatness_tolerance": (0.15, float),
    },
    "impulse-extinction": {
        "kernel": ("exponential:2,1", _kernel_cfg),
        "replicas": (10_000, int),
        "generation_cap": (impulsion.GENERATION_CAP, int),
        "population_cap": (impulsion.POPULATION_CAP, int),
        "tolerance": (0.02, float),
    },
    "impulse-profile": {
        "topology": ("lattice:1,101", _topology_cfg),
        "kernel": ("exponential:2,1", _kernel_cfg),
        "t": ([6.0, 8.0, 10.0], _float_list),
        "x": ([-1.0, -0.5, 0.0, 0.5, 1.0], _float_list),
        "replicas": (1000, int),
        "tolerance": (0.15, float),
        "zero_tolerance": (0.03, float),
        "cap": (10**7, int),
    },
}

_FLAG_TYPES = {
    "topology": dict(type=str, metavar="SPEC", help="complete:N or lattice:d,L[,boundary]"),
    "kernel": dict(type=str, metavar="SPEC", help="exponential:a,b or rectangular:c,tau"),
    "mu": dict(type=str, help="baseline: number, alternating[:low,high], uniform:low,high[,seed]"),
    "T": dict(type=float, help="time horizon"),
    "dt": dict(type=float, help="grid step"),
    "lipschitz": dict(type=float),
    "weights": dict(type=float),
    "h0": dict(type=float, help="h_i(0)"),
    "envelope": dict(type=float, help="admissible multiplier of |phi|"),
    "impulse": dict(action="store_true", default=None, help="zero baseline plus a jump at the origin"),
    "method": dict(choices=["auto", "fast", "generic"]),
    "audit": dict(action="store_true", default=None, help="re-verify sampled acceptance decisions"),
    "audit_every": dict(type=int),
    "cap": dict(type=int, help="event cap per run"),
    "N": dict(type=int, nargs="+"),
    "replicas": dict(type=int),
    "epoch": dict(type=float),
    "slope_range": dict(type=float, nargs=2, metavar=("LOW", "HIGH")),
    "ell": dict(type=int),
    "alpha": dict(type=float, help="KS significance level"),
    "monitored": dict(type=int, nargs="+", help="node indices"),
    "tolerance": dict(type=float),
    "flatness_tolerance": dict(type=float),
    "generation_cap": dict(type=int),
    "population_cap": dict(type=int),
    "t": dict(type=float, nargs="+"),
    "x": dict(type=float, nargs="+"),
    "zero_tolerance": dict(type=float),
}
# flags whose form depends on the subcommand
_FLAG_OVERRIDES = {("clt", "N"): dict(type=int, help="number of particles")}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hawkesnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, params in PARAMS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file of parameters; flags override it")
        p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        p.add_argument("--output-dir", default=None, help=f"default ${io.OUTPUT_ENV} or .")
        p.add_argument("--workers", type=int, default=None, help="replica threads")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")
        for key in params:
            kw = dict(_FLAG_OVERRIDES.get((name, key), _FLAG_TYPES[key]))
            kw.setdefault("default", None)
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, **kw)
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the JSON file, then flags; values normalized for hashing."""
    params = PARAMS[command]
    raw = {k: d for k, (d, _) in params.items()}
    raw["seed"] = 0
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        file_cfg.pop("command", None)
        unknown = sorted(set(file_cfg) - set(raw))
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {unknown}")
        raw.update(file_cfg)
    for key in list(raw):
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    cfg = {"command": command, "seed": int(raw.pop("seed"))}
    try:
        for key, (_, norm) in params.items():
            cfg[key] = norm(raw[key])
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid parameter: {exc}") from exc
    return cfg


# -- experiments ---------------------------------------------------------------------
# each returns (result dict, ok, [(filename, writer)], [(filename, plot args)])

def _kernel(cfg):
    return K.kernel_from_config(cfg["kernel"])


def run_validate(cfg, workers):
    topo = topology_from_config(cfg["topology"])
    rep = validate_assumption(topo, cfg["lipschitz"], cfg["weights"], _kernel(cfg), cfg["h0"], cfg["envelope"])
    return rep.to_dict(), rep.passed, [], []


def run_volterra(cfg, workers):
    kernel = _kernel(cfg)
    sol = solve_mean(kernel, cfg["mu"], cfg["T"], cfg["dt"])
    result = {"m_T": float(sol.m.values[-1]), "dm_T": float(sol.dm.values[-1]),
              "regime": K.classify(kernel)}
    if result["regime"] != K.CRITICAL:
        gc = growth_constants(kernel, cfg["mu"])
        result.update(a0=gc.a0, alpha0=gc.alpha0, sigma2=gc.sigma2)
    files = [("volterra.csv", lambda path, lines: sol.m.to_csv(path, lines)),
             ("volterra_rate.csv", lambda path, lines: sol.dm.to_csv(path, lines))]
    plots = [("volterra.svg", dict(series=[("m", sol.m.times, sol.m.values), ("m'", sol.dm.times, sol.dm.values)],
                                   xlabel="t", ylabel="mean"))]
    return result, True, files, plots


def run_simulate(cfg, workers):
    topo = topology_from_config(cfg["topology"])
    kernel = _kernel(cfg)
    if cfg["impulse"]:
        if not isinstance(topo, LatticeBox):
            raise UsageError("--impulse needs a lattice topology")
        spec = impulsion_spec(topo, kernel, cfg["T"], cfg["seed"], cfg["cap"])
    else:
        spec = SystemSpec(topo, kernel, make_baseline(topo, cfg["mu"]), cfg["T"], cfg["seed"], cap=cfg["cap"])
    log = simulate(spec, generator(cfg["seed"]), method=cfg["method"], audit=cfg["audit"],
                   audit_every=cfg["audit_every"])
    result = {"n_events": log.n_events, "n_candidates": log.n_candidates, "n_ties": log.n_ties}
    ok = True
    if cfg["audit"]:
        rep = audit_log(log, spec)
        result["audit"] = {"checked": rep.n_checked, "mismatched": rep.n_mismatched,
                           "max_relative_error": rep.max_relative_error,
                           "bound_violations": rep.bound_violations, "passed": rep.passed}
        ok = rep.passed
    counts = log.counts()
    files = [("events.csv", lambda path, lines: log.to_csv(path, lines))]
    plots = [("events.svg", dict(series=[("Z_T", np.arange(counts.size), counts)], xlabel="node",
                                 ylabel="count at T", scatter=True))]
    return result, ok, files, plots


def run_chaos(cfg, workers):
    rep = meanfield.chaos_error(_kernel(cfg), cfg["mu"], cfg["T"], cfg["N"], cfg["replicas"], cfg["seed"],
                                cfg["dt"], cfg["epoch"], workers)
    lo, hi = cfg["slope_range"]
    result = {"rows": rep.to_rows()}
    ok = True
    if rep.fit is not None:
        result["slope"] = rep.fit.slope
        result["slope_ci"] = list(rep.fit.ci)
        result["tv_slope"] = rep.tv_fit.slope
        ok = lo <= rep.fit.slope <= hi
    result["passed"] = ok
    cols = ["N", "sup_error", "sup_stderr", "tv_error", "tv_stderr"]
    files = [("chaos.csv", lambda path, lines: io.write_rows(
        path, cols, [[r[c] for c in cols] for r in rep.to_rows()], lines))]
    plots = [("chaos.svg", dict(series=[("sup", rep.N, rep.estimate), ("tv", rep.N, rep.tv)], xlabel="N",
                                ylabel="coupling error", loglog=True))]
    return result, ok, files, plots


def run_clt(cfg, workers):
    kernel = _kernel(cfg)
    s = meanfield.clt_sample(kernel, cfg["mu"], cfg["T"], cfg["N"], cfg["ell"], cfg["replicas"], cfg["seed"],
                             workers)
    result = {"regime": s.regime, "ratio": s.ratio, "m_T": s.m_T, "scale": s.scale,
              "variance": [s.variance(i) for i in range(cfg["ell"])]}
    if cfg["ell"] >= 2:
        result["cross_correlation"] = s.cross_correlation()
    ok = True
    if s.regime in (meanfield.SUBCRITICAL, meanfield.SUPER_SMALL):
        ks = [s.normality(i, cfg["alpha"]) for i in range(cfg["ell"])]
        result["ks"] = [v.to_dict() for v in ks]
        if s.regime == meanfield.SUBCRITICAL:
            ok = all(v.passed for v in ks) and abs(result.get("cross_correlation", 0.0)) < 0.1
        else:
            ok = result.get("cross_correlation", 0.0) < 0.2
    elif s.regime == meanfield.SUPER_LARGE:
        result["sigma2"] = s.sigma2
        ok = result.get("cross_correlation", 1.0) > 0.8 and abs(s.variance() / s.sigma2 - 1) <= 0.25
    result["passed"] = ok
    cols = ["replica"] + [f"z{i}" for i in range(cfg["ell"])]
    rows = [[r] + list(map(float, v)) for r, v in enumerate(s.values)]
    files = [("clt.csv", lambda path, lines: io.write_rows(path, cols, rows, lines))]
    plots = [("clt.svg", dict(series=[("sorted z0", np.linspace(0, 1, s.replicas), np.sort(s.values[:, 0]))],
                              xlabel="empirical quantile", ylabel="normalized count"))]
    return result, ok, files, plots


def run_lattice_lln(cfg, workers):
    topo = topology_from_config(cfg["topology"])
    if not isinstance(topo, LatticeBox):
        raise UsageError("lattice-lln needs a lattice topology")
    kernel = _kernel(cfg)
    regime = K.classify(kernel)
    if regime == K.SUBCRITICAL:
        rep = lattice.lln_subcritical(topo, cfg["mu"], kernel, cfg["T"], cfg["replicas"], cfg["seed"],
                                      cfg["monitored"], workers)
        tol = 0.05 if cfg["tolerance"] is None else cfg["tolerance"]
        ok = bool(np.all(rep.relative_error() <= tol))
    elif regime == K.SUPERCRITICAL:
        rep = lattice.lln_supercritical(topo, cfg["mu"], kernel, cfg["T"], cfg["replicas"], cfg["seed"],
                                        cfg["monitored"], workers)
        tol = 0.15 if cfg["tolerance"] is None else cfg["tolerance"]
        ok = bool(np.all(rep.relative_error() <= tol)) and rep.extra["flatness"] < cfg["flatness_tolerance"]
    else:
        raise UsageError("critical kernels are not supported")
    extra = {k: v for k, v in rep.extra.items() if k != "flatness_by_time"}
    result = {"regime": regime, "max_relative_error": float(rep.relative_error().max()), "tolerance": tol,
              "passed": ok, **extra}
    files = [("lattice_lln.csv", lambda path, lines: rep.to_csv(path, lines))]
    plots = [("lattice_lln.svg", dict(series=[("estimate", rep.nodes, rep.estimate),
                                              ("target", rep.nodes, rep.target)],
                                      xlabel="node", ylabel="per-node limit"))]
    return result, ok, files, plots


def run_impulse_extinction(cfg, workers):
    est = impulsion.extinction_empirical(_kernel(cfg), cfg["replicas"], cfg["seed"], cfg["generation_cap"],
                                         cfg["population_cap"])
    ok = abs(est.empirical - est.closed_form) <= cfg["tolerance"]
    result = {"lam": est.lam, "closed_form": est.closed_form, "empirical": est.empirical, "stderr": est.stderr,
              "cap_fraction": est.cap_fraction, "bias_bound": est.bias_bound, "passed": ok}
    files = [("extinction.csv", lambda path, lines: io.write_rows(
        path, ["lam", "closed_form", "empirical", "stderr", "cap_fraction"], [est.csv_row()], lines))]
    return result, ok, files, []


def run_impulse_profile(cfg, workers):
    topo = topology_from_config(cfg["topology"])
    kernel = _kernel(cfg)
    rep = impulsion.profile(topo, kernel, cfg["t"], cfg["x"], cfg["replicas"], cfg["seed"], workers, cfg["cap"])
    lam = kernel.total_mass()
    p_zero = impulsion.extinction_probability(lam)
    H_target = 1.0 / rep.alpha0
    ratio_err = float(np.max(np.abs(rep.ratio_median[-1] - 1.0)))
    checks = {
        "ratio_at_t_max": ratio_err <= cfg["tolerance"],
        "H_mean": abs(rep.H_mean - H_target) <= 3 * rep.H_stderr,
        "zero_fraction": abs(rep.zero_fraction - p_zero) <= cfg["zero_tolerance"],
    }
    result = {"survivors": rep.survivors, "zero_fraction": rep.zero_fraction, "extinction_probability": p_zero,
              "H_mean": rep.H_mean, "H_stderr": rep.H_stderr, "H_target": H_target,
              "H_half_mean": float(rep.H_half.mean()),
              "H_renewal_mean": impulsion.expected_H(kernel), "max_ratio_error_at_t_max": ratio_err,
              "checks": checks, "passed": all(checks.values())}
    files = [("profile.csv", lambda path, lines: rep.to_csv(path, lines))]
    plots = [("profile.svg", dict(series=[(f"t={t:g}", rep.x, rep.ratio_median[i]) for i, t in enumerate(rep.t)],
                                  xlabel="x", ylabel="median ratio"))]
    return result, result["passed"], files, plots


RUNNERS = {
    "validate": run_validate,
    "volterra": run_volterra,
    "simulate": run_simulate,
    "chaos": run_chaos,
    "clt": run_clt,
    "lattice-lln": run_lattice_lln,
    "impulse-extinction": run_impulse_extinction,
    "impulse-profile": run_impulse_profile,
}


def _finite(obj):
    # JSON has no inf/nan; write them as strings
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    command = args.command
    try:
        cfg = resolve_config(command, args)
        out = io.output_dir(args.output_dir)
        result, ok, files, plots = RUNNERS[command](cfg, args.workers)
    except UsageError as exc:
        print(f"hawkesnet {command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HawkesError as exc:
        print(f"hawkesnet {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    lines = io.header_lines(cfg, cfg["seed"])
    for name, writer in files:
        writer(out / name, lines)
    stem = command.replace("-", "_")
    io.write_json(out / f"{stem}.json", _finite(io.plain(result)), cfg, cfg["seed"])
    if args.plot:
        for name, kw in plots:
            io.plot_svg(out / name, **kw)
    print(json.dumps(_finite(io.plain(result)), sort_keys=True))
    return EXIT_OK if ok else EXIT_FAIL


run = main


if __name__ == "__main__":
    sys.exit(main())
