"""Command-line entry point: ``q1dshock <subcommand> --config scenario.toml --out DIR``.

Exit codes: 0 success, 2 inconclusive verdict, 1 error.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import linear
from .config import load_config
from .errors import Q1DError
from .gas import sound_speed
from .experiments import (INCONCLUSIVE, StageError, _jsonable, build_shock, refinement_study,
                          run_scenario, sweep)
from .unsteady import simulate, transit_time

QUIET = False


def _info(msg, *fmt):
    if not QUIET:
        print(msg % fmt if fmt else msg)


def _error(msg, *fmt):
    print(msg % fmt if fmt else msg, file=sys.stderr)


EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


def _out_path(out, default_name):
    """--out may name a directory or, with a suffix, the output file itself."""
    p = Path(out)
    if p.suffix:
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    p.mkdir(parents=True, exist_ok=True)
    return p / default_name


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def cmd_steady(args):
    cfg = _load(args)
    gas, nozzle, shock = build_shock(cfg)
    x = np.linspace(nozzle.l, nozzle.L, args.samples)
    rows = []
    for xi in x:
        rho, u, a = float(shock.density(xi)), float(shock.velocity(xi)), float(nozzle.a(xi))
        side = "minus" if xi < shock.x0 else "plus"
        rows.append((xi, side, rho, u, a, u / float(sound_speed(gas, rho))))
    _write_csv(_out_path(args.out, "steady.csv"), ["x", "side", "rho", "u", "a", "mach"], rows)
    summary = shock.summary()
    summary["linearized_shock_rate"] = linear.linearized_shock_rate(shock)
    summary["transit"] = transit_time(shock)
    _write_json(Path(args.out) / "steady.json" if not Path(args.out).suffix
                else Path(args.out).with_suffix(".json"), summary)
    _info("x0 = %.12g, M = %.12g, RH residual = %.3g", shock.x0, shock.M, shock.rh_residual)
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load(args)
    gas, nozzle, shock = build_shock(cfg)
    tau = transit_time(shock)
    opts = cfg.simulation_options(tau)
    trace, snapshots, _ = simulate(gas, nozzle, shock, cfg.perturbation_spec(), cfg.t_end(tau),
                                   opts.cfl, opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trace.csv", ["t", "s", "sdot", "lax_ok", "E0"],
               zip(trace.t, trace.s, trace.sdot, [int(v) for v in trace.lax_ok], trace.E0))
    for t_snap, (x, rho, u) in snapshots.items():
        _write_csv(out / f"snapshot_t{t_snap:g}.csv", ["x", "rho", "u"], zip(x, rho, u))
    y = trace.displacement()
    shrunk = abs(y[-1]) < cfg.verdict.shrink_factor * abs(y[0])
    stable = bool(trace.fit is not None and trace.lambda_fit > cfg.verdict.lambda_min and shrunk)
    summary = {"lambda_fit": trace.lambda_fit, "C_fit": trace.C_fit, "stable": stable,
               "fit_window": list(trace.fit.window) if trace.fit else None,
               "fit": trace.fit.to_dict() if trace.fit else None,
               "stop_reason": trace.stop_reason, "error": trace.error,
               "lax_all": bool(all(trace.lax_ok)), "transit": tau}
    _write_json(out / "summary.json", summary)
    _info("lambda_fit = %.4g, stable = %s, stop: %s", trace.lambda_fit, stable, trace.stop_reason)
    return EXIT_INCONCLUSIVE if trace.error or trace.fit is None else EXIT_OK


def cmd_linear_energy(args):
    cfg = _load(args)
    gas, _, shock = build_shock(cfg)
    n = args.n or cfg.linear.n_nodes
    coeffs = linear.assemble_coefficients(gas, shock, n)
    h1 = linear.compatible_bump(coeffs, cfg.linear.bump_center, cfg.linear.bump_width)
    t_end = cfg.linear.identity_transits * coeffs.slow_transit()
    _, ledger = linear.run_linear(coeffs, h1, lambda x: 0.0 * x, t_end)
    t, E, D = ledger.arrays()
    path = _out_path(args.out, "ledger.csv")
    _write_csv(path, ["t", "E", "D", "E_plus_D_minus_E0"], zip(t, E, D, E + D - E[0]))
    res = float(np.max(np.abs(E + D - E[0])) / E[0])
    _write_json(path.with_suffix(".json"), {"identity_residual": res, "n_nodes": n, "t_end": t_end})
    _info("max |E + D - E0| / E0 = %.3g", res)
    return EXIT_OK


def cmd_spectrum(args):
    cfg = _load(args)
    gas, _, shock = build_shock(cfg)
    n = args.n or cfg.linear.n_nodes
    coeffs = linear.assemble_coefficients(gas, shock, n)
    T = None if args.T == "auto" else float(args.T)
    ST, gram, info = linear.assemble_ST(coeffs, T, dense=2 * (n + 1) <= linear.DENSE_CAP)
    rep = linear.spectral_radius(ST, gram, info["T"])
    _write_json(_out_path(args.out, "spectrum.json"), rep.to_dict())
    _info("radius = %.6g, lambda0 = %.4g, T = %.4g", rep.radius, rep.lambda0, rep.T)
    return EXIT_OK


def _report_files(out, report):
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report.to_dict())
    tr = report.trace
    if tr:
        _write_csv(out / "trace.csv", ["t", "s", "sdot", "lax_ok", "E0"],
                   zip(tr["t"], tr["s"], tr["sdot"], [int(v) for v in tr["lax_ok"]], tr["E0"]))


def cmd_stability_experiment(args):
    cfg = _load(args)
    report = run_scenario(cfg)
    _report_files(Path(args.out), report)
    _info("%s: %s %s", cfg.name, report.verdict, report.reason)
    return EXIT_INCONCLUSIVE if report.verdict == INCONCLUSIVE else EXIT_OK


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _vary(cfg, spec):
    """Expand 'section.key=v1,v2,...' into one config per value."""
    key, _, values = spec.partition("=")
    if not values:
        raise ValueError(f"--vary expects section.key=v1,v2 but got {spec!r}")
    section, _, field_name = key.partition(".")
    out = []
    for raw in values.split(","):
        v = _parse_value(raw)
        if field_name:
            current = cfg.to_dict()[section]
            c = cfg.with_overrides(**{section: {**current, field_name: v}})
        else:
            c = cfg.with_overrides(**{section: v})
        c = c.with_overrides(name=f"{cfg.name}[{key}={raw}]")
        out.append(c)
    return out


def cmd_sweep(args):
    configs = []
    for path in args.config_list:
        cfg = load_config(path)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        configs.extend(_vary(cfg, args.vary) if args.vary else [cfg])
    reports = sweep(configs, args.parallel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["name", "verdict", "lambda_fit", "lambda0", "spectral_radius",
              "linearized_shock_rate", "identity_residual", "reason"]
    rows = [[r.scenario.get("name"), r.verdict, r.lambda_fit, r.lambda0, r.spectral_radius,
             r.linearized_shock_rate, r.identity_residual, r.reason] for r in reports]
    _write_csv(out / "sweep.csv", header, rows)
    _write_json(out / "sweep.json", [r.to_dict() for r in reports])
    for row in rows:
        _info("%s: %s", row[0], row[1])
    return EXIT_INCONCLUSIVE if any(r.verdict == INCONCLUSIVE for r in reports) else EXIT_OK


def cmd_refine(args):
    cfg = _load(args)
    table = refinement_study(cfg, args.levels, with_simulation=not args.no_simulation)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    keys = ["level", "n_cells", "n_nodes", "identity_residual", "coefficient_residual",
            "steady_drift_max", "steady_drift_l1", "lambda_fit"]
    _write_csv(out / "refine.csv", keys, [[r[k] for k in keys] for r in table["rows"]])
    _write_json(out / "refine.json", table)
    _info("identity orders %s", table["order_identity_residual"])
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(prog="q1dshock", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, config=True):
        p = sub.add_parser(name, parents=[common], help=help_)
        if config:
            p.add_argument("--config", required=True, help="scenario TOML file or bundled name")
        p.set_defaults(func=fn)
        return p

    p = add("steady", cmd_steady, "construct the steady transonic shock")
    p.add_argument("--samples", type=int, default=401)
    add("simulate", cmd_simulate, "run the perturbed nonlinear flow")
    p = add("linear-energy", cmd_linear_energy, "energy/dissipation ledger of the linear problem")
    p.add_argument("--n", type=int, default=None, help="number of node intervals")
    p = add("spectrum", cmd_spectrum, "spectral radius of the evolution operator")
    p.add_argument("--T", default="auto")
    p.add_argument("--n", type=int, default=None, help="number of node intervals")
    add("stability-experiment", cmd_stability_experiment, "full pipeline with verdict")
    p = add("sweep", cmd_sweep, "run several scenarios", config=False)
    p.add_argument("--config", dest="config_list", action="append", required=True)
    p.add_argument("--vary", default=None, help="section.key=v1,v2,... parameter list")
    p.add_argument("--parallel", type=int, default=1)
    p = add("refine", cmd_refine, "refinement study at n, 2n, 4n, ...")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--no-simulation", action="store_true",
                   help="skip the nonlinear runs (drift and identity only)")
    return parser


def main(argv=None):
    global QUIET
    args = build_parser().parse_args(argv)
    QUIET = args.quiet
    try:
        return args.func(args)
    except StageError as exc:
        _error("error: %s", exc)
        return EXIT_ERROR
    except (Q1DError, ValueError, OSError) as exc:
        _error("error: %s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
