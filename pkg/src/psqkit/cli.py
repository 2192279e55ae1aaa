"""Command-line front end: scenario files in, tables/CSV/JSON out.

Subcommands: analyze, sweep, optimize, simulate, compare.  Scenarios are
JSON files; curves and sweeps are CSV with 17-significant-digit numbers so
fixed seeds and flags reproduce output files byte for byte.  Exit codes:
0 success, 1 a compare row failed its 3-stderr criterion, 2 malformed
scenario or flags, 3 unstable system.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bps, sim, tlps
from .distributions import HyperExp, hyperexp_from_json, hyperexp_to_json, mean
from .errors import MalformedScenario, PsqError, UnstableConfig, UnstableSystem

EXIT_OK = 0
EXIT_COMPARE_FAIL = 1
EXIT_MALFORMED = 2
EXIT_UNSTABLE = 3


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario file: exactly one of a batch-PS or a threshold model."""

    kind: str
    lam: float
    phases: HyperExp
    batch: sim.BatchLaw | None = None
    n_bar: float | None = None
    b_extra: float | None = None
    theta: float | None = None
    sim_block: dict | None = None


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def load_scenario(path: str) -> Scenario:
    """Read and validate a scenario file (stability included)."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise MalformedScenario(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedScenario(f"scenario is not valid JSON: {exc}") from exc
    return scenario_from_json(raw)


def scenario_from_json(raw) -> Scenario:
    if not isinstance(raw, dict):
        raise MalformedScenario("scenario must be a JSON object")
    kind = raw.get("kind")
    if kind not in ("bps", "tlps"):
        raise MalformedScenario(f"kind must be 'bps' or 'tlps', got {kind!r}")
    if "lambda" not in raw:
        raise MalformedScenario("scenario is missing 'lambda'")
    lam = float(raw["lambda"])
    phases = hyperexp_from_json(raw)

    batch = n_bar = b_extra = theta = None
    if kind == "bps":
        spec = raw.get("batch")
        if spec is None:
            raise MalformedScenario("bps scenario needs a 'batch' block")
        if "pmf" in spec:
            try:
                pairs = [(int(k), float(p)) for k, p in spec["pmf"]]
            except (TypeError, ValueError) as exc:
                raise MalformedScenario(f"bad batch pmf: {exc}") from exc
            batch = sim.BatchLaw(
                sizes=tuple(k for k, _ in pairs), probs=tuple(p for _, p in pairs)
            )
            n_bar, b_extra = sim.batch_law_stats(batch)
        elif "n_bar" in spec and "b_extra" in spec:
            n_bar, b_extra = float(spec["n_bar"]), float(spec["b_extra"])
        else:
            raise MalformedScenario("batch block needs 'pmf' or 'n_bar'+'b_extra'")
        # stability check at load
        bps.BpsInput(lam=lam, n_bar=n_bar, b_extra=b_extra, service=phases)
    else:
        theta = float(raw["theta"]) if "theta" in raw else None
        tlps.TlpsModel(lam=lam, jobsize=phases)

    sim_block = raw.get("sim")
    if sim_block is not None and not isinstance(sim_block, dict):
        raise MalformedScenario("'sim' block must be an object")
    return Scenario(
        kind=kind,
        lam=lam,
        phases=phases,
        batch=batch,
        n_bar=n_bar,
        b_extra=b_extra,
        theta=theta,
        sim_block=sim_block,
    )


def scenario_to_json(sc: Scenario) -> dict:
    """Semantic inverse of scenario_from_json (round-trip safe)."""
    out: dict = {"kind": sc.kind, "lambda": sc.lam}
    out.update(hyperexp_to_json(sc.phases))
    if sc.kind == "bps":
        if sc.batch is not None:
            out["batch"] = {"pmf": [[k, p] for k, p in zip(sc.batch.sizes, sc.batch.probs)]}
        else:
            out["batch"] = {"n_bar": sc.n_bar, "b_extra": sc.b_extra}
    elif sc.theta is not None:
        out["theta"] = sc.theta
    if sc.sim_block is not None:
        out["sim"] = sc.sim_block
    return out


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _x_grid(args, service_mean):
    lo = args.x_min if args.x_min is not None else 1e-3 * service_mean
    hi = args.x_max if args.x_max is not None else 1e2 * service_mean
    if not (0 <= lo < hi):
        raise MalformedScenario("need 0 <= x-min < x-max")
    n = args.x_points
    if lo > 0:
        return np.geomspace(lo, hi, n)
    xs = np.geomspace(hi * 1e-5, hi, n)
    xs[0] = 0.0
    return xs


def _theta_grid(args, model):
    if args.theta_min is None and args.theta_max is None:
        return tlps.default_theta_grid(model, args.points)
    lo = args.theta_min if args.theta_min is not None else 0.0
    hi = args.theta_max if args.theta_max is not None else 1e2 * mean(model.jobsize)
    if not (0 <= lo < hi):
        raise MalformedScenario("need 0 <= theta-min < theta-max")
    if args.log:
        start = lo if lo > 0 else hi * 1e-8
        grid = np.geomspace(start, hi, args.points)
        if lo == 0.0:
            grid[0] = 0.0
        return grid
    return np.linspace(lo, hi, args.points)


def _max_workers() -> int:
    env = os.environ.get("PSQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise MalformedScenario(f"PSQ_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _print_spectrum(sol: bps.BpsSolution, dump_roots: bool, dump_coeffs: bool):
    """Roots and coefficients always print; dump flags add diagnostics."""
    print("roots =", " ".join(_fmt(r) for r in sol.roots.roots))
    print("coefficients =", " ".join(_fmt(c) for c in sol.coeffs))
    if dump_roots:
        p, mu = sol.input.service.as_arrays()
        coupling = sol.input.lam * sol.input.n_bar
        b = np.array(sol.roots.roots)
        resid = np.abs(1.0 - coupling * (p[None, :] / (mu[None, :] - b[:, None])).sum(axis=1))
        print("psi_residuals =", " ".join(_fmt(r) for r in resid))
        if sol.roots.conditioning_warning:
            print("warning: near-degenerate spectrum; conditioning may limit accuracy")
    if dump_coeffs:
        print("cauchy_weights =", " ".join(_fmt(x) for x in sol.cauchy_weights))


def cmd_analyze(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.kind == "bps":
        sol = bps.solve_bps(
            bps.BpsInput(lam=sc.lam, n_bar=sc.n_bar, b_extra=sc.b_extra, service=sc.phases)
        )
        print(f"kind = bps  rho = {_fmt(sol.rho)}")
        print(f"n_bar = {_fmt(sc.n_bar)}  b_extra = {_fmt(sc.b_extra)}")
        print(f"c0 = {_fmt(sol.c0)}")
        _print_spectrum(sol, args.dump_roots, args.dump_coefficients)
        print(f"mean_sojourn = {_fmt(bps.mean_sojourn_bps(sol))}")
        if args.curve:
            cols = bps.response_curve(sol, _x_grid(args, mean(sc.phases)))
            header = ["x", "alpha", "alpha_prime", "alpha_second", "residual"]
            _write_csv(args.out, header, zip(*(cols[h] for h in header)))
    else:
        if sc.theta is None and args.theta is None:
            raise MalformedScenario("tlps analyze needs a theta (scenario field or --theta)")
        theta = args.theta if args.theta is not None else sc.theta
        model = tlps.TlpsModel(lam=sc.lam, jobsize=sc.phases)
        ev = tlps.evaluate_tlps(model, theta)
        print(f"kind = tlps  rho = {_fmt(model.rho)}  theta = {_fmt(ev.theta)}")
        print(
            f"rho_theta = {_fmt(ev.rho_theta)}  w_bar = {_fmt(ev.w_bar)}"
            f"  n_bar = {_fmt(ev.n_bar)}  b_extra = {_fmt(ev.b_extra)}"
        )
        if ev.bps is not None:
            print(f"c0 = {_fmt(ev.bps.c0)}")
            _print_spectrum(ev.bps, args.dump_roots, args.dump_coefficients)
        else:
            print("low-queue coupling underflowed; plain-PS limit used")
        print(f"ps_baseline = {_fmt(model.ps_baseline)}")
        print(f"mean_sojourn = {_fmt(ev.t_mean)}")
        if args.curve:
            xs = _x_grid(args, mean(sc.phases))
            ts = tlps.conditional_from_evaluation(ev, xs)
            _write_csv(args.out, ["x", "t_conditional"], zip(xs, ts))
    return EXIT_OK


def _sweep_rows(report: tlps.SweepReport):
    for r in report.rows:
        improvement = 100.0 * (report.ps_baseline - r.t_mean) / report.ps_baseline
        yield (
            r.theta,
            r.rho_theta,
            r.w_bar,
            r.n_bar,
            r.b_extra,
            r.t_mean,
            report.ps_baseline,
            improvement,
        )


_SWEEP_HEADER = [
    "theta",
    "rho_theta",
    "w_bar",
    "n_bar",
    "b_extra",
    "t_mean",
    "baseline",
    "improvement_pct",
]


def _require_tlps(sc: Scenario):
    if sc.kind != "tlps":
        raise MalformedScenario("this command needs a tlps scenario")
    return tlps.TlpsModel(lam=sc.lam, jobsize=sc.phases)


def cmd_sweep(args) -> int:
    model = _require_tlps(load_scenario(args.scenario))
    report = tlps.sweep_theta(model, _theta_grid(args, model), max_workers=_max_workers())
    _write_csv(args.out, _SWEEP_HEADER, _sweep_rows(report))
    return EXIT_OK


def cmd_optimize(args) -> int:
    model = _require_tlps(load_scenario(args.scenario))
    lo = args.theta_min if args.theta_min is not None else 0.0
    hi = args.theta_max if args.theta_max is not None else 1e2 * mean(model.jobsize)
    if lo == hi:
        theta_star, t_star = lo, tlps.evaluate_tlps(model, lo).t_mean
        report = tlps.sweep_theta(model, [lo])
    else:
        grid = _theta_grid(args, model)
        report = tlps.sweep_theta(model, grid, max_workers=_max_workers())
        theta_star, t_star = tlps.optimize_theta(model, (lo, hi))
        if report.best_t < t_star:  # incumbent over everything evaluated
            theta_star, t_star = report.best_theta, report.best_t
    lines = list(_sweep_rows(report))
    improvement = 100.0 * (report.ps_baseline - t_star) / report.ps_baseline
    _write_csv(args.out, _SWEEP_HEADER, lines)
    extra = (
        f"theta_star,{_fmt(theta_star)}\n"
        f"t_star,{_fmt(t_star)}\n"
        f"improvement_pct,{_fmt(improvement)}\n"
    )
    if args.out:
        with open(args.out, "a") as fh:
            fh.write(extra)
    else:
        sys.stdout.write(extra)
    return EXIT_OK


def _sim_config(sc: Scenario, args) -> sim.SimConfig:
    block = dict(sc.sim_block or {})
    for key in ("horizon", "warmup", "replications", "seed"):
        flag = getattr(args, key)
        if flag is not None:
            block[key] = flag
    missing = [k for k in ("horizon", "replications", "seed") if k not in block]
    if missing:
        raise MalformedScenario(f"simulation needs {', '.join(missing)} (sim block or flags)")
    horizon = int(block["horizon"])
    warmup = int(block.get("warmup", horizon // 10))
    bins = block.get("bins")
    common = dict(
        lam=sc.lam,
        service=sc.phases,
        horizon=horizon,
        warmup=warmup,
        replications=int(block["replications"]),
        seed=int(block["seed"]),
        size_bins=tuple(float(b) for b in bins) if bins else None,
    )
    if sc.kind == "bps":
        if sc.batch is None:
            raise MalformedScenario("simulation needs a batch pmf (not just n_bar/b_extra)")
        return sim.SimConfig(kind="bps", batch=sc.batch, **common)
    theta = args.theta if args.theta is not None else sc.theta
    if theta is None:
        raise MalformedScenario("tlps simulation needs a theta")
    return sim.SimConfig(kind="tlps", theta=float(theta), **common)


def _run_sim(sc: Scenario, cfg: sim.SimConfig) -> sim.SimResult:
    return sim.simulate_bps(cfg) if sc.kind == "bps" else sim.simulate_tlps(cfg)


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = _sim_config(sc, args)
    res = _run_sim(sc, cfg)
    print(
        f"mean_sojourn = {_fmt(res.mean_sojourn)}  stderr = {_fmt(res.stderr)}"
        f"  replications = {res.replications}  seed = {res.seed}"
    )
    for b in res.bins:
        print(
            f"bin ({_fmt(b.lo)}, {_fmt(b.hi)}]: count = {b.count}"
            f"  mean = {_fmt(b.mean)}  stderr = {_fmt(b.stderr)}"
        )
    if args.out:
        if args.out.endswith(".csv"):
            _write_csv(
                args.out,
                ["bin_lo", "bin_hi", "count", "mean", "stderr"],
                ((b.lo, b.hi, b.count, b.mean, b.stderr) for b in res.bins),
            )
        else:
            with open(args.out, "w") as fh:
                json.dump(sim.simresult_to_json(res), fh, indent=2, sort_keys=True)
                fh.write("\n")
    return EXIT_OK


def _analytic_bins(sc: Scenario, cfg: sim.SimConfig, res: sim.SimResult, ev=None, sol=None):
    for b in res.bins:
        if b.count < 1000:
            continue
        if sol is not None:
            yield b, bps.bin_conditional_sojourn(sol, b.lo, b.hi)
        else:
            yield b, tlps.bin_conditional_sojourn_tlps(ev, b.lo, b.hi)


def cmd_compare(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = _sim_config(sc, args)
    res = _run_sim(sc, cfg)
    if sc.kind == "bps":
        sol = bps.solve_bps(
            bps.BpsInput(lam=sc.lam, n_bar=sc.n_bar, b_extra=sc.b_extra, service=sc.phases)
        )
        analytic_mean = bps.mean_sojourn_bps(sol)
        bin_pairs = list(_analytic_bins(sc, cfg, res, sol=sol))
    else:
        model = tlps.TlpsModel(lam=sc.lam, jobsize=sc.phases)
        ev = tlps.evaluate_tlps(model, cfg.theta)
        analytic_mean = ev.t_mean
        bin_pairs = list(_analytic_bins(sc, cfg, res, ev=ev))

    rows = [("mean_sojourn", analytic_mean, res.mean_sojourn, res.stderr)]
    rows += [(f"bin({b.lo:g},{b.hi:g}]", an, b.mean, b.stderr) for b, an in bin_pairs]
    any_fail = False
    print(f"{'quantity':<28} {'analytic':>20} {'simulated':>20} {'stderr':>14} verdict")
    for name, an, simv, se in rows:
        ok = abs(an - simv) <= 3.0 * se
        any_fail |= not ok
        print(f"{name:<28} {an:>20.10g} {simv:>20.10g} {se:>14.4g} {'PASS' if ok else 'FAIL'}")
    return EXIT_COMPARE_FAIL if any_fail else EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="psq", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="path to a scenario JSON file")
        p.add_argument("--out", default=None, help="output file (default: stdout)")

    p = sub.add_parser("analyze", help="closed-form analysis of one scenario")
    common(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--curve", action="store_true", help="emit the response-curve CSV")
    p.add_argument("--x-min", type=float, default=None)
    p.add_argument("--x-max", type=float, default=None)
    p.add_argument("--x-points", type=int, default=50)
    p.add_argument("--dump-roots", action="store_true")
    p.add_argument("--dump-coefficients", action="store_true")
    p.set_defaults(fn=cmd_analyze)

    for name, fn in (("sweep", cmd_sweep), ("optimize", cmd_optimize)):
        p = sub.add_parser(name, help=f"{name} the threshold of a tlps scenario")
        common(p)
        p.add_argument("--theta-min", type=float, default=None)
        p.add_argument("--theta-max", type=float, default=None)
        p.add_argument("--points", type=int, default=tlps.GRID_POINTS)
        p.add_argument("--log", action="store_true", help="log-spaced custom grid")
        p.set_defaults(fn=fn)

    for name, fn in (("simulate", cmd_simulate), ("compare", cmd_compare)):
        p = sub.add_parser(name, help=f"{name} via the discrete-event engine")
        common(p)
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--warmup", type=int, default=None)
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(fn=fn)

    return top


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (UnstableSystem, UnstableConfig) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except PsqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
