"""Command line entry point: ``winplan {power,samplesize,simulate,calibrate,grid}``."""

import argparse
import dataclasses
import logging
import os
import sys
import time

import numpy as np

from . import config
from .calibration import calibrate, implied_concordance
from .comparison import decompose_fractions
from .errors import ConfigError, NumericError, WinPlanError
from .forss import resolve_workers, run_forss
from .measures import (
    measure_quantities,
    measure_value,
    power_closed_form,
    power_exact,
    sample_size_closed_form,
    sample_size_exact,
    sensitivity_power_triplet,
)
from .reporting import (
    DECOMPOSITION_COLUMNS,
    decomposition_rows,
    ensure_dir,
    write_csv,
    write_json,
)
from .scenario import MEASURES, equicorrelation, offdiag_to_matrix, upper_offdiag, validate_scenario
from .simulate import empirical_rates

log = logging.getLogger("winplan")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class Run:
    """Shared state of one CLI invocation: scenario, provenance, outputs, exit status."""

    def __init__(self, args):
        self.args = args
        self.started = time.perf_counter()
        self.stages = {}
        self.resources = {}
        self.status = EXIT_OK
        self.problems = []
        path = config.preset_path(args.preset) if args.preset else args.scenario
        if path is None:
            raise ConfigError("a scenario file or --preset is required")
        self.doc = config.load_document(path)
        spec = config.spec_from_dict(self.doc)
        if args.seed is not None:
            spec = spec.replace(estimator=dataclasses.replace(spec.estimator, seed=args.seed))
        if getattr(args, "m", None) is not None:
            spec = spec.replace(design=dataclasses.replace(spec.design, m=args.m))
        if getattr(args, "power", None) is not None:
            spec = spec.replace(design=dataclasses.replace(spec.design, target_power=args.power))
        self.scenario = validate_scenario(spec, repair_correlation_matrix=args.repair_correlation)
        self.seed = self.scenario.estimator.seed
        # workers never change results, so they stay out of the provenance hash
        est = self.scenario.estimator
        self.hash = config.config_hash(spec.replace(estimator=dataclasses.replace(est, workers=1)))
        self.workers = resolve_workers(args.workers, est.workers)
        self.measures = parse_measures(args.measures, self.scenario.design.measures)
        self.out = ensure_dir(args.out)
        self.diagnostics = {
            "command": args.command,
            "scenario": self.scenario.spec.name,
            "seed": self.seed,
            "config_hash": self.hash,
            "config": config.spec_to_dict(self.scenario.spec),
        }
        if args.repair_correlation and self.scenario.latent is not None:
            self.diagnostics["latent_R"] = self.scenario.latent

    def flag(self, code, message):
        log.warning(message)
        self.problems.append({"exit_code": code, "message": message})
        self.status = max(self.status, code)

    def stage(self, name, started):
        self.stages[name] = time.perf_counter() - started

    def stamp(self, rows):
        for row in rows:
            row["seed"] = self.seed
            row["config_hash"] = self.hash
        return rows

    def write_csv(self, name, rows, columns):
        write_csv(os.path.join(self.out, name), self.stamp(rows), columns + ["seed", "config_hash"])

    def finish(self):
        self.diagnostics["problems"] = self.problems
        self.diagnostics["exit_code"] = self.status
        write_json(os.path.join(self.out, "diagnostics.json"), self.diagnostics)
        write_json(os.path.join(self.out, "timing.json"), {
            "workers": self.workers,
            "stages": self.stages,
            **self.resources,
            "wall_time": time.perf_counter() - self.started,
        })
        return self.status


def parse_measures(text, default):
    if not text:
        return tuple(default)
    out = []
    for item in text.split(","):
        item = item.strip().upper()
        if item not in MEASURES:
            raise ConfigError(f"unknown measure {item!r}; choose from {', '.join(MEASURES).lower()}")
        if item not in out:
            out.append(item)
    return tuple(out)


def parse_rho_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--rho expects comma separated numbers, got {text!r}") from None


def ensure_latent(run):
    """Resolve observed-scale dependence through calibration when needed."""
    sc = run.scenario
    if sc.chol is not None:
        return sc
    t0 = time.perf_counter()
    res = calibrate(np.asarray(sc.spec.dependence.matrix), sc, workers=run.workers)
    run.stage("calibration", t0)
    run.diagnostics["calibration"] = res.to_dict()
    if not res.converged:
        run.flag(EXIT_NOT_CONVERGED, f"calibration stopped at d_max={res.d_max:.3g}")
    return sc.with_correlation(res.R)


def estimate(run, scenario, label="forss"):
    t0 = time.perf_counter()
    res = run_forss(scenario, workers=run.workers)
    run.stage(label, t0)
    if not res.diagnostics.converged:
        run.flag(EXIT_NOT_CONVERGED,
                 f"{label}: b_max={res.diagnostics.b_max} reached before the precision targets")
    return res


def plugin_summary(run, res):
    estimation = res.diagnostics.to_dict()
    # depends on the worker count, so it lives with the timings
    run.resources["working_set_bytes"] = estimation.pop("working_set_bytes")
    return {
        "H0": res.null.to_dict(),
        "HA": res.alt.to_dict(),
        "estimation": estimation,
    }


def write_decomposition(run, res):
    rows = (decomposition_rows(decompose_fractions(res.levels_null), "H0")
            + decomposition_rows(decompose_fractions(res.levels_alt), "HA"))
    run.write_csv("decomposition.csv", rows, list(DECOMPOSITION_COLUMNS))


def _try(run, fn, what):
    try:
        return fn()
    except NumericError as exc:
        run.flag(EXIT_NUMERIC, f"{what}: {exc}")
        return None


def power_rows(run, res, m, n, exact):
    alpha, r = run.scenario.design.alpha, n / m
    rows = []
    for measure in run.measures:
        row = {"measure": measure, "m": m, "n": n, "alpha": alpha}
        value = _try(run, lambda: measure_value(measure, res.alt), measure)
        q = _try(run, lambda: measure_quantities(measure, res.null, res.alt, r), measure)
        if q is not None:
            row.update(value=value, delta=q.delta, a_null=q.a_null, a_alt=q.a_alt)
            row["power_closed_form"] = _try(run, lambda: power_closed_form(q, m, alpha), measure)
            if exact:
                row["power_exact"] = _try(
                    run, lambda: power_exact(res.null, res.alt, measure, m, n, alpha), measure)
        rows.append(row)
    return rows


POWER_COLUMNS = ["measure", "m", "n", "alpha", "value", "delta", "a_null", "a_alt",
                 "power_closed_form", "power_exact"]


def cmd_power(run):
    m = run.scenario.design.m
    if m is None:
        raise ConfigError("power needs design.m (or --m)", "/design/m")
    n = run.scenario.design.n_for(m)
    sc = ensure_latent(run)
    res = estimate(run, sc)
    run.write_csv("results.csv", power_rows(run, res, m, n, run.args.exact), POWER_COLUMNS)
    write_decomposition(run, res)
    run.diagnostics["plugins"] = plugin_summary(run, res)


SAMPLESIZE_COLUMNS = ["measure", "target_power", "alpha", "r", "value", "delta", "a_null", "a_alt",
                      "m_raw", "m", "n", "N", "m_exact", "n_exact", "N_exact"]


def cmd_samplesize(run):
    d = run.scenario.design
    if d.target_power is None:
        raise ConfigError("samplesize needs design.target_power (or --power)", "/design/target_power")
    sc = ensure_latent(run)
    res = estimate(run, sc)
    rows = []
    for measure in run.measures:
        row = {"measure": measure, "target_power": d.target_power, "alpha": d.alpha, "r": d.r}
        row["value"] = _try(run, lambda: measure_value(measure, res.alt), measure)
        q = _try(run, lambda: measure_quantities(measure, res.null, res.alt, d.r), measure)
        if q is not None:
            row.update(delta=q.delta, a_null=q.a_null, a_alt=q.a_alt)
            ss = _try(run, lambda: sample_size_closed_form(q, d.alpha, d.target_power), measure)
            if ss is not None:
                row.update(m_raw=ss.raw, m=ss.m, n=ss.n, N=ss.total)
            if run.args.exact:
                ex = _try(run, lambda: sample_size_exact(res.null, res.alt, measure, d.alpha,
                                                         d.target_power, d.r), measure)
                if ex is not None:
                    row.update(m_exact=ex.m, n_exact=ex.n, N_exact=ex.total)
        rows.append(row)
    run.write_csv("results.csv", rows, SAMPLESIZE_COLUMNS)
    write_decomposition(run, res)
    run.diagnostics["plugins"] = plugin_summary(run, res)


SIMULATE_COLUMNS = ["hypothesis", "measure", "m", "n", "alpha", "n_reps", "valid_reps", "degenerate",
                    "rejections", "empirical_rate", "mc_se", "mean_estimate"]


def simulation_rows(reports):
    rows = []
    for hyp, rep in reports.items():
        for measure, mr in rep.measures.items():
            rows.append({
                "hypothesis": hyp, "measure": measure, "m": rep.m, "n": rep.n, "alpha": rep.alpha,
                "n_reps": rep.n_reps, "valid_reps": mr.valid_reps, "degenerate": mr.degenerate,
                "rejections": mr.rejections, "empirical_rate": mr.empirical_rate,
                "mc_se": mr.mc_se, "mean_estimate": mr.mean_estimate,
            })
    return rows


def cmd_simulate(run):
    d = run.scenario.design
    if d.m is None:
        raise ConfigError("simulate needs design.m (or --m)", "/design/m")
    sc = ensure_latent(run)
    reps = run.args.reps or sc.spec.simulation.reps
    t0 = time.perf_counter()
    reports = empirical_rates(sc, d.m, d.n_for(d.m), reps, d.alpha, measures=run.measures,
                              workers=run.workers)
    run.stage("simulation", t0)
    run.write_csv("results.csv", simulation_rows(reports), SIMULATE_COLUMNS)
    run.diagnostics["simulation"] = {k: v.to_dict() for k, v in reports.items()}


CALIBRATE_COLUMNS = ["endpoint_a", "endpoint_b", "method", "K_target", "K_sim", "K_sim_se", "rho_cal"]


def load_targets(path, q):
    doc = config.load_document(path)
    k = doc.get("K", doc) if isinstance(doc, dict) else doc
    k = np.asarray(k, dtype=float)
    if k.shape == (q * (q - 1) // 2,):
        k = offdiag_to_matrix(k, q)
    if k.shape != (q, q):
        raise ConfigError(f"targets must be a {q}x{q} matrix or {q * (q - 1) // 2} upper entries")
    return k


def cmd_calibrate(run):
    sc = run.scenario
    if run.args.targets:
        target = load_targets(run.args.targets, sc.q)
    elif sc.spec.dependence.kind == "observed":
        target = np.asarray(sc.spec.dependence.matrix, dtype=float)
    else:
        raise ConfigError("calibrate needs observed-scale targets (dependence.K or --targets)",
                          "/dependence")
    t0 = time.perf_counter()
    res = calibrate(target, sc, workers=run.workers)
    run.stage("calibration", t0)
    if not res.converged:
        run.flag(EXIT_NOT_CONVERGED, f"calibration stopped at d_max={res.d_max:.3g}")
    rows = []
    for idx, (a, b) in enumerate(zip(*np.triu_indices(sc.q, 1))):
        rows.append({
            "endpoint_a": int(a) + 1, "endpoint_b": int(b) + 1, "method": res.K_sim.methods[idx],
            "K_target": target[a, b], "K_sim": res.K_sim.K[a, b], "K_sim_se": res.K_sim.se[a, b],
            "rho_cal": res.R[a, b],
        })
    run.write_csv("results.csv", rows, CALIBRATE_COLUMNS)
    run.diagnostics["calibration"] = res.to_dict()


def grid_points(run):
    q = run.scenario.q
    if run.args.rho:
        return [equicorrelation(q, rho) for rho in parse_rho_list(run.args.rho)]
    if run.args.grid:
        doc = config.load_document(run.args.grid)
        items = doc.get("points", []) if isinstance(doc, dict) else doc
        points = []
        for i, item in enumerate(items):
            if isinstance(item, (int, float)):
                points.append(equicorrelation(q, float(item)))
            elif isinstance(item, dict) and "rho" in item:
                points.append(equicorrelation(q, float(item["rho"])))
            elif isinstance(item, dict) and "R" in item:
                points.append(np.asarray(item["R"], dtype=float))
            else:
                raise ConfigError("grid points need rho or R", f"/points/{i}")
        if points:
            return points
    raise ConfigError("grid needs --rho or a --grid file with at least one point")


def grid_columns(q, measures, with_empirical):
    pairs = [f"{a + 1}{b + 1}" for a, b in zip(*np.triu_indices(q, 1))]
    cols = ["point"] + [f"rho_{p}" for p in pairs] + [f"kappa_{p}" for p in pairs]
    cols += ["m", "n", "tau_w", "tau_l", "tau_tie", "b_final", "status"]
    for measure in measures:
        k = measure.lower()
        cols += [f"{k}_value", f"{k}_power", f"{k}_power_null_var", f"{k}_power_ties"]
        if with_empirical:
            cols += [f"{k}_type1_emp", f"{k}_power_emp"]
    return cols + ["error"]


def grid_row(run, idx, R, m, n, reps):
    sc = run.scenario
    row = {"point": idx}
    iu = np.triu_indices(sc.q, 1)
    for a, b in zip(*iu):
        row[f"rho_{a + 1}{b + 1}"] = R[a, b]
    point = sc.with_correlation(R)
    cal = sc.spec.dependence.calibration
    kap = implied_concordance(R, point, n_cal=cal.n_cal, batches=cal.min_batches, arm=cal.arm,
                              workers=run.workers)
    for a, b in zip(*iu):
        row[f"kappa_{a + 1}{b + 1}"] = kap.K[a, b]
    res = run_forss(point, workers=run.workers)
    row.update(m=m, n=n, tau_w=res.alt.tau_w, tau_l=res.alt.tau_l, tau_tie=res.alt.tau_tie,
               b_final=res.diagnostics.b_final, status=res.diagnostics.status)
    if not res.diagnostics.converged:
        run.flag(EXIT_NOT_CONVERGED, f"grid point {idx}: b_max reached")
    alpha = sc.design.alpha
    errors = []
    for measure in run.measures:
        k = measure.lower()
        try:
            row[f"{k}_value"] = measure_value(measure, res.alt)
            trip = sensitivity_power_triplet(res.null, res.alt, measure, m, alpha, n / m)
            row[f"{k}_power"] = trip.p_alt
            row[f"{k}_power_null_var"] = trip.p_null
            row[f"{k}_power_ties"] = trip.p_ties
        except NumericError as exc:
            errors.append(f"{measure}: {exc}")
    if reps:
        reports = empirical_rates(point, m, n, reps, alpha, measures=run.measures, workers=run.workers)
        for measure in run.measures:
            k = measure.lower()
            row[f"{k}_type1_emp"] = reports["H0"].measures[measure].empirical_rate
            row[f"{k}_power_emp"] = reports["HA"].measures[measure].empirical_rate
    if errors:
        run.flag(EXIT_NUMERIC, f"grid point {idx}: " + "; ".join(errors))
    row["error"] = "; ".join(errors)
    return row


def cmd_grid(run):
    d = run.scenario.design
    if d.m is None:
        raise ConfigError("grid needs design.m (or --m)", "/design/m")
    m, n = d.m, d.n_for(d.m)
    points = grid_points(run)
    reps = run.args.reps or 0
    cols = grid_columns(run.scenario.q, run.measures, reps > 0)
    rows = []
    t0 = time.perf_counter()
    for idx, R in enumerate(points):
        try:
            rows.append(grid_row(run, idx, R, m, n, reps))
        except WinPlanError as exc:
            run.flag(exc.exit_code, f"grid point {idx}: {exc}")
            row = {"point": idx, "status": "failed", "error": str(exc)}
            R = np.asarray(R)
            if R.shape == (run.scenario.q,) * 2:
                for a, b in zip(*np.triu_indices(run.scenario.q, 1)):
                    row[f"rho_{a + 1}{b + 1}"] = R[a, b]
            rows.append(row)
        log.info("grid point %d/%d done", idx + 1, len(points))
    run.stage("grid", t0)
    run.write_csv("grid.csv", rows, cols)
    run.diagnostics["grid"] = {"points": [upper_offdiag(np.asarray(R)) for R in points],
                               "reps": reps}


COMMANDS = {
    "power": cmd_power,
    "samplesize": cmd_samplesize,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "grid": cmd_grid,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", nargs="?", help="scenario JSON file")
    common.add_argument("--preset", choices=config.preset_names(), help="use a bundled scenario")
    common.add_argument("--out", default="./out", help="output directory (default ./out)")
    common.add_argument("--workers", type=int, default=None,
                        help="worker threads (default: WINPLAN_WORKERS or the scenario value)")
    common.add_argument("--measures", default=None, help="comma separated subset of wr,nb,wo,door")
    common.add_argument("--seed", type=int, default=None, help="override estimator.seed")
    common.add_argument("--repair-correlation", action="store_true",
                        help="eigenvalue-clip a non positive definite R instead of failing")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="winplan", description="Power and sample size for win statistics.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("power", parents=[common], help="power at design.m")
    p.add_argument("--m", type=int, help="treatment arm size (overrides design.m)")
    p.add_argument("--exact", action="store_true", help="also report finite-sample power")
    p = sub.add_parser("samplesize", parents=[common], help="sample size for design.target_power")
    p.add_argument("--power", type=float, help="target power (overrides design.target_power)")
    p.add_argument("--exact", action="store_true", help="also invert the finite-sample power")
    p = sub.add_parser("simulate", parents=[common], help="empirical type I error and power")
    p.add_argument("--m", type=int, help="treatment arm size (overrides design.m)")
    p.add_argument("--reps", type=int, help="Monte Carlo replicates per hypothesis")
    p = sub.add_parser("calibrate", parents=[common], help="latent R from observed concordances")
    p.add_argument("--targets", help="JSON with K (matrix or upper off-diagonal list)")
    p = sub.add_parser("grid", parents=[common], help="sensitivity over latent correlations")
    p.add_argument("--m", type=int, help="treatment arm size (overrides design.m)")
    p.add_argument("--rho", help="comma separated equicorrelation values")
    p.add_argument("--grid", help="JSON file with a list of points ({rho} or {R})")
    p.add_argument("--reps", type=int, default=0, help="empirical replicates per point (default 0)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        run = Run(args)
        COMMANDS[args.command](run)
        return run.finish()
    except WinPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
