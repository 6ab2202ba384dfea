"""Monte Carlo trials at a fixed (m, n): empirical power and type I error."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .comparison import count_pairs
from .errors import ConfigError
from .forss import resolve_workers
from .measures import z_quantile
from .sampler import sample_scenario_arm
from .scenario import MEASURES
from .ustat import plugins_from_counts

_CHUNK = 200


@dataclass(frozen=True)
class MeasureOutcome:
    estimate: float
    statistic: float
    reject: bool
    degenerate: bool = False


def _null_quantities(est, r, null_variance):
    """Null variance quantities (WR, NB) estimated from one trial."""
    x = est.xi10 + est.xi01 / r
    nb_q = float(x[0, 0] + x[1, 1] - 2 * x[0, 1])
    tw, tl = est.tau_w, est.tau_l
    if null_variance == "symmetrized":
        bar = 0.5 * (tw + tl)
        wr_q = nb_q / bar**2 if bar > 0 else 0.0
    elif null_variance == "plugin":
        wr_q = (x[0, 0] / tw**2 + x[1, 1] / tl**2 - 2 * x[0, 1] / (tw * tl)) if tw > 0 and tl > 0 else 0.0
    else:
        raise ConfigError(f"unknown null_variance {null_variance!r}")
    return float(wr_q), nb_q


def _z_test(log_or_diff, quantity, m, z):
    if not quantity > 0:
        return 0.0, False
    stat = log_or_diff / math.sqrt(quantity / m)
    return stat, abs(stat) > z


def evaluate_trial(est, m, n, alpha, measures=MEASURES, null_variance="plugin"):
    """Standardized statistic and decision per measure for one realized trial."""
    z = z_quantile(1 - alpha / 2)
    r = n / m
    wr_q, nb_q = _null_quantities(est, r, null_variance)
    tw, tl, tt = est.tau_w, est.tau_l, est.tau_tie
    degenerate = tw == 0 or tl == 0
    out = {}
    for measure in measures:
        if measure in ("WR", "WO") and degenerate:
            out[measure] = MeasureOutcome(float("nan"), float("nan"), False, True)
            continue
        if measure == "WR":
            value = tw / tl
            stat, rej = _z_test(math.log(value), wr_q, m, z)
        elif measure == "WO":
            value = (tw + tt / 2) / (tl + tt / 2)
            if null_variance == "plugin":
                wo_q = 4 * nb_q / (1 - (tw - tl) ** 2) ** 2
            else:
                wo_q = 4 * nb_q
            stat, rej = _z_test(math.log(value), wo_q, m, z)
        elif measure == "NB":
            value = tw - tl
            stat, rej = _z_test(value, nb_q, m, z)
        else:
            value = 0.5 + 0.5 * (tw - tl)
            stat, rej = _z_test(value - 0.5, nb_q / 4, m, z)
        out[measure] = MeasureOutcome(value, stat, rej)
    return out


def simulate_trial_once(scenario, m, n, hypothesis, rep, seed=None, alpha=0.05,
                        measures=MEASURES, null_variance=None):
    if m < 2 or n < 2:
        raise ConfigError("trials need m, n >= 2")
    seed = scenario.estimator.seed if seed is None else seed
    null_variance = null_variance or scenario.spec.simulation.null_variance
    hyp = rng.HA if hypothesis == "HA" else rng.H0
    treat = sample_scenario_arm(scenario, m, rng.stream(seed, rng.SIMULATE, rep, rng.TREATMENT, hyp),
                                "treatment", hypothesis)
    ctrl = sample_scenario_arm(scenario, n, rng.stream(seed, rng.SIMULATE, rep, rng.CONTROL, hyp),
                               "control", hypothesis)
    est = plugins_from_counts(count_pairs(treat, ctrl, scenario))
    return evaluate_trial(est, m, n, alpha, measures, null_variance)


@dataclass
class MeasureReport:
    measure: str
    valid_reps: int
    rejections: int
    degenerate: int
    empirical_rate: float
    mc_se: float
    mean_estimate: float


@dataclass
class SimulationReport:
    hypothesis: str
    n_reps: int
    m: int
    n: int
    alpha: float
    measures: dict = field(default_factory=dict)

    def primary(self):
        return next(iter(self.measures.values()))

    @property
    def rejections(self):
        return self.primary().rejections

    @property
    def empirical_rate(self):
        return self.primary().empirical_rate

    @property
    def mc_se(self):
        return self.primary().mc_se

    def to_dict(self):
        return {
            "hypothesis": self.hypothesis,
            "n_reps": self.n_reps,
            "m": self.m,
            "n": self.n,
            "alpha": self.alpha,
            "measures": {k: vars(v) for k, v in self.measures.items()},
        }


def _run_reps(scenario, m, n, hypothesis, reps, seed, alpha, measures, null_variance):
    est = np.empty((len(reps), len(measures)))
    rej = np.zeros((len(reps), len(measures)), dtype=bool)
    deg = np.zeros((len(reps), len(measures)), dtype=bool)
    for i, rep in enumerate(reps):
        res = simulate_trial_once(scenario, m, n, hypothesis, rep, seed, alpha, measures, null_variance)
        for k, measure in enumerate(measures):
            o = res[measure]
            est[i, k], rej[i, k], deg[i, k] = o.estimate, o.reject, o.degenerate
    return est, rej, deg


def empirical_rates(scenario, m, n, n_reps, alpha=0.05, seed=None, measures=None, workers=None,
                    null_variance=None, hypotheses=("H0", "HA")):
    """Rejection rates per measure under each hypothesis.

    Replicate ``k`` always uses the same random streams, so results do not
    depend on how replicates are split across workers.
    """
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    seed = scenario.estimator.seed if seed is None else seed
    measures = tuple(measures or scenario.design.measures)
    workers = resolve_workers(workers, scenario.estimator.workers)
    chunks = [range(a, min(n_reps, a + _CHUNK)) for a in range(0, n_reps, _CHUNK)]
    reports = {}
    for hyp in hypotheses:
        job = lambda reps: _run_reps(scenario, m, n, hyp, reps, seed, alpha, measures, null_variance)
        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(job, chunks))
        else:
            parts = [job(c) for c in chunks]
        est = np.vstack([p[0] for p in parts])
        rej = np.vstack([p[1] for p in parts])
        deg = np.vstack([p[2] for p in parts])
        report = SimulationReport(hyp, n_reps, m, n, alpha)
        for k, measure in enumerate(measures):
            ok = ~deg[:, k]
            valid = int(ok.sum())
            hits = int(rej[ok, k].sum())
            rate = hits / valid if valid else float("nan")
            se = math.sqrt(rate * (1 - rate) / valid) if valid else float("nan")
            mean = float(est[ok, k].mean()) if valid else float("nan")
            report.measures[measure] = MeasureReport(measure, valid, hits, int((~ok).sum()), rate, se,
                                                     mean)
        reports[hyp] = report
    return reports
