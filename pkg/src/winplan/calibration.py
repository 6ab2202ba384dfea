"""Observed-scale concordance and recovery of the latent copula correlation.

Pairs involving a time-to-event endpoint use a Harrell-type concordance
mapped to ``2C - 1``; all other pairs use Kendall's tau-b. Concordance is
measured on the natural scale of each endpoint (no "higher is better"
orientation), so signs match association summaries computed on raw data.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import AllTied, ConfigError, DomainError, NoEvaluablePairs, NonPDTrajectory
from .forss import resolve_workers
from .kernels import harrell_counts, kendall_counts
from .sampler import sample_arm
from .scenario import CalibrationSettings, check_correlation_matrix, repair_correlation

KENDALL = "kendall_tau_b"
HARRELL = "harrell_2c_minus_1"
RHO_LIMIT = 0.99


def kendall_tau_b(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 2:
        raise DomainError("kendall_tau_b needs two equal-length vectors of length >= 2")
    n0, n1, n2, s = kendall_counts(x, y)
    den = (n0 - n1) * (n0 - n2)
    if den == 0:
        raise AllTied("tau-b is undefined when either variable is constant")
    return s / math.sqrt(den)


@dataclass(frozen=True)
class HarrellResult:
    c: float
    kappa: float
    concordant: int
    discordant: int
    tied: int


def harrell_c(time, event, y, y_event=None):
    """Concordance of a censored time with ``y`` (optionally itself censored).

    Tied ``y`` values on an evaluable pair count as half concordant.
    """
    time = np.asarray(time, dtype=float)
    if not (len(time) == len(event) == len(y)) or (y_event is not None and len(y_event) != len(y)):
        raise DomainError("harrell_c inputs must have equal lengths")
    conc, disc, tied = harrell_counts(time, event, y, y_event)
    total = conc + disc + tied
    if total == 0:
        raise NoEvaluablePairs("no pair has a shorter observed event time")
    c = (conc + 0.5 * tied) / total
    return HarrellResult(c, 2 * c - 1, conc, disc, tied)


def gaussian_kappa_to_rho(kappa):
    if not -1 <= kappa <= 1:
        raise DomainError("kappa must lie in [-1, 1]")
    return math.sin(math.pi / 2 * kappa)


def gaussian_rho_to_kappa(rho):
    if not -1 <= rho <= 1:
        raise DomainError("rho must lie in [-1, 1]")
    return 2 / math.pi * math.asin(rho)


def pair_method(scenario, a, b):
    return HARRELL if scenario.is_tte[a] or scenario.is_tte[b] else KENDALL


def pair_concordance(values, events, is_tte, a, b):
    if is_tte[a] or is_tte[b]:
        t, y = (a, b) if is_tte[a] else (b, a)
        y_event = events[:, y] if is_tte[y] else None
        return harrell_c(values[:, t], events[:, t], values[:, y], y_event).kappa
    return kendall_tau_b(values[:, a], values[:, b])


@dataclass(frozen=True)
class ConcordanceSummary:
    K: np.ndarray
    se: np.ndarray
    methods: tuple
    batches: int

    def offdiag(self):
        iu = np.triu_indices(self.K.shape[0], 1)
        return self.K[iu]


def _pairs(q):
    return [(a, b) for a in range(q) for b in range(a + 1, q)]


def _draw(scenario, chol, n_cal, seed, batch, arm):
    if arm == "pooled":
        t = sample_arm(n_cal, scenario.treatment, chol, scenario.follow_up,
                       rng.stream(seed, rng.CALIBRATE, batch, rng.TREATMENT), scenario.is_tte)
        c = sample_arm(n_cal, scenario.control, chol, scenario.follow_up,
                       rng.stream(seed, rng.CALIBRATE, batch, rng.CONTROL), scenario.is_tte)
        return np.vstack([t.values, c.values]), np.vstack([t.events, c.events])
    if arm != "treatment":
        raise ConfigError(f"calibration arm must be 'treatment' or 'pooled', got {arm!r}")
    s = sample_arm(n_cal, scenario.treatment, chol, scenario.follow_up,
                   rng.stream(seed, rng.CALIBRATE, batch, rng.TREATMENT), scenario.is_tte)
    return s.values, s.events


def _batch_concordances(scenario, chol, n_cal, seed, batch, arm, pairs):
    values, events = _draw(scenario, chol, n_cal, seed, batch, arm)
    return [pair_concordance(values, events, scenario.is_tte, a, b) for a, b in pairs]


def _run_batches(scenario, chol, n_cal, seed, batch_ids, arm, pairs, workers):
    if workers > 1 and len(batch_ids) > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(
                lambda k: _batch_concordances(scenario, chol, n_cal, seed, k, arm, pairs), batch_ids))
    else:
        rows = [_batch_concordances(scenario, chol, n_cal, seed, k, arm, pairs) for k in batch_ids]
    return np.array(rows, dtype=float).reshape(len(batch_ids), len(pairs))


def _summary(q, pairs, rows, methods):
    k = np.eye(q)
    se = np.zeros((q, q))
    mean = rows.mean(axis=0)
    sd = rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.full(len(pairs), np.inf)
    for idx, (a, b) in enumerate(pairs):
        k[a, b] = k[b, a] = mean[idx]
        se[a, b] = se[b, a] = sd[idx] / math.sqrt(rows.shape[0])
    return ConcordanceSummary(k, se, methods, rows.shape[0])


def implied_concordance(R, scenario, n_cal=20000, batches=10, seed=None, arm="treatment",
                        workers=None):
    """Average observed concordance matrix under latent correlation ``R``."""
    chol = check_correlation_matrix(R)
    seed = scenario.estimator.seed if seed is None else seed
    pairs = _pairs(scenario.q)
    methods = tuple(pair_method(scenario, a, b) for a, b in pairs)
    rows = _run_batches(scenario, chol, n_cal, seed, list(range(batches)), arm, pairs,
                        resolve_workers(workers, scenario.estimator.workers))
    return _summary(scenario.q, pairs, rows, methods)


@dataclass(frozen=True)
class CalibrationResult:
    R: np.ndarray
    K_sim: ConcordanceSummary
    K_target: np.ndarray
    d_max: float
    cycles: int
    converged: bool
    batches: int

    def to_dict(self):
        return {
            "R_cal": self.R.tolist(),
            "K_sim": self.K_sim.K.tolist(),
            "K_sim_se": self.K_sim.se.tolist(),
            "K_target": self.K_target.tolist(),
            "methods": list(self.K_sim.methods),
            "d_max": self.d_max,
            "cycles": self.cycles,
            "converged": self.converged,
            "batches": self.batches,
        }


def _is_pd(r):
    try:
        np.linalg.cholesky(r)
        return True
    except np.linalg.LinAlgError:
        return False


def _with_entry(r, a, b, value):
    out = r.copy()
    out[a, b] = out[b, a] = value
    return out


def _feasible_limit(r, a, b, toward, tol):
    """Furthest value toward ``toward`` keeping R positive definite (halving search)."""
    here = r[a, b]
    if _is_pd(_with_entry(r, a, b, toward)):
        return toward
    good, bad = here, toward
    while abs(bad - good) > tol / 4:
        mid = 0.5 * (good + bad)
        if _is_pd(_with_entry(r, a, b, mid)):
            good = mid
        else:
            bad = mid
    return good


def calibrate(K_target, scenario, settings=None, seed=None, workers=None, start=None):
    """Find latent R whose implied concordances match ``K_target``.

    Each off-diagonal entry is solved by bisection with the others held
    fixed, cycling until every entry is within ``settings.tol``. The same
    random streams are reused for every evaluation.
    """
    settings = settings or scenario.spec.dependence.calibration or CalibrationSettings()
    target = np.asarray(K_target, dtype=float)
    q = scenario.q
    if q < 2:
        raise ConfigError("calibration needs at least two endpoints")
    if target.shape != (q, q):
        raise ConfigError(f"K_target must be {q}x{q}")
    seed = scenario.estimator.seed if seed is None else seed
    workers = resolve_workers(workers, scenario.estimator.workers)
    pairs = _pairs(q)
    methods = tuple(pair_method(scenario, a, b) for a, b in pairs)
    n_cal, arm = settings.n_cal, settings.arm

    if start is None:
        r = np.eye(q)
        for a, b in pairs:
            r[a, b] = r[b, a] = np.clip(gaussian_kappa_to_rho(target[a, b]), -RHO_LIMIT, RHO_LIMIT)
        if not _is_pd(r):
            r = repair_correlation(r)
    else:
        r = np.array(start, dtype=float)
    if not _is_pd(r):
        raise NonPDTrajectory("starting correlation matrix is not positive definite", r)

    # fix the batch count once so every later evaluation reuses the same streams
    batch_ids = list(range(settings.min_batches))
    rows = _run_batches(scenario, np.linalg.cholesky(r), n_cal, seed, batch_ids, arm, pairs, workers)
    while len(batch_ids) < settings.max_batches:
        summ = _summary(q, pairs, rows, methods)
        if summ.se[np.triu_indices(q, 1)].max() < settings.tol / 3:
            break
        extra = list(range(len(batch_ids), min(settings.max_batches, 2 * len(batch_ids))))
        rows = np.vstack([rows, _run_batches(scenario, np.linalg.cholesky(r), n_cal, seed, extra,
                                             arm, pairs, workers)])
        batch_ids += extra

    def entry(rr, idx):
        a, b = pairs[idx]
        return _run_batches(scenario, np.linalg.cholesky(rr), n_cal, seed, batch_ids, arm,
                            [(a, b)], workers).mean()

    def current():
        full = _run_batches(scenario, np.linalg.cholesky(r), n_cal, seed, batch_ids, arm, pairs,
                            workers)
        summ = _summary(q, pairs, full, methods)
        return summ, float(np.abs(summ.K - target)[np.triu_indices(q, 1)].max())

    summ, d_max = current()
    best = (d_max, r.copy(), summ)
    cycles = 0
    while d_max >= settings.tol and cycles < settings.max_cycles:
        cycles += 1
        for idx, (a, b) in enumerate(pairs):
            goal = target[a, b]
            if abs(summ.K[a, b] - goal) < settings.tol / 4:
                continue
            lo = _feasible_limit(r, a, b, -RHO_LIMIT, settings.rho_tol)
            hi = _feasible_limit(r, a, b, RHO_LIMIT, settings.rho_tol)
            f_lo = entry(_with_entry(r, a, b, lo), idx) - goal
            f_hi = entry(_with_entry(r, a, b, hi), idx) - goal
            if f_lo >= 0:
                value = lo
            elif f_hi <= 0:
                value = hi
            else:
                while hi - lo > settings.rho_tol:
                    mid = 0.5 * (lo + hi)
                    f_mid = entry(_with_entry(r, a, b, mid), idx) - goal
                    if f_mid < 0:
                        lo, f_lo = mid, f_mid
                    else:
                        hi, f_hi = mid, f_mid
                value = lo + (hi - lo) * (-f_lo) / (f_hi - f_lo)
            r = _with_entry(r, a, b, value)
        if not _is_pd(r):
            raise NonPDTrajectory("coordinate update left the positive definite region", r)
        summ, d_max = current()
        if d_max < best[0]:
            best = (d_max, r.copy(), summ)
    d_max, r, summ = best
    return CalibrationResult(r, summ, target, d_max, cycles, d_max < settings.tol, len(batch_ids))
