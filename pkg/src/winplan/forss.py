"""Adaptive super-sample estimation of plug-in quantities under H0 and HA."""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .comparison import count_pairs
from .errors import ConfigError
from .sampler import sample_scenario_arm
from .ustat import PluginEstimates, plugins_from_counts

# positions of tau- and xi-quantities in PluginEstimates.vector()
_TAU = slice(0, 3)
_XI = slice(3, 12)
_WIDTH = 12


class RunningAverages:
    """Streaming mean and squared-deviation sums (Welford) for a vector."""

    def __init__(self, width):
        self.count = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def update(self, x):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def se(self):
        if self.count < 2:
            return np.full(self.mean.shape, np.inf)
        var = np.maximum(self.m2, 0.0) / (self.count - 1)
        return np.sqrt(var / self.count)


def check_stopping(avgs, cfg):
    se = avgs.se()
    # columns are (H0 vector, HA vector) side by side
    tau_se = max(se[_TAU].max(), se[_WIDTH:][_TAU].max())
    xi_se = max(se[_XI].max(), se[_WIDTH:][_XI].max())
    done = avgs.count >= cfg.b_min and tau_se <= cfg.eps_tau and xi_se <= cfg.eps_xi
    return bool(done), float(tau_se), float(xi_se)


@dataclass
class RunDiagnostics:
    b_final: int
    status: str
    max_se_tau: float
    max_se_xi: float
    wall_time: float
    n_sp: int
    b_min: int
    b_max: int
    eps_tau: float
    eps_xi: float
    working_set_bytes: int
    clamped_batches: int = 0
    trace: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    def to_dict(self, include_timing=False):
        d = {
            "b_final": self.b_final,
            "status": self.status,
            "max_se_tau": self.max_se_tau,
            "max_se_xi": self.max_se_xi,
            "n_sp": self.n_sp,
            "b_min": self.b_min,
            "b_max": self.b_max,
            "eps_tau": self.eps_tau,
            "eps_xi": self.eps_xi,
            "working_set_bytes": self.working_set_bytes,
            "clamped_batches": self.clamped_batches,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        if self.trace:
            d["trace"] = self.trace
        return d


@dataclass
class ForssResult:
    null: PluginEstimates
    alt: PluginEstimates
    diagnostics: RunDiagnostics
    # (Q, 2) fractions of all pairs won / lost at each level, batch averaged
    levels_null: np.ndarray = None
    levels_alt: np.ndarray = None


def resolve_workers(workers=None, default=1):
    """Explicit value, else ``WINPLAN_WORKERS``, else ``default``."""
    if workers is None:
        env = os.environ.get("WINPLAN_WORKERS", "").strip()
        workers = int(env) if env else default
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return workers


def working_set_bytes(n_sp, q, workers):
    # three arm samples (float64 values + bool events + latent normals) plus
    # per-comparison row/column sums and the control-sized scratch rows
    per_batch = 3 * n_sp * q * (8 + 1 + 8) + 2 * (4 * n_sp * 8 + 3 * n_sp)
    return int(per_batch * workers)


def run_batch(scenario, b, seed=None, chol=None):
    """Plug-in estimates (H0, HA) for batch ``b`` plus per-level decided-pair fractions."""
    seed = scenario.estimator.seed if seed is None else seed
    n_sp = scenario.estimator.n_sp
    ctrl = sample_scenario_arm(
        scenario, n_sp, rng.stream(seed, rng.FORSS, b, rng.CONTROL, rng.HA), "control", "HA", chol
    )
    treat = sample_scenario_arm(
        scenario, n_sp, rng.stream(seed, rng.FORSS, b, rng.TREATMENT, rng.HA), "treatment", "HA", chol
    )
    treat0 = sample_scenario_arm(
        scenario, n_sp, rng.stream(seed, rng.FORSS, b, rng.TREATMENT, rng.H0), "treatment", "H0", chol
    )
    counts_alt = count_pairs(treat, ctrl, scenario)
    counts_null = count_pairs(treat0, ctrl, scenario)
    pairs = n_sp * n_sp
    levels = np.concatenate([counts_null.level_w, counts_null.level_l,
                             counts_alt.level_w, counts_alt.level_l]) / pairs
    return plugins_from_counts(counts_null), plugins_from_counts(counts_alt), levels


def _finalize(vec):
    # tie-block xi^11 is re-derived from the averaged taus so that the
    # identities xi_wl^11 = -tau_w tau_l and xi_uu^11 = tau_u(1 - tau_u) hold
    est = PluginEstimates.from_vector(vec)
    tau = est.tau
    xi11 = np.diag(tau) - np.outer(tau, tau)
    return PluginEstimates(est.tau_w, est.tau_l, est.xi10, est.xi01, xi11)


def run_forss(scenario, cfg=None, workers=None, trace=False, progress=None):
    """Run batches until the running averages are precise enough or b_max is hit.

    Batches are computed ``workers`` at a time but always folded into the
    running averages in index order, and batches past the stopping point are
    dropped, so the result does not depend on the worker count.
    """
    if scenario.chol is None:
        raise ConfigError("observed-scale dependence must be calibrated before estimation",
                          "/dependence")
    if cfg is not None and cfg != scenario.estimator:
        scenario = scenario.with_estimator(**cfg.__dict__)
    cfg = scenario.estimator
    workers = resolve_workers(workers, cfg.workers)
    start = time.perf_counter()
    avgs = RunningAverages(2 * _WIDTH)
    level_avgs = RunningAverages(4 * scenario.q)
    clamped = 0
    history = []
    done = False
    tau_se = xi_se = float("inf")
    b = 0
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while not done and b < cfg.b_max:
            chunk = range(b, min(cfg.b_max, b + workers))
            if pool is None:
                results = [run_batch(scenario, k) for k in chunk]
            else:
                results = list(pool.map(lambda k: run_batch(scenario, k), chunk))
            for null, alt, levels in results:
                avgs.update(np.concatenate([null.vector(), alt.vector()]))
                level_avgs.update(levels)
                clamped += bool(null.clamped or alt.clamped)
                b += 1
                if avgs.count >= 2:
                    done, tau_se, xi_se = check_stopping(avgs, cfg)
                    if trace:
                        history.append([b, tau_se, xi_se])
                if done:
                    break
            if progress is not None:
                progress(b, tau_se, xi_se)
    finally:
        if pool is not None:
            pool.shutdown()
    diag = RunDiagnostics(
        b_final=b,
        status="converged" if done else "b_max_reached",
        max_se_tau=tau_se,
        max_se_xi=xi_se,
        wall_time=time.perf_counter() - start,
        n_sp=cfg.n_sp,
        b_min=cfg.b_min,
        b_max=cfg.b_max,
        eps_tau=cfg.eps_tau,
        eps_xi=cfg.eps_xi,
        working_set_bytes=working_set_bytes(cfg.n_sp, scenario.q, workers),
        clamped_batches=clamped,
        trace=history,
    )
    q = scenario.q
    lv = level_avgs.mean.reshape(4, q)
    return ForssResult(_finalize(avgs.mean[:_WIDTH]), _finalize(avgs.mean[_WIDTH:]), diag,
                       lv[0:2].T.copy(), lv[2:4].T.copy())
