"""Shared helpers: cached estimator runs and brute-force oracles."""

import math
from functools import lru_cache
from itertools import product

import numpy as np

from winplan import config
from winplan.comparison import Verdict, compare_level, count_pairs
from winplan.forss import run_forss
from winplan.sampler import ArmSample
from winplan.scenario import (
    Bernoulli,
    EndpointSpec,
    Exponential,
    HazardRatio,
    MeanDifference,
    MeanRatio,
    Normal,
    Poisson,
    RiskDifference,
    ScenarioSpec,
    equicorrelation,
    offdiag_to_matrix,
)
from winplan.ustat import plugins_from_counts

HEARTFID_TIGHT = {"eps_tau": 2.5e-4, "eps_xi": 5e-5}


@lru_cache(maxsize=None)
def preset(name):
    return config.load_scenario(config.preset_path(name))


def with_rho(name, rho):
    sc = preset(name)
    return sc.with_correlation(equicorrelation(sc.q, rho))


@lru_cache(maxsize=None)
def forss_at(name, rho):
    """FORSS run for a two-endpoint preset at equicorrelation ``rho``."""
    return run_forss(with_rho(name, rho))


@lru_cache(maxsize=None)
def heartfid_at(offdiag, tight=True):
    sc = preset("heartfid").with_correlation(offdiag_to_matrix(list(offdiag), 3))
    if tight:
        sc = sc.with_estimator(**HEARTFID_TIGHT)
    return sc, run_forss(sc)


def brute_force_plugins(tv, te, cv, ce, endpoints):
    """tau and xi from the defining sums over all index pairs and triples."""
    from winplan.comparison import SubjectRecord

    m, n = len(tv), len(cv)
    treat = [SubjectRecord(tv[i], te[i]) for i in range(m)]
    ctrl = [SubjectRecord(cv[j], ce[j]) for j in range(n)]
    phi = np.zeros((2, m, n))
    for i, j in product(range(m), range(n)):
        for q, ep in enumerate(endpoints):
            verdict = compare_level(q, treat[i], ctrl[j], ep)
            if verdict is Verdict.WIN:
                phi[0, i, j] = 1
                break
            if verdict is Verdict.LOSS:
                phi[1, i, j] = 1
                break
    tau = phi.reshape(2, -1).mean(axis=1)
    xi10 = np.zeros((2, 2))
    xi01 = np.zeros((2, 2))
    xi11 = np.zeros((2, 2))
    for u, v in product(range(2), range(2)):
        s10 = 0.0
        for i in range(m):
            for j1 in range(n):
                for j2 in range(n):
                    if j1 != j2:
                        s10 += phi[u, i, j1] * phi[v, i, j2]
        s01 = 0.0
        for j in range(n):
            for i1 in range(m):
                for i2 in range(m):
                    if i1 != i2:
                        s01 += phi[u, i1, j] * phi[v, i2, j]
        xi10[u, v] = s10 / (m * n * (n - 1)) - tau[u] * tau[v]
        xi01[u, v] = s01 / (m * (m - 1) * n) - tau[u] * tau[v]
        xi11[u, v] = (phi[u] * phi[v]).sum() / (m * n) - tau[u] * tau[v]
    return tau, xi10, xi01, xi11


def kendall_oracle(x, y):
    """(n0, x ties, y ties, concordant - discordant) and tau-b from all pairs."""
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = np.sign(x[i] - x[j])
            dy = np.sign(y[i] - y[j])
            if dx == 0:
                tx += 1
            if dy == 0:
                ty += 1
            if dx * dy > 0:
                conc += 1
            elif dx * dy < 0:
                disc += 1
    n0 = n * (n - 1) // 2
    tau = (conc - disc) / math.sqrt((n0 - tx) * (n0 - ty))
    return (n0, tx, ty, conc - disc), tau


def harrell_oracle(time, event, y, y_event=None):
    """(concordant, discordant, tied) by the pair rules.

    A pair is evaluable when the shorter observed time is an event and is
    strictly shorter. When ``y`` is itself censored, its order must also be
    resolvable: the smaller y is an event. Tied censored y values are skipped.
    """
    n = len(time)
    conc = disc = tied = 0
    for i in range(n):
        for j in range(n):
            if i == j or not (time[i] < time[j] and event[i]):
                continue
            if y_event is None:
                if y[i] < y[j]:
                    conc += 1
                elif y[i] > y[j]:
                    disc += 1
                else:
                    tied += 1
                continue
            if y[i] < y[j] and y_event[i]:
                conc += 1
            elif y[j] < y[i] and y_event[j]:
                disc += 1
    return conc, disc, tied


def mixed_endpoints():
    return (
        EndpointSpec("time_to_event", Exponential(0.3), HazardRatio(0.8)),
        EndpointSpec("count", Poisson(1.0), MeanRatio(0.8), higher_is_better=False),
        EndpointSpec("binary", Bernoulli(0.4), RiskDifference(0.1)),
        EndpointSpec("continuous", Normal(0, 1), MeanDifference(0.2), threshold=0.3),
    )


def random_instance(gen):
    endpoints = mixed_endpoints()
    q = int(gen.integers(1, 5))
    chosen = tuple(endpoints[k] for k in sorted(gen.choice(4, q, replace=False)))
    m, n = (int(v) for v in gen.integers(2, 31, 2))
    tv = np.empty((m, q))
    cv = np.empty((n, q))
    for k, ep in enumerate(chosen):
        kind = ep.data_type.value
        if kind == "time_to_event":
            tv[:, k] = np.minimum(np.round(gen.exponential(3, m), 0), 5)
            cv[:, k] = np.minimum(np.round(gen.exponential(3, n), 0), 5)
        elif kind == "count":
            tv[:, k] = gen.poisson(1.0, m)
            cv[:, k] = gen.poisson(1.0, n)
        elif kind == "binary":
            tv[:, k] = gen.random(m) < 0.45
            cv[:, k] = gen.random(n) < 0.4
        else:
            tv[:, k] = np.round(gen.normal(size=m), 1)
            cv[:, k] = np.round(gen.normal(size=n), 1)
    te = np.ones((m, q), bool)
    ce = np.ones((n, q), bool)
    for k, ep in enumerate(chosen):
        if ep.data_type.value == "time_to_event":
            te[:, k] = tv[:, k] < 5
            ce[:, k] = cv[:, k] < 5
    return chosen, tv, te, cv, ce


def plugins_for(endpoints, tv, te, cv, ce, clamp=False):
    spec = ScenarioSpec(endpoints, follow_up=5)
    return plugins_from_counts(count_pairs(ArmSample(tv, te), ArmSample(cv, ce), spec), clamp=clamp)


def rel_close(a, b, tol=1e-10):
    return np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(b)))
