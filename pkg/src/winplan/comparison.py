"""Pairwise win/loss/tie rules over a priority-ordered list of endpoints."""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptySample
from .kernels import pair_counts
from .scenario import DataType


class Verdict(enum.Enum):
    WIN = "win"
    LOSS = "loss"
    TIE = "tie"


@dataclass(frozen=True)
class SubjectRecord:
    values: tuple
    events: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        ev = (True,) * len(self.values) if self.events is None else tuple(bool(e) for e in self.events)
        if len(ev) != len(self.values):
            raise ValueError("values and events must have the same length")
        object.__setattr__(self, "events", ev)


@dataclass(frozen=True)
class PairOutcome:
    verdict: Verdict
    level: Optional[int]  # 1-based; None for a tie on every level


@dataclass(frozen=True)
class WinStats:
    u_w: float
    u_l: float
    u_tie: float
    pairs: int = 0


def compare_level(q, treat, ctrl, endpoint):
    """Verdict on endpoint ``q`` alone. ``endpoint`` is an EndpointSpec."""
    sign = 1.0 if endpoint.higher_is_better else -1.0
    t = sign * treat.values[q]
    c = sign * ctrl.values[q]
    d = endpoint.threshold
    if endpoint.data_type is DataType.TIME_TO_EVENT:
        if ctrl.events[q] and t > c + d:
            return Verdict.WIN
        if treat.events[q] and t < c - d:
            return Verdict.LOSS
        return Verdict.TIE
    if t > c + d:
        return Verdict.WIN
    if t < c - d:
        return Verdict.LOSS
    return Verdict.TIE


def _endpoints(scenario):
    spec = getattr(scenario, "spec", scenario)
    return spec.endpoints


def compare_pair(treat, ctrl, scenario):
    for q, endpoint in enumerate(_endpoints(scenario)):
        verdict = compare_level(q, treat, ctrl, endpoint)
        if verdict is not Verdict.TIE:
            return PairOutcome(verdict, q + 1)
    return PairOutcome(Verdict.TIE, None)


def as_arrays(sample, q=None):
    """``(values, events)`` arrays from an ArmSample, array or list of records."""
    if hasattr(sample, "values") and hasattr(sample, "events") and isinstance(sample.values, np.ndarray):
        return sample.values, sample.events
    if isinstance(sample, np.ndarray):
        v = sample.reshape(len(sample), -1).astype(float)
        return v, np.ones(v.shape, dtype=bool)
    records = list(sample)
    if not records:
        return np.empty((0, q or 0)), np.empty((0, q or 0), dtype=bool)
    if isinstance(records[0], SubjectRecord):
        v = np.array([r.values for r in records], dtype=float)
        e = np.array([r.events for r in records], dtype=bool)
        return v, e
    v = np.asarray(records, dtype=float).reshape(len(records), -1)
    return v, np.ones(v.shape, dtype=bool)


def level_rules(scenario):
    """``(is_tte, thresholds, signs)`` arrays for a Scenario or ScenarioSpec."""
    if hasattr(scenario, "is_tte"):
        return scenario.is_tte, scenario.thresholds, scenario.signs
    eps = _endpoints(scenario)
    is_tte = np.array([ep.data_type is DataType.TIME_TO_EVENT for ep in eps])
    thr = np.array([float(ep.threshold) for ep in eps])
    signs = np.array([1.0 if ep.higher_is_better else -1.0 for ep in eps])
    return is_tte, thr, signs


def count_pairs(treat, ctrl, scenario):
    """PairCounts for every treatment x control pair."""
    is_tte, thr, signs = level_rules(scenario)
    tv, te = as_arrays(treat, len(thr))
    cv, ce = as_arrays(ctrl, len(thr))
    if tv.shape[0] == 0 or cv.shape[0] == 0:
        raise EmptySample("both samples must be nonempty")
    if np.any(signs < 0):
        tv = tv * signs
        cv = cv * signs
    return pair_counts(tv, te, cv, ce, is_tte, thr)


def stats_from_counts(counts, m, n):
    pairs = m * n
    w = int(counts.level_w.sum())
    l = int(counts.level_l.sum())
    return WinStats(w / pairs, l / pairs, (pairs - w - l) / pairs, pairs)


def win_stats(treat, ctrl, scenario):
    counts = count_pairs(treat, ctrl, scenario)
    return stats_from_counts(counts, len(counts.row_w), len(counts.col_w))


@dataclass(frozen=True)
class LevelRow:
    level: int
    win: float
    loss: float
    tie: float
    pairs_at_risk: int
    defined: bool = True


@dataclass(frozen=True)
class Decomposition:
    """Level 1 is marginal; later levels are conditional on ties above."""

    levels: tuple
    overall: WinStats

    def chain_rule_win(self):
        total, carry = 0.0, 1.0
        for row in self.levels:
            if not row.defined:
                break
            total += carry * row.win
            carry *= row.tie
        return total


def decompose_counts(counts, m, n):
    pairs = m * n
    at_risk = pairs
    rows = []
    for q, (w, l) in enumerate(zip(counts.level_w.tolist(), counts.level_l.tolist())):
        if at_risk == 0:
            rows.append(LevelRow(q + 1, float("nan"), float("nan"), float("nan"), 0, False))
            continue
        rows.append(LevelRow(q + 1, w / at_risk, l / at_risk, (at_risk - w - l) / at_risk, at_risk))
        at_risk -= w + l
    return Decomposition(tuple(rows), stats_from_counts(counts, m, n))


def decompose_fractions(levels):
    """Decomposition from a (Q, 2) array of won / lost fractions of all pairs."""
    at_risk = 1.0
    rows = []
    for q, (w, l) in enumerate(np.asarray(levels, dtype=float)):
        if at_risk <= 0:
            rows.append(LevelRow(q + 1, float("nan"), float("nan"), float("nan"), 0, False))
            continue
        rows.append(LevelRow(q + 1, w / at_risk, l / at_risk, (at_risk - w - l) / at_risk, 0))
        at_risk -= w + l
    tw, tl = (float(x) for x in np.asarray(levels).sum(axis=0))
    return Decomposition(tuple(rows), WinStats(tw, tl, 1.0 - tw - tl))


def decompose_by_level(treat, ctrl, scenario):
    counts = count_pairs(treat, ctrl, scenario)
    return decompose_counts(counts, len(counts.row_w), len(counts.col_w))
