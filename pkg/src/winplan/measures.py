"""Win measures, their effect sizes and variance quantities, and power / sample size.

Variances are expressed on the "per treatment subject" scale: the estimator
of a measure on its analysis scale has variance ``A / m`` for large m.
"""

import math
from dataclasses import dataclass
from typing import Optional

from scipy.special import ndtr, ndtri

from .errors import DegenerateMeasure, DomainError, NoSolution, ZeroEffect
from .scenario import MEASURES
from .ustat import exact_variance

M_MAX = 10**8


@dataclass(frozen=True)
class MeasureValues:
    wr: float
    nb: float
    wo: float
    door: float

    def get(self, measure):
        return getattr(self, measure.lower())


@dataclass(frozen=True)
class MeasureQuantities:
    measure: str
    delta: float
    a_null: float
    a_alt: float
    r: float = 1.0


@dataclass(frozen=True)
class SampleSize:
    m: int
    n: int
    total: int
    raw: float


def _check(measure):
    measure = measure.upper()
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    return measure


def measure_value(measure, est):
    measure = _check(measure)
    tw, tl, tt = est.tau_w, est.tau_l, est.tau_tie
    if measure == "WR":
        if tl <= 0:
            raise DegenerateMeasure("WR", "win ratio needs tau_l > 0")
        return tw / tl
    if measure == "NB":
        return tw - tl
    if measure == "WO":
        den = tl + tt / 2
        if den <= 0:
            raise DegenerateMeasure("WO", "win odds needs tau_l + tau_tie/2 > 0")
        return (tw + tt / 2) / den
    return 0.5 + 0.5 * (tw - tl)


def measure_values(est):
    return MeasureValues(*(measure_value(s, est) for s in MEASURES))


def effect_size(measure, est):
    """Absolute effect on the scale the test statistic is built on."""
    measure = _check(measure)
    if measure in ("WR", "WO"):
        value = measure_value(measure, est)
        if value <= 0:
            raise DegenerateMeasure(measure, f"{measure} needs tau_w > 0")
        return abs(math.log(value))
    nb = abs(est.tau_w - est.tau_l)
    return nb if measure == "NB" else nb / 2


def _nb_quantity(est, r):
    x = est.xi10 + est.xi01 / r
    return float(x[0, 0] + x[1, 1] - 2 * x[0, 1])


def variance_quantity(measure, est, r):
    measure = _check(measure)
    if measure == "WR":
        tw, tl = est.tau_w, est.tau_l
        if tw <= 0 or tl <= 0:
            raise DegenerateMeasure("WR", "win ratio variance needs tau_w, tau_l > 0")
        x = est.xi10 + est.xi01 / r
        return float(x[0, 0] / tw**2 + x[1, 1] / tl**2 - 2 * x[0, 1] / (tw * tl))
    nb = _nb_quantity(est, r)
    if measure == "NB":
        return nb
    if measure == "WO":
        den = 1.0 - (est.tau_w - est.tau_l) ** 2
        if den <= 0:
            raise DegenerateMeasure("WO", "win odds variance needs |tau_w - tau_l| < 1")
        return 4.0 * nb / den**2
    return nb / 4.0


def measure_quantities(measure, est_null, est_alt, r):
    measure = _check(measure)
    return MeasureQuantities(
        measure,
        effect_size(measure, est_alt),
        variance_quantity(measure, est_null, r),
        variance_quantity(measure, est_alt, r),
        r,
    )


def z_quantile(p):
    return float(ndtri(p))


def _power(delta, sd_null, sd_alt, m_root, alpha, both_tails):
    z = z_quantile(1 - alpha / 2)
    p = float(ndtr((-z * sd_null + m_root * delta) / sd_alt))
    if both_tails:
        p += float(ndtr((-z * sd_null - m_root * delta) / sd_alt))
    return p


def _require_positive(q):
    if not (q.a_null > 0 and q.a_alt > 0):
        raise DegenerateMeasure(q.measure, f"{q.measure} variance quantities must be positive")


def power_closed_form(q, m, alpha, both_tails=False):
    """Large-sample power using only the tail in the direction of the effect by default."""
    _require_positive(q)
    return _power(q.delta, math.sqrt(q.a_null), math.sqrt(q.a_alt), math.sqrt(m), alpha, both_tails)


def _sample_size(m_raw, r):
    m = max(1, math.ceil(m_raw - 1e-9))
    n = max(1, int(round(r * m)))
    return SampleSize(m, n, m + n, m_raw)


def sample_size_closed_form(q, alpha, target_power):
    _require_positive(q)
    if not 0.5 < target_power < 1:
        raise DomainError("target power must lie in (0.5, 1)")
    if q.delta == 0:
        raise ZeroEffect(f"{q.measure} effect is zero; no finite sample size reaches the target")
    za = z_quantile(1 - alpha / 2)
    zb = z_quantile(target_power)
    raw = (za * math.sqrt(q.a_null) + zb * math.sqrt(q.a_alt)) ** 2 / q.delta**2
    return _sample_size(raw, q.r)


def _exact_sd(measure, est, m, n):
    v = exact_variance(est, m, n)
    tw, tl = est.tau_w, est.tau_l
    if measure == "WR":
        if tw <= 0 or tl <= 0:
            raise DegenerateMeasure("WR")
        var = v.var_of(1 / tw, -1 / tl)
    else:
        var = v.var_of(1.0, -1.0)
        if measure == "WO":
            den = 1.0 - (tw - tl) ** 2
            if den <= 0:
                raise DegenerateMeasure("WO")
            var *= 4.0 / den**2
        elif measure == "DOOR":
            var /= 4.0
    if not var > 0:
        raise DegenerateMeasure(measure, f"{measure} finite-sample variance is not positive")
    return math.sqrt(var)


def power_exact(est_null, est_alt, measure, m, n, alpha, both_tails=False):
    """Power with the finite-(m, n) variances, including the xi^11 terms."""
    measure = _check(measure)
    delta = effect_size(measure, est_alt)
    return _power(delta, _exact_sd(measure, est_null, m, n), _exact_sd(measure, est_alt, m, n),
                  1.0, alpha, both_tails)


def sample_size_exact(est_null, est_alt, measure, alpha, target_power, r, both_tails=False):
    """Smallest m in [2, 1e8] whose finite-sample power reaches the target."""
    measure = _check(measure)
    if not 0.5 < target_power < 1:
        raise DomainError("target power must lie in (0.5, 1)")
    q = measure_quantities(measure, est_null, est_alt, r)
    if q.delta == 0:
        raise ZeroEffect(f"{measure} effect is zero; no finite sample size reaches the target")

    def ok(m):
        n = max(1, int(round(r * m)))
        return power_exact(est_null, est_alt, measure, m, n, alpha, both_tails) >= target_power

    centre = min(M_MAX, max(2, sample_size_closed_form(q, alpha, target_power).m))
    lo, hi = max(2, centre // 2), min(M_MAX, max(3, 2 * centre))
    while lo > 2 and ok(lo):
        lo = max(2, lo // 2)
    while not ok(hi):
        if hi == M_MAX:
            raise NoSolution(f"{measure} power stays below {target_power} up to m={M_MAX}")
        lo, hi = hi, min(M_MAX, 2 * hi)
    if lo == 2 and ok(2):
        return _sample_size(2, r)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return _sample_size(hi, r)


def yu_ganju_variance(measure, tau_tie, r):
    """Variance quantity that only accounts for ties (WR and NB)."""
    measure = _check(measure)
    if not 0 <= tau_tie < 1:
        raise DomainError("tie probability must lie in [0, 1)")
    if measure == "WR":
        return 4 * (1 + tau_tie) * (1 + r) / (3 * r * (1 - tau_tie))
    if measure == "NB":
        return (1 + tau_tie) * (1 - tau_tie) * (1 + r) / (3 * r)
    raise DomainError(f"tie-only variance is defined for WR and NB, not {measure}")


@dataclass(frozen=True)
class PowerTriplet:
    p_alt: float
    p_null: float
    p_ties: Optional[float]
    a_ties: Optional[float]


def sensitivity_power_triplet(est_null, est_alt, measure, m, alpha, r=1.0):
    """Power with the full variance, with the null variance twice, and with ties only."""
    q = measure_quantities(measure, est_null, est_alt, r)
    _require_positive(q)
    z = z_quantile(1 - alpha / 2)
    p_alt = power_closed_form(q, m, alpha)
    p_null = float(ndtr(-z + math.sqrt(m) * q.delta / math.sqrt(q.a_null)))
    p_ties = a_ties = None
    if q.measure in ("WR", "NB"):
        a_ties = yu_ganju_variance(q.measure, est_alt.tau_tie, r)
        p_ties = float(ndtr(-z + math.sqrt(m) * q.delta / math.sqrt(a_ties)))
    return PowerTriplet(p_alt, p_null, p_ties, a_ties)
