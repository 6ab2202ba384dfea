"""Design inputs: marginals, treatment effects, dependence and validation.

Everything here is immutable once :func:`validate_scenario` has returned, so a
:class:`Scenario` can be shared freely between worker threads.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special, stats

from .errors import (
    ConfigError,
    DomainError,
    IncompatibleEffect,
    InvalidMarginal,
    MissingFollowUp,
    NonPositiveDefiniteCorrelation,
    ProbabilityOutOfRange,
)

POISSON_MAX_K = 10**6
MEASURES = ("WR", "NB", "WO", "DOOR")


class DataType(str, enum.Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"
    ORDINAL = "ordinal"
    COUNT = "count"
    TIME_TO_EVENT = "time_to_event"


# ---------------------------------------------------------------------------
# Marginal distributions


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float
    family = "normal"
    discrete = False

    def check(self, path=None):
        if not (math.isfinite(self.mean) and self.sd > 0 and math.isfinite(self.sd)):
            raise InvalidMarginal(f"normal needs finite mean and sd > 0, got {self}", path)

    def ppf(self, u):
        return self.mean + self.sd * special.ndtri(u)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.sd)

    def to_dict(self):
        return {"family": "normal", "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class Bernoulli:
    p: float
    family = "bernoulli"
    discrete = True

    def check(self, path=None):
        if not 0.0 <= self.p <= 1.0:
            raise ProbabilityOutOfRange(f"bernoulli p={self.p} is outside [0, 1]", path)

    def ppf(self, u):
        # larger latent u maps to 1; fixes the sign of latent dependence
        return (np.asarray(u) > 1.0 - self.p).astype(np.float64)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, np.where(x < 1, 1.0 - self.p, 1.0))

    def to_dict(self):
        return {"family": "bernoulli", "p": self.p}


@dataclass(frozen=True)
class Exponential:
    rate: float
    family = "exponential"
    discrete = False

    def check(self, path=None):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidMarginal(f"exponential rate must be > 0, got {self.rate}", path)

    def ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)))

    def to_dict(self):
        return {"family": "exponential", "rate": self.rate}


def _cdf_table(pmf_values):
    cdf = np.cumsum(pmf_values)
    cdf[-1] = max(cdf[-1], 1.0)
    return cdf


@functools.lru_cache(maxsize=64)
def _poisson_cdf_table(mean):
    # support truncated well past the point where the upper tail drops below
    # double resolution
    kmax = int(mean + 12 * math.sqrt(mean) + 30)
    if kmax > POISSON_MAX_K:
        raise DomainError(f"poisson mean {mean} needs more than {POISSON_MAX_K} cells")
    table = _cdf_table(stats.poisson.pmf(np.arange(kmax + 1), mean))
    table.flags.writeable = False
    return table


@dataclass(frozen=True)
class Poisson:
    mean: float
    family = "poisson"
    discrete = True

    def check(self, path=None):
        if not (self.mean > 0 and math.isfinite(self.mean)):
            raise InvalidMarginal(f"poisson mean must be > 0, got {self.mean}", path)

    def _table(self):
        return _poisson_cdf_table(self.mean)

    def ppf(self, u):
        cdf = self._table()
        return np.searchsorted(cdf, np.asarray(u, dtype=float), side="left").astype(np.float64)

    def cdf(self, x):
        return stats.poisson.cdf(x, self.mean)

    def to_dict(self):
        return {"family": "poisson", "mean": self.mean}


@dataclass(frozen=True)
class Categorical:
    scores: tuple
    probs: tuple
    family = "categorical"
    discrete = True

    def __post_init__(self):
        object.__setattr__(self, "scores", tuple(int(s) for s in self.scores))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    def check(self, path=None):
        if len(self.scores) != len(self.probs) or len(self.scores) < 2:
            raise InvalidMarginal("categorical needs matching scores/probs of length >= 2", path)
        if any(b <= a for a, b in zip(self.scores, self.scores[1:])):
            raise InvalidMarginal("categorical scores must be strictly ascending integers", path)
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ProbabilityOutOfRange("categorical probs must form a simplex", path)

    def ppf(self, u):
        cdf = _cdf_table(np.array(self.probs))
        idx = np.searchsorted(cdf, np.asarray(u, dtype=float), side="left")
        idx = np.minimum(idx, len(self.scores) - 1)
        return np.asarray(self.scores, dtype=np.float64)[idx]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cdf = np.concatenate([[0.0], np.cumsum(self.probs)])
        return cdf[np.searchsorted(np.asarray(self.scores, float), x, side="right")]

    def to_dict(self):
        return {"family": "categorical", "scores": list(self.scores), "probs": list(self.probs)}


Marginal = Union[Normal, Bernoulli, Exponential, Poisson, Categorical]

_FAMILY_FOR_TYPE = {
    DataType.BINARY: Bernoulli,
    DataType.CONTINUOUS: Normal,
    DataType.ORDINAL: Categorical,
    DataType.COUNT: Poisson,
    DataType.TIME_TO_EVENT: Exponential,
}


def inverse_cdf(marginal: Marginal, u):
    """Generalized inverse ``inf{x : F(x) >= u}`` for ``u`` in (0, 1)."""
    arr = np.asarray(u, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError("inverse_cdf needs u strictly inside (0, 1)")
    out = marginal.ppf(arr)
    return float(out) if np.ndim(u) == 0 else out


def event_prob_to_rate(p, horizon=1.0):
    """Exponential rate giving event probability ``p`` by ``horizon``."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"event probability must be in (0, 1), got {p}")
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    return -math.log1p(-p) / horizon


# ---------------------------------------------------------------------------
# Treatment effects


@dataclass(frozen=True)
class MeanDifference:
    value: float
    sd: Optional[float] = None
    kind = "mean_difference"

    def to_dict(self):
        d = {"kind": self.kind, "value": self.value}
        if self.sd is not None:
            d["sd"] = self.sd
        return d


@dataclass(frozen=True)
class RiskDifference:
    value: float
    kind = "risk_difference"

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class HazardRatio:
    value: float
    kind = "hazard_ratio"

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class MeanRatio:
    value: float
    kind = "mean_ratio"

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class CategoryShift:
    probs: tuple
    kind = "category_shift"

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    def to_dict(self):
        return {"kind": self.kind, "probs": list(self.probs)}


TreatmentEffect = Union[MeanDifference, RiskDifference, HazardRatio, MeanRatio, CategoryShift]


def resolve_treatment_marginal(control: Marginal, effect: TreatmentEffect, path=None) -> Marginal:
    """Apply a marginal treatment effect to the control-arm distribution."""
    if isinstance(effect, MeanDifference) and isinstance(control, Normal):
        sd = control.sd if effect.sd is None else effect.sd
        out = Normal(control.mean + effect.value, sd)
    elif isinstance(effect, RiskDifference) and isinstance(control, Bernoulli):
        p = control.p + effect.value
        if not 0.0 <= p <= 1.0:
            raise ProbabilityOutOfRange(
                f"control p={control.p} plus risk difference {effect.value} gives {p:g}", path
            )
        out = Bernoulli(p)
    elif isinstance(effect, HazardRatio) and isinstance(control, Exponential):
        if not effect.value > 0:
            raise IncompatibleEffect("hazard ratio must be positive", path)
        out = Exponential(effect.value * control.rate)
    elif isinstance(effect, MeanRatio) and isinstance(control, Poisson):
        if not effect.value > 0:
            raise IncompatibleEffect("mean ratio must be positive", path)
        out = Poisson(effect.value * control.mean)
    elif isinstance(effect, CategoryShift) and isinstance(control, Categorical):
        out = Categorical(control.scores, effect.probs)
    else:
        raise IncompatibleEffect(
            f"{effect.kind} cannot be applied to a {control.family} control marginal", path
        )
    out.check(path)
    return out


# ---------------------------------------------------------------------------
# Endpoint, dependence and run settings


@dataclass(frozen=True)
class EndpointSpec:
    data_type: DataType
    control: Marginal
    treatment: Union[TreatmentEffect, Marginal]
    threshold: float = 0.0
    higher_is_better: bool = True
    name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "data_type", DataType(self.data_type))


@dataclass(frozen=True)
class CalibrationSettings:
    tol: float = 0.005
    n_cal: int = 20000
    max_cycles: int = 25
    rho_tol: float = 1e-3
    min_batches: int = 4
    max_batches: int = 200
    arm: str = "treatment"


@dataclass(frozen=True)
class DependenceSpec:
    kind: str = "independence"  # independence | latent | observed
    matrix: Optional[tuple] = None
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)

    def __post_init__(self):
        if self.matrix is not None:
            m = tuple(tuple(float(v) for v in row) for row in self.matrix)
            object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class DesignInputs:
    m: Optional[int] = None
    r: float = 1.0
    alpha: float = 0.05
    target_power: Optional[float] = None
    measures: tuple = MEASURES

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(s.upper() for s in self.measures))

    def n_for(self, m):
        return max(1, int(round(self.r * m)))


@dataclass(frozen=True)
class EstimatorConfig:
    n_sp: int = 2000
    b_min: int = 100
    b_max: int = 3000
    eps_tau: float = 5e-4
    eps_xi: float = 1e-4
    seed: int = 20240601
    workers: int = 1


@dataclass(frozen=True)
class SimulationSettings:
    reps: int = 10000
    null_variance: str = "plugin"  # or "symmetrized"


@dataclass(frozen=True)
class ScenarioSpec:
    endpoints: tuple
    dependence: DependenceSpec = field(default_factory=DependenceSpec)
    follow_up: Optional[float] = None
    design: DesignInputs = field(default_factory=DesignInputs)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    name: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "endpoints", tuple(self.endpoints))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated scenario with resolved treatment marginals.

    ``chol`` is ``None`` only for observed-scale dependence that still needs
    calibration.
    """

    spec: ScenarioSpec
    control: tuple
    treatment: tuple
    is_tte: np.ndarray
    thresholds: np.ndarray
    signs: np.ndarray
    latent: Optional[np.ndarray]
    chol: Optional[np.ndarray]

    @property
    def q(self):
        return len(self.control)

    @property
    def follow_up(self):
        return self.spec.follow_up

    @property
    def design(self):
        return self.spec.design

    @property
    def estimator(self):
        return self.spec.estimator

    def with_correlation(self, matrix):
        """Re-validate with a latent correlation matrix replacing the dependence."""
        dep = DependenceSpec("latent", np.asarray(matrix).tolist(), self.spec.dependence.calibration)
        return validate_scenario(self.spec.replace(dependence=dep))

    def with_estimator(self, **changes):
        est = dataclasses.replace(self.spec.estimator, **changes)
        return validate_scenario(self.spec.replace(estimator=est))


def check_correlation_matrix(matrix, path=None, what="R"):
    """Return the Cholesky factor of a latent correlation matrix or raise."""
    r = np.asarray(matrix, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise NonPositiveDefiniteCorrelation(f"{what} must be square, got shape {r.shape}", path)
    if not np.allclose(r, r.T, atol=1e-12, rtol=0):
        raise NonPositiveDefiniteCorrelation(f"{what} must be symmetric", path)
    if not np.allclose(np.diag(r), 1.0, atol=1e-12, rtol=0):
        raise NonPositiveDefiniteCorrelation(f"{what} must have unit diagonal", path)
    if np.any(np.abs(r) > 1.0):
        raise NonPositiveDefiniteCorrelation(f"{what} entries must lie in [-1, 1]", path)
    try:
        return np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        raise NonPositiveDefiniteCorrelation(f"{what} is not positive definite", path) from None


def repair_correlation(matrix, floor=1e-8):
    """Nearest-PD repair by eigenvalue clipping, with the diagonal rescaled to 1."""
    r = np.asarray(matrix, dtype=float)
    r = 0.5 * (r + r.T)
    w, v = np.linalg.eigh(r)
    fixed = (v * np.maximum(w, floor)) @ v.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    np.fill_diagonal(fixed, 1.0)
    return 0.5 * (fixed + fixed.T)


def _check_observed_targets(matrix, q, path):
    k = np.asarray(matrix, dtype=float)
    if k.shape != (q, q):
        raise ConfigError(f"K must be {q}x{q}", path)
    if not np.allclose(k, k.T, atol=1e-12, rtol=0) or not np.allclose(np.diag(k), 1.0):
        raise ConfigError("K must be symmetric with unit diagonal", path)
    if np.any(np.abs(k) > 1.0):
        raise ConfigError("K entries must lie in [-1, 1]", path)


def validate_scenario(spec: ScenarioSpec, repair_correlation_matrix=False) -> Scenario:
    """Check every design input and resolve treatment marginals."""
    if not spec.endpoints:
        raise ConfigError("at least one endpoint is required", "/endpoints")
    controls, treats = [], []
    for q, ep in enumerate(spec.endpoints):
        path = f"/endpoints/{q}"
        family = _FAMILY_FOR_TYPE[ep.data_type]
        if not isinstance(ep.control, family):
            raise InvalidMarginal(
                f"{ep.data_type.value} endpoints need a {family.family} control marginal",
                path + "/control",
            )
        ep.control.check(path + "/control")
        if not (ep.threshold >= 0 and math.isfinite(ep.threshold)):
            raise ConfigError("threshold must be a finite value >= 0", path + "/threshold")
        if ep.data_type is DataType.BINARY and ep.threshold != 0:
            raise ConfigError("binary endpoints take no threshold", path + "/threshold")
        if ep.data_type is DataType.TIME_TO_EVENT and not ep.higher_is_better:
            raise ConfigError("time-to-event endpoints are compared with longer times better",
                              path + "/higher_is_better")
        if isinstance(ep.treatment, family):
            ep.treatment.check(path + "/treatment")
            if isinstance(ep.treatment, Categorical) and ep.treatment.scores != ep.control.scores:
                raise InvalidMarginal("treatment categories must match control", path + "/treatment")
            treat = ep.treatment
        elif hasattr(ep.treatment, "kind"):
            treat = resolve_treatment_marginal(ep.control, ep.treatment, path + "/effect")
        else:
            raise IncompatibleEffect(
                f"treatment {ep.treatment!r} does not fit a {ep.data_type.value} endpoint",
                path + "/treatment",
            )
        controls.append(ep.control)
        treats.append(treat)

    is_tte = np.array([ep.data_type is DataType.TIME_TO_EVENT for ep in spec.endpoints])
    if is_tte.any() and not (spec.follow_up is not None and spec.follow_up > 0):
        raise MissingFollowUp("time-to-event endpoints need a positive follow_up", "/follow_up")

    q = len(spec.endpoints)
    dep = spec.dependence
    latent = chol = None
    if dep.kind == "independence":
        latent = np.eye(q)
        chol = np.eye(q)
    elif dep.kind == "latent":
        if dep.matrix is None:
            raise ConfigError("latent dependence needs R", "/dependence/R")
        latent = np.asarray(dep.matrix, dtype=float)
        if latent.shape != (q, q):
            raise NonPositiveDefiniteCorrelation(f"R must be {q}x{q}", "/dependence/R")
        if repair_correlation_matrix:
            try:
                check_correlation_matrix(latent)
            except NonPositiveDefiniteCorrelation:
                latent = repair_correlation(latent)
        chol = check_correlation_matrix(latent, "/dependence/R")
    elif dep.kind == "observed":
        if dep.matrix is None:
            raise ConfigError("observed dependence needs K", "/dependence/K")
        _check_observed_targets(dep.matrix, q, "/dependence/K")
    else:
        raise ConfigError(f"unknown dependence kind {dep.kind!r}", "/dependence/kind")

    d, e = spec.design, spec.estimator
    if d.m is not None and not (isinstance(d.m, (int, np.integer)) and d.m >= 1):
        raise ConfigError("m must be a positive integer", "/design/m")
    if not d.r > 0:
        raise ConfigError("allocation ratio r must be positive", "/design/r")
    if not 0 < d.alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)", "/design/alpha")
    if d.target_power is not None and not 0.5 < d.target_power < 1:
        raise ConfigError("target_power must lie in (0.5, 1)", "/design/target_power")
    bad = [s for s in d.measures if s not in MEASURES]
    if bad:
        raise ConfigError(f"unknown measures {bad}", "/design/measures")
    if e.n_sp < 2:
        raise ConfigError("n_sp must be at least 2", "/estimator/n_sp")
    if not 2 <= e.b_min <= e.b_max:
        raise ConfigError("need 2 <= b_min <= b_max", "/estimator/b_min")
    if not (e.eps_tau > 0 and e.eps_xi > 0):
        raise ConfigError("eps_tau and eps_xi must be positive", "/estimator/eps_tau")
    if not 0 <= e.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", "/estimator/seed")
    if e.workers < 1:
        raise ConfigError("workers must be >= 1", "/estimator/workers")

    signs = np.array([1.0 if ep.higher_is_better else -1.0 for ep in spec.endpoints])
    thresholds = np.array([float(ep.threshold) for ep in spec.endpoints])
    return Scenario(spec, tuple(controls), tuple(treats), is_tte, thresholds, signs, latent, chol)


def equicorrelation(q, rho):
    r = np.full((q, q), float(rho))
    np.fill_diagonal(r, 1.0)
    return r


def offdiag_to_matrix(values: Sequence[float], q: int):
    """Build a symmetric matrix from upper-triangle entries (12, 13, ..., 23, ...)."""
    r = np.eye(q)
    iu = np.triu_indices(q, 1)
    if len(values) != len(iu[0]):
        raise ConfigError(f"need {len(iu[0])} off-diagonal values for Q={q}")
    r[iu] = values
    r.T[iu] = values
    return r


def upper_offdiag(matrix):
    m = np.asarray(matrix)
    return m[np.triu_indices(m.shape[0], 1)]
