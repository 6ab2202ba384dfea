"""Gaussian-copula sampling of one arm, with administrative censoring."""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidDimension
from .rng import open_uniforms
from .scenario import Exponential, Normal, inverse_cdf  # noqa: F401  (re-exported)


@dataclass(frozen=True)
class ArmSample:
    """Observed values ``(n, Q)`` on the natural scale plus event flags.

    Time-to-event columns hold ``min(T, S)``; event flags are True on every
    other column.
    """

    values: np.ndarray
    events: np.ndarray
    arm: str = "treatment"
    hypothesis: str = "HA"

    def __len__(self):
        return self.values.shape[0]

    def oriented(self, signs):
        """Values rescaled so that larger is better on every level."""
        if np.all(signs > 0):
            return self.values
        return self.values * signs


def latent_normals(bitgen, size, chol):
    """``size`` rows of correlated standard normals; row i uses draws i*Q .. i*Q+Q-1."""
    q = chol.shape[0]
    z = special.ndtri(open_uniforms(bitgen, size * q)).reshape(size, q)
    if q == 1 or np.array_equal(chol, np.eye(q)):
        return z
    return z @ chol.T


def values_from_latent(marginal, z):
    if isinstance(marginal, Normal):
        return marginal.mean + marginal.sd * z
    u = special.ndtr(z)
    if isinstance(marginal, Exponential):
        with np.errstate(divide="ignore"):
            return -np.log1p(-u) / marginal.rate
    return marginal.ppf(u)


def sample_arm(size, marginals, chol, follow_up, bitgen, is_tte=None, arm="treatment",
               hypothesis="HA"):
    chol = np.asarray(chol, dtype=float)
    q = len(marginals)
    if chol.shape != (q, q):
        raise InvalidDimension(f"{q} marginals but a {chol.shape} Cholesky factor")
    if is_tte is None:
        is_tte = np.array([isinstance(mg, Exponential) for mg in marginals])
    z = latent_normals(bitgen, size, chol)
    values = np.empty((size, q))
    events = np.ones((size, q), dtype=bool)
    for k, marginal in enumerate(marginals):
        col = values_from_latent(marginal, z[:, k])
        if is_tte[k]:
            events[:, k] = col <= follow_up
            col = np.minimum(col, follow_up)
        values[:, k] = col
    return ArmSample(values, events, arm, hypothesis)


def sample_scenario_arm(scenario, size, bitgen, arm="treatment", hypothesis="HA", chol=None):
    """Draw one arm of ``scenario``; treatment under H0 uses the control marginals."""
    use_treatment = arm == "treatment" and hypothesis == "HA"
    marginals = scenario.treatment if use_treatment else scenario.control
    return sample_arm(size, marginals, scenario.chol if chol is None else chol,
                      scenario.follow_up, bitgen, scenario.is_tte, arm, hypothesis)
