"""Plug-in probabilities and U-statistic covariance components.

Row sums ``R_u[i] = sum_j phi_u(i, j)`` and column sums ``C_u[j]`` are all the
double and triple sums need, because a pair is never both a win and a loss:

    sum_{j1 != j2} phi_u(i, j1) phi_v(i, j2) = R_u[i] R_v[i] - [u == v] R_u[i]
"""

from dataclasses import dataclass, field

import numpy as np

from .comparison import count_pairs
from .errors import SampleTooSmall

_KINDS = ("w", "l")
_ORDERS = ("10", "01", "11")


@dataclass(frozen=True)
class PluginEstimates:
    """tau's plus 2x2 covariance blocks indexed ``[u, v]`` with 0 = win, 1 = loss."""

    tau_w: float
    tau_l: float
    xi10: np.ndarray
    xi01: np.ndarray
    xi11: np.ndarray
    clamped: tuple = field(default=(), compare=False)

    @property
    def tau_tie(self):
        return 1.0 - self.tau_w - self.tau_l

    @property
    def tau(self):
        return np.array([self.tau_w, self.tau_l])

    def xi(self, u, v, order):
        block = {"10": self.xi10, "01": self.xi01, "11": self.xi11}[order]
        return float(block[_KINDS.index(u), _KINDS.index(v)])

    def vector(self):
        """Flat layout (tau_w, tau_l, tau_tie, then ww/wl/ll for 10, 01, 11)."""
        out = [self.tau_w, self.tau_l, self.tau_tie]
        for block in (self.xi10, self.xi01, self.xi11):
            out += [block[0, 0], block[0, 1], block[1, 1]]
        return np.array(out)

    @classmethod
    def from_vector(cls, vec, clamped=()):
        blocks = []
        for k in range(3):
            ww, wl, ll = vec[3 + 3 * k: 6 + 3 * k]
            blocks.append(np.array([[ww, wl], [wl, ll]]))
        return cls(float(vec[0]), float(vec[1]), *blocks, clamped=clamped)

    def to_dict(self):
        d = {"tau_w": self.tau_w, "tau_l": self.tau_l, "tau_tie": self.tau_tie}
        for order in _ORDERS:
            for u, v in (("w", "w"), ("w", "l"), ("l", "l")):
                d[f"xi_{u}{v}_{order}"] = self.xi(u, v, order)
        return d


def plugins_from_counts(counts, clamp=True):
    """Estimates from aggregated PairCounts; m, n are taken from the sum arrays."""
    m = counts.row_w.shape[0]
    n = counts.col_w.shape[0]
    if m < 2 or n < 2:
        raise SampleTooSmall(f"need at least 2 subjects per arm, got m={m}, n={n}")
    rows = (counts.row_w, counts.row_l)
    cols = (counts.col_w, counts.col_l)
    s = [int(r.sum()) for r in rows]
    pairs = m * n
    tau = np.array([s[0] / pairs, s[1] / pairs])
    xi10 = np.empty((2, 2))
    xi01 = np.empty((2, 2))
    xi11 = np.empty((2, 2))
    for u in range(2):
        for v in range(u, 2):
            same = u == v
            rr = int(np.dot(rows[u], rows[v])) - (s[u] if same else 0)
            cc = int(np.dot(cols[u], cols[v])) - (s[u] if same else 0)
            prod = tau[u] * tau[v]
            xi10[u, v] = xi10[v, u] = rr / (pairs * (n - 1)) - prod
            xi01[u, v] = xi01[v, u] = cc / (pairs * (m - 1)) - prod
            xi11[u, v] = xi11[v, u] = (tau[u] if same else 0.0) - prod
    clamped = []
    if clamp:
        for name, block in (("10", xi10), ("01", xi01), ("11", xi11)):
            for k in range(2):
                if block[k, k] < 0:
                    clamped.append(f"xi_{_KINDS[k]}{_KINDS[k]}_{name}")
                    block[k, k] = 0.0
    return PluginEstimates(float(tau[0]), float(tau[1]), xi10, xi01, xi11, tuple(clamped))


def estimate_plugins(treat, ctrl, scenario, clamp=True):
    """Plug-in estimates from a treatment and a control sample (any sizes >= 2)."""
    return plugins_from_counts(count_pairs(treat, ctrl, scenario), clamp=clamp)


@dataclass(frozen=True)
class VarianceComponents:
    var_w: float
    var_l: float
    cov_wl: float
    mode: str
    m: int
    n_or_r: float

    def var_of(self, cw, cl):
        """Variance of ``cw * U_w + cl * U_l``."""
        return cw * cw * self.var_w + cl * cl * self.var_l + 2 * cw * cl * self.cov_wl


def exact_variance(est, m, n):
    a = (n - 1) / (m * n)
    b = (m - 1) / (m * n)
    c = 1.0 / (m * n)
    v = a * est.xi10 + b * est.xi01 + c * est.xi11
    return VarianceComponents(float(v[0, 0]), float(v[1, 1]), float(v[0, 1]), "exact", m, n)


def large_sample_variance(est, m, r):
    v = est.xi10 / m + est.xi01 / (r * m)
    return VarianceComponents(float(v[0, 0]), float(v[1, 1]), float(v[0, 1]), "large_sample", m, r)
