"""Power and sample size for hierarchical endpoints analyzed with win statistics."""

from ._accel import get_backend, set_backend
from .calibration import calibrate, harrell_c, implied_concordance, kendall_tau_b
from .comparison import (
    PairOutcome,
    SubjectRecord,
    Verdict,
    WinStats,
    compare_level,
    compare_pair,
    decompose_by_level,
    win_stats,
)
from .config import load_scenario, preset_path, scenario_from_dict
from .errors import ConfigError, DomainError, NumericError, WinPlanError
from .forss import run_forss
from .measures import (
    measure_quantities,
    measure_value,
    power_closed_form,
    power_exact,
    sample_size_closed_form,
    sample_size_exact,
    sensitivity_power_triplet,
)
from .scenario import (
    Bernoulli,
    Categorical,
    DataType,
    EndpointSpec,
    Exponential,
    Normal,
    Poisson,
    ScenarioSpec,
    inverse_cdf,
    validate_scenario,
)
from .simulate import empirical_rates
from .ustat import estimate_plugins, exact_variance, large_sample_variance

__version__ = "0.1.0"
