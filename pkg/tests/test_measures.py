import math

import numpy as np
import pytest

from winplan.errors import DegenerateMeasure, DomainError, ZeroEffect
from winplan.measures import (
    MeasureQuantities,
    measure_quantities,
    measure_value,
    measure_values,
    power_closed_form,
    power_exact,
    sample_size_closed_form,
    sample_size_exact,
    sensitivity_power_triplet,
    variance_quantity,
    yu_ganju_variance,
)
from winplan.ustat import PluginEstimates


def est(tw, tl, scale=1.0):
    xi10 = scale * np.array([[0.03, -0.01], [-0.01, 0.025]])
    xi01 = scale * np.array([[0.02, -0.012], [-0.012, 0.03]])
    xi11 = np.diag([tw, tl]) - np.outer([tw, tl], [tw, tl])
    return PluginEstimates(tw, tl, xi10, xi01, xi11)


class TestValues:
    def test_reference_row(self):
        e = PluginEstimates(0.5241, 0.3844, *(np.zeros((2, 2)),) * 3)
        v = measure_values(e)
        assert v.wr == pytest.approx(1.363, abs=5e-4)
        assert v.nb == pytest.approx(0.140, abs=5e-4)
        assert v.wo == pytest.approx(1.325, abs=5e-4)
        assert v.door == pytest.approx(0.570, abs=5e-4)

    def test_null(self):
        v = measure_values(est(0.4, 0.4))
        assert (v.wr, v.nb, v.wo, v.door) == (1.0, 0.0, 1.0, 0.5)

    def test_no_ties(self):
        v = measure_values(est(0.5346, 0.4654))
        assert v.wr == pytest.approx(1.149, abs=5e-4)
        assert v.wo == pytest.approx(v.wr)

    def test_degenerate_wr(self):
        with pytest.raises(DegenerateMeasure):
            measure_value("WR", est(0.5, 0.0))


class TestVarianceQuantity:
    def test_door_is_quarter_nb(self):
        e = est(0.5, 0.35)
        for r in (0.5, 1.0, 2.0):
            assert variance_quantity("DOOR", e, r) == variance_quantity("NB", e, r) / 4

    def test_zero_xi(self):
        e = est(0.5, 0.35, scale=0.0)
        for measure in ("WR", "NB", "WO", "DOOR"):
            assert variance_quantity(measure, e, 1.0) == 0.0

    def test_wo_from_nb(self):
        e = est(0.5, 0.35)
        nb = variance_quantity("NB", e, 1.0)
        assert variance_quantity("WO", e, 1.0) == pytest.approx(4 * nb / (1 - 0.15**2) ** 2)


class TestClosedForm:
    def test_null_effect(self):
        q = MeasureQuantities("NB", 0.0, 1.0, 1.0)
        assert power_closed_form(q, 100, 0.05) == pytest.approx(0.025, abs=1e-9)

    def test_arithmetic(self):
        q = MeasureQuantities("NB", 0.2, 1.0, 1.0)
        assert power_closed_form(q, 100, 0.05) == pytest.approx(0.5160, abs=1e-4)

    def test_sample_size_arithmetic(self):
        q = MeasureQuantities("NB", 0.3, 1.0, 1.0)
        ss = sample_size_closed_form(q, 0.05, 0.85)
        assert ss.m == 100 and ss.n == 100 and ss.total == 200
        assert ss.raw == pytest.approx((1.959964 + 1.036433) ** 2 / 0.09, rel=1e-6)

    def test_allocation_ratio(self):
        q = MeasureQuantities("NB", 0.3, 1.0, 1.0, r=2.0)
        ss = sample_size_closed_form(q, 0.05, 0.85)
        assert ss.n == 2 * ss.m

    def test_nb_and_door_agree(self):
        e0, ea = est(0.45, 0.45), est(0.52, 0.38)
        nb = sample_size_closed_form(measure_quantities("NB", e0, ea, 1.0), 0.05, 0.85)
        door = sample_size_closed_form(measure_quantities("DOOR", e0, ea, 1.0), 0.05, 0.85)
        assert nb == door

    def test_doubled_effect_quarters_m(self):
        q1 = MeasureQuantities("NB", 0.1, 1.0, 1.0)
        q2 = MeasureQuantities("NB", 0.2, 1.0, 1.0)
        r = sample_size_closed_form(q1, 0.05, 0.85).raw / sample_size_closed_form(q2, 0.05, 0.85).raw
        assert r == pytest.approx(4.0)

    def test_errors(self):
        with pytest.raises(ZeroEffect):
            sample_size_closed_form(MeasureQuantities("NB", 0.0, 1.0, 1.0), 0.05, 0.85)
        with pytest.raises(DomainError):
            sample_size_closed_form(MeasureQuantities("NB", 0.1, 1.0, 1.0), 0.05, 0.4)
        with pytest.raises(DegenerateMeasure):
            power_closed_form(MeasureQuantities("NB", 0.1, 0.0, 1.0), 10, 0.05)

    def test_both_tails(self):
        q = MeasureQuantities("NB", 0.0, 1.0, 1.0)
        assert power_closed_form(q, 100, 0.05, both_tails=True) == pytest.approx(0.05, abs=1e-9)


class TestExact:
    def test_converges_to_closed_form(self):
        e0, ea = est(0.45, 0.45), est(0.47, 0.43)
        for measure in ("WR", "NB", "WO", "DOOR"):
            q = measure_quantities(measure, e0, ea, 1.0)
            m = 100_000
            gap = abs(power_exact(e0, ea, measure, m, m, 0.05) - power_closed_form(q, m, 0.05))
            assert gap < 1e-4

    def test_null_effect(self):
        e = est(0.45, 0.45)
        assert power_exact(e, e, "NB", 200, 200, 0.05) == pytest.approx(0.025, abs=1e-9)

    def test_sample_size_is_minimal(self):
        e0, ea = est(0.45, 0.45), est(0.52, 0.38)
        for measure in ("WR", "NB"):
            ss = sample_size_exact(e0, ea, measure, 0.05, 0.85, 1.0)
            assert power_exact(e0, ea, measure, ss.m, ss.n, 0.05) >= 0.85
            assert power_exact(e0, ea, measure, ss.m - 1, ss.m - 1, 0.05) < 0.85
            closed = sample_size_closed_form(measure_quantities(measure, e0, ea, 1.0), 0.05, 0.85)
            # the extra xi^11 / (mn) term only adds variance at this size
            assert closed.m <= ss.m <= 1.1 * closed.m


class TestTiesOnly:
    def test_arithmetic(self):
        assert yu_ganju_variance("WR", 0.0, 1.0) == pytest.approx(8 / 3)
        assert yu_ganju_variance("NB", 0.0, 1.0) == pytest.approx(2 / 3)

    def test_other_measures_rejected(self):
        with pytest.raises(DomainError):
            yu_ganju_variance("WO", 0.1, 1.0)

    def test_equal_variances_give_equal_powers(self):
        e = est(0.5, 0.35)
        # same xi blocks and taus under both hypotheses
        t = sensitivity_power_triplet(e, e, "WR", 200, 0.05)
        assert t.p_null == t.p_alt
        assert t.a_ties == pytest.approx(yu_ganju_variance("WR", e.tau_tie, 1.0))

    def test_wo_has_no_tie_power(self):
        t = sensitivity_power_triplet(est(0.45, 0.45), est(0.5, 0.35), "WO", 200, 0.05)
        assert t.p_ties is None


@pytest.mark.parametrize("measure", ["WR", "NB", "WO", "DOOR"])
def test_power_monotone(measure):
    e0 = est(0.45, 0.45)
    grid = [est(0.45 + d, 0.45 - d) for d in (0.03, 0.05, 0.08)]
    for m in (100, 200, 400):
        row = [power_closed_form(measure_quantities(measure, e0, ea, 1.0), m, 0.05) for ea in grid]
        assert row == sorted(row)
    for ea in grid:
        q = measure_quantities(measure, e0, ea, 1.0)
        col = [power_closed_form(q, m, 0.05) for m in (100, 200, 400)]
        assert col == sorted(col)
    assert math.isfinite(col[0])
