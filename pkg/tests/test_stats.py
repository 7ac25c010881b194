import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairmiss.stats import (
    FactorialLayout,
    StatsError,
    anova_three_way,
    betainc,
    f_cdf,
    f_sf,
    levene_test,
    norm_ppf,
    oneway_anova,
    shapiro_wilk,
    welch_anova,
    welch_t_test,
)
from fairmiss.stats.anova import EFFECT_ORDER

from conftest import ROOT

# Reference values produced once by scripts/make_stats_oracle.py
ORACLE = json.loads((ROOT / "tests" / "data" / "stats_oracle.json").read_text())

TOL = {"f_cdf": 1e-10, "welch": 1e-6, "levene": 1e-6, "shapiro": 1e-4, "anova": 1e-6}


def close(a, b, tol):
    """Absolute tolerance for values of order one, relative above that."""
    return abs(a - b) <= tol * max(1.0, abs(b))


def layout(arr):
    arr = np.asarray(arr, dtype=float)
    names = tuple(tuple(f"{f}{i}" for i in range(k)) for f, k in zip("abc", arr.shape[:3]))
    return FactorialLayout(("a", "b", "c"), names, arr)


class TestOracle:
    @pytest.mark.parametrize("case", ORACLE["f_cdf"], ids=lambda c: f"F({c['x']};{c['d1']},{c['d2']})")
    def test_f_cdf(self, case):
        assert abs(f_cdf(case["x"], case["d1"], case["d2"]) - case["cdf"]) <= TOL["f_cdf"]

    @pytest.mark.parametrize("i", range(len(ORACLE["welch"])))
    def test_welch(self, i):
        case = ORACLE["welch"][i]
        r = welch_anova(case["groups"])
        assert close(r.statistic, case["F"], TOL["welch"])
        assert close(r.df2, case["df2"], TOL["welch"])
        assert r.df1 == case["df1"]
        assert close(r.pvalue, case["p"], TOL["welch"])

    @pytest.mark.parametrize("i", range(len(ORACLE["levene"])))
    def test_levene(self, i):
        case = ORACLE["levene"][i]
        w, p = levene_test(case["groups"])
        assert close(w, case["W"], TOL["levene"]) and close(p, case["p"], TOL["levene"])

    @pytest.mark.parametrize("i", range(len(ORACLE["shapiro"])))
    def test_shapiro(self, i):
        case = ORACLE["shapiro"][i]
        w, p = shapiro_wilk(case["x"])
        assert abs(w - case["W"]) <= TOL["shapiro"]
        assert abs(p - case["p"]) <= TOL["shapiro"]

    @pytest.mark.parametrize("i", range(len(ORACLE["anova"])))
    def test_anova(self, i):
        case = ORACLE["anova"][i]
        tab = anova_three_way(layout(case["responses"]))
        for k, e in enumerate(EFFECT_ORDER):
            row = tab[e]
            assert row.df == case["df"][k]
            assert close(row.ss, case["ss"][k], TOL["anova"]), e
            assert close(row.f, case["F"][k], TOL["anova"]), e
            assert close(row.p, case["p"][k], TOL["anova"]), e
        assert close(tab.residual_ss, case["residual_ss"], TOL["anova"])
        assert tab.residual_df == case["residual_df"]


class TestDistributions:
    def test_boundaries(self):
        assert f_cdf(0.0, 3, 5) == 0.0
        assert f_cdf(1e12, 3, 5) == pytest.approx(1.0, abs=1e-10)
        assert f_sf(0.0, 3, 5) == 1.0

    @pytest.mark.parametrize("d", [1, 2, 5, 17, 300])
    def test_equal_df_median(self, d):
        assert f_cdf(1.0, d, d) == pytest.approx(0.5, abs=1e-12)

    def test_invalid_df(self):
        with pytest.raises(ValueError):
            f_cdf(1.0, 0, 3)
        with pytest.raises(ValueError):
            f_cdf(1.0, 2, -1)

    @given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0, 1))
    def test_betainc_reflection(self, a, b, x):
        assert betainc(a, b, x) + betainc(b, a, 1 - x) == pytest.approx(1.0, abs=1e-10)

    @given(st.floats(0.5, 200), st.floats(0.5, 200),
           st.lists(st.floats(0, 50), min_size=2, max_size=10))
    def test_monotone_and_bounded(self, d1, d2, xs):
        vals = [f_cdf(x, d1, d2) for x in sorted(xs)]
        assert all(0 <= v <= 1 for v in vals)
        assert all(u <= v + 1e-15 for u, v in zip(vals, vals[1:]))

    @given(st.floats(0.01, 20), st.floats(0.5, 100), st.floats(0.5, 100))
    def test_reciprocal_symmetry(self, x, d1, d2):
        # X ~ F(d1, d2) implies 1/X ~ F(d2, d1)
        assert f_cdf(x, d1, d2) == pytest.approx(f_sf(1 / x, d2, d1), abs=1e-10)

    def test_norm_ppf(self):
        assert norm_ppf(0.975) == pytest.approx(1.959963984540054, abs=1e-9)


class TestWelch:
    def test_shifted_copies(self):
        g = [0.1, 0.5, 0.2, 0.9]
        r = welch_anova([g, g, g])
        assert r.statistic == 0.0 and r.pvalue == 1.0

    def test_two_groups_equal_t_squared(self):
        r = np.random.default_rng(0)
        x, y = r.normal(0, 1, 12), r.normal(0.8, 2.5, 20)
        w = welch_anova([x, y])
        t = welch_t_test(x, y)
        assert w.statistic == pytest.approx(t.statistic**2, rel=1e-12)
        assert w.pvalue == pytest.approx(t.pvalue, abs=1e-12)
        assert w.df2 == pytest.approx(t.df2, rel=1e-12)

    def test_matches_classical_under_equal_variances(self):
        # Equal sizes and variances leave only Welch's small-sample correction, which
        # shrinks like 1/n; at n = 200 it stays inside 1e-3 across random mean shifts.
        for seed in range(50):
            r = np.random.default_rng(seed)
            base = r.normal(size=200)
            base = (base - base.mean()) / base.std()
            groups = [base + shift for shift in r.normal(0, 0.3, 3)]
            assert abs(welch_anova(groups).pvalue - oneway_anova(groups).pvalue) <= 1e-3

    def test_zero_variance_group(self):
        with pytest.raises(StatsError):
            welch_anova([[1.0, 1.0, 1.0], [1.0, 2.0, 3.0]])

    def test_too_few(self):
        with pytest.raises(StatsError):
            welch_anova([[1.0, 2.0]])
        with pytest.raises(StatsError):
            welch_anova([[1.0], [1.0, 2.0]])


class TestLevene:
    def test_identical_groups(self):
        g = [1.0, 4.0, 2.0, 8.0]
        w, p = levene_test([g, g])
        assert w == 0.0 and p == 1.0

    def test_power(self):
        r = np.random.default_rng(2)
        assert levene_test([r.normal(0, 1, 100), r.normal(0, 5, 100)]).pvalue < 0.001

    def test_equal_variances_mostly_pass(self):
        ok = sum(levene_test([np.random.default_rng(s).normal(size=50) for s in (k, k + 1000)]).pvalue > 0.05
                 for k in range(40))
        assert ok >= 34


class TestShapiro:
    def test_calibration(self):
        ok = sum(shapiro_wilk(np.random.default_rng(s).normal(size=100)).pvalue > 0.01 for s in range(100))
        assert ok >= 95

    def test_power(self):
        ok = sum(shapiro_wilk(np.random.default_rng(s).exponential(size=100)).pvalue < 0.01 for s in range(100))
        assert ok >= 95

    def test_range(self):
        with pytest.raises(StatsError):
            shapiro_wilk([1.0, 2.0])
        with pytest.raises(StatsError):
            shapiro_wilk(np.arange(5001.0))
        with pytest.raises(StatsError):
            shapiro_wilk([3.0, 3.0, 3.0, 3.0])

    def test_three_points_exact(self):
        # n = 3 has a closed form: W = 1 for equally spaced points, p = 1
        w, p = shapiro_wilk([1.0, 2.0, 3.0])
        assert w == pytest.approx(1.0, abs=1e-12) and p == pytest.approx(1.0, abs=1e-9)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=80).filter(lambda v: np.ptp(v) > 1e-6))
    def test_bounds_and_affine_invariance(self, xs):
        w, p = shapiro_wilk(xs)
        assert 0 < w <= 1 + 1e-12 and 0 <= p <= 1
        w2, _ = shapiro_wilk(np.asarray(xs) * 3.0 + 7.0)
        assert w2 == pytest.approx(w, abs=1e-8)


class TestAnova:
    def test_constant_responses(self):
        tab = anova_three_way(layout(np.full((2, 2, 2, 3), 4.2)))
        assert all(tab[e].f == 0.0 and tab[e].p == 1.0 for e in EFFECT_ORDER)

    def test_zero_residual_variance(self):
        y = np.broadcast_to(np.arange(8.0).reshape(2, 2, 2, 1), (2, 2, 2, 3))
        with pytest.raises(StatsError):
            anova_three_way(layout(y))

    def test_identical_cells_give_null_effects(self):
        noise = np.random.default_rng(0).normal(size=(1, 1, 1, 4))
        tab = anova_three_way(layout(np.broadcast_to(noise, (2, 3, 2, 4))))
        for e in EFFECT_ORDER:
            assert tab[e].f == pytest.approx(0.0, abs=1e-10) and tab[e].p == pytest.approx(1.0, abs=1e-9)

    def test_pure_main_effect(self):
        r = np.random.default_rng(1)
        y = r.normal(0, 0.01, (3, 4, 4, 5)) + np.array([0.0, 1.0, 2.0])[:, None, None, None]
        tab = anova_three_way(layout(y))
        assert tab["A"].p < 1e-6
        for e in ("AB", "AC", "BC", "ABC"):
            assert tab[e].p > 0.1, e

    def test_degrees_of_freedom(self):
        tab = anova_three_way(layout(np.random.default_rng(2).normal(size=(3, 4, 4, 20))))
        assert [tab[e].df for e in EFFECT_ORDER] == [2, 3, 3, 6, 6, 9, 18]
        assert tab.residual_df == 48 * 19

    @given(st.integers(0, 10**6), st.floats(0.01, 100), st.floats(-100, 100))
    def test_ss_partition_and_affine_invariance(self, seed, c, shift):
        y = np.random.default_rng(seed).normal(size=(2, 3, 2, 3))
        a = anova_three_way(layout(y))
        total = sum(a[e].ss for e in EFFECT_ORDER) + a.residual_ss
        assert total == pytest.approx(a.total_ss, rel=1e-8)
        b = anova_three_way(layout(c * y + shift))
        for e in EFFECT_ORDER:
            assert b[e].f == pytest.approx(a[e].f, rel=1e-7, abs=1e-9)
            assert b[e].p == pytest.approx(a[e].p, rel=1e-7, abs=1e-9)
            assert 0 <= a[e].p <= 1

    def test_single_replicate_rejected(self):
        with pytest.raises(StatsError):
            anova_three_way(layout(np.zeros((2, 2, 2, 1))))

    def test_from_cells_rejects_unbalanced(self):
        lv = (("x", "y"), ("u",), ("v",))
        with pytest.raises(StatsError):
            FactorialLayout.from_cells("abc", lv, {("x", "u", "v"): [1, 2], ("y", "u", "v"): [1]})
        with pytest.raises(StatsError):
            FactorialLayout.from_cells("abc", lv, {("x", "u", "v"): [1, 2]})

    def test_collapsed_groups(self):
        y = np.arange(2 * 3 * 2 * 2, dtype=float).reshape(2, 3, 2, 2)
        groups = layout(y).collapsed(1)
        assert len(groups) == 3 and all(g.size == 8 for g in groups)
        assert sorted(np.concatenate(groups).tolist()) == y.ravel().tolist()


def test_p_value_ranges_are_finite():
    r = np.random.default_rng(5)
    for _ in range(20):
        gs = [r.normal(m, s, 15) for m, s in ((0, 1), (0.3, 2), (1, 0.5))]
        for res in (welch_anova(gs), levene_test(gs), oneway_anova(gs)):
            assert 0 <= res.pvalue <= 1 and math.isfinite(res.statistic)
