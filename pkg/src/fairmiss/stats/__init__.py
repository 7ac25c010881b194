from .anova import AnovaTable, EffectRow, FactorialLayout, anova_three_way
from .distributions import betainc, f_cdf, f_sf, norm_cdf, norm_ppf
from .tests import (
    StatsError,
    TestResult,
    levene_test,
    oneway_anova,
    shapiro_wilk,
    welch_anova,
    welch_t_test,
)

__all__ = [
    "AnovaTable",
    "EffectRow",
    "FactorialLayout",
    "StatsError",
    "TestResult",
    "anova_three_way",
    "betainc",
    "f_cdf",
    "f_sf",
    "levene_test",
    "norm_cdf",
    "norm_ppf",
    "oneway_anova",
    "shapiro_wilk",
    "welch_anova",
    "welch_t_test",
]
