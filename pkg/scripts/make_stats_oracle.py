"""Freeze reference values for the statistics tests.

Computed once with scipy / statsmodels (independent implementations) and
written to tests/data/stats_oracle.json; the package itself never imports
either library. Rerunning is only needed when a fixture is added.

    python scripts/make_stats_oracle.py tests/data/stats_oracle.json
"""

import itertools
import json
import sys

import numpy as np
import pandas as pd
import scipy
import statsmodels
import statsmodels.formula.api as smf
from scipy import stats
from statsmodels.stats.anova import anova_lm
from statsmodels.stats.oneway import anova_oneway


def rounded(a, nd=3):
    return [round(float(x), nd) for x in a]


def f_cdf_cases():
    pts = [(3.0, 2, 10), (0.5, 1, 1), (1.7, 5, 20), (10.0, 3, 7), (0.01, 4, 4), (2.5, 30, 100),
           (1.0, 7, 7), (4.2, 1, 200), (0.3, 12, 3), (7.5, 2, 2), (1.05, 1000, 1000), (0.8, 0.5, 3.5)]
    return [{"x": x, "d1": a, "d2": b, "cdf": float(stats.f.cdf(x, a, b))} for x, a, b in pts]


def welch_cases(rng):
    out = []
    for sizes, sds, means in [((8, 12, 10), (1.0, 3.0, 0.5), (0.0, 1.0, 0.4)),
                              ((20, 20), (1.0, 2.0), (0.0, 0.8)),
                              ((5, 9, 7, 15), (0.3, 1.0, 2.0, 4.0), (1.0, 1.2, 0.5, 2.0))]:
        groups = [rounded(rng.normal(m, s, n)) for n, s, m in zip(sizes, sds, means)]
        res = anova_oneway([np.array(g) for g in groups], use_var="unequal", welch_correction=True)
        out.append({"groups": groups, "F": float(res.statistic), "df1": float(res.df[0]),
                    "df2": float(res.df[1]), "p": float(res.pvalue)})
    return out


def levene_cases(rng):
    out = []
    for sizes, sds in [((10, 10, 10), (1.0, 1.5, 3.0)), ((6, 14), (2.0, 0.5)), ((30, 25, 40, 12), (1, 1, 1, 1))]:
        groups = [rounded(rng.normal(0, s, n)) for n, s in zip(sizes, sds)]
        w, p = stats.levene(*groups, center="median")
        out.append({"groups": groups, "W": float(w), "p": float(p)})
    return out


def shapiro_cases(rng):
    samples = [rounded(rng.normal(5, 2, 20)), rounded(rng.exponential(1.0, 20)),
               rounded(rng.normal(0, 1, 50)), rounded(rng.uniform(0, 1, 11)),
               rounded(rng.normal(0, 1, 3)), rounded(rng.gamma(2.0, 1.0, 200))]
    return [{"x": s, "W": float(stats.shapiro(s)[0]), "p": float(stats.shapiro(s)[1])} for s in samples]


def anova_cases(rng):
    out = []
    for shape, effects in [((2, 2, 2, 3), (1.0, 0.0, 0.5)), ((3, 4, 4, 3), (0.3, 0.6, 0.0)),
                           ((2, 3, 2, 4), (0.0, 0.0, 0.0))]:
        a, b, c, n = shape
        y = np.zeros(shape)
        for i, j, k in itertools.product(range(a), range(b), range(c)):
            y[i, j, k] = effects[0] * i + effects[1] * j + effects[2] * k + 0.2 * i * j + rng.normal(0, 1, n)
        y = np.round(y, 3)
        rows = [{"fa": f"a{i}", "fb": f"b{j}", "fc": f"c{k}", "y": y[i, j, k, r]}
                for i, j, k, r in itertools.product(range(a), range(b), range(c), range(n))]
        fit = smf.ols("y ~ C(fa) * C(fb) * C(fc)", data=pd.DataFrame(rows)).fit()
        tab = anova_lm(fit, typ=2)
        names = ["C(fa)", "C(fb)", "C(fc)", "C(fa):C(fb)", "C(fa):C(fc)", "C(fb):C(fc)", "C(fa):C(fb):C(fc)"]
        out.append({
            "responses": y.tolist(),
            "ss": [float(tab.loc[k, "sum_sq"]) for k in names],
            "df": [int(tab.loc[k, "df"]) for k in names],
            "F": [float(tab.loc[k, "F"]) for k in names],
            "p": [float(tab.loc[k, "PR(>F)"]) for k in names],
            "residual_ss": float(tab.loc["Residual", "sum_sq"]),
            "residual_df": int(tab.loc["Residual", "df"]),
        })
    return out


def main(path):
    rng = np.random.default_rng(20240501)
    data = {
        "_source": f"scipy {scipy.__version__}, statsmodels {statsmodels.__version__}",
        "f_cdf": f_cdf_cases(),
        "welch": welch_cases(rng),
        "levene": levene_cases(rng),
        "shapiro": shapiro_cases(rng),
        "anova": anova_cases(rng),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main(sys.argv[1])
