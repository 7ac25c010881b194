import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairmiss.datasets import (
    SYNTHETIC_SCHEMA,
    DatasetSchema,
    load_dataset,
    outcome_labels,
    schema_for,
    synth_classification,
    validate_dataset,
)
from fairmiss.table import OUTCOME, SENSITIVE, TableError, one_hot_encode

from conftest import DATA, german_path


class TestSchemas:
    def test_german(self):
        s = schema_for("german")
        assert len(s.predictors) == 20
        assert set(s.sensitive_variants) == {"sex", "age"}
        assert s.outcome == "credit_risk" and s.positive_outcome == "good"
        assert s.amputed_variables == ("checking_status", "credit_history")

    def test_compas_has_eleven_predictors(self):
        assert len(schema_for("compas").predictors) == 11

    def test_adult(self):
        s = schema_for("adult")
        assert s.positive_outcome == ">50K"
        assert s.expected_rows == 48842 and s.expected_complete_rows == 45222
        assert s.amputed_variables == ("capital_gain",)

    def test_pure(self):
        assert schema_for("german") is schema_for("german")
        assert schema_for("synthetic") == SYNTHETIC_SCHEMA

    def test_unknown(self):
        with pytest.raises(KeyError):
            schema_for("iris")

    @pytest.mark.parametrize("ds", ["german", "adult", "compas"])
    def test_invariants(self, ds):
        s = schema_for(ds)
        roles = {c.name: c.role for c in s.columns}
        assert 1 <= len(s.amputed_variables) <= 2
        for v in s.amputed_variables:
            assert roles[v] not in (SENSITIVE, OUTCOME)
        assert roles[s.mar_dependency] == SENSITIVE
        # the positive outcome is the last declared level, so it maps to 1
        assert s.positive_outcome == next(c for c in s.columns if c.role == OUTCOME).levels[-1]

    def test_rejects_too_many_amputed(self):
        d = schema_for("synthetic")
        with pytest.raises(ValueError):
            DatasetSchema(d.id, d.columns, d.sensitive_variants, {}, "1", ("x1", "x2", "c"), "s")
        with pytest.raises(ValueError):
            DatasetSchema(d.id, d.columns, d.sensitive_variants, {}, "1", ("s",), "s")


class TestRealFiles:
    def test_german_load(self):
        t = load_dataset(schema_for("german"), german_path())
        assert t.n_rows == 1000
        assert set(np.unique(t["sex"])) == {0.0, 1.0}
        dm = one_hot_encode(t, {SENSITIVE, OUTCOME})
        assert not {"sex", "age", "credit_risk"} & set(dm.source)

    def test_german_clean(self):
        rep = validate_dataset(german_path(), schema_for("german"))
        assert rep.ok and rep.n_violations == 0

    def test_adult_raw_incomplete_rows(self):
        p = DATA / "adult.csv"
        if not p.exists():
            pytest.skip("data/adult.csv not present")
        rep = validate_dataset(p, schema_for("adult"))
        assert rep.n_rows == 48842
        assert rep.incomplete_rows == 3620
        assert load_dataset(schema_for("adult"), p).n_rows == 45222

    def test_compas_rows(self):
        p = DATA / "compas.csv"
        if not p.exists():
            pytest.skip("data/compas.csv not present")
        t = load_dataset(schema_for("compas"), p)
        assert t.n_rows == 7214

    def test_level_violation(self, tmp_path):
        lines = german_path().read_text().splitlines()
        header = lines[0].split(",")
        row = lines[1].split(",")
        row[header.index("credit_history")] = "A39"
        p = tmp_path / "bad.csv"
        p.write_text("\n".join([lines[0], ",".join(row)] + lines[2:5]) + "\n")
        rep = validate_dataset(p, schema_for("german"))
        assert len(rep.level_violations) == 1
        assert rep.level_violations[0][1:] == ("credit_history", "A39")
        with pytest.raises(TableError):
            load_dataset(schema_for("german"), p)


class TestSynthetic:
    def test_equal_rates_exact(self, rng):
        t = synth_classification(1000, 0.4, 0.4, 0.3, rng)
        y, s = outcome_labels(t, SYNTHETIC_SCHEMA), t["s"]
        assert y[s == 1].sum() == 120 and y[s == 0].sum() == 280

    def test_all_privileged(self, rng):
        t = synth_classification(50, 0.5, 0.5, 1.0, rng)
        assert (t["s"] == 1).all()

    def test_concentration(self):
        for seed in range(100):
            t = synth_classification(1000, 0.6, 0.3, 0.5, np.random.default_rng(seed))
            y, s = outcome_labels(t, SYNTHETIC_SCHEMA), t["s"]
            assert abs(y[s == 1].mean() - 0.6) <= 0.05
            assert abs(y[s == 0].mean() - 0.3) <= 0.05

    def test_deterministic(self):
        a = synth_classification(100, 0.5, 0.2, 0.4, np.random.default_rng(9))
        b = synth_classification(100, 0.5, 0.2, 0.4, np.random.default_rng(9))
        assert a.equals(b)

    @given(st.integers(1, 300), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(0, 10**6))
    def test_exact_allocation(self, n, b1, b0, g, seed):
        t = synth_classification(n, b1, b0, g, np.random.default_rng(seed))
        s = t["s"]
        y = outcome_labels(t, SYNTHETIC_SCHEMA)
        n1 = int(round(n * g))
        assert int(s.sum()) == n1
        assert int(y[s == 1].sum()) == int(round(n1 * b1))
        assert int(y[s == 0].sum()) == int(round((n - n1) * b0))
        assert set(np.unique(t["c"])) <= {0, 1, 2}

    def test_bad_probability(self, rng):
        with pytest.raises(ValueError):
            synth_classification(10, 1.2, 0.5, 0.5, rng)
