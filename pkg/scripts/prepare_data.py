"""Convert the raw UCI / ProPublica files into the headered CSVs the loaders expect.

Usage::

    python scripts/prepare_data.py RAW_DIR OUT_DIR

``RAW_DIR`` must contain ``german.data``, ``adult.data``, ``adult.test`` and
``compas-scores-two-years.csv`` (searched recursively). Codes in the German
file are kept as-is except the personal-status attribute, which is reduced
to ``male``/``female``.
"""

import csv
import sys
from pathlib import Path

GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "sex", "other_debtors",
    "residence_since", "property", "age", "installment_plans", "housing",
    "existing_credits", "job", "num_dependents", "telephone", "foreign_worker",
    "credit_risk",
]
GERMAN_SEX = {"A91": "male", "A92": "female", "A93": "male", "A94": "male", "A95": "female"}
GERMAN_RISK = {"1": "good", "2": "bad"}

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]
ADULT_KEEP = [c for c in ADULT_COLUMNS if c != "fnlwgt"]

COMPAS_KEEP = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "decile_score",
    "juv_misd_count", "juv_other_count", "priors_count", "c_charge_degree",
    "score_text", "two_year_recid",
]


def _find(raw: Path, name: str) -> Path:
    hits = sorted(raw.rglob(name))
    if not hits:
        raise SystemExit(f"{name} not found under {raw}")
    return hits[0]


def prepare_german(raw: Path, out: Path) -> int:
    rows = []
    with open(_find(raw, "german.data")) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            rec = dict(zip(GERMAN_COLUMNS, parts))
            rec["sex"] = GERMAN_SEX[rec["sex"]]
            rec["credit_risk"] = GERMAN_RISK[rec["credit_risk"]]
            rows.append(rec)
    _write(out / "german.csv", GERMAN_COLUMNS, rows)
    return len(rows)


def prepare_adult(raw: Path, out: Path) -> int:
    rows = []
    # train and test halves are concatenated in file order
    for name in ("adult.data", "adult.test"):
        with open(_find(raw, name)) as fh:
            for line in fh:
                parts = [p.strip() for p in line.strip().split(",")]
                if len(parts) != len(ADULT_COLUMNS):
                    continue
                rec = dict(zip(ADULT_COLUMNS, parts))
                rec["income"] = rec["income"].rstrip(".")
                rows.append({k: rec[k] for k in ADULT_KEEP})
    _write(out / "adult.csv", ADULT_KEEP, rows)
    return len(rows)


def prepare_compas(raw: Path, out: Path) -> int:
    with open(_find(raw, "compas-scores-two-years.csv"), newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [{k: r[k] for k in COMPAS_KEEP} for r in reader]
    _write(out / "compas.csv", COMPAS_KEEP, rows)
    return len(rows)


def _write(path: Path, header: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def main(argv: list[str]) -> None:
    if len(argv) != 2:
        raise SystemExit(__doc__)
    raw, out = Path(argv[0]), Path(argv[1])
    out.mkdir(parents=True, exist_ok=True)
    print("german", prepare_german(raw, out))
    print("adult", prepare_adult(raw, out))
    print("compas", prepare_compas(raw, out))


if __name__ == "__main__":
    main(sys.argv[1:])
