"""Deterministic synthetic stand-ins for the Adult, COMPAS, and German
tabular datasets.

Each generator emits a DataFrame whose columns match the standard CSV export
of the corresponding real dataset, so the shipped schema files work unchanged
on either. The label depends on a latent score with a planted direct effect
of the sensitive attribute, which gives models trained on these files the
group disparities the fairness tooling is meant to expose. Adult-like output
includes '?' markers so ingestion's row-dropping path is exercised; the
German-like table has exactly 1,000 clean rows.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

_EDU_NAMES = {
    1: "Preschool", 2: "1st-4th", 3: "5th-6th", 4: "7th-8th", 5: "9th",
    6: "10th", 7: "11th", 8: "12th", 9: "HS-grad", 10: "Some-college",
    11: "Assoc-voc", 12: "Assoc-acdm", 13: "Bachelors", 14: "Masters",
    15: "Prof-school", 16: "Doctorate",
}

_OCCUPATIONS = [          # ordered low to high earning propensity
    "Handlers-cleaners", "Other-service", "Farming-fishing",
    "Machine-op-inspct", "Transport-moving", "Adm-clerical", "Craft-repair",
    "Sales", "Prof-specialty", "Exec-managerial",
]
_OCC_EFFECT = np.linspace(-0.6, 0.9, len(_OCCUPATIONS))

_WORKCLASSES = ["Private", "Self-emp-not-inc", "Local-gov", "State-gov",
                "Self-emp-inc", "Federal-gov", "Without-pay"]
_MARITAL = ["Never-married", "Divorced", "Separated", "Widowed",
            "Married-civ-spouse"]


def _quantile_bins(latent, probs, labels):
    """Assign labels by population quantile so class masses match probs."""
    edges = np.quantile(latent, np.cumsum(probs)[:-1])
    return np.asarray(labels, dtype=object)[np.searchsorted(edges, latent)]


def synth_adult(n_rows: int = 6000, seed: int = 7) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    skill = rng.normal(0.0, 1.0, n_rows)
    race = rng.choice(
        ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"],
        size=n_rows, p=[0.72, 0.18, 0.05, 0.03, 0.02])
    sex = rng.choice(["Male", "Female"], size=n_rows, p=[0.67, 0.33])
    age = np.clip(np.round(rng.normal(38 + 3 * skill, 12)), 17, 85).astype(int)
    edu_num = np.clip(np.round(10 + 1.9 * skill + rng.normal(0, 1.6, n_rows)),
                      1, 16).astype(int)
    hours = np.clip(np.round(40 + 4.5 * skill + rng.normal(0, 9, n_rows)),
                    1, 99).astype(int)
    occupation = _quantile_bins(skill + rng.normal(0, 1.0, n_rows),
                                np.full(10, 0.1), _OCCUPATIONS)
    occ_effect = _OCC_EFFECT[[_OCCUPATIONS.index(o) for o in occupation]]
    workclass = rng.choice(_WORKCLASSES, size=n_rows,
                           p=[0.70, 0.08, 0.07, 0.05, 0.04, 0.03, 0.03])
    marital = _quantile_bins(
        -(0.035 * (age - 38) + 0.4 * skill + rng.normal(0, 1.0, n_rows)),
        [0.46, 0.33, 0.14, 0.04, 0.03],
        ["Married-civ-spouse", "Never-married", "Divorced", "Separated", "Widowed"])
    married = marital == "Married-civ-spouse"
    relationship = np.where(
        married, np.where(sex == "Male", "Husband", "Wife"),
        rng.choice(["Not-in-family", "Own-child", "Unmarried", "Other-relative"],
                   size=n_rows, p=[0.45, 0.28, 0.18, 0.09]))
    cap_gain = np.where(rng.random(n_rows) < 0.08,
                        np.exp(rng.normal(8 + 0.6 * skill, 1.0)), 0.0)
    cap_gain = np.clip(np.round(cap_gain), 0, 99999).astype(int)
    cap_loss = np.where(rng.random(n_rows) < 0.05,
                        np.exp(rng.normal(7.3, 0.6, n_rows)), 0.0)
    cap_loss = np.clip(np.round(cap_loss), 0, 4356).astype(int)
    fnlwgt = np.round(np.exp(rng.normal(11.7, 0.45, n_rows))).astype(int)
    country = rng.choice(["United-States", "Mexico", "Philippines", "Germany", "Canada"],
                         size=n_rows, p=[0.91, 0.04, 0.02, 0.015, 0.015])

    # most of the label signal rides on observed indicators (marriage,
    # occupation tier, capital gains, schooling) rather than the hidden skill
    latent = (1.0 * married + 1.3 * occ_effect + 1.3 * (cap_gain > 0)
              + 1.5 * (edu_num - 10) / 6.0 + 0.5 * (hours - 40) / 30.0
              + 0.45 * skill + 0.5 * (race == "White") + 0.25 * (sex == "Male")
              + rng.logistic(0, 0.55, n_rows))
    income = np.where(latent > np.quantile(latent, 0.77), ">50K", "<=50K")

    df = pd.DataFrame({
        "age": age, "workclass": workclass, "fnlwgt": fnlwgt,
        "education": [_EDU_NAMES[k] for k in edu_num], "education-num": edu_num,
        "marital-status": marital, "occupation": occupation,
        "relationship": relationship, "race": race, "sex": sex,
        "capital-gain": cap_gain, "capital-loss": cap_loss,
        "hours-per-week": hours, "native-country": country, "income": income,
    })
    # plant '?' markers like the real census export
    for col, rate in (("workclass", 0.02), ("occupation", 0.02),
                      ("native-country", 0.01)):
        df.loc[rng.random(n_rows) < rate, col] = "?"
    return df


def synth_compas(n_rows: int = 3000, seed: int = 7) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    risk = rng.normal(0.0, 1.0, n_rows)
    sex = rng.choice(["Male", "Female"], size=n_rows, p=[0.8, 0.2])
    race = rng.choice(
        ["African-American", "Caucasian", "Hispanic", "Other", "Asian",
         "Native American"],
        size=n_rows, p=[0.45, 0.35, 0.10, 0.06, 0.03, 0.01])
    age = np.clip(np.round(rng.normal(33, 11, n_rows)), 18, 75).astype(int)
    age_cat = np.select([age < 25, age > 45],
                        ["Less than 25", "Greater than 45"], "25 - 45")
    young = age < 25
    juv_fel = rng.poisson(0.06 + 0.12 * young)
    juv_misd = rng.poisson(0.09 + 0.15 * young)
    juv_other = rng.poisson(0.08, n_rows)
    priors = rng.poisson(np.exp(np.clip(0.7 + 0.6 * risk - 0.01 * (age - 33),
                                        None, 3.0)))
    degree = rng.choice(["F", "M"], size=n_rows, p=[0.65, 0.35])

    latent = (0.9 * risk + 0.28 * np.log1p(priors) - 0.025 * (age - 33)
              + 0.15 * (juv_fel + juv_misd + juv_other)
              + 0.35 * (race == "African-American")
              + rng.logistic(0, 0.8, n_rows))
    recid = (latent > np.quantile(latent, 0.55)).astype(int)

    return pd.DataFrame({
        "sex": sex, "age": age, "age_cat": age_cat, "race": race,
        "juv_fel_count": juv_fel, "juv_misd_count": juv_misd,
        "juv_other_count": juv_other, "priors_count": priors,
        "c_charge_degree": degree, "two_year_recid": recid,
    })


def synth_german(n_rows: int = 1000, seed: int = 7) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    z = rng.normal(0.0, 1.0, n_rows)
    age = np.clip(np.round(rng.normal(35, 11, n_rows)), 19, 75).astype(int)
    sex = rng.choice(["male", "female"], size=n_rows, p=[0.69, 0.31])
    job = rng.choice(["0", "1", "2", "3"], size=n_rows, p=[0.02, 0.20, 0.63, 0.15])
    housing = rng.choice(["own", "rent", "free"], size=n_rows, p=[0.71, 0.18, 0.11])
    saving = rng.choice(["little", "moderate", "quite rich", "rich"],
                        size=n_rows, p=[0.60, 0.21, 0.10, 0.09])
    checking = rng.choice(["little", "moderate", "rich"],
                          size=n_rows, p=[0.46, 0.36, 0.18])
    amount = np.clip(np.round(np.exp(rng.normal(7.9 + 0.3 * z, 0.55))),
                     250, 20000).astype(int)
    duration = np.clip(np.round(rng.normal(21 + 4 * z, 10)), 4, 72).astype(int)
    purpose = rng.choice(
        ["car", "radio/TV", "furniture/equipment", "business", "education",
         "repairs", "domestic appliances", "vacation/others"],
        size=n_rows, p=[0.33, 0.28, 0.18, 0.10, 0.05, 0.02, 0.02, 0.02])

    latent = (0.8 * z + 0.35 * (duration - 21) / 10 - 0.25 * (age - 35) / 11
              + 0.5 * (checking == "little")
              - 0.3 * np.isin(saving, ["quite rich", "rich"])
              + 0.35 * (sex == "female") + rng.logistic(0, 0.8, n_rows))
    risk = np.where(latent > np.quantile(latent, 0.70), "bad", "good")

    return pd.DataFrame({
        "Age": age, "Sex": sex, "Job": job, "Housing": housing,
        "Saving accounts": saving, "Checking account": checking,
        "Credit amount": amount, "Duration": duration, "Purpose": purpose,
        "Risk": risk,
    })


_GENERATORS = {"adult": synth_adult, "compas": synth_compas, "german": synth_german}


def generate(dataset_id: str, n_rows: int | None = None, seed: int = 7) -> pd.DataFrame:
    """Generate one of the named stand-in tables."""
    if dataset_id not in _GENERATORS:
        raise ValueError(f"unknown dataset id {dataset_id!r}, "
                         f"expected one of {sorted(_GENERATORS)}")
    gen = _GENERATORS[dataset_id]
    return gen(seed=seed) if n_rows is None else gen(n_rows=n_rows, seed=seed)


def write_csv(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False)
