import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from listingdedup.indicators.regress import (
    RankDeficiencyError,
    SeparationError,
    fit_logit,
    fit_ols_fe,
    odds_ratio,
)


def _frame(seed, n=200, g1=6, g2=4):
    rng = np.random.default_rng(seed)
    df = pd.DataFrame({"x1": rng.normal(size=n), "x2": rng.normal(size=n),
                       "f1": rng.integers(0, g1, n).astype(str), "f2": rng.integers(0, g2, n).astype(str)})
    df["y"] = (1.5 * df["x1"] - 0.7 * df["x2"] + df["f1"].astype(int) * 0.3 + df["f2"].astype(int) * -0.2
               + rng.normal(size=n))
    return df


def _dummy_ols(df, regs, fe):
    cols = [df[regs].to_numpy(float), np.ones((len(df), 1))]
    for f in fe:
        cols.append(pd.get_dummies(df[f], drop_first=True).to_numpy(float))
    X = np.hstack(cols)
    beta, *_ = np.linalg.lstsq(X, df["y"].to_numpy(float), rcond=None)
    resid = df["y"].to_numpy(float) - X @ beta
    dof = len(df) - X.shape[1]
    se = np.sqrt(np.diag(resid @ resid / dof * np.linalg.inv(X.T @ X)))
    return beta[: len(regs)], se[: len(regs)]


@given(st.integers(0, 10_000), st.integers(30, 300), st.sampled_from([(), ("f1",), ("f1", "f2")]))
def test_absorbed_fe_equals_dummy_regression(seed, n, fe):
    df = _frame(seed, n)
    if any(df[f].nunique() < 2 for f in fe):
        return
    res = fit_ols_fe(df, "y", ["x1", "x2"], fe=list(fe))
    want, se = _dummy_ols(df, ["x1", "x2"], fe)
    got = np.array([res["x1"], res["x2"]])
    assert np.allclose(got, want, atol=1e-8, rtol=1e-8)
    assert np.allclose([res.stderr("x1"), res.stderr("x2")], se, rtol=1e-6)


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_rescaling_a_regressor_rescales_its_coefficient(seed, c):
    df = _frame(seed)
    a = fit_ols_fe(df, "y", ["x1", "x2"], fe=["f1"])
    b = fit_ols_fe(df.assign(x1=df["x1"] * c), "y", ["x1", "x2"], fe=["f1"])
    assert b["x1"] * c == pytest.approx(a["x1"], rel=1e-8)
    assert b["x2"] == pytest.approx(a["x2"], rel=1e-8, abs=1e-12)
    assert b.tstat("x1") == pytest.approx(a.tstat("x1"), rel=1e-7)


def test_intercept_only_without_fe():
    df = _frame(1)
    res = fit_ols_fe(df, "y", ["x1"])
    assert res.names == ["const", "x1"]


def test_rank_deficiency_detected():
    df = _frame(2)
    df["g"] = df["f1"].astype(float)  # constant within f1
    with pytest.raises(RankDeficiencyError):
        fit_ols_fe(df, "y", ["x1", "g"], fe=["f1"])
    with pytest.raises(RankDeficiencyError):
        fit_ols_fe(df.assign(x3=2 * df["x1"]), "y", ["x1", "x3"])


def test_missing_rows_are_dropped():
    df = _frame(3)
    df.loc[:9, "x1"] = np.nan
    assert fit_ols_fe(df, "y", ["x1"], fe=["f1"]).n_obs == len(df) - 10


def test_logit_two_by_two_closed_form():
    # cells: x=0 -> 30 of 100 positive, x=1 -> 60 of 80
    x = np.r_[np.zeros(100), np.ones(80)]
    y = np.r_[np.ones(30), np.zeros(70), np.ones(60), np.zeros(20)]
    res = fit_logit(pd.DataFrame({"x": x, "y": y}), "y", ["x"])
    assert res["const"] == pytest.approx(np.log(30 / 70), abs=1e-6)
    assert res["x"] == pytest.approx(np.log((60 / 20) / (30 / 70)), abs=1e-6)
    assert odds_ratio(res, "x") == pytest.approx(7.0, rel=1e-6)
    # textbook standard error of the log odds ratio
    assert res.stderr("x") == pytest.approx(np.sqrt(1 / 30 + 1 / 70 + 1 / 60 + 1 / 20), rel=1e-6)


def test_logit_matches_direct_likelihood_maximisation():
    rng = np.random.default_rng(4)
    n = 500
    df = pd.DataFrame({"x1": rng.normal(size=n), "x2": rng.normal(size=n), "g": rng.integers(0, 3, n)})
    eta = -0.3 + 0.8 * df["x1"] - 0.5 * df["x2"] + 0.4 * df["g"]
    df["y"] = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    res = fit_logit(df, "y", ["x1", "x2"], fe=["g"])
    X = np.column_stack([np.ones(n), df[["x1", "x2"]], (df["g"] == 1), (df["g"] == 2)]).astype(float)
    y = df["y"].to_numpy()
    nll = lambda b: -np.sum(y * (X @ b) - np.logaddexp(0, X @ b))
    opt = minimize(nll, np.zeros(X.shape[1]), method="BFGS", options={"gtol": 1e-10})
    assert np.allclose([res["const"], res["x1"], res["x2"]], opt.x[:3], atol=1e-5)


def test_logit_separation_and_degenerate_outcomes():
    x = np.arange(20.0)
    with pytest.raises(SeparationError):
        fit_logit(pd.DataFrame({"x": x, "y": (x > 9).astype(float)}), "y", ["x"])
    with pytest.raises(ValueError):
        fit_logit(pd.DataFrame({"x": x, "y": np.zeros(20)}), "y", ["x"])
    with pytest.raises(ValueError):
        fit_logit(pd.DataFrame({"x": x, "y": np.full(20, 2.0)}), "y", ["x"])


def test_logit_drops_groups_without_outcome_variation():
    rng = np.random.default_rng(5)
    df = pd.DataFrame({"x": rng.normal(size=300), "g": np.repeat(["a", "b", "c"], 100)})
    df["y"] = (rng.random(300) < 0.4).astype(float)
    df.loc[df["g"] == "c", "y"] = 0.0
    res = fit_logit(df, "y", ["x"], fe=["g"])
    assert res.n_obs == 200 and res.diagnostics["dropped_rows"] == 100
