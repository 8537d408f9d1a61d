"""Full-scale reproduction checks. Slow: run with ``pytest --runslow``."""
import numpy as np
import pytest

from gsca.experiments import (FULL_INFORMATION, SCALES, ExperimentSettings, fig2_overfit, fig5,
                              fig7, fig9, table2)

pytestmark = pytest.mark.slow

FULL = SCALES["full"]


def _settings(scale=FULL, seeds=(0,)):
    return ExperimentSettings(scale=scale, seeds=list(seeds), n_jobs=-1)


def test_penalty_comparison():
    table = table2(_settings(seeds=(0, 1, 2)))["table2"]
    by_model = table.groupby("model")
    rmse = by_model["rmse_theta"].mean()
    rank = by_model["rank_hat"].median()
    assert rmse["GDP(1)"] <= 0.08 and rank["GDP(1)"] == 9
    assert rmse["L0.1"] <= 0.08 and rank["L0.1"] == 9
    assert 0.14 <= rmse["L1"] <= 0.23
    assert rmse["GDP(1)"] < rmse["SCAD(5)"] < rmse["L1"]
    assert FULL_INFORMATION in rmse.index


def test_singular_value_recovery():
    frame = fig5(_settings())["fig5"]

    def values(source):
        return frame[frame["source"] == source]["value"].to_numpy()[:9]

    true = values("true")
    for source in ("GDP(1)", "L0.1"):
        np.testing.assert_allclose(values(source), true, rtol=0.1)
    assert np.all(values("L1") < true)
    assert np.any(values("SCAD(5)")[:3] > true[:3])


def test_snr_sweep():
    scale = FULL.model_copy(update={"snr_values": np.geomspace(0.1, 100.0, 5).tolist()})
    frame = fig7(_settings(scale))["fig7"]
    gdp = frame[frame["model"] == "GDP(1)"].sort_values("snr")
    l1 = frame[frame["model"] == "L1"].sort_values("snr")
    assert np.all(gdp["rmse_theta"].to_numpy() <= l1["rmse_theta"].to_numpy())
    z1 = gdp["rmse_z1"].to_numpy()
    assert 0 < int(np.argmin(z1)) < z1.size - 1


def test_cross_validation_selects_true_rank():
    frame = fig9(_settings())["fig9"]
    selected = frame[frame["selected"]].iloc[0]
    assert selected["rank_refit"] == 9
    assert abs(selected["cv_error"] - selected["bayes_error"]) <= selected["cv_se"]


def test_overfitting_without_penalty():
    summary = fig2_overfit(_settings())["fig2-overfit"].set_index("eps_f")
    loose, tight = summary.loc[1e-5], summary.loc[1e-8]
    assert tight["max_abs_B1"] >= 2 * loose["max_abs_B1"]
    assert tight["iterations"] > loose["iterations"]
