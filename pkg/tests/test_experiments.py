import numpy as np
import pandas as pd
import pytest

from gsca import InvalidArgumentError
from gsca.experiments import (EXPERIMENTS, FULL_INFORMATION, SCALES, ExperimentSettings, Scale,
                              best_full_information, best_rmse_fit, run_experiment, simulate_for)
from gsca.penalties import PenaltySpec

TINY = Scale(name="tiny", I=16, J1=12, J2=14, R=2, n_lambdas=3, folds=2,
             eps_f=1e-4, cv_eps_f=1e-3, snr_values=[1.0, 10.0], q_values=[0.5],
             scad_gammas=[5.0], gdp_gammas=[1.0], n_singular_values=5,
             overfit_rank=2, overfit_eps=[1e-2, 1e-4], overfit_max_iter=500)


@pytest.fixture
def settings():
    return ExperimentSettings(scale=TINY, seeds=[0])


class TestScales:
    def test_full_scale(self):
        full = SCALES["full"]
        assert (full.I, full.J1, full.J2, full.R) == (160, 410, 1000, 10)
        assert full.n_lambdas == 30 and full.folds == 7
        assert len(full.snr_values) == 20
        assert full.snr_values[0] == pytest.approx(0.1)
        assert full.snr_values[-1] == pytest.approx(100.0)
        assert full.q_values[0] == 0.1 and full.q_values[-1] == 1.0

    def test_every_experiment_is_registered(self):
        assert set(EXPERIMENTS) == {"table2", "fig1", "fig2-overfit", "fig3", "fig4", "fig5",
                                    "fig7", "fig8", "fig9"}


class TestHelpers:
    def test_simulate_for_drops_constant_columns(self, settings):
        truth = simulate_for(settings, 0)
        assert truth.X1.shape[0] == TINY.I
        assert np.all(truth.X1.min(axis=0) == 0) and np.all(truth.X1.max(axis=0) == 1)

    def test_user_marginals(self, tmp_path):
        path = tmp_path / "p.csv"
        pd.DataFrame({"p": [0.5] * 6}).to_csv(path, index=False)
        truth = simulate_for(ExperimentSettings(scale=TINY, marginals=path), 0)
        assert truth.params.J1 == 6

    def test_best_rmse_fit_is_the_path_minimum(self, settings):
        truth = simulate_for(settings, 1)
        frame, fit, row = best_rmse_fit(truth, PenaltySpec(family="gdp", hyper=1.0), TINY)
        assert len(frame) == TINY.n_lambdas
        assert row["rmse_theta"] == frame["rmse_theta"].min()
        assert fit.penalty.lam == row["lambda"]

    def test_full_information_rank(self, settings):
        truth = simulate_for(settings, 2)
        report, R = best_full_information(truth)
        assert 1 <= R <= 2 * TINY.R
        assert report.rank_hat == R


class TestExperiments:
    def test_table2(self, settings):
        table = EXPERIMENTS["table2"](settings)["table2"]
        assert table["model"].tolist() == ["L1", "L0.1", "SCAD(5)", "GDP(1)", FULL_INFORMATION]
        assert np.all(table["rmse_theta"] >= 0)

    def test_fig1(self, settings):
        frame = EXPERIMENTS["fig1"](settings)["fig1"]
        assert len(frame) == 5 * 201
        l1 = frame[frame["penalty"] == "L1"]
        np.testing.assert_allclose(l1["eta"], np.maximum(l1["z"] - 1.0, 0.0), atol=1e-8)

    def test_fig2_overfit(self, settings):
        tables = EXPERIMENTS["fig2-overfit"](settings)
        summary = tables["fig2-overfit"]
        assert summary["eps_f"].tolist() == [1e-2, 1e-4]
        assert summary["iterations"].iloc[1] >= summary["iterations"].iloc[0]
        loadings = tables["fig2-overfit-loadings"]
        assert set(loadings["component"]) == {1, 2}

    def test_fig3(self, settings):
        frame = EXPERIMENTS["fig3"](settings)["fig3"]
        assert frame["selected"].sum() == 1
        assert {"lambda", "rank", "sigma2", "rmse_theta"} <= set(frame.columns)

    def test_fig4(self, settings):
        frame = EXPERIMENTS["fig4"](settings)["fig4"]
        assert frame["family"].tolist() == ["lq", "scad", "gdp"]

    def test_fig5(self, settings):
        frame = EXPERIMENTS["fig5"](settings)["fig5"]
        assert set(frame["source"]) == {"true", "noise", "L1", "L0.1", "SCAD(5)", "GDP(1)",
                                         FULL_INFORMATION}
        true = frame[frame["source"] == "true"]["value"].to_numpy()
        assert true.size == 5
        assert np.all(true[TINY.R:] < 1e-8 * true[0])

    def test_fig7(self, settings):
        frame = EXPERIMENTS["fig7"](settings)["fig7"]
        assert len(frame) == 2 * 4
        assert sorted(set(frame["snr"])) == [1.0, 10.0]

    def test_fig8(self, settings):
        frame = EXPERIMENTS["fig8"](settings)["fig8"]
        assert frame["gamma"].tolist() == [1.0]
        assert np.isfinite(frame["min_cv_error"]).all()

    def test_fig9(self, settings):
        frame = EXPERIMENTS["fig9"](settings)["fig9"]
        assert len(frame) == TINY.n_lambdas
        assert frame["selected"].sum() == 1
        assert frame["bayes_error"].nunique() == 1


class TestRunExperiment:
    def test_writes_tables(self, settings, tmp_path):
        written = run_experiment("fig1", settings.model_copy(update={"excel": True}), tmp_path)
        assert tmp_path / "fig1.csv" in written
        assert tmp_path / "fig1.xlsx" in written

    def test_unknown_id(self, settings, tmp_path):
        with pytest.raises(InvalidArgumentError, match="valid ids"):
            run_experiment("fig6", settings, tmp_path)
