import numpy as np
import pytest
from pydantic import ValidationError

from gsca import (InvalidArgumentError, PenaltyFamily, PenaltySpec, penalty_value, scalar_prox,
                  supergradient, thresholding_curve, weighted_svt)
from gsca.penalties import thresholds, weighted_svt_parts

NUCLEAR = PenaltySpec(family="nuclear", lam=2.0)
LQ = PenaltySpec(family="lq", lam=1.0, hyper=0.5)
SCAD = PenaltySpec(family="scad", lam=1.0, hyper=5.0)
GDP = PenaltySpec(family="gdp", lam=2.0, hyper=1.0)


class TestPenaltySpec:
    def test_default_hyper_parameters(self):
        assert PenaltySpec(family="lq").hyper == 0.1
        assert PenaltySpec(family="scad").hyper == 5.0
        assert PenaltySpec(family="gdp").hyper == 1.0
        assert PenaltySpec(family="nuclear").hyper is None

    @pytest.mark.parametrize("family, hyper", [("lq", 0.0), ("lq", 1.5), ("scad", 2.0),
                                               ("gdp", 0.0), ("gdp", -1.0)])
    def test_rejects_out_of_domain_hyper(self, family, hyper):
        with pytest.raises(ValidationError):
            PenaltySpec(family=family, hyper=hyper)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValidationError):
            PenaltySpec(family="gdp", lam=-1.0)

    def test_with_lambda_keeps_family(self):
        spec = SCAD.with_lambda(3.0)
        assert spec.family is PenaltyFamily.SCAD
        assert (spec.lam, spec.hyper) == (3.0, 5.0)

    def test_labels(self):
        assert PenaltySpec(family="nuclear").label == "L1"
        assert PenaltySpec(family="lq", hyper=0.1).label == "L0.1"
        assert PenaltySpec(family="scad", hyper=5).label == "SCAD(5)"
        assert PenaltySpec(family="gdp", hyper=1).label == "GDP(1)"


class TestPenaltyValue:
    def test_nuclear(self):
        assert penalty_value(NUCLEAR, 3.0) == pytest.approx(6.0)

    def test_lq(self):
        assert penalty_value(LQ, 4.0) == pytest.approx(2.0)
        assert penalty_value(LQ, 0.0) == 0.0

    def test_scad_pieces(self):
        assert penalty_value(SCAD, 0.5) == pytest.approx(0.5)
        assert penalty_value(SCAD, 3.0) == pytest.approx((-9 + 30 - 1) / 8.0)
        assert penalty_value(SCAD, 10.0) == pytest.approx(3.0)

    def test_scad_is_continuous_at_the_knots(self):
        for knot in (1.0, 5.0):
            below = penalty_value(SCAD, knot - 1e-9)
            above = penalty_value(SCAD, knot + 1e-9)
            assert below == pytest.approx(above, abs=1e-8)

    def test_gdp(self):
        assert penalty_value(GDP, np.e - 1.0) == pytest.approx(2.0)

    def test_vectorized(self):
        values = penalty_value(GDP, np.array([0.0, 1.0, 2.0]))
        assert values.shape == (3,)
        assert values[0] == 0.0

    def test_rejects_negative_eta(self):
        with pytest.raises(InvalidArgumentError):
            penalty_value(GDP, -0.1)


class TestSupergradient:
    @pytest.mark.parametrize("spec", [NUCLEAR, LQ, SCAD, GDP], ids=lambda s: s.label)
    def test_matches_derivative_away_from_kinks(self, spec):
        eta = np.array([0.3, 2.0, 3.5, 7.0])
        h = 1e-6
        numeric = (penalty_value(spec, eta + h) - penalty_value(spec, eta - h)) / (2 * h)
        np.testing.assert_allclose(supergradient(spec, eta), numeric, rtol=1e-5, atol=1e-8)

    def test_lq_is_infinite_at_zero(self):
        assert supergradient(LQ, 0.0) == np.inf

    def test_lq_with_zero_lambda_is_zero(self):
        assert supergradient(LQ.with_lambda(0.0), 0.0) == 0.0

    def test_scad_values(self):
        np.testing.assert_allclose(supergradient(SCAD, np.array([0.0, 1.0, 3.0, 6.0])),
                                   [1.0, 1.0, 0.5, 0.0])

    def test_gdp_at_zero(self):
        assert supergradient(GDP, 0.0) == pytest.approx(2.0)

    def test_nonincreasing(self):
        eta = np.linspace(0.0, 10.0, 101)
        for spec in (NUCLEAR, LQ, SCAD, GDP):
            assert np.all(np.diff(supergradient(spec, eta)) <= 1e-12)


class TestConcavity:
    @pytest.mark.parametrize("spec", [NUCLEAR, LQ, SCAD, GDP], ids=lambda s: s.label)
    def test_midpoint_lies_above_the_chord(self, spec):
        rng = np.random.default_rng(6)
        a, b = rng.uniform(0.0, 10.0, size=(2, 500))
        mid = penalty_value(spec, 0.5 * (a + b))
        chord = 0.5 * (penalty_value(spec, a) + penalty_value(spec, b))
        assert np.all(mid >= chord - 1e-12)

    @pytest.mark.parametrize("spec", [NUCLEAR, LQ, SCAD, GDP], ids=lambda s: s.label)
    def test_supergradient_gives_a_linear_upper_bound(self, spec):
        rng = np.random.default_rng(7)
        x = rng.uniform(1e-3, 10.0, size=500)
        y = rng.uniform(0.0, 10.0, size=500)
        bound = penalty_value(spec, x) + supergradient(spec, x) * (y - x)
        assert np.all(penalty_value(spec, y) <= bound + 1e-10)


class TestWeightedSvt:
    def test_diagonal_input_is_soft_thresholded(self):
        M = np.diag([5.0, 3.0, 1.0])
        weights = np.array([0.5, 1.0, 2.0])
        out = weighted_svt(M, weights, 1.0)
        np.testing.assert_allclose(out, np.diag([4.5, 2.0, 0.0]), atol=1e-10)

    def test_zero_step_returns_input(self):
        M = np.random.default_rng(0).normal(size=(5, 4))
        np.testing.assert_allclose(weighted_svt(M, np.ones(4), 0.0), M, atol=1e-12)

    def test_infinite_weight_zeroes_component(self):
        M = np.diag([4.0, 2.0])
        _, s, _ = weighted_svt_parts(M, np.array([1.0, np.inf]), 0.5)
        np.testing.assert_allclose(s, [3.5, 0.0])

    def test_thresholds(self):
        np.testing.assert_allclose(thresholds([1.0, np.inf, 2.0], 0.5, 3), [0.5, np.inf, 1.0])
        np.testing.assert_allclose(thresholds([np.inf], 0.0, 1), [0.0])
        with pytest.raises(InvalidArgumentError):
            thresholds([1.0], 1.0, 2)

    def test_rejects_non_finite_matrix(self):
        with pytest.raises(InvalidArgumentError):
            weighted_svt(np.array([[np.nan, 0.0]]), np.ones(1), 1.0)

    def test_beats_random_perturbations(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            M = rng.normal(scale=2.0, size=(6, 5))
            s = np.linalg.svd(M, compute_uv=False)
            weights = supergradient(GDP, s)

            def linearized(Z):
                return (0.5 * np.sum((Z - M) ** 2)
                        + np.sum(weights * np.linalg.svd(Z, compute_uv=False)))

            best = weighted_svt(M, weights, 1.0)
            value = linearized(best)
            perturbed = best + rng.normal(scale=0.1, size=(1000, 6, 5))
            assert all(linearized(Z) >= value - 1e-12 for Z in perturbed)


class TestScalarProx:
    def test_nuclear_is_soft_threshold(self):
        spec = PenaltySpec(family="nuclear", lam=1.0)
        for z in (0.0, 0.5, 1.0, 2.5, 7.0):
            assert scalar_prox(spec, z) == pytest.approx(max(z - 1.0, 0.0), abs=1e-8)

    def test_scad_leaves_large_values_unshrunk(self):
        assert scalar_prox(SCAD, 8.0) == pytest.approx(8.0, abs=1e-8)

    def test_gdp_thresholding_curve_is_monotone(self):
        curve = thresholding_curve(PenaltySpec(family="gdp", lam=1.0, hyper=1.0),
                                   np.linspace(0.0, 5.0, 26))
        assert curve[0] == 0.0
        assert np.all(np.diff(curve) >= -1e-9)
        assert np.all(curve <= np.linspace(0.0, 5.0, 26) + 1e-12)

    def test_rejects_negative_input(self):
        with pytest.raises(InvalidArgumentError):
            scalar_prox(GDP, -1.0)
