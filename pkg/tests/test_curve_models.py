import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from powerlaw_hpo.curve_models import (
    CurveDomainError,
    ExtendedCoefficients,
    FitConfig,
    Formulation,
    LearningCurve,
    PowerLawCoefficients,
    _initial_guess,
    _internal_values_jac,
    eval_broken_power_law,
    eval_power_law,
    eval_scaled_power_law,
    eval_shifted_power_law,
    fit_single_curve,
    min_smooth,
    predict,
)


class TestPowerLaw:
    def test_unit_budget(self):
        assert eval_power_law(PowerLawCoefficients(0.1, 0.9, 1.0), 1.0) == pytest.approx(1.0)

    def test_sqrt_decay(self):
        assert eval_power_law(PowerLawCoefficients(0.0, 1.0, 0.5), 0.25) == pytest.approx(2.0)

    def test_zero_beta_is_constant(self):
        assert eval_power_law(PowerLawCoefficients(0.3, 0.0, 7.0), 0.5) == pytest.approx(0.3)

    def test_domain_error(self):
        with pytest.raises(CurveDomainError):
            eval_power_law(PowerLawCoefficients(0.1, 0.9, 1.0), 0.0)

    def test_strictly_decreasing_for_positive_beta_gamma(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = PowerLawCoefficients(rng.uniform(-1, 1), rng.uniform(0.01, 2), rng.uniform(0.01, 3))
            bs = np.sort(rng.uniform(0.01, 1.0, size=10))
            vals = [eval_power_law(c, b) for b in bs]
            assert all(a > b for a, b in zip(vals, vals[1:]))


class TestShiftedPowerLaw:
    def test_zero_shift(self):
        c = ExtendedCoefficients(1.0, 0.5, 1.0, d=0.0)
        assert eval_shifted_power_law(c, 1.0) == pytest.approx(0.5)

    def test_unit_shift(self):
        c = ExtendedCoefficients(1.0, 0.5, 1.0, d=1.0)
        assert eval_shifted_power_law(c, 1.0) == pytest.approx(0.75)

    def test_inverse_square(self):
        c = ExtendedCoefficients(0.0, 1.0, 2.0, d=3.0)
        assert eval_shifted_power_law(c, 1.0) == pytest.approx(-0.0625)

    def test_domain_error(self):
        with pytest.raises(CurveDomainError):
            eval_shifted_power_law(ExtendedCoefficients(1.0, 0.5, 1.0, d=-2.0), 1.0)


class TestScaledPowerLaw:
    def test_unit_scale_matches_shifted(self):
        c = ExtendedCoefficients(1.0, 0.5, 1.0, d=1.0, e=1.0)
        assert eval_scaled_power_law(c, 1.0) == pytest.approx(0.75)

    def test_scale_only(self):
        c = ExtendedCoefficients(1.0, 1.0, 1.0, d=0.0, e=2.0)
        assert eval_scaled_power_law(c, 0.5) == pytest.approx(0.0)

    def test_negative_shift_positive_base(self):
        c = ExtendedCoefficients(0.0, 1.0, 1.0, d=-3.0, e=4.0)
        assert eval_scaled_power_law(c, 1.0) == pytest.approx(-1.0)

    def test_equals_shifted_for_unit_scale_exactly(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            c = ExtendedCoefficients(
                alpha=rng.uniform(-1, 1),
                beta=rng.uniform(-1, 1),
                gamma=rng.uniform(0, 3),
                d=rng.uniform(0.01, 2),
                e=1.0,
            )
            b = rng.uniform(0.01, 1)
            assert abs(eval_scaled_power_law(c, b) - eval_shifted_power_law(c, b)) <= 1e-12

    def test_domain_error(self):
        with pytest.raises(CurveDomainError):
            eval_scaled_power_law(ExtendedCoefficients(0.0, 1.0, 1.0, d=0.0, e=0.0), 1.0)


class TestBrokenPowerLaw:
    def test_no_break_collapses_to_power_law(self):
        c = ExtendedCoefficients(0.1, 0.9, 1.0, c=0.0, d=1.0, f=1.0)
        assert eval_broken_power_law(c, 1.0) == pytest.approx(1.0)

    def test_single_break(self):
        c = ExtendedCoefficients(0.0, 1.0, 0.0, c=1.0, d=1.0, f=1.0)
        assert eval_broken_power_law(c, 1.0) == pytest.approx(0.5)

    def test_break_exponent_product(self):
        c = ExtendedCoefficients(0.0, 1.0, 1.0, c=2.0, d=1.0, f=0.5)
        assert eval_broken_power_law(c, 1.0) == pytest.approx(0.5)

    def test_matches_power_law_when_c_zero_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            alpha, beta, gamma = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 3)
            ext = ExtendedCoefficients(
                alpha, beta, gamma, c=0.0, d=rng.uniform(0.1, 2), f=rng.uniform(0.2, 2)
            )
            b = rng.uniform(0.01, 1)
            plain = eval_power_law(PowerLawCoefficients(alpha, beta, gamma), b)
            assert abs(eval_broken_power_law(ext, b) - plain) <= 1e-12

    @pytest.mark.parametrize(
        "coeffs",
        [
            ExtendedCoefficients(0.0, 1.0, 1.0, c=1.0, d=0.0, f=1.0),   # division by zero
            ExtendedCoefficients(0.0, 1.0, 1.0, c=1.0, d=1.0, f=0.0),   # zero sharpness
            ExtendedCoefficients(0.0, 1.0, 1.0, c=1.0, d=-1.0, f=1.0),  # negative root base
        ],
    )
    def test_domain_errors(self, coeffs):
        with pytest.raises(CurveDomainError):
            eval_broken_power_law(coeffs, 1.0)


class TestMinSmooth:
    def test_prefix_minimum(self):
        out = min_smooth(LearningCurve.from_values([0.9, 0.5, 0.7, 0.4]))
        assert out.values == (0.9, 0.5, 0.5, 0.4)

    def test_already_monotone(self):
        out = min_smooth(LearningCurve.from_values([0.3, 0.3, 0.3]))
        assert out.values == (0.3, 0.3, 0.3)

    def test_increasing_clamps_to_first(self):
        out = min_smooth(LearningCurve.from_values([0.1, 0.2, 0.3]))
        assert out.values == (0.1, 0.1, 0.1)

    @settings(max_examples=200, derandomize=True)
    @given(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False),
            min_size=1,
            max_size=40,
        )
    )
    def test_idempotent_and_non_increasing(self, values):
        curve = LearningCurve.from_values(values)
        once = min_smooth(curve)
        assert all(a >= b for a, b in zip(once.values, once.values[1:]))
        assert all(s <= v for s, v in zip(once.values, curve.values))
        assert min_smooth(once).values == once.values


class TestLearningCurve:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            LearningCurve(values=(0.1, 0.2), max_budget=3)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            LearningCurve.from_values([0.1, math.nan])


class TestFitJacobians:
    """The fitter's analytic jacobians against central finite differences."""

    @pytest.mark.parametrize(
        "formulation",
        [
            Formulation.POWER_LAW,
            Formulation.SHIFTED_POWER_LAW,
            Formulation.SCALED_POWER_LAW,
            Formulation.BROKEN_POWER_LAW,
        ],
    )
    def test_matches_finite_differences(self, formulation):
        rng = np.random.default_rng(5)
        b = np.arange(1, 9) / 8.0
        y = rng.uniform(0.1, 1.0, size=8)
        for trial in range(20):
            q = _initial_guess(formulation, y, b, np.random.default_rng([trial]), jitter=True)
            _, jac = _internal_values_jac(formulation, q, b)
            h = 1e-7
            for j in range(q.size):
                stepped = q.copy()
                stepped[j] += h
                up, _ = _internal_values_jac(formulation, stepped, b)
                stepped[j] -= 2 * h
                down, _ = _internal_values_jac(formulation, stepped, b)
                numeric = (up - down) / (2 * h)
                assert np.allclose(jac[:, j], numeric, rtol=1e-4, atol=1e-6), (
                    formulation,
                    trial,
                    j,
                )


class TestFitSingleCurve:
    def test_recovers_generated_power_law(self):
        # oracle: the generating coefficients evaluated at the final step
        alpha, beta, gamma = 0.2, 0.8, 1.5
        steps = np.arange(1, 51, dtype=float)
        curve = alpha + beta * steps ** (-gamma)
        result = fit_single_curve(curve[:10], max_budget=50, fit_config=FitConfig(seed=0))
        pred = predict(Formulation.POWER_LAW, result.coefficients, 1.0)
        assert abs(pred - curve[-1]) < 1e-2
        assert not result.diverged

    def test_constant_curve(self):
        result = fit_single_curve([0.5] * 5, max_budget=10, fit_config=FitConfig(seed=1))
        pred = predict(Formulation.POWER_LAW, result.coefficients, 1.0)
        assert abs(pred - 0.5) < 1e-3

    def test_two_point_interpolation(self):
        # exact interpolant exists (alpha=0, beta=0.5, gamma=1); check residuals
        result = fit_single_curve([1.0, 0.5], max_budget=2, fit_config=FitConfig(seed=2))
        for b, y in ((0.5, 1.0), (1.0, 0.5)):
            assert abs(predict(Formulation.POWER_LAW, result.coefficients, b) - y) < 1e-2

    @pytest.mark.parametrize(
        "formulation,coeffs",
        [
            (Formulation.POWER_LAW, PowerLawCoefficients(0.25, 0.4, 1.2)),
            (Formulation.SHIFTED_POWER_LAW, ExtendedCoefficients(0.8, 0.5, 1.0, d=0.2)),
            (Formulation.SCALED_POWER_LAW, ExtendedCoefficients(0.8, 0.5, 1.0, d=0.2, e=1.3)),
            (Formulation.BROKEN_POWER_LAW, ExtendedCoefficients(0.2, 0.6, 0.8, c=0.5, d=0.5, f=1.0)),
        ],
    )
    def test_same_formulation_reaches_low_mae(self, formulation, coeffs):
        b = np.arange(1, 11) / 10.0
        y = [predict(formulation, coeffs, x) for x in b]
        result = fit_single_curve(
            y, max_budget=10, formulation=formulation,
            fit_config=FitConfig(max_epochs=3000, restarts=5, seed=0),
        )
        assert result.train_mae < 1e-3
        for field in vars(result.coefficients).values():
            assert math.isfinite(field)

    def test_deterministic_given_seed(self):
        curve = [0.9, 0.6, 0.5, 0.45, 0.42]
        a = fit_single_curve(curve, max_budget=10, fit_config=FitConfig(seed=7))
        b = fit_single_curve(curve, max_budget=10, fit_config=FitConfig(seed=7))
        assert a.coefficients == b.coefficients
        assert a.train_mae == b.train_mae

    def test_divergence_reported_not_raised(self):
        # values near the float ceiling overflow the loss on every restart
        curve = [1e308, 1e307, 1e306, 1e305, 1e304]
        result = fit_single_curve(
            curve, max_budget=10,
            fit_config=FitConfig(max_epochs=50, restarts=2, seed=0),
        )
        assert result.diverged
        for field in vars(result.coefficients).values():
            assert math.isfinite(field)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            fit_single_curve([0.5], max_budget=10)
