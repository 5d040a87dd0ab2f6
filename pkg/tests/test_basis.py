import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssm_kinetics.basis import (
    Polynomial,
    TrialPolynomialSet,
    derivative_row,
    power_row,
)

# Published degree-5 Ca coefficient lists for the two spline pieces.
SS1_CA_COEFFS = (1.0, -0.98425, 0.47797, -0.14479, 0.026617, -0.00223)
SS2_CA_COEFFS = (0.80409, -0.63781, 0.216635, -0.03878, 0.00360, -0.000138)

coeff_lists = st.lists(
    st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=1, max_size=9
)


class TestEvaluate:
    def test_constant_polynomial(self):
        p = Polynomial((1.0, 0.0, 0.0, 0.0, 0.0))
        assert p.evaluate(2.0) == 1.0

    def test_published_ss1_ca_at_t1(self):
        p = Polynomial(SS1_CA_COEFFS)
        assert p.evaluate(1.0) == pytest.approx(0.37332, abs=5e-4)

    def test_published_ss2_ca_at_t3(self):
        # Direct evaluation of the printed coefficients gives ~0.05138,
        # within rounding distance of the tabulated 0.0520.
        p = Polynomial(SS2_CA_COEFFS)
        assert p.evaluate(3.0) == pytest.approx(0.051381, abs=1e-6)
        assert p.evaluate(3.0) == pytest.approx(0.0520, abs=1e-3)

    def test_array_argument(self):
        p = Polynomial((1.0, 2.0, 3.0))
        ts = np.array([0.0, 1.0, 2.0])
        assert np.allclose(p.evaluate(ts), [1.0, 6.0, 17.0], rtol=0, atol=0)

    def test_empty_coefficients_rejected(self):
        with pytest.raises(ValueError):
            Polynomial(())


class TestDerivative:
    def test_derivative_of_constant(self):
        p = Polynomial((1.0, 0.0, 0.0, 0.0, 0.0))
        assert p.derivative().coefficients == (0.0, 0.0, 0.0, 0.0)

    def test_coefficient_shift_and_scale(self):
        a0, a1, a2, a3, a4 = 0.3, -0.7, 1.1, 0.25, -0.05
        p = Polynomial((a0, a1, a2, a3, a4))
        assert p.derivative().coefficients == (a1, 2 * a2, 3 * a3, 4 * a4)

    def test_matches_central_difference_oracle(self):
        # d/dt t^2 at t=3: the central difference of t^2 is exact.
        p = Polynomial((0.0, 0.0, 1.0))
        h = 1e-3
        oracle = (p.evaluate(3.0 + h) - p.evaluate(3.0 - h)) / (2 * h)
        assert oracle == pytest.approx(6.0, abs=1e-9)
        assert p.derivative().evaluate(3.0) == pytest.approx(oracle, abs=1e-9)

    def test_degree_drops_by_one(self):
        assert Polynomial((1.0, 2.0, 3.0)).derivative().degree == 1
        assert Polynomial((5.0,)).derivative().degree == 0


class TestPowerRow:
    def test_row_at_two(self):
        assert power_row(4, 2.0).tolist() == [1.0, 2.0, 4.0, 8.0, 16.0]

    def test_row_at_zero(self):
        assert power_row(5, 0.0).tolist() == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]

    def test_row_at_six(self):
        assert power_row(5, 6.0).tolist() == [1.0, 6.0, 36.0, 216.0, 1296.0, 7776.0]

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            power_row(-1, 1.0)

    def test_derivative_row(self):
        assert derivative_row(4, 2.0).tolist() == [0.0, 1.0, 4.0, 12.0, 32.0]


class TestProperties:
    @given(coeffs=coeff_lists, t=st.floats(min_value=0.0, max_value=6.0))
    def test_power_row_dot_matches_horner(self, coeffs, t):
        p = Polynomial(tuple(coeffs))
        dot = float(power_row(p.degree, t) @ np.array(coeffs))
        # relative to the term-magnitude sum, which bounds the rounding of
        # either evaluation order even under cancellation
        scale = sum(abs(c) * t**n for n, c in enumerate(coeffs))
        assert abs(p.evaluate(t) - dot) <= 1e-13 * max(1.0, scale)

    @given(coeffs=coeff_lists)
    def test_evaluate_at_zero_is_c0_bit_exact(self, coeffs):
        p = Polynomial(tuple(coeffs))
        assert p.evaluate(0.0) == coeffs[0]

    @given(
        coeffs=coeff_lists,
        t=st.floats(min_value=0.0, max_value=6.0),
        h=st.sampled_from([1e-3, 1e-4]),
    )
    def test_derivative_matches_central_differences(self, coeffs, t, h):
        p = Polynomial(tuple(coeffs))
        cd = (p.evaluate(t + h) - p.evaluate(t - h)) / (2 * h)
        exact = p.derivative().evaluate(t)
        # truncation term: |f'''| h^2 / 6; rounding term: eps * scale / h
        third = sum(
            n * (n - 1) * (n - 2) * abs(c) * max(1.0, t + h) ** (n - 3)
            for n, c in enumerate(coeffs)
            if n >= 3
        )
        scale = sum(abs(c) * max(1.0, t + h) ** n for n, c in enumerate(coeffs))
        bound = third / 6 * h * h * 1.5 + 8e-16 * max(1.0, scale) / h
        assert abs(exact - cd) <= bound


class TestConditioningWarnings:
    def test_high_degree_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="ssm_kinetics.basis"):
            power_row(9, 1.0)
        assert any("ill-conditioned" in r.message for r in caplog.records)

    def test_large_time_warns(self, caplog):
        p = Polynomial((1.0, 1.0))
        with caplog.at_level(logging.WARNING, logger="ssm_kinetics.basis"):
            p.evaluate(11.0)
        assert any("ill-conditioned" in r.message for r in caplog.records)

    def test_normal_range_is_silent(self, caplog):
        with caplog.at_level(logging.WARNING, logger="ssm_kinetics.basis"):
            power_row(8, 6.0)
        assert not caplog.records


class TestTrialPolynomialSet:
    def test_round_trip_and_lookup(self):
        matrix = np.array([[1.0, -1.0], [0.0, 2.0], [0.5, 0.0]])
        polys = TrialPolynomialSet.from_coefficients(("Ca", "Cb", "Cc"), matrix)
        assert polys["Cb"].coefficients == (0.0, 2.0)
        assert polys[2].coefficients == (0.5, 0.0)
        assert np.array_equal(polys.coefficient_matrix(), matrix)
        assert np.allclose(polys.evaluate(2.0), [-1.0, 4.0, 0.5], rtol=0, atol=0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            TrialPolynomialSet(("Ca",), (Polynomial((1.0,)), Polynomial((2.0,))))
