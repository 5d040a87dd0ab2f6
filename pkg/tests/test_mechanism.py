import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssm_kinetics.mechanism import (
    ConcentrationState,
    EqualRateConstants,
    NonFiniteState,
    RateConstants,
    abc_mechanism,
    analytic_curve,
    analytic_solution,
    generate_dataset,
    integrate_rk4,
    read_dataset_csv,
    rhs_abc,
    round_half_away_from_zero,
    write_dataset_csv,
)

K_REF = RateConstants(0.9855, 0.1637)

# Tabulated 4-decimal reference data for t = 0..6 s.
DATA_T0_TO_T2 = {
    0.0: (1.0, 0.0, 0.0),
    1.0: (0.3733, 0.5705, 0.0562),
    2.0: (0.1393, 0.6973, 0.1634),
}
DATA_T3_TO_T6 = {
    3.0: (0.0520, 0.6715, 0.2765),
    4.0: (0.0194, 0.5998, 0.3808),
    5.0: (0.0072, 0.5203, 0.4725),
    6.0: (0.0027, 0.4458, 0.5515),
}

positive_k = st.floats(min_value=1e-2, max_value=10.0)
concentration = st.floats(min_value=0.0, max_value=2.0)


class TestRhs:
    def test_initial_state_rates(self):
        s = ConcentrationState(t=0.0, ca=1.0, cb=0.0, cc=0.0)
        rates = rhs_abc(K_REF, s)
        assert rates.tolist() == [-0.9855, 0.9855, 0.0]

    def test_zero_state(self):
        s = ConcentrationState(t=0.0, ca=0.0, cb=0.0, cc=0.0)
        assert rhs_abc(RateConstants(2.0, 3.0), s).tolist() == [0.0, 0.0, 0.0]

    def test_direct_substitution(self):
        s = ConcentrationState(t=0.0, ca=0.5, cb=0.5, cc=0.0)
        assert rhs_abc(RateConstants(1.0, 1.0), s).tolist() == [-0.5, 0.0, 0.5]

    @given(k1=positive_k, k2=positive_k, ca=concentration, cb=concentration,
           cc=concentration)
    def test_rates_sum_to_zero(self, k1, k2, ca, cb, cc):
        s = ConcentrationState(t=0.0, ca=ca, cb=cb, cc=cc)
        rates = rhs_abc(RateConstants(k1, k2), s)
        # closed system: zero up to one rounding of the coupling term
        assert abs(rates.sum()) <= 5e-16 * max(1.0, k1 * ca + k2 * cb)


class TestAnalyticSolution:
    def test_initial_conditions(self):
        s = analytic_solution(K_REF, 1.0, 0.0)
        assert (s.ca, s.cb, s.cc) == (1.0, 0.0, 0.0)

    def test_reference_point_t1(self):
        s = analytic_solution(K_REF, 1.0, 1.0)
        assert s.ca == pytest.approx(0.3733, abs=5e-5)
        assert s.cb == pytest.approx(0.5705, abs=5e-5)
        assert s.cc == pytest.approx(0.0562, abs=5e-5)

    def test_reference_point_t4(self):
        s = analytic_solution(K_REF, 1.0, 4.0)
        assert s.ca == pytest.approx(0.0194, abs=5e-5)
        assert s.cb == pytest.approx(0.5998, abs=5e-5)
        assert s.cc == pytest.approx(0.3808, abs=5e-5)

    def test_equal_rates_raise(self):
        with pytest.raises(EqualRateConstants):
            analytic_solution(RateConstants(0.5, 0.5), 1.0, 1.0)
        with pytest.raises(EqualRateConstants):
            analytic_solution(RateConstants(0.5, 0.5 * (1 + 1e-12)), 1.0, 1.0)

    def test_nonpositive_rates_rejected(self):
        with pytest.raises(ValueError):
            analytic_solution(RateConstants(-1.0, 0.5), 1.0, 1.0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            analytic_solution(K_REF, 1.0, -0.1)

    @given(
        k1=positive_k, k2=positive_k,
        t=st.floats(min_value=0.0, max_value=6.0),
    )
    def test_mass_conservation(self, k1, k2, t):
        if abs(k1 - k2) / max(k1, k2) < 1e-6:
            k2 *= 1.5
        s = analytic_solution(RateConstants(k1, k2), 1.0, t)
        assert abs(s.ca + s.cb + s.cc - 1.0) <= 1e-10

    @given(
        k1=positive_k, k2=positive_k,
        t=st.floats(min_value=0.0, max_value=6.0),
    )
    def test_positivity(self, k1, k2, t):
        if abs(k1 - k2) / max(k1, k2) < 1e-6:
            k2 *= 1.5
        s = analytic_solution(RateConstants(k1, k2), 1.0, t)
        assert min(s.ca, s.cb, s.cc) >= -1e-12

    def test_curve_matches_pointwise(self):
        ts = np.linspace(0.0, 6.0, 25)
        curve = analytic_curve(K_REF, 1.0, ts)
        for i, t in enumerate(ts):
            s = analytic_solution(K_REF, 1.0, float(t))
            assert np.allclose(curve[i], [s.ca, s.cb, s.cc], rtol=0, atol=1e-15)


class TestRK4:
    def test_zero_horizon_returns_initial(self):
        traj = integrate_rk4(abc_mechanism(), RateConstants(1.0, 1.0), 0.0, 1e-3)
        assert traj == [ConcentrationState(t=0.0, ca=1.0, cb=0.0, cc=0.0)]

    def test_reference_state_at_t3(self):
        traj = integrate_rk4(abc_mechanism(), K_REF, 6.0, 1e-3)
        s = traj[3000]
        assert s.t == pytest.approx(3.0, abs=1e-12)
        assert s.ca == pytest.approx(0.0520, abs=1e-4)
        assert s.cb == pytest.approx(0.6715, abs=1e-4)
        assert s.cc == pytest.approx(0.2765, abs=1e-4)

    def test_oracle_agreement_with_closed_form(self):
        # independent cross-check between the two solution routes
        traj = integrate_rk4(abc_mechanism(), K_REF, 6.0, 1e-3)
        ts = np.array([s.t for s in traj])
        numeric = np.array([[s.ca, s.cb, s.cc] for s in traj])
        exact = analytic_curve(K_REF, 1.0, ts)
        assert np.max(np.abs(numeric - exact)) <= 1e-8

    def test_mass_conservation_along_trajectory(self):
        traj = integrate_rk4(abc_mechanism(), K_REF, 6.0, 1e-3)
        totals = np.array([s.ca + s.cb + s.cc for s in traj])
        assert np.max(np.abs(totals - 1.0)) <= 1e-8

    def test_positivity_along_trajectory(self):
        traj = integrate_rk4(abc_mechanism(), RateConstants(2.0, 0.05), 6.0, 1e-3)
        values = np.array([[s.ca, s.cb, s.cc] for s in traj])
        assert values.min() >= -1e-12

    def test_degenerate_rates_integrate_fine(self):
        traj = integrate_rk4(abc_mechanism(), RateConstants(1.0, 1.0), 1.0, 1e-3)
        s = traj[-1]
        # Ca decays exactly as exp(-t); Cb = t*exp(-t) in the equal-rate case
        assert s.ca == pytest.approx(math.exp(-1.0), abs=1e-10)
        assert s.cb == pytest.approx(math.exp(-1.0), abs=1e-10)

    def test_partial_final_step_lands_on_t_end(self):
        traj = integrate_rk4(abc_mechanism(), K_REF, 0.25, 0.1)
        assert traj[-1].t == pytest.approx(0.25, abs=1e-15)
        exact = analytic_solution(K_REF, 1.0, 0.25)
        # coarse h=0.1 still leaves ~h^4 accuracy
        assert traj[-1].ca == pytest.approx(exact.ca, abs=1e-6)

    def test_non_finite_state_raises(self):
        with np.errstate(over="ignore", invalid="ignore"), pytest.raises(NonFiniteState):
            integrate_rk4(abc_mechanism(), RateConstants(1e200, 1.0), 2.0, 1.0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            integrate_rk4(abc_mechanism(), K_REF, 1.0, 0.0)
        with pytest.raises(ValueError):
            integrate_rk4(abc_mechanism(), K_REF, -1.0, 0.1)


class TestRounding:
    def test_ties_go_away_from_zero(self):
        assert round_half_away_from_zero(0.5, 0) == 1.0
        assert round_half_away_from_zero(-0.5, 0) == -1.0
        assert round_half_away_from_zero(0.00005, 4) == 0.0001
        assert round_half_away_from_zero(2.5, 0) == 3.0

    def test_plain_rounding(self):
        assert round_half_away_from_zero(0.05623656887803574, 4) == 0.0562
        assert round_half_away_from_zero(-0.00012, 4) == -0.0001

    def test_negative_zero_normalized(self):
        value = round_half_away_from_zero(-0.00001, 4)
        assert value == 0.0 and math.copysign(1.0, value) == 1.0


class TestGenerateDataset:
    def test_first_spline_reference_values(self):
        states = generate_dataset(K_REF, (0.0, 1.0, 2.0), rounding=4)
        for s in states:
            assert (s.ca, s.cb, s.cc) == DATA_T0_TO_T2[s.t]

    def test_second_spline_reference_values(self):
        states = generate_dataset(K_REF, (3.0, 4.0, 5.0, 6.0), rounding=4)
        for s in states:
            assert (s.ca, s.cb, s.cc) == DATA_T3_TO_T6[s.t]

    def test_single_time_unrounded(self):
        states = generate_dataset(K_REF, (0.0,))
        assert states == [ConcentrationState(t=0.0, ca=1.0, cb=0.0, cc=0.0)]

    def test_validation(self):
        with pytest.raises(ValueError):
            generate_dataset(K_REF, ())
        with pytest.raises(ValueError):
            generate_dataset(K_REF, (0.0, 1.0, 1.0))
        with pytest.raises(ValueError):
            generate_dataset(K_REF, (-1.0, 0.0))
        with pytest.raises(EqualRateConstants):
            generate_dataset(RateConstants(0.1637, 0.1637), (0.0, 1.0))


class TestDatasetCsv:
    def test_round_trip_full_precision(self, tmp_path):
        path = tmp_path / "data.csv"
        states = generate_dataset(K_REF, (0.0, 0.5, 1.5))
        write_dataset_csv(path, states)
        assert read_dataset_csv(path) == states

    def test_rounded_formatting(self, tmp_path):
        path = tmp_path / "data.csv"
        states = generate_dataset(K_REF, (0.0, 1.0), rounding=4)
        write_dataset_csv(path, states, decimals=4)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,Ca,Cb,Cc"
        assert lines[1] == "0,1.0000,0.0000,0.0000"
        assert lines[2] == "1,0.3733,0.5705,0.0562"

    def test_line_feed_terminated(self, tmp_path):
        path = tmp_path / "data.csv"
        write_dataset_csv(path, generate_dataset(K_REF, (0.0, 1.0)))
        raw = path.read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,A,B,C\n0,1,0,0\n")
        with pytest.raises(ValueError, match="header"):
            read_dataset_csv(path)

    def test_malformed_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,Ca,Cb,Cc\n0,1,0\n")
        with pytest.raises(ValueError, match="columns"):
            read_dataset_csv(path)
        path.write_text("t,Ca,Cb,Cc\n0,one,0,0\n")
        with pytest.raises(ValueError, match="non-numeric"):
            read_dataset_csv(path)
        path.write_text("t,Ca,Cb,Cc\n")
        with pytest.raises(ValueError, match="no rows"):
            read_dataset_csv(path)
