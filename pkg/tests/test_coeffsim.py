import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from eigentow import (
    CoefficientState,
    ContractViolationError,
    ParameterError,
    coeff_simulate,
    damping_rate,
    lindblad_closed_form,
    probabilities,
)


class TestCoefficientState:
    def test_from_probabilities_normalizes(self):
        cs = CoefficientState.from_probabilities([0.0, 1.0], [0.8, 0.2])
        np.testing.assert_allclose(np.abs(cs.coeffs), [np.sqrt(0.8), np.sqrt(0.2)])
        np.testing.assert_allclose(probabilities(cs), [0.8, 0.2])

    def test_from_probabilities_rescales(self):
        cs = CoefficientState.from_probabilities([0.0, 1.0], [4.0, 1.0])
        np.testing.assert_allclose(probabilities(cs), [0.8, 0.2])

    def test_rejects_negative_probability(self):
        with pytest.raises(ParameterError):
            CoefficientState.from_probabilities([0.0, 1.0], [-0.1, 1.1])

    def test_rejects_all_zero(self):
        with pytest.raises(ParameterError):
            CoefficientState.from_probabilities([0.0, 1.0], [0.0, 0.0])

    def test_vector_valued_labels(self):
        cs = CoefficientState.from_probabilities(
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [1.0, 1.0, 1.0]
        )
        assert cs.eigvals.shape == (3, 2)

    def test_coefficient_count_mismatch(self):
        with pytest.raises(ContractViolationError):
            CoefficientState([0.0, 1.0], [1.0, 0.0, 0.0])


class TestDampingRate:
    def test_three_state_closed_form(self):
        # labels 0, 1, 2 with weights 13/30, 10/30, 7/30
        cs = CoefficientState.from_probabilities(
            [0.0, 1.0, 2.0], [13 / 30, 10 / 30, 7 / 30]
        )
        assert damping_rate(cs, 0) == pytest.approx(-38 / 30, abs=1e-14)
        assert damping_rate(cs, 1) == pytest.approx(-20 / 30, abs=1e-14)
        assert damping_rate(cs, 2) == pytest.approx(-62 / 30, abs=1e-14)

    def test_rate_is_nonpositive(self):
        cs = CoefficientState.from_probabilities([0.0, 3.0, 7.0], [0.2, 0.5, 0.3])
        for a in range(3):
            assert damping_rate(cs, a) <= 0.0

    def test_index_validation(self):
        cs = CoefficientState.from_probabilities([0.0, 1.0], [0.5, 0.5])
        with pytest.raises(ParameterError):
            damping_rate(cs, 2)


class TestCompetitions:
    @pytest.mark.parametrize(
        "probs0, winner",
        [
            ((0.501, 0.499), 0),
            ((13 / 30, 10 / 30, 7 / 30), 1),
            ((14 / 30, 10 / 30, 6 / 30), 0),
        ],
    )
    def test_reference_outcomes(self, probs0, winner):
        eigvals = [float(k) for k in range(len(probs0))]
        cs = CoefficientState.from_probabilities(eigvals, probs0)
        traj = coeff_simulate(cs, dt=1e-3, t_end=10.0)
        final = probabilities(traj[-1])
        assert int(np.argmax(final)) == winner
        assert final[winner] > 0.999

    def test_loser_decay_rate(self):
        # once the winner saturates, each loser decays at -2|a - a_win|^2
        cs = CoefficientState.from_probabilities(
            [0.0, 1.0, 2.0], [13 / 30, 10 / 30, 7 / 30]
        )
        traj = coeff_simulate(cs, dt=1e-3, t_end=10.0)
        times = np.array([s.time for s in traj])
        probs = np.array([probabilities(s) for s in traj])
        start = int(np.argmax(probs[:, 1] > 0.99))
        for a, predicted in ((0, -2.0), (2, -2.0)):
            logs = np.log(probs[start:, a])
            slope = np.polyfit(times[start:], logs, 1)[0]
            assert slope == pytest.approx(predicted, rel=0.05)

    def test_matches_independent_integrator(self):
        cs = CoefficientState.from_probabilities(
            [0.0, 1.0, 2.0], [13 / 30, 10 / 30, 7 / 30]
        )
        traj = coeff_simulate(cs, dt=1e-3, t_end=5.0)
        d2 = (cs.eigvals - cs.eigvals.T) ** 2

        def rhs(_t, b):
            p = b * b
            return (-(d2 @ p) / p.sum()) * b

        sol = solve_ivp(
            rhs,
            (0.0, 5.0),
            np.abs(cs.coeffs),
            rtol=1e-11,
            atol=1e-13,
            dense_output=True,
        )
        np.testing.assert_allclose(
            np.abs(traj[-1].coeffs), sol.y[:, -1], atol=1e-8
        )

    def test_phases_constant(self):
        phases = np.array([0.3, -1.2, 2.5])
        b0 = np.sqrt([0.5, 0.3, 0.2]) * np.exp(1j * phases)
        cs = CoefficientState([0.0, 1.0, 2.0], b0)
        traj = coeff_simulate(cs, dt=1e-2, t_end=3.0)
        for s in traj:
            live = np.abs(s.coeffs) > 1e-12
            np.testing.assert_allclose(
                np.angle(s.coeffs[live]), phases[live], atol=1e-9
            )

    def test_norm_never_increases(self):
        cs = CoefficientState.from_probabilities([0.0, 2.0, 5.0], [0.4, 0.35, 0.25])
        traj = coeff_simulate(cs, dt=1e-2, t_end=2.0)
        norms = np.array([np.abs(s.coeffs).sum() for s in traj])
        assert np.all(np.diff(norms) <= 1e-12)

    def test_degenerate_labels_frozen_ratio(self):
        # identical eigenvalue vectors feel identical damping forever
        cs = CoefficientState.from_probabilities(
            [[1.0, 2.0], [1.0, 2.0], [4.0, 0.0]], [0.5, 0.3, 0.2]
        )
        traj = coeff_simulate(cs, dt=1e-2, t_end=4.0)
        ratio0 = np.abs(cs.coeffs[0]) / np.abs(cs.coeffs[1])
        ratio_t = np.abs(traj[-1].coeffs[0]) / np.abs(traj[-1].coeffs[1])
        assert ratio_t == pytest.approx(ratio0, rel=1e-10)

    def test_trajectory_bookkeeping(self):
        cs = CoefficientState.from_probabilities([0.0, 1.0], [0.7, 0.3])
        traj = coeff_simulate(cs, dt=0.5, t_end=2.0)
        assert len(traj) == 5
        np.testing.assert_allclose([s.time for s in traj], [0, 0.5, 1.0, 1.5, 2.0])
        # the input state is copied, not aliased
        traj[0].coeffs[:] = 0
        assert np.abs(cs.coeffs).sum() > 0

    def test_bad_arguments(self):
        cs = CoefficientState.from_probabilities([0.0, 1.0], [0.7, 0.3])
        with pytest.raises(ParameterError):
            coeff_simulate(cs, dt=0.0)
        with pytest.raises(ParameterError):
            coeff_simulate(cs, dt=1e-3, t_end=-1.0)

    @settings(max_examples=20)
    @given(p=st.floats(min_value=0.55, max_value=0.95))
    def test_two_state_larger_weight_wins(self, p):
        cs = CoefficientState.from_probabilities([0.0, 1.0], [p, 1.0 - p])
        traj = coeff_simulate(cs, dt=1e-2, t_end=20.0)
        final = probabilities(traj[-1])
        assert np.argmax(final) == 0
        assert final[0] > 0.99


class TestLindbladClosedForm:
    def test_initial_time_is_outer_product(self):
        b = np.array([0.6, 0.8j, -0.2])
        c0 = lindblad_closed_form(b, [0.0, 1.0, 3.0], 0.0)
        np.testing.assert_allclose(c0, np.outer(b, b.conj()), atol=1e-15)

    def test_diagonal_time_independent(self):
        b = np.sqrt([0.5, 0.3, 0.2])
        for t in (0.0, 0.7, 5.0):
            c = lindblad_closed_form(b, [0.0, 1.0, 2.0], t)
            np.testing.assert_allclose(np.diag(c).real, [0.5, 0.3, 0.2], atol=1e-14)

    def test_offdiagonal_decay(self):
        b = np.sqrt([0.5, 0.5])
        t = 0.9
        c = lindblad_closed_form(b, [0.0, 2.0], t)
        assert c[0, 1] == pytest.approx(0.5 * np.exp(-4.0 * t), abs=1e-14)

    def test_hermitian(self):
        b = np.array([0.6 * np.exp(0.4j), 0.8 * np.exp(-1.1j)])
        c = lindblad_closed_form(b, [0.0, 1.0], 1.3)
        np.testing.assert_allclose(c, c.conj().T, atol=1e-15)

    def test_semigroup_property(self):
        # evolving to t1 + t2 equals evolving the off-diagonal factors twice
        b = np.array([0.5, 0.7, 0.3])
        ev = [0.0, 1.5, 4.0]
        c1 = lindblad_closed_form(b, ev, 0.4)
        c2 = lindblad_closed_form(b, ev, 1.1)
        c12 = lindblad_closed_form(b, ev, 1.5)
        c0 = lindblad_closed_form(b, ev, 0.0)
        with np.errstate(invalid="ignore"):
            np.testing.assert_allclose(c1 * c2 / c0, c12, atol=1e-12)

    def test_rejects_negative_time(self):
        with pytest.raises(ParameterError):
            lindblad_closed_form(np.array([1.0]), [0.0], -0.1)
