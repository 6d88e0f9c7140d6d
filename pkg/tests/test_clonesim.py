import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from app.core.clonesim import (
    F_SPCC_MAX,
    LOST,
    P_LINEAR,
    CloneParams,
    FourCandidates,
    NoInference,
    QubitCloneOutcome,
    SixEliminated,
    StrategyId,
    classify_pair,
    clone_and_measure_many,
    clone_and_measure_qubit,
    error_rate,
    event_probabilities,
    simulate_events,
    stealth_acceptance,
)
from app.core.qstate import Basis, QubitState


fidelities = st.floats(min_value=0.5, max_value=1.0)
successes = st.floats(min_value=0.01, max_value=1.0)


def outcome(a, b):
    return QubitCloneOutcome((a, b))


class TestCloneParams:

    @pytest.mark.parametrize("F,P", [(0.49, 1.0), (1.01, 1.0), (0.8, 0.0), (0.8, 1.5)])
    def test_rejects_out_of_range(self, F, P):
        with pytest.raises(ValueError):
            CloneParams(F, P)

    def test_physical_flag(self):
        assert CloneParams(F_SPCC_MAX).physical
        assert not CloneParams(0.9).physical

    def test_outcome_json(self):
        assert LOST.to_json() is None
        assert QubitCloneOutcome.from_json(None).is_lost
        assert QubitCloneOutcome.from_json([1, 0]) == outcome(1, 0)
        with pytest.raises(ValueError):
            QubitCloneOutcome.from_json([1])


class TestClosedForms:

    def test_event_probabilities_at_optimal_cloner(self):
        probs = event_probabilities(CloneParams(0.854, P_LINEAR))
        assert probs.p_correct == pytest.approx(0.04052, abs=1e-5)
        assert probs.p_error == pytest.approx(0.01504, abs=1e-5)

    @given(fidelities, successes)
    def test_elimination_events_total_half_p_squared(self, F, P):
        probs = event_probabilities(CloneParams(F, P))
        assert probs.p_total == pytest.approx(P**2 / 2)

    @given(fidelities, successes)
    def test_error_rates(self, F, P):
        cp = CloneParams(F, P)
        assert error_rate(StrategyId.I, cp) == pytest.approx(0.5 * (1 - P) + P * (1 - F))
        assert error_rate(StrategyId.II, cp) == pytest.approx(1 - F)
        assert error_rate(StrategyId.III, cp) == 0.0

    def test_stealth_acceptance_strategy_two(self):
        p = stealth_acceptance(StrategyId.II, CloneParams(0.803, 1.0), 40, 0.25)
        assert 0.75 <= p <= 0.95

    def test_stealth_acceptance_perfect_cloner(self):
        assert stealth_acceptance(StrategyId.II, CloneParams(1.0, 1.0), 40, 0.25) == pytest.approx(1.0)

    @given(st.floats(min_value=0.6, max_value=0.95))
    @settings(max_examples=20)
    def test_lossy_strategy_two_is_a_probability(self, F):
        p = stealth_acceptance(StrategyId.II, CloneParams(F, 0.5), 40, 0.25)
        assert 0.0 <= p <= 1.0


class TestClassification:

    def test_lost_qubit_gives_nothing(self):
        assert isinstance(classify_pair(LOST, outcome(0, 0), Basis.Z), NoInference)

    def test_both_disagree_gives_nothing(self):
        assert isinstance(classify_pair(outcome(0, 1), outcome(1, 0), Basis.Z), NoInference)

    def test_first_agrees(self):
        inf = classify_pair(outcome(1, 1), outcome(0, 1), Basis.X)
        assert inf == SixEliminated(1, QubitState.MINUS)

    def test_second_agrees(self):
        inf = classify_pair(outcome(1, 0), outcome(0, 0), Basis.Z)
        assert inf == SixEliminated(2, QubitState.ZERO)

    def test_both_agree_leaves_four(self):
        inf = classify_pair(outcome(0, 0), outcome(1, 1), Basis.Z)
        assert isinstance(inf, FourCandidates)
        assert len(inf.candidates) == 4
        for pair in inf.candidates:
            assert pair.first is QubitState.ZERO or pair.second is QubitState.ONE


class TestSampling:

    def test_scalar_sampler_respects_loss(self):
        rng = np.random.default_rng(3)
        cp = CloneParams(0.9, 0.25)
        n = 20_000
        lost = sum(clone_and_measure_qubit(QubitState.ZERO, Basis.Z, cp, rng).is_lost for _ in range(n))
        assert abs(lost / n - 0.75) < 4 * np.sqrt(0.75 * 0.25 / n)

    def test_perfect_cloner_copies_matched_qubits(self, rng):
        bits = rng.integers(2, size=1000, dtype=np.int8)
        lost, a, b = clone_and_measure_many(bits, np.ones(1000, dtype=bool), CloneParams(1.0), rng)
        assert not lost.any()
        assert (a == bits).all() and (b == bits).all()

    @pytest.mark.parametrize("F", [0.803, 0.854])
    @pytest.mark.parametrize("P", [P_LINEAR, 1.0])
    def test_bank_side_error_rates(self, F, P):
        rng = np.random.default_rng(2019)
        cp = CloneParams(F, P)
        n = 1_000_000
        bits = rng.integers(2, size=n, dtype=np.int8)
        lost, a, _ = clone_and_measure_many(bits, np.ones(n, dtype=bool), cp, rng)

        guesses = rng.integers(2, size=n, dtype=np.int8)
        answered = np.where(lost, guesses, a)
        assert np.mean(answered != bits) == pytest.approx(error_rate(StrategyId.I, cp), abs=0.005)

        reported = ~lost
        assert np.mean(a[reported] != bits[reported]) == pytest.approx(error_rate(StrategyId.II, cp), abs=0.005)


class TestEventStatistics:

    def test_monte_carlo_matches_closed_form(self):
        cp = CloneParams(0.854, P_LINEAR)
        counts = simulate_events(cp, 1_000_000, np.random.default_rng(2019))
        freq = counts.frequencies()
        probs = event_probabilities(cp)
        assert freq["correct"] == pytest.approx(probs.p_correct, abs=0.002)
        assert freq["erroneous"] == pytest.approx(probs.p_error, abs=0.002)
        assert freq["total"] == pytest.approx(P_LINEAR**2 / 2, abs=0.002)
        assert counts.no_inference >= 0

    def test_perfect_cloner_never_errs(self):
        counts = simulate_events(CloneParams(1.0), 50_000, np.random.default_rng(5))
        assert counts.erroneous == 0
        assert counts.frequencies()["correct"] == pytest.approx(0.5, abs=0.01)


class TestStrategyOrdering:

    @given(st.floats(min_value=0.51, max_value=1.0), st.floats(min_value=0.01, max_value=0.99))
    def test_guessing_on_loss_costs_more_than_reporting_it(self, F, P):
        cp = CloneParams(F, P)
        assert error_rate(StrategyId.I, cp) > error_rate(StrategyId.II, cp)

    @given(fidelities)
    def test_equal_when_cloning_never_fails(self, F):
        cp = CloneParams(F, 1.0)
        assert error_rate(StrategyId.I, cp) == pytest.approx(error_rate(StrategyId.II, cp))


class TestLearnability:

    @staticmethod
    def outcome_counts(bit, matched, cp, rng, n=100_000):
        _, a, b = clone_and_measure_many(np.full(n, bit, dtype=np.int8), np.full(n, matched), cp, rng)
        return np.bincount(2 * a.astype(np.int64) + b.astype(np.int64), minlength=4)

    @pytest.mark.parametrize("matched", [True, False])
    def test_half_fidelity_output_ignores_the_input(self, matched):
        rng = np.random.default_rng(11)
        cp = CloneParams(0.5)
        table = np.array([self.outcome_counts(bit, matched, cp, rng) for bit in (0, 1)])
        _, p, _, _ = stats.chi2_contingency(table)
        assert p > 0.001

    def test_better_cloner_output_reveals_the_input(self):
        rng = np.random.default_rng(11)
        cp = CloneParams(0.6)
        table = np.array([self.outcome_counts(bit, True, cp, rng) for bit in (0, 1)])
        _, p, _, _ = stats.chi2_contingency(table)
        assert p < 1e-9
