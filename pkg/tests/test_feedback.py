"""The five feedback operators."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopsim import (ConfigurationError, FeedbackConfig, GroupParams,
                     apply_feature_feedback, apply_individual_feedback,
                     apply_sampling_feedback, gate_dataset_append,
                     init_population, shifted_click_probability)


class ScriptedRNG:
    """Stand-in generator returning a scripted sequence of draws."""

    def __init__(self, uniforms=(), normals=()):
        self._uniforms = list(uniforms)
        self._normals = list(normals)

    def random(self):
        return self._uniforms.pop(0)

    def standard_normal(self):
        return self._normals.pop(0)

    def normal(self, mu, sigma):
        return mu + sigma * self.standard_normal()


def two_group_population(n1=496, n2=504, deterministic=False):
    sigma = 0.0 if deterministic else 0.15
    groups = {"G1": GroupParams(mu_theta=0.7, sigma_theta=sigma),
              "G2": GroupParams(mu_theta=0.3, sigma_theta=sigma)}
    return init_population(groups, {"G1": n1, "G2": n2},
                           np.random.default_rng(0))


class TestSamplingFeedback:
    def test_positive_decision_is_identity(self):
        pop = two_group_population(5, 5)
        ids, thetas = pop.ids.copy(), pop.theta.copy()
        apply_sampling_feedback(pop, 2, 1, ScriptedRNG())
        assert np.array_equal(pop.ids, ids)
        assert np.array_equal(pop.theta, thetas)

    def test_replacement_group_probability_boundary(self):
        # counts 496/504: uniform just under 0.496 picks G1, just over picks G2
        pop = two_group_population(deterministic=True)
        apply_sampling_feedback(pop, 0, 0, ScriptedRNG(uniforms=[0.49599]))
        assert pop.group_idx[0] == 0
        pop = two_group_population(deterministic=True)
        apply_sampling_feedback(pop, 0, 0, ScriptedRNG(uniforms=[0.49601]))
        assert pop.group_idx[0] == 1

    def test_counts_taken_before_removal(self):
        # replacing the G2 member at slot 999: with pre-removal counts the
        # G1 probability is 496/1000 = 0.4960, so 0.4962 must pick G2; a
        # post-removal computation (496/999 = 0.4965) would pick G1
        pop = two_group_population(deterministic=True)
        apply_sampling_feedback(pop, 999, 0, ScriptedRNG(uniforms=[0.4962]))
        assert pop.group_idx[999] == 1

    def test_absorbing_state(self):
        groups = {"G1": GroupParams(mu_theta=0.7, sigma_theta=0.0),
                  "G2": GroupParams(mu_theta=0.3, sigma_theta=0.0)}
        pop = init_population(groups, {"G1": 3, "G2": 1}, np.random.default_rng(0))
        pop.group_idx[3] = 0  # force all-G1
        for u in (0.0, 0.5, 0.999):
            apply_sampling_feedback(pop, 0, 0, ScriptedRNG(uniforms=[u]))
            assert pop.group_idx[0] == 0

    def test_preserves_size_and_touches_one_slot(self):
        pop = two_group_population(10, 10)
        before = pop.theta.copy()
        apply_sampling_feedback(pop, 4, 0,
                                ScriptedRNG(uniforms=[0.3], normals=[0.5, 0.0]))
        assert pop.size == 20
        changed = np.flatnonzero(pop.theta != before)
        assert list(changed) == [4]


class TestIndividualFeedback:
    def test_exact_convex_combinations(self):
        assert apply_individual_feedback(0.6, 1, 0.1) == pytest.approx(0.64)
        assert apply_individual_feedback(0.6, 0, 0.1) == pytest.approx(0.54)

    def test_repeated_application_matches_closed_form(self):
        alpha, theta0 = 0.05, 0.4
        theta = theta0
        for k in range(1, 200):
            theta = apply_individual_feedback(theta, 1, alpha)
            closed = 1 - (1 - alpha) ** k * (1 - theta0)
            assert theta == pytest.approx(closed, abs=1e-12)
        assert theta > 0.99  # monotone approach to full interest

    @settings(max_examples=200, deadline=None)
    @given(theta=st.floats(0, 1), d=st.integers(0, 1),
           alpha=st.floats(0.001, 1.0))
    def test_maps_unit_interval_into_itself(self, theta, d, alpha):
        assert 0.0 <= apply_individual_feedback(theta, d, alpha) <= 1.0


class TestFeatureFeedback:
    def test_exact_updates(self):
        assert apply_feature_feedback(0.3, 1, 0.1) == pytest.approx(0.37)
        assert apply_feature_feedback(0.3, 0, 0.1) == pytest.approx(0.27)

    def test_ema_fixed_point_monte_carlo(self):
        # theta = 0.5 with the biased start x0 = 0.3; terminal mean near theta
        finals = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = 0.3
            for _ in range(5000):
                x = apply_feature_feedback(x, int(rng.random() < 0.5), 0.1)
            finals.append(x)
        assert abs(np.mean(finals) - 0.5) < 0.03

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(0, 1), y=st.integers(0, 1), beta=st.floats(0.001, 1.0))
    def test_maps_unit_interval_into_itself(self, x, y, beta):
        assert 0.0 <= apply_feature_feedback(x, y, beta) <= 1.0


class TestDatasetGate:
    def test_partial_feedback_blocks_negative_decisions(self):
        assert gate_dataset_append(0, ml_model_enabled=True) is False

    def test_positive_decisions_pass(self):
        assert gate_dataset_append(1, ml_model_enabled=True) is True

    def test_open_loop_appends_unconditionally(self):
        assert gate_dataset_append(0, ml_model_enabled=False) is True
        assert gate_dataset_append(1, ml_model_enabled=False) is True


class TestOutcomeShift:
    def test_additive_shift(self):
        assert shifted_click_probability(0.5, 1, 0.2) == pytest.approx(0.7)
        assert shifted_click_probability(0.5, 0, 0.2) == pytest.approx(0.3)

    def test_clamped(self):
        assert shifted_click_probability(0.9, 1, 0.2) == 1.0
        assert shifted_click_probability(0.1, 0, 0.2) == 0.0

    def test_zero_delta_identity(self):
        for d in (0, 1):
            assert shifted_click_probability(0.5, d, 0.0) == 0.5

    @settings(max_examples=200, deadline=None)
    @given(p1=st.floats(0, 1), p2=st.floats(0, 1), delta=st.floats(0, 1))
    def test_monotone_in_p_and_d(self, p1, p2, delta):
        if p1 <= p2:
            assert (shifted_click_probability(p1, 1, delta)
                    <= shifted_click_probability(p2, 1, delta))
        for p in (p1, p2):
            assert (shifted_click_probability(p, 0, delta)
                    <= shifted_click_probability(p, 1, delta))


class TestComposition:
    def test_disjoint_state_operators_commute(self):
        # individual acts on theta, feature on x, the gate on the dataset:
        # applying any two in either order gives bit-identical state
        theta, x, d, y = 0.61, 0.44, 1, 1
        a_theta = apply_individual_feedback(theta, d, 0.05)
        a_x = apply_feature_feedback(x, y, 0.1)
        b_x = apply_feature_feedback(x, y, 0.1)
        b_theta = apply_individual_feedback(theta, d, 0.05)
        assert (a_theta, a_x) == (b_theta, b_x)

    def test_config_accepts_any_subset(self):
        for mask in range(32):
            cfg = FeedbackConfig(
                sampling_enabled=bool(mask & 1),
                individual_enabled=bool(mask & 2),
                feature_enabled=bool(mask & 4),
                ml_model_enabled=bool(mask & 8),
                outcome_enabled=bool(mask & 16),
            )
            cfg.validate()
            assert len(cfg.enabled_loops()) == bin(mask).count("1")

    def test_parameter_validation(self):
        with pytest.raises(ConfigurationError):
            FeedbackConfig(alpha=0.0).validate()
        with pytest.raises(ConfigurationError):
            FeedbackConfig(beta=1.5).validate()
        with pytest.raises(ConfigurationError):
            FeedbackConfig(delta=-0.1).validate()
        with pytest.raises(ConfigurationError):
            FeedbackConfig(feature_update="nope").validate()
