import numpy as np
import pytest

from salgrad.saliency import (
    SaliencyParams,
    cost,
    gd_step,
    output_error,
    raw_saliency,
    run_saliency,
    terminal_penalty,
)


class TestCost:
    def test_clamp_satisfied_returns_baseline_logit(self):
        o = np.array([0.4, -1.2, 3.0])
        for gamma in (0.0, 1.0, 7.5):
            assert cost(o, o, 2, gamma) == pytest.approx(3.0)

    def test_gamma_zero_ignores_other_outputs(self):
        a = np.array([1.0, 99.0, -5.0])
        o = np.zeros(3)
        assert cost(a, o, 0, 0.0) == 1.0

    def test_hand_computed_value(self):
        # a_l + (gamma/2) * sum_{k != l} (a_k - o_k)^2
        a = np.array([1.5, 2.0])
        o = np.array([1.0, 1.0])
        assert cost(a, o, 0, 2.0) == pytest.approx(2.5)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            cost(np.zeros(3), np.zeros(3), 3, 1.0)


class TestOutputError:
    def test_clamped_start_is_one_hot(self):
        o = np.array([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(output_error(o, o, 1, 5.0), [0.0, 1.0, 0.0])

    def test_gamma_zero_is_one_hot_for_any_logits(self):
        a = np.array([9.0, -3.0])
        np.testing.assert_array_equal(output_error(a, np.zeros(2), 0, 0.0), [1.0, 0.0])

    def test_hand_computed_value(self):
        a = np.array([1.5, 2.0])
        o = np.array([1.0, 1.0])
        np.testing.assert_array_equal(output_error(a, o, 0, 2.0), [1.0, 2.0])


class TestGdStep:
    def test_negative_gradients_are_floored(self):
        x = np.full((3, 3, 3), 0.7)
        grad = -np.ones_like(x)
        np.testing.assert_array_equal(gd_step(x, grad, 0.5), x)

    def test_plain_update(self):
        x = np.full((2, 2, 3), 0.5)
        np.testing.assert_allclose(gd_step(x, np.ones_like(x), 0.1), 0.4)

    def test_lower_clamp_at_zero(self):
        x = np.full((2, 2, 3), 0.05)
        np.testing.assert_array_equal(gd_step(x, np.ones_like(x), 0.1), 0.0)

    def test_nonfinite_gradient_rejected(self):
        x = np.zeros((2, 2, 3))
        grad = np.full_like(x, np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            gd_step(x, grad, 0.1)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            gd_step(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)), 0.1)


class TestRawSaliency:
    def test_unchanged_image_gives_zero_map(self):
        x = np.random.default_rng(0).uniform(0, 1, (4, 4, 3))
        assert np.array_equal(raw_saliency(x, x, 0.0), np.zeros((4, 4)))

    def test_single_pixel_difference_normalizes_to_one(self):
        x0 = np.full((4, 4, 3), 0.5)
        xT = x0.copy()
        xT[1, 2, 0] -= 0.3  # channel mean drops by 0.1
        s = raw_saliency(x0, xT, 0.0)
        assert s[1, 2] == 1.0
        assert s.sum() == 1.0

    def test_full_pruning_gives_zero_map(self):
        x0 = np.full((4, 4, 3), 0.6)
        xT = x0 - 0.2
        assert np.array_equal(raw_saliency(x0, xT, 0.25), np.zeros((4, 4)))

    def test_increase_rejected(self):
        x0 = np.zeros((2, 2, 3))
        with pytest.raises(ValueError, match="flooring"):
            raw_saliency(x0, x0 + 0.1, 0.0)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            SaliencyParams(gamma=-1.0)
        with pytest.raises(ValueError):
            SaliencyParams(epsilon=-0.5)
        with pytest.raises(ValueError):
            SaliencyParams(iterations=0)
        with pytest.raises(ValueError):
            SaliencyParams(theta=-0.1)
        SaliencyParams(epsilon=0.0)  # null update is allowed


class TestRunSaliency:
    def test_zero_epsilon_is_a_null_run(self, small_net):
        x = np.random.default_rng(1).uniform(0, 1, (32, 32, 3))
        run = run_saliency(small_net, x, SaliencyParams(epsilon=0.0, iterations=5))
        assert np.array_equal(run.final_image, x)
        assert np.array_equal(run.raw_map, np.zeros((32, 32)))
        assert len(run.cost_trace) == 6
        assert all(c == pytest.approx(run.cost_trace[0]) for c in run.cost_trace)

    def test_label_and_baseline_frozen_at_start(self, small_net):
        x = np.random.default_rng(2).uniform(0, 1, (32, 32, 3))
        run = run_saliency(small_net, x, SaliencyParams(iterations=3))
        logits = small_net.forward(x)
        assert run.label == int(np.argmax(logits))
        np.testing.assert_array_equal(run.baseline_logits, logits)

    def test_probed_cost_trace_is_nonincreasing(self, small_net):
        x = np.random.default_rng(3).uniform(0, 1, (32, 32, 3))
        run = run_saliency(small_net, x, SaliencyParams(iterations=10))
        trace = np.array(run.cost_trace)
        assert np.all(np.diff(trace) <= 1e-9 * max(1.0, abs(trace[0])))

    def test_pixels_monotonically_decrease(self, small_net):
        x = np.random.default_rng(4).uniform(0, 1, (32, 32, 3))
        run = run_saliency(small_net, x, SaliencyParams(iterations=8))
        assert np.all(run.final_image <= run.initial_image + 1e-12)
        assert np.all(run.raw_map >= 0.0)

    def test_strong_clamp_reduces_logit_drift(self, small_net):
        rng = np.random.default_rng(5)
        wins = 0
        for _ in range(5):
            x = rng.uniform(0, 1, (32, 32, 3))
            clamped = run_saliency(small_net, x, SaliencyParams(gamma=10.0))
            free = run_saliency(small_net, x, SaliencyParams(gamma=0.0))
            a_c = small_net.forward(clamped.final_image)
            a_f = small_net.forward(free.final_image)
            o = clamped.baseline_logits
            drift = lambda a, lbl: np.mean(
                np.abs(np.delete(a - o, lbl))
            )
            if drift(a_c, clamped.label) <= drift(a_f, free.label):
                wins += 1
        assert wins >= 3

    def test_cost_gradient_consistency(self, small_net):
        """Backprop of the output error equals finite differences of the
        full cost along random directions."""
        rng = np.random.default_rng(6)
        x = rng.uniform(0.1, 0.9, (32, 32, 3))
        o = small_net.forward(x)
        label, gamma = int(np.argmax(o)), 2.0
        e = output_error(o, o, label, gamma)
        grad = small_net.backward_to_input(x, e)
        h = 1e-5
        for _ in range(20):
            idx = tuple(rng.integers(0, s) for s in x.shape)
            xp = x.copy()
            xp[idx] += h
            xm = x.copy()
            xm[idx] -= h
            fd = (
                cost(small_net.forward(xp), o, label, gamma)
                - cost(small_net.forward(xm), o, label, gamma)
            ) / (2 * h)
            assert fd == pytest.approx(grad[idx], rel=1e-4, abs=1e-8)


def test_terminal_penalty_matches_direct_computation(small_net):
    x = np.random.default_rng(7).uniform(0, 1, (32, 32, 3))
    run = run_saliency(small_net, x, SaliencyParams(iterations=4))
    a = small_net.forward(run.final_image)
    expected = sum(
        (a[k] - run.baseline_logits[k]) ** 2
        for k in range(len(a))
        if k != run.label
    )
    assert terminal_penalty(small_net, run) == pytest.approx(expected)
