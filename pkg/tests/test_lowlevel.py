import numpy as np
import pytest

from salgrad.color import rgb_to_lab
from salgrad.lowlevel import (
    SuperpixelColorStats,
    build_lowlevel,
    color_distribution,
    contrast_smooth,
    global_contrast,
    refine,
    superpixel_stats,
)
from salgrad.superpixel import SuperpixelMap


def make_stats(colors, positions=None, shape=(10, 10)):
    colors = np.asarray(colors, dtype=np.float64)
    k = len(colors)
    if positions is None:
        positions = np.zeros((k, 2))
    return SuperpixelColorStats(
        colors=colors,
        positions=np.asarray(positions, dtype=np.float64),
        counts=np.ones(k),
        image_shape=shape,
    )


class TestRgbToLab:
    def test_black_is_colorimetric_zero(self):
        lab = rgb_to_lab(np.zeros((1, 1, 3)))
        np.testing.assert_allclose(lab[0, 0], [0.0, 0.0, 0.0], atol=1e-10)

    def test_white_reference(self):
        lab = rgb_to_lab(np.ones((1, 1, 3)))
        assert lab[0, 0, 0] == pytest.approx(100.0, abs=0.01)
        assert abs(lab[0, 0, 1]) < 0.01
        assert abs(lab[0, 0, 2]) < 0.01

    def test_gray_is_on_the_neutral_axis(self):
        lab = rgb_to_lab(np.full((1, 1, 3), 0.5))
        assert abs(lab[0, 0, 1]) < 0.01
        assert abs(lab[0, 0, 2]) < 0.01

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            rgb_to_lab(np.full((1, 1, 3), 1.2))
        with pytest.raises(ValueError):
            rgb_to_lab(np.full((1, 1, 3), -0.1))

    def test_l_range_on_random_input(self):
        rng = np.random.default_rng(0)
        lab = rgb_to_lab(rng.uniform(0, 1, (8, 8, 3)))
        assert lab[..., 0].min() >= 0.0
        assert lab[..., 0].max() <= 100.0


class TestGlobalContrast:
    def test_identical_colors_give_zero(self):
        stats = make_stats([[5, 5, 5]] * 4)
        np.testing.assert_array_equal(global_contrast(stats), np.zeros(4))

    def test_two_superpixels_symmetric(self):
        stats = make_stats([[0, 0, 0], [3, 4, 0]])
        gc = global_contrast(stats)
        assert gc[0] == gc[1] == pytest.approx(25.0)

    def test_three_superpixel_hand_case(self):
        stats = make_stats([[0, 0, 0], [1, 0, 0], [0, 2, 0]])
        np.testing.assert_allclose(global_contrast(stats), [5.0, 6.0, 9.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_bit_exactly(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 51))
        colors = rng.uniform(-50, 100, (k, 3))
        stats = make_stats(colors)
        expected = np.zeros(k)
        for i in range(k):
            total = 0.0
            for j in range(k):
                total += (
                    (colors[i, 0] - colors[j, 0]) ** 2
                    + (colors[i, 1] - colors[j, 1]) ** 2
                    + (colors[i, 2] - colors[j, 2]) ** 2
                )
            expected[i] = total
        assert np.array_equal(global_contrast(stats), expected)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            global_contrast(make_stats(np.empty((0, 3))))


class TestContrastSmooth:
    def test_sigma_zero_limit_is_identity(self):
        stats = make_stats([[0, 0, 0], [10, 0, 0], [0, 20, 0]])
        gc = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(contrast_smooth(gc, stats, sigma_color=0.0), gc)

    def test_equal_colors_average(self):
        stats = make_stats([[5, 5, 5], [5, 5, 5]])
        gc = np.array([0.2, 0.8])
        np.testing.assert_allclose(contrast_smooth(gc, stats), [0.5, 0.5])

    def test_bounded_by_input_range(self):
        rng = np.random.default_rng(1)
        stats = make_stats(rng.uniform(0, 100, (12, 3)))
        gc = rng.uniform(0, 50, 12)
        out = contrast_smooth(gc, stats)
        assert out.min() >= gc.min() - 1e-12
        assert out.max() <= gc.max() + 1e-12


class TestColorDistribution:
    def test_single_superpixel_is_fully_compact(self):
        stats = make_stats([[0, 0, 0]], positions=[[5, 5]])
        np.testing.assert_allclose(color_distribution(stats), [1.0])

    def test_scattered_same_color_scores_below_compact(self):
        compact = make_stats(
            [[0, 0, 0], [0, 0, 0]], positions=[[5, 5], [5, 6]], shape=(10, 10)
        )
        scattered = make_stats(
            [[0, 0, 0], [0, 0, 0]], positions=[[0, 0], [9, 9]], shape=(10, 10)
        )
        assert color_distribution(scattered)[0] < color_distribution(compact)[0]

    def test_three_superpixel_weighted_variance(self):
        colors = np.array([[0.0, 0, 0], [5.0, 0, 0], [80.0, 0, 0]])
        positions = np.array([[0.0, 0.0], [4.0, 0.0], [9.0, 9.0]])
        shape = (10, 10)
        sigma_c = 10.0
        stats = make_stats(colors, positions, shape)
        cue = color_distribution(stats, sigma_color=sigma_c)
        # independent direct evaluation of the weighted variance
        expected = np.empty(3)
        for i in range(3):
            w = np.array(
                [
                    np.exp(-np.sum((colors[i] - colors[j]) ** 2) / (2 * sigma_c**2))
                    for j in range(3)
                ]
            )
            w = w / w.sum()
            mu = (w[:, None] * positions).sum(axis=0)
            var = (w * ((positions - mu) ** 2).sum(axis=1)).sum()
            expected[i] = np.exp(-var / (0.25 * np.hypot(*shape)) ** 2)
        np.testing.assert_allclose(cue, expected)


class TestBuildLowlevel:
    def _sp_three(self):
        labels = np.array([[0, 1, 2]], dtype=np.int64)
        return SuperpixelMap(labels=labels, counts=np.array([1, 1, 1]), k=3)

    def test_constant_features_map_to_one_plus_alpha(self):
        sp = self._sp_three()
        out = build_lowlevel([2.0, 2.0, 2.0], [0.5, 0.5, 0.5], 0.3, sp)
        np.testing.assert_allclose(out, 1.3)

    def test_full_span_hits_both_endpoints(self):
        sp = self._sp_three()
        out = build_lowlevel([0.0, 0.5, 1.0], [1.0, 1.0, 1.0], 0.3, sp)
        assert out.min() == pytest.approx(0.3)
        assert out.max() == pytest.approx(1.3)

    def test_midpoint_affine_value(self):
        sp = self._sp_three()
        out = build_lowlevel([0.0, 0.5, 1.0], [1.0, 1.0, 1.0], 0.3, sp)
        assert out[0, 1] == pytest.approx(0.8)

    def test_alpha_out_of_range_rejected(self):
        sp = self._sp_three()
        for alpha in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError, match="alpha"):
                build_lowlevel([0.0, 0.5, 1.0], [1.0, 1.0, 1.0], alpha, sp)

    def test_range_guarantee_on_random_features(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 5, (6, 6)).astype(np.int64)
        for lbl in range(5):  # ensure every label occurs
            labels[0, lbl] = lbl
        sp = SuperpixelMap(
            labels=labels, counts=np.bincount(labels.ravel(), minlength=5), k=5
        )
        out = build_lowlevel(rng.uniform(0, 9, 5), rng.uniform(0, 1, 5), 0.3, sp)
        assert out.min() >= 0.3 - 1e-12
        assert out.max() <= 1.3 + 1e-12


class TestRefine:
    def test_unit_lowlevel_is_identity_up_to_normalization(self):
        rng = np.random.default_rng(4)
        s_bar = rng.uniform(0, 0.7, (5, 5))
        out = refine(s_bar, np.ones_like(s_bar), 0.0)
        np.testing.assert_allclose(out, s_bar / s_bar.max())

    def test_zero_map_is_absorbing(self):
        s_l = np.full((4, 4), 1.3)
        assert np.array_equal(refine(np.zeros((4, 4)), s_l, 0.0), np.zeros((4, 4)))

    def test_two_region_hand_case(self):
        s_bar = np.array([[0.2, 0.8]])
        s_l = np.array([[0.5, 1.25]])
        np.testing.assert_allclose(refine(s_bar, s_l, 0.0), [[0.1, 1.0]])

    def test_cannot_create_saliency(self):
        rng = np.random.default_rng(5)
        s_bar = rng.uniform(0, 1, (6, 6))
        s_bar[2, 3] = 0.0
        out = refine(s_bar, rng.uniform(0.3, 1.3, (6, 6)), 0.0)
        assert out[2, 3] == 0.0

    def test_alpha_protection_boosts_endorsed_pixels(self):
        rng = np.random.default_rng(6)
        s_bar = rng.uniform(0, 1, (6, 6))
        s_l = rng.uniform(0.3, 1.3, (6, 6))
        product = s_bar * s_l
        endorsed = s_l >= 1.0
        assert np.all(product[endorsed] >= s_bar[endorsed])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            refine(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_output_in_unit_range(self):
        rng = np.random.default_rng(7)
        out = refine(rng.uniform(0, 1, (8, 8)), rng.uniform(0.3, 1.3, (8, 8)), 0.05)
        assert out.min() >= 0.0
        assert out.max() <= 1.0


def test_superpixel_stats_aggregation():
    from salgrad.superpixel import slic

    rng = np.random.default_rng(8)
    img = rng.uniform(0, 1, (12, 12, 3))
    sp = slic(img, 4)
    lab = rgb_to_lab(img)
    stats = superpixel_stats(lab, sp)
    assert np.array_equal(stats.counts, sp.counts.astype(float))
    for lbl in range(sp.k):
        mask = sp.labels == lbl
        np.testing.assert_allclose(stats.colors[lbl], lab[mask].mean(axis=0))
        yy, xx = np.nonzero(mask)
        np.testing.assert_allclose(stats.positions[lbl], [yy.mean(), xx.mean()])
