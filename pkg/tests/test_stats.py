import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from cellforge.core import RandomSource, TrackRecord, ValidationError
from cellforge.stats import (
    DisplacementSample,
    centroids_from_labels,
    compute_displacements,
    digamma,
    estimate_area_stats,
    estimate_initial_count,
    estimate_split_probability,
    fit_gamma,
    trigamma,
)


def _label_image_with_mask_sizes(sizes):
    """One wide label image whose row k holds `sizes[k]` pixels of label k+1."""
    sizes = np.asarray(sizes, dtype=np.int64)
    width = int(sizes.max()) + 1
    img = np.zeros((len(sizes), width), dtype=np.uint16)
    cols = np.arange(width)[None, :]
    mask = cols < sizes[:, None]
    img[mask] = (np.arange(len(sizes), dtype=np.uint16) + 1)[:, None].repeat(width, 1)[mask]
    return img


class TestAreaStats:
    def test_two_point_example(self):
        img = _label_image_with_mask_sizes([100, 200])
        mean, std = estimate_area_stats([img])
        assert mean == 150
        assert std == pytest.approx(math.sqrt(5000), abs=1e-9)  # 70.71...

    def test_identical_masks(self):
        img = _label_image_with_mask_sizes([400, 400, 400])
        assert estimate_area_stats([img]) == (400.0, 0.0)

    def test_monte_carlo_recovery(self):
        rng = RandomSource(31)
        sizes = np.clip(np.round(rng.normal(400, 50, 10_000)), 10, None).astype(int)
        mean, std = estimate_area_stats([_label_image_with_mask_sizes(sizes)])
        assert abs(mean - 400) / 400 < 0.02
        assert abs(std - 50) / 50 < 0.02

    def test_masks_counted_per_frame(self):
        # the same label in two frames is two masks
        img = _label_image_with_mask_sizes([100])
        mean, std = estimate_area_stats([img, img])
        assert (mean, std) == (100.0, 0.0)

    def test_permutation_invariant(self):
        rng = RandomSource(7)
        imgs = [
            _label_image_with_mask_sizes(rng.integers(10, 500, 20))
            for _ in range(5)
        ]
        forward = estimate_area_stats(imgs)
        backward = estimate_area_stats(imgs[::-1])
        assert forward == backward

    def test_too_few_masks(self):
        with pytest.raises(ValidationError):
            estimate_area_stats([_label_image_with_mask_sizes([50])])


class TestCentroids:
    def test_single_pixel_mask(self):
        img = np.zeros((10, 20), dtype=np.uint16)
        img[4, 7] = 3
        table = centroids_from_labels([img])
        assert table[(3, 0)] == pytest.approx((7.5 / 20, 4.5 / 10))


class TestDisplacements:
    def test_simple_step(self):
        tracks = [TrackRecord(1, 0, 1, 0)]
        det = {(1, 0): (0.1, 0.1), (1, 1): (0.1, 0.2)}
        samples = compute_displacements(tracks, det)
        assert len(samples) == 1
        assert samples[0].magnitude == pytest.approx(0.1, abs=1e-15)

    def test_stationary_track(self):
        tracks = [TrackRecord(1, 0, 4, 0)]
        det = {(1, t): (0.3, 0.3) for t in range(5)}
        samples = compute_displacements(tracks, det)
        assert [s.magnitude for s in samples] == [0.0] * 4

    def test_known_jumps(self):
        jumps = [(0.01, 0.0), (0.0, 0.02), (0.003, 0.004)]
        pos = [(0.5, 0.5)]
        for dx, dy in jumps:
            pos.append((pos[-1][0] + dx, pos[-1][1] + dy))
        tracks = [TrackRecord(1, 0, 3, 0)]
        det = {(1, t): p for t, p in enumerate(pos)}
        samples = compute_displacements(tracks, det)
        expected = [math.hypot(dx, dy) for dx, dy in jumps]
        for s, e in zip(samples, expected):
            assert abs(s.magnitude - e) < 1e-12

    def test_missing_centroid_warns_and_skips(self):
        tracks = [TrackRecord(1, 0, 2, 0)]
        det = {(1, 0): (0.1, 0.1), (1, 2): (0.2, 0.2)}
        with pytest.warns(UserWarning, match="no centroid"):
            samples = compute_displacements(tracks, det)
        assert samples == []


class TestSpecialFunctions:
    def test_digamma_matches_scipy(self):
        xs = np.concatenate([np.geomspace(1e-3, 9.9, 200), np.geomspace(10, 1e6, 100)])
        for x in xs:
            ref = scipy.special.digamma(x)
            assert abs(digamma(float(x)) - ref) <= 1e-10 * max(1.0, abs(ref))

    def test_trigamma_matches_scipy(self):
        xs = np.concatenate([np.geomspace(1e-3, 9.9, 200), np.geomspace(10, 1e6, 100)])
        for x in xs:
            ref = scipy.special.polygamma(1, x)
            assert abs(trigamma(float(x)) - ref) <= 1e-10 * max(1.0, abs(ref))

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            digamma(0.0)
        with pytest.raises(ValidationError):
            trigamma(-1.0)


class TestGammaFit:
    def test_exponential_recovery(self):
        draws = RandomSource(101).gamma(1.0, 0.05, 100_000)
        shape, scale = fit_gamma(draws)
        assert 0.95 <= shape <= 1.05
        assert abs(scale - 0.05) / 0.05 < 0.05

    def test_gamma_3_recovery(self):
        draws = RandomSource(102).gamma(3.0, 0.02, 100_000)
        shape, scale = fit_gamma(draws)
        assert abs(shape - 3.0) / 3.0 < 0.05
        assert abs(scale - 0.02) / 0.02 < 0.05

    def test_zero_variance_rejected(self):
        with pytest.raises(ValidationError, match="variance"):
            fit_gamma([0.5] * 100)

    def test_too_few_samples(self):
        with pytest.raises(ValidationError, match="30"):
            fit_gamma([0.1, 0.2, 0.3])

    def test_zeros_dropped_with_warning(self):
        draws = list(RandomSource(103).gamma(2.0, 0.1, 1000)) + [0.0, 0.0]
        with pytest.warns(UserWarning, match="non-positive"):
            shape, scale = fit_gamma(draws)
        assert shape > 0 and scale > 0

    def test_scale_equivariance(self):
        draws = RandomSource(104).gamma(2.5, 0.03, 20_000)
        shape_a, scale_a = fit_gamma(draws)
        c = 37.5
        shape_b, scale_b = fit_gamma(draws * c)
        assert abs(shape_a - shape_b) < 1e-6
        assert scale_b == pytest.approx(scale_a * c, rel=1e-9)

    def test_newton_never_below_moment_initializer(self):
        # the returned fit's profile log-likelihood >= the initializer's
        for seed in range(5):
            draws = RandomSource(200 + seed).gamma(0.7 + seed, 0.05, 5000)
            arr = np.asarray(draws)
            mean = arr.mean()
            mean_log = np.log(arr).mean()
            n = arr.size

            def loglik(shape):
                scale = mean / shape
                return n * (
                    (shape - 1) * mean_log - shape - shape * math.log(scale) - math.lgamma(shape)
                )

            shape_hat, _ = fit_gamma(draws)
            shape_mom = mean**2 / arr.var(ddof=1)
            assert loglik(shape_hat) >= loglik(shape_mom) - 1e-9


class TestSplitProbability:
    def test_no_splits(self):
        assert estimate_split_probability([TrackRecord(1, 0, 9, 0)]) == 0.0

    def test_one_division_hand_count(self):
        records = [
            TrackRecord(1, 0, 4, 0),
            TrackRecord(2, 5, 9, 1),
            TrackRecord(3, 5, 9, 1),
        ]
        assert estimate_split_probability(records) == pytest.approx(1 / 15)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            estimate_split_probability([])


class TestInitialCount:
    def test_constant_population(self):
        records = [TrackRecord(k, 0, 9, 0) for k in range(1, 6)]
        assert estimate_initial_count(records, 10) == 5

    def test_population_doubling(self):
        records = [TrackRecord(k, 0, 4, 0) for k in range(1, 5)]
        records += [TrackRecord(k, 5, 9, 0) for k in range(5, 13)]
        assert estimate_initial_count(records, 10) == 6

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=30))
    def test_matches_per_frame_brute_force(self, spans):
        frame_count = 21
        records = [
            TrackRecord(k + 1, min(a, b), max(a, b), 0) for k, (a, b) in enumerate(spans)
        ]
        alive = [
            sum(1 for r in records if r.begin <= f <= r.end) for f in range(frame_count)
        ]
        expected = max(1, math.floor(sum(alive) / frame_count + 0.5))
        assert estimate_initial_count(records, frame_count) == expected
