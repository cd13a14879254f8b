import numpy as np
import pytest

from ctcfst import (
    REFERENCE_CORPUS_GAMMA_MAX,
    SWEEP_BETAS,
    apply_skip,
    classify_blank_frames,
    gamma_max,
    sweep_thresholds,
)


class TestClassifyBlankFrames:
    def test_direct_comparison(self):
        mask = classify_blank_frames([0.99, 0.2, 0.95, 0.5], 0.9)
        assert mask.skip == (True, False, True, False)
        assert mask.reduction_ratio == 0.5

    def test_no_blanks(self):
        mask = classify_blank_frames([0.0, 0.0, 0.0], 0.5)
        assert mask.reduction_ratio == 0.0

    def test_strict_inequality_at_boundary(self):
        mask = classify_blank_frames([0.9990001, 0.999], 0.999)
        assert mask.skip == (True, False)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            classify_blank_frames([0.5], 1.0)
        with pytest.raises(ValueError):
            classify_blank_frames([0.5], 0.0)
        with pytest.raises(ValueError):
            classify_blank_frames([1.2], 0.9)
        with pytest.raises(ValueError):
            classify_blank_frames([-0.1], 0.9)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            probs = rng.uniform(0, 1, size=20)
            lo = classify_blank_frames(probs, 0.3)
            hi = classify_blank_frames(probs, 0.7)
            assert set(np.flatnonzero(hi.skip)) <= set(np.flatnonzero(lo.skip))
            assert hi.reduction_ratio <= lo.reduction_ratio


class TestApplySkip:
    def test_indices_retained(self):
        mask = classify_blank_frames([0.99, 0.2, 0.95, 0.5], 0.9)
        kept = apply_skip(["a", "b", "c", "d"], mask)
        assert kept == [(1, "b"), (3, "d")]

    def test_identity_when_nothing_skipped(self):
        mask = classify_blank_frames([0.1, 0.1], 0.9)
        assert apply_skip([10, 20], mask) == [(0, 10), (1, 20)]

    def test_everything_skipped_is_legal(self):
        mask = classify_blank_frames([0.99, 0.98], 0.9)
        assert apply_skip([1, 2], mask) == []

    def test_length_mismatch(self):
        mask = classify_blank_frames([0.5], 0.9)
        with pytest.raises(ValueError, match="mismatch"):
            apply_skip([1, 2], mask)

    def test_order_preserved(self):
        rng = np.random.default_rng(1)
        probs = rng.uniform(0, 1, size=30)
        mask = classify_blank_frames(probs, 0.5)
        kept = apply_skip(list(range(30)), mask)
        indices = [i for i, _ in kept]
        assert indices == sorted(indices)
        assert all(i == frame for i, frame in kept)


class TestGammaMax:
    def test_arithmetic(self):
        assert gamma_max(5, 20) == 0.75

    def test_no_headroom(self):
        assert gamma_max(7, 7) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            gamma_max(5, 0)
        with pytest.raises(ValueError):
            gamma_max(21, 20)

    def test_reference_constant_documented(self):
        # Published corpus-level value kept as a constant only; nothing in
        # this package recomputes it.
        assert REFERENCE_CORPUS_GAMMA_MAX == 0.7861

    def test_range_property(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            frames = int(rng.integers(1, 50))
            tokens = int(rng.integers(1, frames + 1))
            assert 0.0 <= gamma_max(tokens, frames) < 1.0


class TestSweepThresholds:
    def test_default_grid(self):
        rows = sweep_thresholds([[0.95, 0.5]], [1])
        assert [r.beta for r in rows] == list(SWEEP_BETAS)

    def test_hand_built_single_utterance(self):
        probs = [0.99, 0.2, 0.95, 0.5]
        rows = sweep_thresholds([probs], [2], betas=[0.9])
        (row,) = rows
        assert row.ratio == classify_blank_frames(probs, 0.9).reduction_ratio
        assert row.gamma_max == 0.5

    def test_ratio_non_increasing_in_beta(self):
        rng = np.random.default_rng(3)
        prob_sets = [rng.uniform(0, 1, size=rng.integers(5, 15)) for _ in range(10)]
        counts = [int(rng.integers(1, 5)) for _ in prob_sets]
        rows = sweep_thresholds(prob_sets, counts)
        ratios = [r.ratio for r in rows]
        assert all(b <= a for a, b in zip(ratios, ratios[1:]))
        assert all(0.0 <= r.ratio <= 1.0 for r in rows)

    def test_frame_weighted_aggregation(self):
        # 10 frames all skipped plus 10 frames none skipped: ratio is 0.5
        # regardless of how the utterances are sized.
        rows = sweep_thresholds([[0.99] * 10, [0.1] * 10], [2, 2], betas=[0.9])
        assert rows[0].ratio == 0.5

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            sweep_thresholds([], [], betas=[0.9])
