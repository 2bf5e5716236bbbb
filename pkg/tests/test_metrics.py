"""Full-reference quality metrics and their serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from lapvqa.frameio import Frame, LumaPlane, VideoClip, luma_planes
from lapvqa.metrics import Metric, MetricScore, psnr, score_clip, ssim, vif
from lapvqa.synth import apply_awgn, apply_defocus_blur


def _rand_frame(seed, h=48, w=64):
    rng = np.random.default_rng(seed)
    return Frame(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def _rand_plane(seed, h=48, w=64):
    rng = np.random.default_rng(seed)
    return LumaPlane(rng.uniform(0.0, 255.0, size=(h, w)))


def _rand_clip(seed, n=2, h=48, w=64):
    rng = np.random.default_rng(seed)
    return VideoClip(rng.integers(0, 256, size=(n, h, w, 3), dtype=np.uint8), 25.0)


class TestPsnr:
    def test_identical_frames_are_infinite(self):
        f = _rand_frame(0)
        assert psnr(f, f) == math.inf

    def test_uniform_plus_one_anchor(self):
        # MSE = 1 exactly -> 20 log10(255) = 48.1308...
        a = Frame(np.full((16, 16, 3), 100, dtype=np.uint8))
        b = Frame(np.full((16, 16, 3), 101, dtype=np.uint8))
        assert psnr(a, b) == pytest.approx(20.0 * math.log10(255.0), abs=1e-12)

    def test_symmetric(self):
        a, b = _rand_frame(1), _rand_frame(2)
        assert psnr(a, b) == pytest.approx(psnr(b, a), abs=1e-12)

    def test_matches_direct_mse_formula(self):
        a, b = _rand_frame(3), _rand_frame(4)
        mse = np.mean(
            (a.pixels.astype(np.float64) - b.pixels.astype(np.float64)) ** 2
        )
        assert psnr(a, b) == pytest.approx(10.0 * math.log10(255.0**2 / mse), rel=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            psnr(_rand_frame(5, h=8, w=8), _rand_frame(6, h=8, w=9))

    def test_more_noise_means_lower_psnr(self):
        clip = VideoClip(np.full((1, 32, 32, 3), 128, dtype=np.uint8), 25.0)
        mild = apply_awgn(clip, 0.001, seed=1)
        harsh = apply_awgn(clip, 0.02, seed=1)
        assert psnr(clip.frame(0), harsh.frame(0)) < psnr(clip.frame(0), mild.frame(0))


class TestSsim:
    def test_self_similarity_is_exactly_one(self):
        p = _rand_plane(7)
        assert ssim(p, p) == 1.0

    def test_matches_reference_implementation(self):
        ref = _rand_plane(8, h=64, w=64)
        noisy = LumaPlane(
            np.clip(ref.values + np.random.default_rng(9).normal(0, 12, ref.values.shape),
                    0.0, 255.0)
        )
        want = structural_similarity(
            ref.values, noisy.values, win_size=11, gaussian_weights=True,
            sigma=1.5, use_sample_covariance=False, data_range=255.0,
        )
        assert ssim(ref, noisy) == pytest.approx(want, abs=2e-7)

    def test_degradation_lowers_score(self):
        clip = _rand_clip(10, n=1)
        blurred = apply_defocus_blur(clip, 2.0, 13)
        ref_l = LumaPlane(luma_planes(clip)[0])
        deg_l = LumaPlane(luma_planes(blurred)[0])
        assert ssim(ref_l, deg_l) < 0.95

    def test_minimum_size_enforced(self):
        small = LumaPlane(np.zeros((10, 40)))
        with pytest.raises(ValueError):
            ssim(small, small)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ssim(_rand_plane(11), _rand_plane(12, w=65))


class TestVif:
    def test_self_fidelity_is_one(self):
        p = _rand_plane(13, h=96, w=96)
        assert vif(p, p) == pytest.approx(1.0, abs=1e-6)

    def test_noise_monotonically_erodes_fidelity(self):
        clip = _rand_clip(14, n=1, h=96, w=96)
        smoothed = apply_defocus_blur(clip, 1.0, 7)  # content-like base
        ref = LumaPlane(luma_planes(smoothed)[0])
        scores = []
        for var in (0.0005, 0.004, 0.02):
            noisy = apply_awgn(smoothed, var, seed=15)
            scores.append(vif(ref, LumaPlane(luma_planes(noisy)[0])))
        assert scores[0] > scores[1] > scores[2]
        assert all(0.0 <= s <= 1.05 for s in scores)

    def test_minimum_size_enforced(self):
        small = LumaPlane(np.zeros((31, 99)))
        with pytest.raises(ValueError):
            vif(small, small)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            vif(_rand_plane(16, h=64, w=64), _rand_plane(17, h=64, w=65))


class TestScoreClip:
    def test_mean_of_per_frame_values(self):
        ref = _rand_clip(18, n=3)
        dist = apply_awgn(ref, 0.002, seed=19)
        score = score_clip(ref, dist, Metric.PSNR)
        assert score.metric is Metric.PSNR
        assert len(score.per_frame) == 3
        assert score.video_score == pytest.approx(float(np.mean(score.per_frame)))
        for i in range(3):
            assert score.per_frame[i] == pytest.approx(
                psnr(ref.frame(i), dist.frame(i))
            )

    def test_identical_clips_propagate_infinity(self):
        clip = _rand_clip(20)
        score = score_clip(clip, clip, Metric.PSNR)
        assert score.video_score == math.inf
        assert all(v == math.inf for v in score.per_frame)

    def test_geometry_mismatch_rejected(self):
        with pytest.raises(ValueError):
            score_clip(_rand_clip(21), _rand_clip(22, h=40), Metric.PSNR)
        with pytest.raises(ValueError):
            score_clip(_rand_clip(23, n=2), _rand_clip(24, n=3), Metric.SSIM)

    def test_ssim_and_vif_paths(self):
        ref = _rand_clip(25, n=2, h=64, w=64)
        dist = apply_defocus_blur(ref, 1.5, 11)
        s = score_clip(ref, dist, Metric.SSIM)
        v = score_clip(ref, dist, Metric.VIF)
        assert 0.0 < s.video_score < 1.0
        assert 0.0 <= v.video_score < 1.0

    def test_vif_size_floor_applies_to_clips(self):
        ref = _rand_clip(26, h=31, w=64)
        with pytest.raises(ValueError):
            score_clip(ref, ref, Metric.VIF)


class TestScoreSerialization:
    def test_round_trip_finite(self):
        score = MetricScore(Metric.SSIM, (0.5, 0.75), 0.625)
        vid, back = MetricScore.from_json_obj(score.to_json_obj("BL01_smoke_l1"))
        assert vid == "BL01_smoke_l1"
        assert back == score

    def test_round_trip_infinite(self):
        score = MetricScore(Metric.PSNR, (math.inf, 41.5), math.inf)
        obj = score.to_json_obj("v")
        assert obj["video_score"] is None
        assert obj["video_score_infinite"] is True
        assert obj["per_frame"] == [None, 41.5]
        assert obj["infinite_frames"] == [0]
        _, back = MetricScore.from_json_obj(obj)
        assert back == score

    def test_disagreeing_infinity_flags_rejected(self):
        obj = MetricScore(Metric.PSNR, (40.0,), 40.0).to_json_obj("v")
        obj["video_score_infinite"] = True
        with pytest.raises(ValueError):
            MetricScore.from_json_obj(obj)

    def test_malformed_object_rejected(self):
        with pytest.raises(ValueError):
            MetricScore.from_json_obj({"metric": "psnr"})
        obj = MetricScore(Metric.PSNR, (40.0,), 40.0).to_json_obj("v")
        obj["metric"] = "nope"
        with pytest.raises(ValueError):
            MetricScore.from_json_obj(obj)


class TestIdentityProperties:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_any_clip_scores_itself_perfectly(self, seed):
        rng = np.random.default_rng(seed)
        data = rng.integers(0, 256, size=(1, 32, 32, 3), dtype=np.uint8)
        clip = VideoClip(data, 25.0)
        assert score_clip(clip, clip, Metric.PSNR).video_score == math.inf
        assert score_clip(clip, clip, Metric.SSIM).video_score == 1.0
        assert score_clip(clip, clip, Metric.VIF).video_score == pytest.approx(
            1.0, abs=1e-6
        )
