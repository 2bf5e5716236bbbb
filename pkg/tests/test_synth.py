"""Distortion operators, severity tables, and corpus assembly."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from lapvqa.frameio import VideoClip, read_clip
from lapvqa.references import DEFAULT_STYLES, make_reference_clip
from lapvqa.synth import (
    LEVELS,
    DistortionKind,
    DistortionSpec,
    IlluminationMask,
    LevelTableError,
    ReferenceEntry,
    apply_awgn,
    apply_defocus_blur,
    apply_distortion,
    apply_motion_blur,
    apply_smoke,
    apply_uneven_illumination,
    default_level_table,
    gaussian_kernel_1d,
    gen_smoke_clip,
    make_illumination_mask,
    motion_kernel,
    read_manifest,
    resolve_illumination_params,
    synthesize_corpus,
)


def _rand_clip(seed, n=2, h=20, w=24, fps=25.0):
    rng = np.random.default_rng(seed)
    return VideoClip(rng.integers(0, 256, size=(n, h, w, 3), dtype=np.uint8), fps)


def _quantize_ref(x):
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


class TestGaussianKernel:
    def test_normalized_and_symmetric(self):
        k = gaussian_kernel_1d(1.5, 11)
        assert k.shape == (11,)
        assert abs(k.sum() - 1.0) < 1e-12
        assert np.allclose(k, k[::-1])
        assert k.argmax() == 5

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            gaussian_kernel_1d(0.0, 7)
        with pytest.raises(ValueError):
            gaussian_kernel_1d(1.0, 6)
        with pytest.raises(ValueError):
            gaussian_kernel_1d(1.0, 1)

    def test_matches_sampled_gaussian(self):
        sigma, ksize = 2.0, 13
        x = np.arange(-6, 7, dtype=np.float64)
        dens = np.exp(-(x**2) / (2 * sigma**2))
        assert np.allclose(gaussian_kernel_1d(sigma, ksize), dens / dens.sum())


class TestDefocusBlur:
    def test_matches_full_2d_convolution(self):
        # independent oracle: outer-product kernel + direct 2-D convolution
        clip = _rand_clip(0, n=1)
        sigma, ksize = 1.2, 9
        k1 = gaussian_kernel_1d(sigma, ksize)
        k2 = np.outer(k1, k1)
        expected = np.empty_like(clip.data, dtype=np.float64)
        for ch in range(3):
            expected[0, :, :, ch] = ndimage.convolve(
                clip.data[0, :, :, ch].astype(np.float64), k2, mode="nearest"
            )
        out = apply_defocus_blur(clip, sigma, ksize)
        assert np.array_equal(out.data, _quantize_ref(expected))

    def test_kernel_larger_than_frame_rejected(self):
        with pytest.raises(ValueError):
            apply_defocus_blur(_rand_clip(1, h=8, w=8), 3.0, 19)

    def test_smooths_variance_down(self):
        clip = _rand_clip(2, n=1, h=32, w=32)
        out = apply_defocus_blur(clip, 2.0, 13)
        assert out.data.astype(float).var() < clip.data.astype(float).var()


class TestMotionKernel:
    def test_length_one_is_identity(self):
        assert np.array_equal(motion_kernel(1, 37.0), np.ones((1, 1)))

    def test_horizontal_box(self):
        k = motion_kernel(5, 0.0)
        assert k.shape == (1, 5)
        assert np.allclose(k, np.full((1, 5), 0.2))

    def test_fractional_box_endpoints(self):
        k = motion_kernel(4, 0.0)
        assert np.allclose(k, np.array([[0.5, 1, 1, 1, 0.5]]) / 4.0)

    def test_vertical_is_transpose_of_horizontal(self):
        assert np.allclose(motion_kernel(7, 90.0), motion_kernel(7, 0.0).T)

    def test_length_below_one_rejected(self):
        with pytest.raises(ValueError):
            motion_kernel(0.5, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(
        length=st.floats(1.0, 25.0, allow_nan=False),
        angle=st.floats(-180.0, 180.0, allow_nan=False),
    )
    def test_always_a_unit_mass_nonnegative_kernel(self, length, angle):
        k = motion_kernel(length, angle)
        assert (k >= 0).all()
        assert abs(k.sum() - 1.0) < 1e-9

    def test_diagonal_energy_concentrated_on_a_diagonal(self):
        k = motion_kernel(9, 45.0)
        assert k.shape[0] == k.shape[1]
        main = float(np.trace(k))
        anti = float(np.trace(k[::-1]))
        assert max(main, anti) > 0.5
        # the line occupies one diagonal, not both
        assert min(main, anti) < 0.2


class TestMotionBlurApply:
    def test_length_one_returns_input_unchanged(self):
        clip = _rand_clip(3)
        out = apply_motion_blur(clip, 1, 0.0)
        assert np.array_equal(out.data, clip.data)

    def test_horizontal_matches_1d_convolution(self):
        clip = _rand_clip(4, n=1)
        k = motion_kernel(5, 0.0)[0]
        expected = ndimage.convolve1d(
            clip.data.astype(np.float64), k, axis=2, mode="nearest"
        )
        out = apply_motion_blur(clip, 5, 0.0)
        assert np.array_equal(out.data, _quantize_ref(expected))

    def test_rotated_matches_2d_convolution(self):
        clip = _rand_clip(5, n=1)
        kern = motion_kernel(7, 30.0)
        expected = np.empty((1, clip.height, clip.width, 3))
        for ch in range(3):
            expected[0, :, :, ch] = ndimage.convolve(
                clip.data[0, :, :, ch].astype(np.float64), kern, mode="nearest"
            )
        out = apply_motion_blur(clip, 7, 30.0)
        assert np.array_equal(out.data, _quantize_ref(expected))


class TestAwgn:
    def test_zero_variance_identity(self):
        clip = _rand_clip(6)
        out = apply_awgn(clip, 0.0, seed=5)
        assert np.array_equal(out.data, clip.data)

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            apply_awgn(_rand_clip(7), -0.1, seed=0)

    def test_realized_std_matches_request(self):
        # mid-gray frame keeps clamping negligible
        clip = VideoClip(np.full((2, 64, 64, 3), 128, dtype=np.uint8), 25.0)
        variance = 0.002
        out = apply_awgn(clip, variance, seed=11)
        resid = out.data.astype(np.float64) - 128.0
        assert abs(resid.std() - math.sqrt(variance) * 255.0) < 0.6

    def test_deterministic_per_seed(self):
        clip = _rand_clip(8)
        a = apply_awgn(clip, 0.01, seed=3)
        b = apply_awgn(clip, 0.01, seed=3)
        c = apply_awgn(clip, 0.01, seed=4)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_frame_substreams_are_position_keyed(self):
        clip = _rand_clip(9, n=3)
        single = VideoClip(clip.data[:1].copy(), clip.fps)
        full = apply_awgn(clip, 0.005, seed=21)
        head = apply_awgn(single, 0.005, seed=21)
        assert np.array_equal(full.data[0], head.data[0])
        assert not np.array_equal(full.data[1], full.data[0])


class TestIllumination:
    def test_gain_one_inside_radius(self):
        mask = make_illumination_mask(40, 30, center=(20.0, 15.0), radius=8.0,
                                      falloff=5.0, floor=0.2)
        assert mask.gain[15, 20] == 1.0
        assert mask.gain[15, 24] == 1.0  # d=4 < radius

    def test_falloff_value_at_one_sigma(self):
        floor, falloff, radius = 0.25, 6.0, 5.0
        mask = make_illumination_mask(64, 48, center=(32.0, 24.0), radius=radius,
                                      falloff=falloff, floor=floor)
        # pixel at distance radius + falloff along +x
        g = mask.gain[24, 32 + int(radius + falloff)]
        assert abs(g - (floor + (1 - floor) * math.exp(-0.5))) < 1e-12

    def test_gain_monotone_decreasing_with_distance(self):
        mask = make_illumination_mask(80, 8, center=(0.0, 4.0), radius=6.0,
                                      falloff=10.0, floor=0.1)
        row = mask.gain[4]
        assert (np.diff(row) <= 1e-15).all()

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            make_illumination_mask(8, 8, (4, 4), radius=0.0, falloff=1.0, floor=0.1)
        with pytest.raises(ValueError):
            make_illumination_mask(8, 8, (4, 4), radius=1.0, falloff=0.0, floor=0.1)
        with pytest.raises(ValueError):
            make_illumination_mask(8, 8, (4, 4), radius=1.0, falloff=1.0, floor=1.0)
        with pytest.raises(ValueError):
            IlluminationMask(np.full((4, 4), 1.5))

    def test_default_levels_darken_pointwise(self):
        table = default_level_table()[DistortionKind.UNEVEN_ILLUMINATION]
        w, h = 64, 48
        gains = []
        for params in table:
            mask = make_illumination_mask(w, h, **resolve_illumination_params(params, w, h))
            gains.append(mask.gain)
        for lighter, darker in zip(gains, gains[1:]):
            assert (darker <= lighter + 1e-12).all()
            assert darker.mean() < lighter.mean()

    def test_apply_is_pointwise_multiply(self):
        clip = _rand_clip(10, n=1, h=12, w=16)
        mask = make_illumination_mask(16, 12, (5.0, 4.0), 3.0, 4.0, 0.3)
        out = apply_uneven_illumination(clip, mask)
        expected = _quantize_ref(clip.data.astype(np.float64) * mask.gain[None, :, :, None])
        assert np.array_equal(out.data, expected)

    def test_geometry_mismatch_rejected(self):
        clip = _rand_clip(11)
        mask = make_illumination_mask(99, 7, (5.0, 3.0), 2.0, 2.0, 0.2)
        with pytest.raises(ValueError):
            apply_uneven_illumination(clip, mask)

    def test_resolve_uses_min_dimension_and_default_center(self):
        params = {"radius_frac": 0.5, "floor": 0.2, "falloff_frac": 0.25}
        got = resolve_illumination_params(params, width=100, height=60)
        assert got["center"] == pytest.approx((100 / 3, 20.0))
        assert got["radius"] == 30.0
        assert got["falloff"] == 15.0
        assert got["floor"] == 0.2


class TestSmoke:
    def test_generated_field_shape_and_darkness(self):
        smoke = gen_smoke_clip(48, 32, 4, seed=9)
        assert smoke.data.shape == (4, 32, 48, 3)
        # grayscale: all channels identical
        assert np.array_equal(smoke.data[..., 0], smoke.data[..., 1])
        assert np.array_equal(smoke.data[..., 0], smoke.data[..., 2])
        gray = smoke.data[..., 0]
        assert np.quantile(gray, 0.10) < 32  # mostly-dark background
        assert gray.max() > 200  # bright plumes exist

    def test_generation_deterministic(self):
        a = gen_smoke_clip(32, 32, 3, seed=5)
        b = gen_smoke_clip(32, 32, 3, seed=5)
        assert np.array_equal(a.data, b.data)

    def test_minimum_geometry_enforced(self):
        with pytest.raises(ValueError):
            gen_smoke_clip(8, 32, 2, seed=0)

    def test_black_smoke_is_identity(self):
        clip = _rand_clip(12)
        black = VideoClip(np.zeros_like(clip.data), clip.fps)
        out = apply_smoke(clip, black, opacity=0.85)
        assert np.array_equal(out.data, clip.data)

    def test_screen_blend_formula(self):
        clip = _rand_clip(13, n=1, h=20, w=20)
        smoke = _rand_clip(14, n=1, h=20, w=20)
        op = 0.6
        a = clip.data.astype(np.float64) / 255.0
        b = smoke.data.astype(np.float64) / 255.0
        expected = _quantize_ref((1.0 - (1.0 - a) * (1.0 - op * b)) * 255.0)
        out = apply_smoke(clip, smoke, op)
        assert np.array_equal(out.data, expected)

    def test_opacity_pointwise_monotone(self):
        clip = _rand_clip(15, n=1, h=24, w=24)
        smoke = gen_smoke_clip(24, 24, 1, seed=3)
        prev = clip.data
        for op in (0.25, 0.45, 0.65, 0.85):
            cur = apply_smoke(clip, smoke, op).data
            assert (cur.astype(int) >= prev.astype(int)).all()
            prev = cur

    def test_overlay_loops_to_content_length(self):
        clip = _rand_clip(16, n=5, h=20, w=20)
        smoke = _rand_clip(17, n=2, h=20, w=20)
        out = apply_smoke(clip, smoke, 0.5)
        # frame 2 reuses smoke frame 0, frame 3 smoke frame 1
        for i in (2, 3):
            a = clip.data[i] / 255.0
            b = smoke.data[i % 2] / 255.0
            expected = _quantize_ref((1.0 - (1.0 - a) * (1.0 - 0.5 * b)) * 255.0)
            assert np.array_equal(out.data[i], expected)

    def test_bad_opacity_and_size_rejected(self):
        clip = _rand_clip(18)
        with pytest.raises(ValueError):
            apply_smoke(clip, clip, 1.5)
        with pytest.raises(ValueError):
            apply_smoke(clip, _rand_clip(19, h=8, w=8), 0.5)


class TestSpecAndTable:
    def test_spec_json_round_trip(self):
        spec = DistortionSpec(DistortionKind.NOISE, 3, {"variance": 0.008})
        again = DistortionSpec.from_json_obj(spec.to_json_obj())
        assert again == spec

    def test_spec_level_validated(self):
        with pytest.raises(ValueError):
            DistortionSpec(DistortionKind.SMOKE, 5, {"opacity": 0.5})

    def test_default_table_complete(self):
        table = default_level_table()
        assert set(table) == set(DistortionKind)
        for rows in table.values():
            assert len(rows) == len(LEVELS)

    def test_default_severity_values(self):
        table = default_level_table()
        assert [r["sigma"] for r in table[DistortionKind.DEFOCUS_BLUR]] == [1.0, 2.0, 3.0, 5.0]
        for r in table[DistortionKind.DEFOCUS_BLUR]:
            assert r["ksize"] == 2 * math.ceil(3 * r["sigma"]) + 1
        assert [r["length"] for r in table[DistortionKind.MOTION_BLUR]] == [5, 9, 15, 21]
        assert [r["variance"] for r in table[DistortionKind.NOISE]] == [0.0005, 0.002, 0.008, 0.02]
        assert [r["opacity"] for r in table[DistortionKind.SMOKE]] == [0.25, 0.45, 0.65, 0.85]
        unevens = table[DistortionKind.UNEVEN_ILLUMINATION]
        assert [(r["radius_frac"], r["floor"]) for r in unevens] == [
            (0.45, 0.35), (0.35, 0.25), (0.28, 0.15), (0.20, 0.08),
        ]


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    refs = [
        ReferenceEntry(
            f"{DEFAULT_STYLES[i].category}01",
            DEFAULT_STYLES[i].category,
            make_reference_clip(DEFAULT_STYLES[i], 48, 32, 3, seed=50 + i),
        )
        for i in range(2)
    ]
    out = tmp_path_factory.mktemp("corpus")
    manifest = synthesize_corpus(refs, default_level_table(), seed=77, out_dir=out)
    return refs, out, manifest


class TestCorpus:
    def test_two_references_yield_forty_videos(self, tiny_corpus):
        refs, out, manifest = tiny_corpus
        assert len(manifest) == 40
        assert len({e["id"] for e in manifest}) == 40
        for entry in manifest:
            assert (out / entry["path"]).is_file()
            assert (out / entry["reference_path"]).is_file()

    def test_manifest_covers_full_grid(self, tiny_corpus):
        refs, _, manifest = tiny_corpus
        grid = {(e["reference_label"], e["kind"], e["level"]) for e in manifest}
        expected = {
            (r.label, k.value, lv)
            for r in refs
            for k in DistortionKind
            for lv in LEVELS
        }
        assert grid == expected
        for e in manifest:
            assert e["id"] == f"{e['reference_label']}_{e['kind']}_l{e['level']}"

    def test_manifest_round_trips_from_disk(self, tiny_corpus):
        _, out, manifest = tiny_corpus
        assert read_manifest(out / "manifest.json") == manifest

    def test_noise_and_smoke_entries_record_seed(self, tiny_corpus):
        _, _, manifest = tiny_corpus
        for e in manifest:
            if e["kind"] in ("noise", "smoke"):
                assert isinstance(e["seed"], int)
            else:
                assert e["seed"] is None

    def test_smoke_overlay_shared_across_levels(self, tiny_corpus):
        _, _, manifest = tiny_corpus
        for label in {e["reference_label"] for e in manifest}:
            seeds = {
                e["seed"] for e in manifest
                if e["reference_label"] == label and e["kind"] == "smoke"
            }
            assert len(seeds) == 1

    def test_written_cell_matches_direct_application(self, tiny_corpus):
        refs, out, manifest = tiny_corpus
        ref = refs[0]
        entry = next(
            e for e in manifest
            if e["reference_label"] == ref.label
            and e["kind"] == "defocus_blur" and e["level"] == 2
        )
        expected = apply_defocus_blur(ref.clip, **entry["params"])
        read_back = read_clip(out / entry["path"])
        assert np.array_equal(read_back.data, expected.data)

    def test_references_round_trip_losslessly(self, tiny_corpus):
        refs, out, manifest = tiny_corpus
        ref_path = {e["reference_label"]: e["reference_path"] for e in manifest}
        for ref in refs:
            back = read_clip(out / ref_path[ref.label])
            assert np.array_equal(back.data, ref.clip.data)

    def test_resynthesis_is_deterministic(self, tiny_corpus, tmp_path):
        refs, out, manifest = tiny_corpus
        again = synthesize_corpus(refs, default_level_table(), seed=77, out_dir=tmp_path)
        assert again == manifest
        probe = [m for m in manifest if m["level"] == 4][:5]
        for e in probe:
            assert (tmp_path / e["path"]).read_bytes() == (out / e["path"]).read_bytes()

    def test_incomplete_level_table_rejected(self, tiny_corpus, tmp_path):
        refs, _, _ = tiny_corpus
        table = default_level_table()
        table[DistortionKind.NOISE] = table[DistortionKind.NOISE][:3]
        with pytest.raises(LevelTableError):
            synthesize_corpus(refs, table, seed=1, out_dir=tmp_path)

    def test_apply_distortion_dispatch_matches_direct_calls(self, tiny_corpus):
        refs, _, _ = tiny_corpus
        clip = refs[0].clip
        spec = DistortionSpec(DistortionKind.MOTION_BLUR, 1, {"length": 5, "angle": 0.0})
        assert np.array_equal(
            apply_distortion(clip, spec).data, apply_motion_blur(clip, 5, 0.0).data
        )
        spec = DistortionSpec(DistortionKind.NOISE, 2, {"variance": 0.002})
        assert np.array_equal(
            apply_distortion(clip, spec, seed=9).data,
            apply_awgn(clip, 0.002, seed=9).data,
        )
