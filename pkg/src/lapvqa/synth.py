"""Synthesis of the five distortion types at graded severity levels.

Each reference clip is degraded by defocus blur, motion blur, additive
white Gaussian noise, uneven illumination, or simulated smoke, at four
severity levels per kind, giving 20 distorted clips per reference. All
randomness flows from explicit integer seeds; a given (clip, spec, seed)
always produces the identical output clip.

Arithmetic conventions shared by every op: channels are processed
independently, intermediate math is float64, convolution borders are
replicated (edge padding), and results are quantized back to 8 bits by
round-half-up. Replicate borders keep frame edges from darkening, which
would otherwise leak into the illumination classifier.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .frameio import VideoClip, write_clip
from .texture import fractal_noise


class DistortionKind(Enum):
    NOISE = "noise"
    DEFOCUS_BLUR = "defocus_blur"
    MOTION_BLUR = "motion_blur"
    UNEVEN_ILLUMINATION = "uneven_illumination"
    SMOKE = "smoke"


LEVELS = (1, 2, 3, 4)


@dataclass(frozen=True)
class DistortionSpec:
    """One (kind, level) cell with its concrete parameter record."""

    kind: DistortionKind
    level: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"level must be in {LEVELS}, got {self.level}")

    def to_json_obj(self) -> dict:
        return {"kind": self.kind.value, "level": self.level, "params": dict(self.params)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DistortionSpec":
        return cls(DistortionKind(obj["kind"]), int(obj["level"]), dict(obj["params"]))


def default_level_table() -> dict[DistortionKind, list[dict]]:
    """Severity parameters per kind, mild (index 0) to severe (index 3).

    The values are calibrated for visible but monotone degradation at
    512x288; geometry-dependent illumination parameters are stored as
    fractions of the frame and resolved against clip dimensions at
    application time.
    """
    return {
        DistortionKind.DEFOCUS_BLUR: [
            {"sigma": s, "ksize": 2 * math.ceil(3 * s) + 1} for s in (1.0, 2.0, 3.0, 5.0)
        ],
        DistortionKind.MOTION_BLUR: [
            {"length": n, "angle": 0.0} for n in (5, 9, 15, 21)
        ],
        DistortionKind.NOISE: [
            {"variance": v} for v in (0.0005, 0.002, 0.008, 0.02)
        ],
        DistortionKind.UNEVEN_ILLUMINATION: [
            {"radius_frac": r, "floor": f, "falloff_frac": 0.25,
             "center_frac": [1 / 3, 1 / 3]}
            for r, f in ((0.45, 0.35), (0.35, 0.25), (0.28, 0.15), (0.20, 0.08))
        ],
        DistortionKind.SMOKE: [
            {"opacity": k} for k in (0.25, 0.45, 0.65, 0.85)
        ],
    }


def _quantize(values: np.ndarray) -> np.ndarray:
    """Round half-up to uint8 with clamping.

    Computes clip(floor(values + 0.5), 0, 255) with in-place intermediates;
    `values` itself is left untouched.
    """
    out = values + 0.5
    np.floor(out, out=out)
    np.clip(out, 0.0, 255.0, out=out)
    return out.astype(np.uint8)


def _quantize_into(values: np.ndarray, out: np.ndarray) -> None:
    """Same rounding pipeline as _quantize, but storing into an existing
    uint8 array so hot loops can reuse buffers; `values` is clobbered.
    """
    values += 0.5
    np.floor(values, out=values)
    np.clip(values, 0.0, 255.0, out=values)
    np.copyto(out, values, casting="unsafe")


# --- defocus blur -----------------------------------------------------------


def gaussian_kernel_1d(sigma: float, ksize: int) -> np.ndarray:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if ksize < 3 or ksize % 2 == 0:
        raise ValueError(f"ksize must be an odd integer >= 3, got {ksize}")
    r = (ksize - 1) // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def apply_defocus_blur(clip: VideoClip, sigma: float, ksize: int) -> VideoClip:
    """Symmetric Gaussian low-pass per frame, separable, replicate border."""
    if ksize > min(clip.width, clip.height):
        raise ValueError(
            f"ksize {ksize} exceeds frame dimension {min(clip.width, clip.height)}"
        )
    k = gaussian_kernel_1d(sigma, ksize)
    data = clip.data.astype(np.float64)
    tmp = np.empty_like(data)
    ndimage.convolve1d(data, k, axis=1, output=tmp, mode="nearest")
    # the second pass reads tmp, so data is free to serve as its output
    ndimage.convolve1d(tmp, k, axis=2, output=data, mode="nearest")
    out = np.empty_like(clip.data)
    _quantize_into(data, out)
    return VideoClip(out, clip.fps)


# --- motion blur ------------------------------------------------------------


def _clip_polygon(poly: list, a: float, b: float, d: float) -> list:
    """Keep the part of poly with a*x + b*y <= d (Sutherland-Hodgman step)."""
    out = []
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        in0 = a * x0 + b * y0 <= d
        in1 = a * x1 + b * y1 <= d
        if in0:
            out.append((x0, y0))
        if in0 != in1:
            t = (d - a * x0 - b * y0) / (a * (x1 - x0) + b * (y1 - y0))
            out.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
    return out


def _polygon_area(poly: list) -> float:
    s = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def motion_kernel(length: float, angle: float) -> np.ndarray:
    """Anti-aliased line kernel: per-pixel coverage of a length x 1 rectangle
    rotated by `angle` degrees, normalized to unit sum.

    length 1 collapses to the identity kernel. Coverage is exact (polygon
    clipping), so axis-aligned angles reduce to crisp box kernels.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if length == 1:
        return np.ones((1, 1))
    theta = math.radians(angle)
    c, s = math.cos(theta), math.sin(theta)
    half_l, half_w = length / 2.0, 0.5
    hx = abs(c) * half_l + abs(s) * half_w
    hy = abs(s) * half_l + abs(c) * half_w
    rx = int(math.ceil(hx - 0.5 - 1e-9))
    ry = int(math.ceil(hy - 0.5 - 1e-9))
    kern = np.zeros((2 * ry + 1, 2 * rx + 1))
    for j in range(-ry, ry + 1):
        for i in range(-rx, rx + 1):
            # Unit pixel square centered at (i, j); y grows downward but the
            # rectangle is symmetric under (x,y) -> (-x,-y) so no flip needed.
            poly = [
                (i - 0.5, j - 0.5), (i + 0.5, j - 0.5),
                (i + 0.5, j + 0.5), (i - 0.5, j + 0.5),
            ]
            # Half-planes of the rotated rectangle: |c x + s y| <= L/2,
            # |-s x + c y| <= 1/2.
            for (a, b, d) in (
                (c, s, half_l), (-c, -s, half_l),
                (-s, c, half_w), (s, -c, half_w),
            ):
                if not poly:
                    break
                poly = _clip_polygon(poly, a, b, d)
            if poly:
                kern[j + ry, i + rx] = _polygon_area(poly)
    total = kern.sum()
    if total <= 0:
        raise ValueError("degenerate motion kernel")
    return kern / total


def apply_motion_blur(clip: VideoClip, length: float, angle: float) -> VideoClip:
    kern = motion_kernel(length, angle)
    if kern.shape == (1, 1):
        return clip
    data = clip.data.astype(np.float64)
    if kern.shape[0] == 1:
        blurred = np.empty_like(data)
        ndimage.convolve1d(data, kern[0], axis=2, output=blurred, mode="nearest")
    elif kern.shape[1] == 1:
        blurred = np.empty_like(data)
        ndimage.convolve1d(data, kern[:, 0], axis=1, output=blurred, mode="nearest")
    else:
        blurred = np.empty_like(data)
        for i in range(clip.nframes):
            for ch in range(3):
                blurred[i, :, :, ch] = ndimage.convolve(
                    data[i, :, :, ch], kern, mode="nearest"
                )
    out = np.empty_like(clip.data)
    _quantize_into(blurred, out)
    return VideoClip(out, clip.fps)


# --- additive white Gaussian noise ------------------------------------------


def apply_awgn(clip: VideoClip, variance: float, seed: int) -> VideoClip:
    """AWGN in normalized intensity units: v/255 + N(0, variance), clamped.

    Each frame draws from its own substream seeded by (seed, frame index),
    so frames may be synthesized independently or in parallel without
    changing the output.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return clip
    sd = math.sqrt(variance)
    out = np.empty_like(clip.data)
    noisy = np.empty(clip.data.shape[1:], dtype=np.float64)
    noise = np.empty_like(noisy)
    for i in range(clip.nframes):
        rng = np.random.default_rng((seed, i))
        np.divide(clip.data[i], 255.0, out=noisy)
        # standard_normal into a reused buffer, then scaling by sd, consumes
        # the same stream and yields the same doubles as normal(0, sd, size).
        rng.standard_normal(out=noise)
        noise *= sd
        noisy += noise
        np.clip(noisy, 0.0, 1.0, out=noisy)
        noisy *= 255.0
        _quantize_into(noisy, out[i])
    return VideoClip(out, clip.fps)


# --- uneven illumination ----------------------------------------------------


@dataclass(frozen=True)
class IlluminationMask:
    """Per-pixel gain in [0, 1]: a bright disc with Gaussian falloff."""

    gain: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gain, dtype=np.float64)
        if g.ndim != 2:
            raise ValueError("gain must be 2-D")
        if float(g.min()) < 0.0 or float(g.max()) > 1.0:
            raise ValueError("gain must lie in [0, 1]")
        g = np.ascontiguousarray(g)
        g.flags.writeable = False
        object.__setattr__(self, "gain", g)

    @property
    def width(self) -> int:
        return self.gain.shape[1]

    @property
    def height(self) -> int:
        return self.gain.shape[0]


def make_illumination_mask(
    width: int,
    height: int,
    center: tuple[float, float],
    radius: float,
    falloff: float,
    floor: float,
) -> IlluminationMask:
    """Gain 1 inside the disc of `radius` around `center` (x, y pixels),
    decaying as floor + (1-floor) * exp(-(d-radius)^2 / (2 falloff^2)) outside.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if falloff <= 0:
        raise ValueError(f"falloff must be positive, got {falloff}")
    if not 0.0 <= floor < 1.0:
        raise ValueError(f"floor must be in [0, 1), got {floor}")
    cx, cy = center
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    d = np.hypot(xs - cx, ys - cy)
    excess = np.maximum(d - radius, 0.0)
    gain = floor + (1.0 - floor) * np.exp(-(excess * excess) / (2.0 * falloff * falloff))
    return IlluminationMask(gain)


def apply_uneven_illumination(clip: VideoClip, mask: IlluminationMask) -> VideoClip:
    if (mask.height, mask.width) != (clip.height, clip.width):
        raise ValueError(
            f"mask {mask.width}x{mask.height} does not match "
            f"clip {clip.width}x{clip.height}"
        )
    # uint8 x float64 broadcasting promotes elementwise, in one fused pass
    scaled = clip.data * mask.gain[None, :, :, None]
    out = np.empty_like(clip.data)
    _quantize_into(scaled, out)
    return VideoClip(out, clip.fps)


# --- smoke ------------------------------------------------------------------


def apply_smoke(clip: VideoClip, smoke: VideoClip, opacity: float) -> VideoClip:
    """Screen-blend a smoke clip over the content at the given opacity.

    With a, b the normalized content and smoke values, out = 1 - (1-a)(1 - k b):
    black smoke leaves the content untouched, bright smoke washes it out. The
    smoke clip is looped or truncated to the content length.
    """
    if not 0.0 <= opacity <= 1.0:
        raise ValueError(f"opacity must be in [0, 1], got {opacity}")
    if (smoke.height, smoke.width) != (clip.height, clip.width):
        raise ValueError(
            f"smoke {smoke.width}x{smoke.height} does not match "
            f"clip {clip.width}x{clip.height}"
        )
    out = np.empty_like(clip.data)
    a = np.empty(clip.data.shape[1:], dtype=np.float64)
    b = np.empty_like(a)
    for i in range(clip.nframes):
        # In-place evaluation of (1 - (1-a)(1 - opacity*b)) * 255, one
        # elementwise op at a time in two reused frame buffers.
        np.divide(clip.data[i], 255.0, out=a)
        np.subtract(1.0, a, out=a)
        np.divide(smoke.data[i % smoke.nframes], 255.0, out=b)
        b *= opacity
        np.subtract(1.0, b, out=b)
        a *= b
        np.subtract(1.0, a, out=a)
        a *= 255.0
        _quantize_into(a, out[i])
    return VideoClip(out, clip.fps)


# Shaping quantiles for the procedural smoke field: values below the low
# quantile become clear air, values above the high quantile fully opaque
# plumes. Chosen so frames stay mostly dark (10th-percentile luma near 0)
# while the plumes cover enough area to desaturate the scene when blended.
_SMOKE_Q_LOW = 0.25
_SMOKE_Q_HIGH = 0.60


def gen_smoke_clip(width: int, height: int, nframes: int, seed: int, fps: float = 25.0) -> VideoClip:
    """Procedural grayscale smoke: rising multi-octave value noise shaped
    into bright billows on a black background. Deterministic given seed.
    """
    if width < 16 or height < 16:
        raise ValueError(f"smoke clip must be at least 16x16, got {width}x{height}")
    if nframes < 1:
        raise ValueError(f"nframes must be >= 1, got {nframes}")
    rng = np.random.default_rng(seed)
    drift_up = 1.5 * height / 288.0  # pixels per frame, scaled to geometry
    field = fractal_noise(
        nframes, height, width, rng,
        octaves=4, base_grid=(3, 3, 4), drift=(drift_up, 0.15 * drift_up),
        persistence=0.55,
    )
    lo = np.quantile(field, _SMOKE_Q_LOW)
    hi = np.quantile(field, _SMOKE_Q_HIGH)
    b = np.clip((field - lo) / max(hi - lo, 1e-12), 0.0, 1.0)
    b = b * b * (3.0 - 2.0 * b)  # ease billow edges
    gray = _quantize(b * 255.0)
    return VideoClip(np.repeat(gray[..., None], 3, axis=3), fps)


# --- corpus assembly --------------------------------------------------------

CONTENT_CATEGORIES = ("BL", "GB", "MI", "IR", "CL", "SA", "CU", "SF", "OE", "BU")


@dataclass(frozen=True)
class ReferenceEntry:
    """A pristine source clip with its display label and content category."""

    label: str
    category: str
    clip: VideoClip

    def __post_init__(self):
        if self.category not in CONTENT_CATEGORIES:
            raise ValueError(f"unknown content category {self.category!r}")


def resolve_illumination_params(params: dict, width: int, height: int) -> dict:
    """Turn fraction-based mask parameters into pixel units for a geometry."""
    mindim = min(width, height)
    cfx, cfy = params.get("center_frac", [1 / 3, 1 / 3])
    return {
        "center": (cfx * width, cfy * height),
        "radius": params["radius_frac"] * mindim,
        "falloff": params["falloff_frac"] * mindim,
        "floor": params["floor"],
    }


def apply_distortion(
    clip: VideoClip,
    spec: DistortionSpec,
    seed: int = 0,
    smoke: VideoClip | None = None,
) -> VideoClip:
    """Dispatch a DistortionSpec onto a clip.

    Smoke distortion needs a smoke overlay clip; one is generated from
    `seed` when not supplied. Passing the same overlay across severity
    levels keeps the levels pixel-wise comparable.
    """
    p = spec.params
    if spec.kind is DistortionKind.DEFOCUS_BLUR:
        return apply_defocus_blur(clip, p["sigma"], p["ksize"])
    if spec.kind is DistortionKind.MOTION_BLUR:
        return apply_motion_blur(clip, p["length"], p["angle"])
    if spec.kind is DistortionKind.NOISE:
        return apply_awgn(clip, p["variance"], seed)
    if spec.kind is DistortionKind.UNEVEN_ILLUMINATION:
        mask = make_illumination_mask(
            clip.width, clip.height, **resolve_illumination_params(p, clip.width, clip.height)
        )
        return apply_uneven_illumination(clip, mask)
    if spec.kind is DistortionKind.SMOKE:
        if smoke is None:
            smoke = gen_smoke_clip(clip.width, clip.height, clip.nframes, seed, clip.fps)
        return apply_smoke(clip, smoke, p["opacity"])
    raise ValueError(f"unhandled kind {spec.kind}")


class LevelTableError(ValueError):
    """Level table is missing a (kind, level) cell or holds bad params."""


def _check_level_table(level_table: dict) -> None:
    for kind in DistortionKind:
        rows = level_table.get(kind)
        if rows is None or len(rows) != len(LEVELS):
            raise LevelTableError(
                f"level table must define {len(LEVELS)} levels for {kind.value}"
            )


def synthesize_corpus(
    references: list[ReferenceEntry],
    level_table: dict[DistortionKind, list[dict]],
    seed: int,
    out_dir,
) -> list[dict]:
    """Write every (reference, kind, level) clip plus a manifest.

    Returns the manifest: a list of entries
    {id, reference_label, content_category, kind, level, params, seed, path,
    reference_path}. Paths are relative to out_dir's parent-independent
    location (stored relative to the manifest file's directory).

    The per-video noise seed is derived from (seed, reference index, level);
    the smoke overlay is derived from (seed, reference index) only, so all
    four smoke levels of one reference share the same plumes and differ
    purely in opacity.
    """
    _check_level_table(level_table)
    out_dir = Path(out_dir)
    (out_dir / "references").mkdir(parents=True, exist_ok=True)
    manifest: list[dict] = []
    for ri, ref in enumerate(references):
        ref_rel = f"references/{ref.label}.y4m"
        write_clip(ref.clip, out_dir / ref_rel)
        smoke_seed = int(np.random.SeedSequence((seed, ri, 4)).generate_state(1)[0])
        smoke = gen_smoke_clip(
            ref.clip.width, ref.clip.height, ref.clip.nframes, smoke_seed, ref.clip.fps
        )
        for kind in DistortionKind:
            for level in LEVELS:
                params = dict(level_table[kind][level - 1])
                spec = DistortionSpec(kind, level, params)
                vid_seed = int(
                    np.random.SeedSequence((seed, ri, level)).generate_state(1)[0]
                )
                distorted = apply_distortion(ref.clip, spec, vid_seed, smoke=smoke)
                vid_id = f"{ref.label}_{kind.value}_l{level}"
                rel = f"{vid_id}.y4m"
                write_clip(distorted, out_dir / rel)
                manifest.append(
                    {
                        "id": vid_id,
                        "reference_label": ref.label,
                        "content_category": ref.category,
                        "kind": kind.value,
                        "level": level,
                        "params": params,
                        "seed": vid_seed if kind is DistortionKind.NOISE else (
                            smoke_seed if kind is DistortionKind.SMOKE else None
                        ),
                        "path": rel,
                        "reference_path": ref_rel,
                    }
                )
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest


def write_manifest(manifest: list[dict], path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def read_manifest(path) -> list[dict]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError("manifest must be a JSON array")
    return data
