"""Procedural stand-ins for the reference corpus.

The original surgical recordings cannot be redistributed, so the corpus is
regenerated from procedural clips that imitate the relevant statistics of
endoscopic footage: reddish tissue palettes, smooth shading with specular
highlights, fine surface texture, occasional directional striation, and a
slow camera drift. Ten content categories are modeled; their parameters
deliberately spread out saturation, luminance flatness, texture energy,
and spectral anisotropy so the distortion classifiers face a range of
easy and hard content, as real footage would provide.

Clips are deterministic functions of (style, geometry, nframes, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frameio import LUMA_WEIGHTS, VideoClip
from .synth import CONTENT_CATEGORIES, ReferenceEntry
from .texture import fractal_noise


@dataclass(frozen=True)
class ReferenceStyle:
    """Generation parameters for one content category.

    Luma-shaping amounts are in normalized [0, 1] luminance units. `sat`
    is the target median HSV saturation of the rendered frames (the tint
    weight is solved from the palette to hit it). fine_amp is the standard
    deviation of the bandpass surface texture in 8-bit gray levels;
    fine_aniso boosts spectral energy around fine_theta (radians, 0 = the
    horizontal-frequency axis, i.e. vertical striation) relative to the
    orthogonal direction.
    """

    category: str
    base_rgb: tuple[float, float, float]
    sat: float
    brightness: float
    coarse_amp: float
    fine_amp: float
    fine_aniso: float = 0.0
    fine_theta: float = 0.0
    stripe_amp: float = 0.0
    stripe_theta: float = 0.0
    stripe_wavelength: float = 10.0
    highlight: float = 0.12
    dark: float = 0.08
    drift: tuple[float, float] = (0.18, 0.30)


# Category styles. The spreads are deliberate: saturation runs from pale
# (CL) to vivid (IR), BL and OE are evenly lit while GB and BU carry strong
# shading, surface-texture energy varies by category, and SA is strongly
# striated. Real footage varies along the same axes, and the classifier
# study depends on the corpus containing both easy and hard content.
DEFAULT_STYLES: tuple[ReferenceStyle, ...] = (
    ReferenceStyle("BL", (0.80, 0.38, 0.34), sat=0.42, brightness=0.66,
                   coarse_amp=0.07, fine_amp=3.0, highlight=0.08, dark=0.02),
    ReferenceStyle("GB", (0.66, 0.36, 0.22), sat=0.58, brightness=0.42,
                   coarse_amp=0.20, fine_amp=2.6, highlight=0.24, dark=0.16),
    ReferenceStyle("MI", (0.82, 0.34, 0.30), sat=0.44, brightness=0.55,
                   coarse_amp=0.13, fine_amp=4.4, highlight=0.14, dark=0.10),
    ReferenceStyle("IR", (0.88, 0.22, 0.18), sat=0.66, brightness=0.48,
                   coarse_amp=0.10, fine_amp=2.8, highlight=0.12, dark=0.07),
    ReferenceStyle("CL", (0.82, 0.52, 0.46), sat=0.40, brightness=0.62,
                   coarse_amp=0.11, fine_amp=4.8, highlight=0.10, dark=0.06),
    # The stripe wavelength stays above twice the longest default motion
    # kernel (21 px): a box blur of length L nulls frequencies at k/L, and a
    # stripe sitting between nulls of successive lengths can make a longer
    # blur reproduce it *better* than a shorter one, breaking the strict
    # quality ordering across severity levels. At 24 px the stripe frequency
    # (1/24 cycles/px) lies below the first null of every default length, where
    # attenuation grows monotonically with L.
    ReferenceStyle("SA", (0.78, 0.36, 0.28), sat=0.52, brightness=0.52,
                   coarse_amp=0.12, fine_amp=3.0, fine_aniso=8.0, fine_theta=0.0,
                   stripe_amp=0.05, stripe_theta=0.0, stripe_wavelength=24.0,
                   highlight=0.12, dark=0.08),
    ReferenceStyle("CU", (0.74, 0.32, 0.28), sat=0.55, brightness=0.50,
                   coarse_amp=0.14, fine_amp=2.2, highlight=0.13, dark=0.12),
    ReferenceStyle("SF", (0.80, 0.40, 0.34), sat=0.46, brightness=0.54,
                   coarse_amp=0.12, fine_amp=2.4, highlight=0.12, dark=0.08),
    ReferenceStyle("OE", (0.81, 0.42, 0.38), sat=0.40, brightness=0.64,
                   coarse_amp=0.08, fine_amp=3.1, highlight=0.09, dark=0.03),
    ReferenceStyle("BU", (0.70, 0.28, 0.22), sat=0.62, brightness=0.44,
                   coarse_amp=0.18, fine_amp=2.7, highlight=0.26, dark=0.15),
)


def _tint_weight(style: ReferenceStyle) -> tuple[np.ndarray, float]:
    """Unit-luma tint vector and the mix weight that hits the target
    median saturation. For a pixel rendered as L*(w*u + (1-w)), HSV
    saturation is w*(umax - umin) / (1 + w*(umax - 1)); solve for w.
    """
    u = np.array(style.base_rgb, dtype=np.float64)
    u /= LUMA_WEIGHTS[0] * u[0] + LUMA_WEIGHTS[1] * u[1] + LUMA_WEIGHTS[2] * u[2]
    du = float(u.max() - u.min())
    denom = du - style.sat * (float(u.max()) - 1.0)
    if denom <= 0.0:
        raise ValueError(
            f"{style.category}: palette cannot reach saturation {style.sat}"
        )
    w = style.sat / denom
    if w > 1.0:
        raise ValueError(
            f"{style.category}: palette cannot reach saturation {style.sat}"
        )
    return u, w


def _bandpass_texture(
    height: int,
    width: int,
    rng: np.random.Generator,
    f_lo: float = 0.18,
    f_hi: float = 0.34,
    aniso: float = 0.0,
    aniso_theta: float = 0.0,
) -> np.ndarray:
    """Periodic zero-mean surface texture with energy confined to a
    frequency annulus, optionally emphasized around one spectral direction.
    Unit variance; tiles seamlessly, so integer rolls preserve its spectrum.
    """
    white = rng.standard_normal((height, width))
    spec = np.fft.rfft2(white)
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    rho = np.hypot(fx, fy)
    mask = ((rho >= f_lo) & (rho <= f_hi)).astype(np.float64)
    if aniso > 0.0:
        theta = np.arctan2(fy, fx)
        mask *= 1.0 + aniso * np.cos(theta - aniso_theta) ** 2
    tex = np.fft.irfft2(spec * mask, s=(height, width))
    sd = tex.std()
    if sd < 1e-12:
        return np.zeros((height, width))
    return tex / sd


def _soft_spots(field: np.ndarray, knee: float) -> np.ndarray:
    """Quadratic ramp from 0 at `knee` to 1 at the field maximum of 1."""
    return np.clip((field - knee) / (1.0 - knee), 0.0, 1.0) ** 2


def make_reference_clip(
    style: ReferenceStyle,
    width: int,
    height: int,
    nframes: int,
    seed: int,
    fps: float = 25.0,
) -> VideoClip:
    """Render one reference clip for a category style."""
    rng = np.random.default_rng(seed)
    dy, dx = style.drift

    shading = fractal_noise(nframes, height, width, rng, octaves=3,
                            base_grid=(3, 3, 4), drift=(dy, dx), persistence=0.6)
    spots = fractal_noise(nframes, height, width, rng, octaves=2,
                          base_grid=(2, 3, 4), drift=(dy * 0.6, dx * 0.6),
                          persistence=0.6)
    warp = fractal_noise(nframes, height, width, rng, octaves=2,
                         base_grid=(2, 2, 3), drift=(dy * 0.4, dx * 0.4),
                         persistence=0.6)
    tex = _bandpass_texture(height, width, rng, aniso=style.fine_aniso,
                            aniso_theta=style.fine_theta)

    u, w_base = _tint_weight(style)

    frames = np.empty((nframes, height, width, 3), dtype=np.uint8)
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    ct, st = np.cos(style.stripe_theta), np.sin(style.stripe_theta)

    for i in range(nframes):
        luma = style.brightness + style.coarse_amp * (shading[i] - 0.5) * 2.0

        roll_y = int(round(dy * i))
        roll_x = int(round(dx * i))
        luma = luma + (style.fine_amp / 255.0) * np.roll(tex, (roll_y, roll_x), (0, 1))

        if style.stripe_amp > 0.0:
            phase = 2.0 * np.pi * ((xs + dx * i) * ct + (ys + dy * i) * st) \
                / style.stripe_wavelength
            luma = luma + style.stripe_amp * np.sin(phase + 2.5 * warp[i])

        glint = _soft_spots(spots[i], 0.80)
        pool = _soft_spots(1.0 - spots[i], 0.78)
        luma = luma + style.highlight * glint - style.dark * pool
        luma = np.clip(luma, 0.02, 0.98)

        w_sat = w_base * (1.0 + 0.35 * (warp[i] - 0.5)) * (1.0 - 0.8 * glint)
        rgb = luma[..., None] * (w_sat[..., None] * u + (1.0 - w_sat[..., None]))
        frames[i] = np.clip(np.floor(rgb * 255.0 + 0.5), 0, 255).astype(np.uint8)

    return VideoClip(frames, fps)


def make_default_references(
    width: int = 512,
    height: int = 288,
    nframes: int = 250,
    seed: int = 20240,
    fps: float = 25.0,
) -> list[ReferenceEntry]:
    """The ten-category reference set at the corpus geometry."""
    refs = []
    for si, style in enumerate(DEFAULT_STYLES):
        clip = make_reference_clip(
            style, width, height, nframes,
            seed=int(np.random.SeedSequence((seed, si)).generate_state(1)[0]),
            fps=fps,
        )
        refs.append(ReferenceEntry(f"{style.category}01", style.category, clip))
    return refs


assert tuple(s.category for s in DEFAULT_STYLES) == CONTENT_CATEGORIES
