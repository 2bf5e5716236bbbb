"""Distortion identification: four per-frame indices and a decision rule.

The indices:

* PBI, a blur index: log-scaled gap between the radial spectral energy of
  a frame and that of its binomial-filtered copy. Sharp content loses a
  lot of energy to the filter, blurred content almost none, so low PBI
  means blur.
* Smoke probability: the fraction of pixels whose HSV saturation falls at
  or below a cutoff. Smoke is achromatic and pushes saturation down.
* Noise sigma: the classic 3x3 Laplacian-difference estimator of additive
  noise standard deviation, in 8-bit intensity units.
* LMR: mean luminance over luminance range. A bright spot surrounded by
  attenuated periphery stretches the range while pulling the mean down,
  so low LMR flags uneven illumination.

A video is judged by the median of each index over its frames, then a
fixed priority cascade (noise, smoke, uneven illumination, blur) makes
the call; blur is split into motion and defocus by the directional
anisotropy of the spectrum, since a motion kernel suppresses one spectral
direction and an out-of-focus lens suppresses all of them alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .frameio import Frame, LumaPlane, VideoClip, luma_planes
from .synth import DistortionKind

_LOG_FLOOR = 1e-12

DEFAULT_W_BINS = 32
DEFAULT_SECTORS = 12
DEFAULT_BAND = (0.06, 0.35)


@lru_cache(maxsize=32)
def _hann2d(height: int, width: int) -> np.ndarray:
    return np.hanning(height)[:, None] * np.hanning(width)[None, :]


@lru_cache(maxsize=32)
def _radial_bins(height: int, width: int, w_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """(bin index per rfft2 coefficient, fold weight) for radial annuli.

    Annuli cover (0, 0.5] cycles/pixel in w_bins equal steps; DC and the
    corner frequencies beyond 0.5 get index -1 and are ignored. The fold
    weight is 2 for coefficients whose conjugate twin is dropped by rfft2
    and 1 for the self-conjugate columns, so sums match a full fft2.
    """
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    rho = np.hypot(fx, fy)
    idx = np.ceil(rho * (2 * w_bins)).astype(np.int64) - 1
    idx[(rho <= 0.0) | (rho > 0.5)] = -1
    weight = np.full(rho.shape, 2.0)
    weight[:, 0] = 1.0
    if width % 2 == 0:
        weight[:, -1] = 1.0
    return idx, weight


@lru_cache(maxsize=32)
def _sector_bins(
    height: int, width: int, nsectors: int, band: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    """(sector index per rfft2 coefficient, fold weight) for angular sectors.

    Sectors split orientation [0, pi) evenly; only frequencies inside the
    radial band participate (index -1 elsewhere).
    """
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.rfftfreq(width)[None, :]
    rho = np.hypot(fx, fy)
    theta = np.mod(np.arctan2(fy, fx), np.pi)
    idx = np.minimum((theta / np.pi * nsectors).astype(np.int64), nsectors - 1)
    idx[(rho < band[0]) | (rho > band[1])] = -1
    weight = np.full(rho.shape, 2.0)
    weight[:, 0] = 1.0
    if width % 2 == 0:
        weight[:, -1] = 1.0
    return idx, weight


def _windowed_power(values: np.ndarray) -> np.ndarray:
    """Power spectrum of the mean-removed, Hann-windowed plane (rfft2 grid).

    The mean is removed before windowing; otherwise the window would smear
    the DC offset into low-frequency bins and break offset invariance.
    """
    h, w = values.shape
    tapered = (values - values.mean()) * _hann2d(h, w)
    spec = np.fft.rfft2(tapered)
    return spec.real**2 + spec.imag**2


def _binomial_filter(values: np.ndarray) -> np.ndarray:
    k = np.array([0.25, 0.5, 0.25])
    out = ndimage.convolve1d(values, k, axis=0, mode="nearest")
    return ndimage.convolve1d(out, k, axis=1, mode="nearest")


def radial_energy(values: np.ndarray, w_bins: int) -> np.ndarray:
    """Spectral power summed over w_bins radial annuli, DC excluded."""
    power = _windowed_power(values)
    idx, weight = _radial_bins(*values.shape, w_bins)
    keep = idx >= 0
    return np.bincount(idx[keep], weights=(power * weight)[keep], minlength=w_bins)


def pbi(luma: LumaPlane, w_bins: int = DEFAULT_W_BINS) -> float:
    """Blur index: log of the mean absolute radial-energy change under a
    [1,2,1]/4 binomial filter. Lower means blurrier. Floored at log(1e-12)
    for spectrally empty (constant) frames.
    """
    if w_bins < 8:
        raise ValueError(f"w_bins must be >= 8, got {w_bins}")
    if luma.height < 16 or luma.width < 16:
        raise ValueError("pbi needs at least a 16x16 plane")
    re = radial_energy(luma.values, w_bins)
    re_f = radial_energy(_binomial_filter(luma.values), w_bins)
    return float(np.log(max(np.abs(re - re_f).sum() / w_bins, _LOG_FLOOR)))


def saturation_plane(frame: Frame) -> np.ndarray:
    """HSV saturation in [0, 1]; zero where the pixel is black."""
    px = frame.pixels.astype(np.float64)
    cmax = px.max(axis=2)
    cmin = px.min(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        sat = np.where(cmax > 0.0, (cmax - cmin) / cmax, 0.0)
    return sat


def smoke_probability(frame: Frame, tc: float = 0.35, nbins: int = 256) -> tuple[float, float]:
    """(p_smoke, p_nosmoke): the mass of the saturation histogram in bins
    whose centers sit at or below tc, and its complement. Normalization is
    by total pixel count, so p_smoke is the fraction of low-saturation
    pixels. Smoke-covered frames push p_smoke toward 1.
    """
    if not 0.0 < tc < 1.0:
        raise ValueError(f"tc must be in (0, 1), got {tc}")
    if nbins < 2:
        raise ValueError(f"nbins must be >= 2, got {nbins}")
    sat = saturation_plane(frame)
    hist, _ = np.histogram(sat, bins=nbins, range=(0.0, 1.0))
    centers = (np.arange(nbins) + 0.5) / nbins
    p_s = float(hist[centers <= tc].sum() / sat.size)
    return p_s, 1.0 - p_s


_NOISE_MASK = np.array([[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]])


def noise_sigma(luma: LumaPlane) -> float:
    """Additive-noise standard deviation estimate in 8-bit units.

    sqrt(pi/2) / (6 (W-2)(H-2)) * sum |Y * M| over interior pixels, with M
    the difference of two Laplacian approximations. M annihilates constant
    and planar content, so smooth structure contributes nothing.
    """
    v = luma.values
    h, w = v.shape
    # Valid-region convolution via direct slicing; the mask is tiny.
    acc = np.zeros((h - 2, w - 2))
    for dy in range(3):
        for dx in range(3):
            acc += _NOISE_MASK[dy, dx] * v[dy:h - 2 + dy, dx:w - 2 + dx]
    total = np.abs(acc).sum()
    return float(math.sqrt(math.pi / 2.0) * total / (6.0 * (w - 2) * (h - 2)))


def lmr(luma: LumaPlane) -> float:
    """Mean luminance over luminance range; +inf when the range is zero
    (a constant frame has no dark-periphery signature at all).
    """
    v = luma.values
    rng = float(v.max() - v.min())
    if rng == 0.0:
        return math.inf
    return float(v.mean() / rng)


def anisotropy_ratio(
    luma_values: np.ndarray,
    nsectors: int = DEFAULT_SECTORS,
    band: tuple[float, float] = DEFAULT_BAND,
) -> float:
    """Max/min directional energy over angular sectors of the mid band.

    Isotropic content and defocus blur keep this near 1; a line kernel
    carves a null trench through the spectrum and drives it up.
    """
    power = _windowed_power(luma_values)
    idx, weight = _sector_bins(*luma_values.shape, nsectors, band)
    keep = idx >= 0
    sums = np.bincount(idx[keep], weights=(power * weight)[keep], minlength=nsectors)
    lo = float(sums.min())
    hi = float(sums.max())
    if lo <= 0.0:
        return math.inf if hi > 0.0 else 1.0
    return hi / lo


@dataclass(frozen=True)
class ClassifierThresholds:
    """Decision cutoffs. Values ship calibrated against the default
    regenerated corpus; smoke_tc is the one externally fixed constant.
    """

    pbi_blur: float = 19.0
    pbi_motion_vs_defocus: float = 3.0
    smoke_tc: float = 0.35
    noise_sigma: float = 2.0
    lmr: float = 0.90

    def __post_init__(self):
        if not 0.0 < self.smoke_tc < 1.0:
            raise ValueError("smoke_tc must be in (0, 1)")
        for name in ("pbi_blur", "pbi_motion_vs_defocus", "noise_sigma", "lmr"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def to_json_obj(self) -> dict:
        return {
            "pbi_blur": self.pbi_blur,
            "pbi_motion_vs_defocus": self.pbi_motion_vs_defocus,
            "smoke_tc": self.smoke_tc,
            "noise_sigma": self.noise_sigma,
            "lmr": self.lmr,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ClassifierThresholds":
        return cls(**{k: float(v) for k, v in obj.items()})


@dataclass(frozen=True)
class ClassificationReport:
    """Per-frame index traces, their medians, and the decision."""

    per_frame: dict[str, list[float]]
    pbi: float
    p_smoke: float
    sigma_n: float
    lmr: float
    anisotropy: float
    decision: DistortionKind | None

    def summary_json_obj(self) -> dict:
        return {
            "pbi": _finite_or_none(self.pbi),
            "p_smoke": self.p_smoke,
            "sigma_n": self.sigma_n,
            "lmr": _finite_or_none(self.lmr),
            "anisotropy": _finite_or_none(self.anisotropy),
            "decision": self.decision.value if self.decision else None,
        }


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def classify_video(
    clip: VideoClip,
    thresholds: ClassifierThresholds | None = None,
    w_bins: int = DEFAULT_W_BINS,
    frame_step: int = 1,
) -> ClassificationReport:
    """Median-aggregate the four indices over (a stride of) the frames and
    run the priority cascade. frame_step > 1 trades accuracy for speed by
    sampling every n-th frame; the median keeps the decision stable.
    """
    th = thresholds or ClassifierThresholds()
    if frame_step < 1:
        raise ValueError("frame_step must be >= 1")
    lumas = luma_planes(clip)[::frame_step]
    traces: dict[str, list[float]] = {
        "pbi": [], "p_smoke": [], "sigma_n": [], "lmr": [], "anisotropy": [],
    }
    for fi, lv in enumerate(lumas):
        plane = LumaPlane(lv)
        traces["pbi"].append(pbi(plane, w_bins))
        traces["sigma_n"].append(noise_sigma(plane))
        traces["lmr"].append(lmr(plane))
        traces["anisotropy"].append(anisotropy_ratio(lv))
        p_s, _ = smoke_probability(clip.frame(fi * frame_step), tc=th.smoke_tc)
        traces["p_smoke"].append(p_s)

    med = {k: float(np.median(v)) for k, v in traces.items()}

    decision: DistortionKind | None
    if med["sigma_n"] > th.noise_sigma:
        decision = DistortionKind.NOISE
    elif med["p_smoke"] > 0.5:
        decision = DistortionKind.SMOKE
    elif med["lmr"] < th.lmr:
        decision = DistortionKind.UNEVEN_ILLUMINATION
    elif med["pbi"] < th.pbi_blur:
        if med["anisotropy"] > th.pbi_motion_vs_defocus:
            decision = DistortionKind.MOTION_BLUR
        else:
            decision = DistortionKind.DEFOCUS_BLUR
    else:
        decision = None

    return ClassificationReport(
        per_frame=traces,
        pbi=med["pbi"],
        p_smoke=med["p_smoke"],
        sigma_n=med["sigma_n"],
        lmr=med["lmr"],
        anisotropy=med["anisotropy"],
        decision=decision,
    )
