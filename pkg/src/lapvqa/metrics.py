"""Full-reference quality metrics: PSNR, SSIM, and pixel-domain VIF.

PSNR runs over all RGB samples jointly; SSIM and VIF run on luminance.
A clip's score is the arithmetic mean of its per-frame scores. Identical
frames give PSNR +inf, which is kept as a sentinel in memory and turned
into null plus a flag when serialized.

VIF here is the pixel-domain variant (scalar GSM statistics under a
Gaussian window, four dyadic scales) rather than the steerable-pyramid
original, so absolute values are implementation-specific; rank behavior,
which is what the correlation study consumes, is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import fftconvolve

from .frameio import Frame, LumaPlane, VideoClip, luma_planes


class Metric(Enum):
    PSNR = "psnr"
    SSIM = "ssim"
    VIF = "vif"


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = (size - 1) // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


_SSIM_WINDOW = _gaussian_window(11, 1.5)
_VIF_WINDOW = _gaussian_window(11, 11.0 / 5.0)
_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2
_VIF_SIGMA_NSQ = 2.0
_VIF_EPS = 1e-10
_VIF_SCALES = 4


def _check_dims(a, b, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape {a.shape} != {b.shape}")


def psnr(ref: Frame, dist: Frame) -> float:
    """10 log10(255^2 / MSE) over all RGB samples; +inf for identical frames."""
    _check_dims(ref.pixels, dist.pixels, "psnr")
    diff = ref.pixels.astype(np.float64) - dist.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _ssim_values(ref: np.ndarray, dist: np.ndarray) -> float:
    win = _SSIM_WINDOW
    mu1 = fftconvolve(ref, win, mode="valid")
    mu2 = fftconvolve(dist, win, mode="valid")
    s11 = fftconvolve(ref * ref, win, mode="valid") - mu1 * mu1
    s22 = fftconvolve(dist * dist, win, mode="valid") - mu2 * mu2
    s12 = fftconvolve(ref * dist, win, mode="valid") - mu1 * mu2
    num = (2.0 * mu1 * mu2 + _SSIM_C1) * (2.0 * s12 + _SSIM_C2)
    den = (mu1 * mu1 + mu2 * mu2 + _SSIM_C1) * (s11 + s22 + _SSIM_C2)
    return float(np.mean(num / den))


def ssim(ref: LumaPlane, dist: LumaPlane) -> float:
    """Mean local SSIM, 11x11 Gaussian window (sigma 1.5), luma only.

    Only windows fully inside the plane contribute, which matches the
    usual crop-the-filter-radius convention.
    """
    _check_dims(ref.values, dist.values, "ssim")
    if ref.height < 11 or ref.width < 11:
        raise ValueError("ssim needs planes of at least 11x11")
    return _ssim_values(ref.values, dist.values)


def _vif_values(ref: np.ndarray, dist: np.ndarray) -> float:
    win = _VIF_WINDOW
    num = 0.0
    den = 0.0
    r, d = ref, dist
    for scale in range(_VIF_SCALES):
        if min(r.shape) < win.shape[0]:
            break
        if scale > 0:
            r = fftconvolve(r, win, mode="valid")[::2, ::2]
            d = fftconvolve(d, win, mode="valid")[::2, ::2]
            if min(r.shape) < win.shape[0]:
                break
        mu1 = fftconvolve(r, win, mode="valid")
        mu2 = fftconvolve(d, win, mode="valid")
        sigma1_sq = fftconvolve(r * r, win, mode="valid") - mu1 * mu1
        sigma2_sq = fftconvolve(d * d, win, mode="valid") - mu2 * mu2
        sigma12 = fftconvolve(r * d, win, mode="valid") - mu1 * mu2
        sigma1_sq = np.maximum(sigma1_sq, 0.0)
        sigma2_sq = np.maximum(sigma2_sq, 0.0)

        g = sigma12 / (sigma1_sq + _VIF_EPS)
        sv_sq = sigma2_sq - g * sigma12

        g[sigma1_sq < _VIF_EPS] = 0.0
        sv_sq[sigma1_sq < _VIF_EPS] = sigma2_sq[sigma1_sq < _VIF_EPS]
        sigma1_sq = np.where(sigma1_sq < _VIF_EPS, 0.0, sigma1_sq)
        sv_sq[g < 0.0] = sigma2_sq[g < 0.0]
        g = np.maximum(g, 0.0)
        sv_sq = np.maximum(sv_sq, _VIF_EPS)

        num += float(np.sum(np.log2(1.0 + g * g * sigma1_sq / (sv_sq + _VIF_SIGMA_NSQ))))
        den += float(np.sum(np.log2(1.0 + sigma1_sq / _VIF_SIGMA_NSQ)))
    if den == 0.0:
        return 1.0
    return num / den


def vif(ref: LumaPlane, dist: LumaPlane) -> float:
    """Pixel-domain visual information fidelity on luma; 1.0 when dist = ref."""
    _check_dims(ref.values, dist.values, "vif")
    if ref.height < 32 or ref.width < 32:
        raise ValueError("vif needs planes of at least 32x32")
    return _vif_values(ref.values, dist.values)


@dataclass(frozen=True)
class MetricScore:
    metric: Metric
    per_frame: tuple[float, ...]
    video_score: float

    def to_json_obj(self, video_id: str) -> dict:
        inf_frames = [i for i, v in enumerate(self.per_frame) if math.isinf(v)]
        return {
            "video_id": video_id,
            "metric": self.metric.value,
            "video_score": None if math.isinf(self.video_score) else self.video_score,
            "video_score_infinite": math.isinf(self.video_score),
            "per_frame": [None if math.isinf(v) else v for v in self.per_frame],
            "infinite_frames": inf_frames,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> tuple[str, "MetricScore"]:
        """Inverse of to_json_obj; returns (video_id, score)."""
        try:
            video_id = str(obj["video_id"])
            metric = Metric(obj["metric"])
            raw_pf = obj["per_frame"]
            raw_video = obj["video_score"]
            video_inf = bool(obj["video_score_infinite"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"malformed metric score object: {exc}") from exc
        per_frame = tuple(math.inf if v is None else float(v) for v in raw_pf)
        if video_inf != (raw_video is None):
            raise ValueError("video_score and video_score_infinite disagree")
        video = math.inf if video_inf else float(raw_video)
        return video_id, cls(metric, per_frame, video)


def score_clip(ref: VideoClip, dist: VideoClip, metric: Metric) -> MetricScore:
    """Per-frame metric values and their mean over the clip."""
    if (ref.nframes, ref.height, ref.width) != (dist.nframes, dist.height, dist.width):
        raise ValueError(
            f"clip geometry mismatch: {ref.data.shape} vs {dist.data.shape}"
        )
    values: list[float] = []
    if metric is Metric.PSNR:
        for i in range(ref.nframes):
            values.append(psnr(ref.frame(i), dist.frame(i)))
    else:
        ref_lumas = luma_planes(ref)
        dist_lumas = luma_planes(dist)
        fn = _ssim_values if metric is Metric.SSIM else _vif_values
        if metric is Metric.SSIM and (ref.height < 11 or ref.width < 11):
            raise ValueError("ssim needs frames of at least 11x11")
        if metric is Metric.VIF and (ref.height < 32 or ref.width < 32):
            raise ValueError("vif needs frames of at least 32x32")
        for i in range(ref.nframes):
            values.append(fn(ref_lumas[i], dist_lumas[i]))
    video = math.inf if any(math.isinf(v) for v in values) else float(np.mean(values))
    return MetricScore(metric, tuple(values), video)
