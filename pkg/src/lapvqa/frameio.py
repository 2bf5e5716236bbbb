"""Frame and clip data model plus lossless video I/O.

Two interchange formats are supported: YUV4MPEG2 streams (``.y4m``) and
directories of numbered PNG frames. Both round-trip pixel data exactly.
The Y4M writer stores 4:4:4 chroma in 16-bit planes (``C444p16``,
component value scaled by 256) because 8-bit YCbCr cannot represent every
8-bit RGB triplet; with 16 bits the BT.601 conversion inverts exactly.

Color conversion uses full-range BT.601 throughout. The source material
this toolkit is meant to mimic does not record its color space, so BT.601
full range is an assumption (appropriate for SD-resolution content) and
all luma values follow it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

# Full-range BT.601 RGB -> YCbCr matrix and its exact inverse.
_RGB_TO_YCC = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735892, -0.331264108, 0.5],
        [0.5, -0.418687589, -0.081312411],
    ]
)
_YCC_TO_RGB = np.linalg.inv(_RGB_TO_YCC)
_YCC_OFFSET = np.array([0.0, 128.0, 128.0])

# The 8.8 fixed-point scaling folded into the constants. Scaling IEEE doubles
# by a power of two only shifts the exponent, so transforming with these is
# bit-identical to transforming with the plain constants and scaling after
# (verified exhaustively over every RGB triple); it just saves a full pass
# over each frame.
_RGB_TO_YCC_X256 = _RGB_TO_YCC * 256.0
_YCC_OFFSET_X256 = _YCC_OFFSET * 256.0
_YCC_TO_RGB_D256 = _YCC_TO_RGB / 256.0

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PNG_FRAME_RE = re.compile(r"^frame_(\d{6})\.png$")


class ClipIOError(Exception):
    """Base class for clip read/write failures."""


class MalformedHeaderError(ClipIOError):
    """Stream header missing, unparseable, or describing an unsupported layout."""


class TruncatedStreamError(ClipIOError):
    """Stream ended mid-frame."""


class FrameSizeMismatchError(ClipIOError):
    """Frames within one clip source disagree on dimensions."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Frame:
    """One 8-bit RGB frame, shape (height, width, 3), immutable."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"frame must have shape (h, w, 3), got {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"frame pixels must be uint8, got {px.dtype}")
        if px.shape[0] < 3 or px.shape[1] < 3:
            raise ValueError("frame must be at least 3x3")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class LumaPlane:
    """Real-valued luminance plane, values in [0, 255]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"luma plane must be 2-D, got shape {v.shape}")
        if v.size == 0:
            raise ValueError("luma plane must be non-empty")
        if float(v.min()) < 0.0 or float(v.max()) > 255.0:
            raise ValueError("luma values must lie in [0, 255]")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class VideoClip:
    """Ordered frames sharing one geometry, plus a frame rate.

    ``data`` has shape (nframes, height, width, 3), dtype uint8.
    """

    data: np.ndarray
    fps: float

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 4 or d.shape[3] != 3:
            raise ValueError(f"clip data must have shape (n, h, w, 3), got {d.shape}")
        if d.dtype != np.uint8:
            raise ValueError(f"clip data must be uint8, got {d.dtype}")
        if d.shape[0] < 1:
            raise ValueError("clip must contain at least one frame")
        if d.shape[1] < 3 or d.shape[2] < 3:
            raise ValueError("frames must be at least 3x3")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "data", _freeze(d))

    @classmethod
    def from_frames(cls, frames, fps: float) -> "VideoClip":
        frames = list(frames)
        if not frames:
            raise ValueError("clip must contain at least one frame")
        shape = frames[0].pixels.shape
        for f in frames[1:]:
            if f.pixels.shape != shape:
                raise FrameSizeMismatchError(
                    f"frame size {f.pixels.shape[:2]} != {shape[:2]}"
                )
        return cls(np.stack([f.pixels for f in frames]), fps)

    @property
    def nframes(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def frame(self, i: int) -> Frame:
        return Frame(self.data[i])

    def __iter__(self):
        for i in range(self.nframes):
            yield self.frame(i)

    def __len__(self) -> int:
        return self.nframes


def to_luma(frame: Frame) -> LumaPlane:
    """BT.601 full-range luminance: Y = 0.299 R + 0.587 G + 0.114 B."""
    px = frame.pixels.astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    return LumaPlane(wr * px[..., 0] + wg * px[..., 1] + wb * px[..., 2])


def luma_planes(clip: VideoClip) -> np.ndarray:
    """Luminance of every frame as one (n, h, w) float array."""
    px = clip.data.astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    return wr * px[..., 0] + wg * px[..., 1] + wb * px[..., 2]


# --- format detection -------------------------------------------------------


def _infer_format(path: Path) -> str:
    if path.is_dir():
        return "png-dir"
    if path.suffix.lower() == ".y4m":
        return "y4m"
    raise ClipIOError(f"cannot infer clip format of {path}; pass format explicitly")


def read_clip(path, format: str | None = None) -> VideoClip:
    """Read a clip from a Y4M file or a PNG frame directory."""
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "y4m":
        return _read_y4m(path)
    if fmt == "png-dir":
        return _read_png_dir(path)
    raise ValueError(f"unknown clip format {fmt!r}")


def write_clip(clip: VideoClip, path, format: str | None = None) -> None:
    """Write a clip losslessly. Y4M output uses 16-bit 4:4:4 planes."""
    path = Path(path)
    if format is not None:
        fmt = format
    elif path.suffix.lower() == ".y4m":
        fmt = "y4m"
    elif not path.suffix or path.is_dir():
        fmt = "png-dir"
    else:
        raise ClipIOError(f"cannot infer clip format of {path}; pass format explicitly")
    if fmt == "y4m":
        _write_y4m(clip, path)
    elif fmt == "png-dir":
        _write_png_dir(clip, path)
    else:
        raise ValueError(f"unknown clip format {fmt!r}")


# --- YUV4MPEG2 --------------------------------------------------------------

_Y4M_MAGIC = b"YUV4MPEG2"


def _ycc_to_rgb_u8(ycc: np.ndarray) -> np.ndarray:
    rgb = (ycc - _YCC_OFFSET) @ _YCC_TO_RGB.T
    rgb += 0.5
    np.floor(rgb, out=rgb)
    np.clip(rgb, 0.0, 255.0, out=rgb)
    return rgb.astype(np.uint8)


def _parse_y4m_header(line: bytes, path: Path) -> dict:
    parts = line.strip().split(b" ")
    if not parts or parts[0] != _Y4M_MAGIC:
        raise MalformedHeaderError(f"{path}: missing YUV4MPEG2 magic")
    info = {"C": "420jpeg"}
    for tok in parts[1:]:
        if not tok:
            continue
        key, val = chr(tok[0]), tok[1:].decode("ascii", "replace")
        if key == "W":
            info["W"] = int(val)
        elif key == "H":
            info["H"] = int(val)
        elif key == "F":
            num, _, den = val.partition(":")
            info["F"] = (int(num), int(den or "1"))
        elif key == "C":
            info["C"] = val
        # I, A, X parameters carry no pixel information here; ignored.
    for required in ("W", "H", "F"):
        if required not in info:
            raise MalformedHeaderError(f"{path}: header lacks {required} parameter")
    if info["W"] <= 0 or info["H"] <= 0 or info["F"][0] <= 0 or info["F"][1] <= 0:
        raise MalformedHeaderError(f"{path}: non-positive geometry or frame rate")
    return info


def _read_y4m(path: Path) -> VideoClip:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise ClipIOError(f"cannot open {path}: {exc}") from exc
    with fh:
        header = fh.readline(4096)
        if not header.endswith(b"\n"):
            raise MalformedHeaderError(f"{path}: unterminated stream header")
        info = _parse_y4m_header(header, path)
        w, h = info["W"], info["H"]
        cs = info["C"]
        if cs.startswith("420"):
            if w % 2 or h % 2:
                raise MalformedHeaderError(
                    f"{path}: 4:2:0 stream with odd dimensions {w}x{h}"
                )
            plane_spec = [(h, w, 1), (h // 2, w // 2, 1), (h // 2, w // 2, 1)]
            depth = 8
        elif cs == "444":
            plane_spec = [(h, w, 1)] * 3
            depth = 8
        elif cs == "444p16":
            plane_spec = [(h, w, 2)] * 3
            depth = 16
        else:
            raise MalformedHeaderError(f"{path}: unsupported colorspace C{cs}")

        frames = []
        while True:
            marker = fh.readline(4096)
            if marker == b"":
                break
            if not marker.startswith(b"FRAME") or not marker.endswith(b"\n"):
                raise TruncatedStreamError(f"{path}: bad FRAME marker at frame {len(frames)}")
            planes = []
            for ph, pw, bps in plane_spec:
                nbytes = ph * pw * bps
                buf = fh.read(nbytes)
                if len(buf) != nbytes:
                    raise TruncatedStreamError(
                        f"{path}: frame {len(frames)} truncated "
                        f"({len(buf)} of {nbytes} plane bytes)"
                    )
                dt = np.uint8 if bps == 1 else np.dtype("<u2")
                planes.append(np.frombuffer(buf, dtype=dt).reshape(ph, pw))
            frames.append(_planes_to_rgb(planes, w, h, depth))
        if not frames:
            raise TruncatedStreamError(f"{path}: stream contains no frames")
    fps_num, fps_den = info["F"]
    return VideoClip(np.stack(frames), fps_num / fps_den)


def _planes_to_rgb(planes, w: int, h: int, depth: int) -> np.ndarray:
    y, cb, cr = planes
    if cb.shape != (h, w):  # 4:2:0 -> nearest-neighbor upsample
        cb = np.repeat(np.repeat(cb, 2, axis=0), 2, axis=1)[:h, :w]
        cr = np.repeat(np.repeat(cr, 2, axis=0), 2, axis=1)[:h, :w]
    ycc = np.stack([y, cb, cr], axis=-1)
    if depth == 16:
        rgb = np.subtract(ycc, _YCC_OFFSET_X256, dtype=np.float64) @ _YCC_TO_RGB_D256.T
        rgb += 0.5
        np.floor(rgb, out=rgb)
        np.clip(rgb, 0.0, 255.0, out=rgb)
        return rgb.astype(np.uint8)
    return _ycc_to_rgb_u8(ycc.astype(np.float64))


def _write_y4m(clip: VideoClip, path: Path) -> None:
    frac = Fraction(clip.fps).limit_denominator(1_000_000)
    header = (
        f"YUV4MPEG2 W{clip.width} H{clip.height} "
        f"F{frac.numerator}:{frac.denominator} Ip A1:1 C444p16 XCOLORRANGE=FULL\n"
    )
    tmp = path.with_name(path.name + ".tmp")
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = clip.height, clip.width
    rgbf = np.empty((h, w, 3))
    ycc = np.empty((h, w, 3))
    planes = np.empty((3, h, w), dtype="<u2")
    try:
        with open(tmp, "wb") as fh:
            fh.write(header.encode("ascii"))
            for i in range(clip.nframes):
                # floor(ycc256 + 0.5) with the x256-folded constants, all
                # intermediates in per-clip buffers, then the three planes
                # emitted as one contiguous Y, Cb, Cr block.
                np.copyto(rgbf, clip.data[i], casting="unsafe")
                np.matmul(rgbf, _RGB_TO_YCC_X256.T, out=ycc)
                ycc += _YCC_OFFSET_X256
                ycc += 0.5
                np.floor(ycc, out=ycc)
                np.copyto(planes, ycc.transpose(2, 0, 1), casting="unsafe")
                fh.write(b"FRAME\n")
                fh.write(planes.data)
        tmp.replace(path)
    finally:
        tmp.unlink(missing_ok=True)


# --- PNG frame directories --------------------------------------------------
# Naming contract: frame_%06d.png, 1-based, lexicographic order == play order.


def _read_png_dir(path: Path, fps: float = 25.0) -> VideoClip:
    if not path.is_dir():
        raise ClipIOError(f"{path} is not a directory")
    named = sorted(p for p in path.iterdir() if _PNG_FRAME_RE.match(p.name))
    if not named:
        raise ClipIOError(f"{path}: no frame_NNNNNN.png files found")
    frames = []
    shape = None
    for p in named:
        try:
            with Image.open(p) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
        except OSError as exc:
            raise ClipIOError(f"cannot decode {p}: {exc}") from exc
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise FrameSizeMismatchError(
                f"{p.name}: size {arr.shape[:2]} != first frame {shape[:2]}"
            )
        frames.append(arr)
    meta = path / "clip.json"
    if meta.exists():
        import json

        try:
            fps = float(json.loads(meta.read_text())["fps"])
        except (ValueError, KeyError) as exc:
            raise MalformedHeaderError(f"{meta}: bad clip metadata: {exc}") from exc
    return VideoClip(np.stack(frames), fps)


def _write_png_dir(clip: VideoClip, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    for stale in path.iterdir():
        if _PNG_FRAME_RE.match(stale.name):
            stale.unlink()
    for i in range(clip.nframes):
        Image.fromarray(clip.data[i], mode="RGB").save(
            path / f"frame_{i + 1:06d}.png", format="PNG"
        )
    import json

    (path / "clip.json").write_text(json.dumps({"fps": clip.fps}))
