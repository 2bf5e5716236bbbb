"""Procedural texture fields used for smoke and reference-clip synthesis.

Everything here is periodic value noise on a coarse random lattice,
smoothstep-interpolated, summed over octaves. Periodicity makes temporal
looping and spatial drift free of seams, and the whole construction is
deterministic given the numpy Generator handed in.
"""

from __future__ import annotations

import numpy as np


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _sample_lattice_2d(lattice: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Periodic bilinear sampling of a 2-D lattice at lattice-space coords.

    ys: (h,) column coordinates, xs: (w,) row coordinates; returns (h, w).
    """
    gh, gw = lattice.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = _smoothstep(ys - y0)[:, None]
    fx = _smoothstep(xs - x0)[None, :]
    y0 %= gh
    x0 %= gw
    y1 = (y0 + 1) % gh
    x1 = (x0 + 1) % gw
    v00 = lattice[np.ix_(y0, x0)]
    v01 = lattice[np.ix_(y0, x1)]
    v10 = lattice[np.ix_(y1, x0)]
    v11 = lattice[np.ix_(y1, x1)]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy


def animated_value_noise(
    nframes: int,
    height: int,
    width: int,
    grid: tuple[int, int, int],
    rng: np.random.Generator,
    drift: tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """One octave of animated periodic value noise, shape (nframes, h, w).

    grid is (gt, gh, gw): lattice resolution in time and space. The time
    axis wraps after nframes, so the animation loops. drift is a per-frame
    (dy, dx) pixel offset applied to the sample coordinates; positive dy
    advects the visible pattern upward.
    """
    gt, gh, gw = grid
    lattice = rng.random((gt, gh, gw))
    out = np.empty((nframes, height, width))
    base_ys = np.arange(height) * (gh / height)
    base_xs = np.arange(width) * (gw / width)
    for i in range(nframes):
        tc = i * (gt / max(nframes, 1))
        t0 = int(np.floor(tc))
        ft = _smoothstep(np.array(tc - t0))
        ys = base_ys + drift[0] * i * (gh / height)
        xs = base_xs + drift[1] * i * (gw / width)
        a = _sample_lattice_2d(lattice[t0 % gt], ys, xs)
        b = _sample_lattice_2d(lattice[(t0 + 1) % gt], ys, xs)
        out[i] = a * (1.0 - ft) + b * ft
    return out


def fractal_noise(
    nframes: int,
    height: int,
    width: int,
    rng: np.random.Generator,
    octaves: int = 3,
    base_grid: tuple[int, int, int] = (4, 4, 6),
    drift: tuple[float, float] = (0.0, 0.0),
    persistence: float = 0.55,
) -> np.ndarray:
    """Multi-octave animated value noise, min-max normalized to [0, 1].

    Octave o doubles the spatial lattice of base_grid and halves the
    amplitude by `persistence`. The time lattice stays coarse so motion
    remains slow relative to spatial detail.
    """
    total = np.zeros((nframes, height, width))
    amp = 1.0
    gt, gh, gw = base_grid
    for o in range(octaves):
        total += amp * animated_value_noise(
            nframes, height, width, (gt, gh << o, gw << o), rng, drift
        )
        amp *= persistence
    lo, hi = float(total.min()), float(total.max())
    if hi - lo < 1e-12:
        return np.zeros_like(total)
    return (total - lo) / (hi - lo)


def static_fractal_noise(
    height: int,
    width: int,
    rng: np.random.Generator,
    octaves: int = 3,
    base_grid: tuple[int, int] = (4, 6),
    persistence: float = 0.55,
) -> np.ndarray:
    """Single-frame fractal value noise in [0, 1], shape (h, w)."""
    gh, gw = base_grid
    field = fractal_noise(
        1, height, width, rng, octaves=octaves, base_grid=(1, gh, gw),
        persistence=persistence,
    )
    return field[0]
