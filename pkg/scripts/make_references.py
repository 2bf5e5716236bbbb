#!/usr/bin/env python3
"""Render the ten default procedural reference clips to a directory.

The output directory then feeds `lapvqa synth --refs <dir>`.
"""

import argparse
from pathlib import Path

from lapvqa.frameio import write_clip
from lapvqa.references import make_default_references


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory for *.y4m refs")
    parser.add_argument("--width", type=int, default=512)
    parser.add_argument("--height", type=int, default=288)
    parser.add_argument("--frames", type=int, default=250)
    parser.add_argument("--seed", type=int, default=20240)
    parser.add_argument("--fps", type=float, default=25.0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    refs = make_default_references(
        width=args.width, height=args.height, nframes=args.frames,
        seed=args.seed, fps=args.fps,
    )
    for ref in refs:
        path = out / f"{ref.label}.y4m"
        write_clip(ref.clip, path)
        print(f"wrote {path} ({ref.clip.nframes} frames {ref.clip.width}x{ref.clip.height})")


if __name__ == "__main__":
    main()
