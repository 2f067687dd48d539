#!/usr/bin/env python3
"""Generate a synthetic frame sequence plus a matching detections sidecar.

Each frame contains a bright face-like disc drifting across a noisy
background, so the mock backend produces a mix of labels.  Useful for
exercising the video pipeline without any real footage:

    python3 scripts/make_synthetic_video.py --out demo --frames 60
    crop-ensemble video --video demo/frames --detections demo/detections.txt \
        --model mock --out demo/annotated --fps-report demo/report.json
"""

import argparse
from pathlib import Path

import cv2
import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo", help="output directory")
    parser.add_argument("--frames", type=int, default=60)
    parser.add_argument("--width", type=int, default=640)
    parser.add_argument("--height", type=int, default=480)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    lines = []
    face_w, face_h = args.width // 4, args.height // 3
    for i in range(args.frames):
        img = rng.integers(0, 100, (args.height, args.width, 3), dtype=np.uint8)
        # face drifts left to right; brightness alternates so labels flip
        t = i / max(args.frames - 1, 1)
        cx = int(face_w + t * (args.width - 2 * face_w))
        cy = args.height // 2
        value = 220 if (i // 10) % 2 == 0 else 40
        cv2.circle(img, (cx, cy), face_h // 2, (value, value, value), -1)
        cv2.imwrite(str(frames_dir / f"{i:05d}.png"), img)
        xa, ya = cx - face_w // 2, cy - face_h // 2
        lines.append(f"{i} {xa} {ya} {xa + face_w} {ya + face_h}")

    (out / "detections.txt").write_text("\n".join(lines) + "\n")
    print(f"wrote {args.frames} frames to {frames_dir} and {out / 'detections.txt'}")


if __name__ == "__main__":
    main()
