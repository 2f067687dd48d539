#!/usr/bin/env python3
"""Measure where per-frame time goes as crop parallelism and frame size vary.

Sweeps the bench over frame sizes and parallelism degrees and prints a table
of per-stage mean latencies, so the geometry-vs-inference cost balance is
visible on the current machine.

    python3 scripts/stage_cost_experiment.py --frames 200
"""

import argparse

from crop_ensemble import BenchConfig, ModelManifest, bench, load_backend


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=200)
    parser.add_argument("--model", default="mock")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    from crop_ensemble.cli import parse_model

    handle = load_backend(parse_model(args.model))
    print(f"{'frame':>10} {'par':>4} {'fps':>8} {'intake':>8} {'geometry':>9} "
          f"{'inference':>10} {'aggregate':>10}")
    for size in (256, 480, 816, 1280):
        for parallelism in (1, 3):
            cfg = BenchConfig(
                frames=args.frames, parallelism=parallelism,
                frame_width=size, frame_height=size, seed=args.seed,
            )
            r = bench(cfg, handle)
            s = r.per_stage
            print(f"{size:>7}px {parallelism:>4} {r.fps:>8.1f} "
                  f"{s['detect_intake'].mean_ms:>7.2f}ms {s['geometry'].mean_ms:>8.2f}ms "
                  f"{s['inference'].mean_ms:>9.2f}ms {s['aggregate'].mean_ms:>9.3f}ms")


if __name__ == "__main__":
    main()
