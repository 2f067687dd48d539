#!/usr/bin/env python3
"""Full-protocol fine-tune: VGG-16, ImageNet init, 180+20 epochs.

This is the complete published schedule and is NOT a CI job: on a single
GPU it runs for the better part of a day, and it needs the licensed
Adience/LFW images prepared into manifests first:

    crop-ensemble prepare split --manifest all.tsv --out split.tsv --seed 0
    crop-ensemble prepare lfw --manifest split.tsv
    python3 scripts/full_finetune.py --train-manifest split.tsv \
        --val-manifest split.tsv --out runs/full

The defaults below ARE the protocol; anything you override is echoed into
the exported manifest as a deviation.
"""

import argparse

from crop_trainer import TrainConfig, export_model, finetune, read_manifest


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--train-manifest", required=True)
    parser.add_argument("--val-manifest", required=True)
    parser.add_argument("--out", default="runs/full")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    config = TrainConfig(seed=args.seed)  # protocol defaults, nothing overridden
    train_records = [r for r in read_manifest(args.train_manifest) if r.split == "train"]
    val_records = [r for r in read_manifest(args.val_manifest) if r.split == "val"]
    print(f"{len(train_records)} training / {len(val_records)} validation images")
    print(f"schedule: {config.phase1_epochs} epochs @ {config.phase1_lr}, "
          f"then {config.phase2_epochs} @ {config.phase2_lr}")

    result = finetune(config, train_records, val_records, out_dir=args.out)
    assert result.freezing_intact, "frozen layers drifted during training"
    model_path, manifest_path = export_model(result.model, config, args.out)
    print(f"done: {model_path}\n      {manifest_path}")


if __name__ == "__main__":
    main()
