"""Trainer command line: fine-tune from manifests and export for serving."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import TrainConfig
from .data import make_toy_dataset, read_manifest
from .export import export_model
from .train import finetune

log = logging.getLogger(__name__)


def config_from_args(args) -> TrainConfig:
    return TrainConfig(
        base=args.base,
        pretrained=not args.no_pretrained,
        frozen_layers=args.frozen_layers,
        dropout=args.dropout,
        batch_size=args.batch_size,
        phase1_epochs=args.epochs1,
        phase1_lr=args.lr1,
        phase2_epochs=args.epochs2,
        phase2_lr=args.lr2,
        rotation_degrees=args.rotation,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    config = config_from_args(args)
    deviations = config.deviations()
    if deviations:
        log.warning("deviating from the protocol defaults: %s", "; ".join(deviations))
    train_records = [r for r in read_manifest(args.train_manifest)
                     if r.split in (None, "train")]
    val_records = None
    if args.val_manifest:
        val_records = [r for r in read_manifest(args.val_manifest)
                       if r.split in (None, "val")]
    result = finetune(config, train_records, val_records, out_dir=args.out)
    if not result.freezing_intact:
        print("error: frozen layers changed during training", file=sys.stderr)
        return 1
    model_path, manifest_path = export_model(result.model, config, args.out)
    print(f"final train loss {result.history['loss'][-1]:.4f}, "
          f"accuracy {result.history['accuracy'][-1]:.4f}")
    print(f"exported {model_path}")
    print(f"manifest {manifest_path}")
    return 0


def cmd_make_toy(args) -> int:
    manifest = make_toy_dataset(args.out, count=args.count, seed=args.seed)
    print(manifest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crop-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune and export a serving bundle")
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--val-manifest")
    p.add_argument("--out", default="train_out")
    p.add_argument("--base", default="vgg16", choices=("vgg16", "compact_cnn"))
    p.add_argument("--no-pretrained", action="store_true",
                   help="start from random weights instead of ImageNet")
    p.add_argument("--frozen-layers", type=int, default=10)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--epochs1", type=int, default=180)
    p.add_argument("--lr1", type=float, default=0.001)
    p.add_argument("--epochs2", type=int, default=20)
    p.add_argument("--lr2", type=float, default=0.0001)
    p.add_argument("--rotation", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("make-toy", help="write a separable synthetic dataset")
    p.add_argument("--out", default="toy_data")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_make_toy)

    return parser


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args()
    sys.exit(args.fn(args))


if __name__ == "__main__":
    main()
