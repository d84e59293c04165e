"""Command-line entry point: `train` fits the translator on a paired
manifest, `adapt` runs a saved checkpoint over a directory of PNGs.

Exit codes: 0 success, 2 usage/config error, 3 IO error."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .bridge import BridgeConfig, adapt_images, train_translator

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ganbridge",
        description="Desk-scale paired image translation for emitted datasets")
    parser.add_argument("--version", action="version",
                        version=f"ganbridge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the translator on a paired dataset")
    p.add_argument("--manifest", required=True, help="paired manifest.json")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--image-size", type=int, default=64,
                   help="training resolution, power of two >= 32")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--checkpoint-dir", default="checkpoints")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("adapt", help="translate a directory of PNG images")
    p.add_argument("--checkpoint", required=True, help="generator.pt path")
    p.add_argument("--src", required=True, help="directory of source PNGs")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_train(args) -> int:
    cfg = BridgeConfig(manifest_path=args.manifest, image_size=args.image_size,
                       epochs=args.epochs, batch_size=args.batch_size,
                       learning_rate=args.lr,
                       checkpoint_dir=args.checkpoint_dir, seed=args.seed)
    result = train_translator(cfg)
    print(f"checkpoint: {result.checkpoint_path}", file=sys.stderr)
    print(f"loss history: {result.history_path}", file=sys.stderr)
    if result.history:
        print(f"L1 first/last epoch: {result.history[0]:.4f} / "
              f"{result.history[-1]:.4f}", file=sys.stderr)
    return EXIT_OK


def _cmd_adapt(args) -> int:
    count = adapt_images(args.checkpoint, args.src, args.out)
    print(f"adapted {count} image(s) into {args.out}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        return _cmd_adapt(args)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
