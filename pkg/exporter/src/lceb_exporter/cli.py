"""Command line entry points for the exporter."""

import argparse
import logging
import sys

from .backends import HashStaticBackend, TransformerBackend, WindowMixBackend
from .export import export, export_static, read_sequences, read_vocabulary
from .format import ExportError


def _parser():
    parser = argparse.ArgumentParser(
        prog="lceb-exporter",
        description="dump frozen word representations for the probing harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export",
                       help="write per-layer token vectors as an LCEB file")
    p.add_argument("--input", nargs="+", required=True,
                   help="task JSONL or plain text, one sentence per line")
    p.add_argument("--out", required=True, help="output LCEB path")
    p.add_argument("--backend", choices=("hash", "window", "transformer"),
                   required=True)
    p.add_argument("--dim", type=int, default=64,
                   help="vector width for hash/window backends")
    p.add_argument("--layers", type=int, default=3,
                   help="layer count for the window backend")
    p.add_argument("--seed", type=int, default=0,
                   help="hashing seed for hash/window backends")
    p.add_argument("--model", help="pretrained model name or path "
                                   "(transformer backend)")

    p = sub.add_parser("export-static",
                       help="write a static text vector file for a vocabulary")
    p.add_argument("--vocabulary", required=True, help="one word per line")
    p.add_argument("--out", required=True, help="output text path")
    p.add_argument("--backend", choices=("hash",), default="hash")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _export_backend(parser, args):
    if args.backend == "hash":
        return HashStaticBackend(args.dim, seed=args.seed)
    if args.backend == "window":
        return WindowMixBackend(args.dim, num_layers=args.layers, seed=args.seed)
    if not args.model:
        parser.error("--model is required with --backend transformer")
    return TransformerBackend(args.model)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "export":
            backend = _export_backend(parser, args)
            count = export(backend, read_sequences(args.input), args.out)
            print(f"wrote {count} records to {args.out}")
        else:
            backend = HashStaticBackend(args.dim, seed=args.seed)
            count = export_static(backend, read_vocabulary(args.vocabulary),
                                  args.out)
            print(f"wrote {count} vectors to {args.out}")
    except (OSError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
