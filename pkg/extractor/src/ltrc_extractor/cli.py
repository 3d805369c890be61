"""Command-line entry point mirroring ExtractionJob."""

from __future__ import annotations

import argparse
import sys

from .extract import POLICIES, ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltrc-extract",
        description="Dump per-layer decoder hidden states into an LTRC trace file.")
    parser.add_argument("--model", default="tiny",
                        help="'tiny' for the random-weight stand-in, or a local "
                             "HuggingFace checkpoint path (default: tiny)")
    parser.add_argument("--visual", default=None,
                        help="visual-slot content (text placeholder at desk scale)")
    parser.add_argument("--query", default=None, help="textual query")
    parser.add_argument("--instruction", default="", help="optional instruction text")
    parser.add_argument("--policy", choices=POLICIES, default="all_tokens")
    parser.add_argument("--sample-id", default="0")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--layers", type=int, default=4,
                        help="tiny backend: decoder block count")
    parser.add_argument("--hidden-size", type=int, default=32,
                        help="tiny backend: hidden dimension")
    parser.add_argument("--heads", type=int, default=4,
                        help="tiny backend: attention heads")
    parser.add_argument("--model-seed", type=int, default=0,
                        help="tiny backend: weight seed")
    parser.add_argument("-o", "--out", required=True, help="output .ltrc path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        model=args.model, visual=args.visual, query=args.query,
        instruction=args.instruction, policy=args.policy,
        out_path=args.out, device=args.device, sample_id=args.sample_id,
        layers=args.layers, hidden=args.hidden_size, heads=args.heads,
        model_seed=args.model_seed)
    try:
        path = extract(job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
