"""Command-line front end: image directories in, one AFV1 feature file out."""

from __future__ import annotations

import argparse
import logging
import sys

from .encoders import DEFAULT_ENCODER, EncoderUnavailableError, available_encoders
from .extract import DirectorySpec, ExtractJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afv-extract",
        description="Export frozen vision-encoder features for labeled image "
        "directories into an AFV1 feature file.",
    )
    parser.add_argument(
        "--dir",
        dest="dirs",
        action="append",
        required=True,
        metavar="PATH:LABEL:TAG",
        help="image directory with its label (0/1 or real/gen) and source tag; repeatable",
    )
    parser.add_argument(
        "--encoder",
        default=DEFAULT_ENCODER,
        help=f"encoder name (default {DEFAULT_ENCODER}; available: {', '.join(available_encoders())})",
    )
    parser.add_argument("--batch", type=int, default=32, help="encode batch size (default 32)")
    parser.add_argument("--jpeg-q", type=int, default=None, help="re-encode pixels as JPEG at this quality first")
    parser.add_argument("--blur-sigma", type=float, default=None, help="Gaussian-blur pixels with this sigma first")
    parser.add_argument("--out", required=True, help="output AFV1 path (a .json sidecar is written next to it)")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        job = ExtractJob(
            directories=[DirectorySpec.parse(d) for d in args.dirs],
            encoder=args.encoder,
            batch_size=args.batch,
            out=args.out,
            jpeg_quality=args.jpeg_q,
            blur_sigma=args.blur_sigma,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = extract(job)
    except (ValueError, EncoderUnavailableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(
        f"wrote {job.out}: {report.records} records, dim {report.dim}, "
        f"{report.warnings} skipped"
    )
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
