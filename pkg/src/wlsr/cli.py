"""``wlsr`` command line: build-bank, augment, validate.

Exit codes: 0 success, 1 fatal error, 2 validation violations.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .annot import read_class_list
from .errors import InsufficientCandidates, WLSRError
from .lightbank import DEFAULT_NMS_IOU, ThresholdParams
from .placement import DEFAULT_MAX_RETRIES
from .prohibit import DEFAULT_BLACK_THRESHOLD, DEFAULT_MARGIN, ProhibitionParams

log = logging.getLogger("wlsr")


def _threshold_args(p):
    p.add_argument("--min-channel", type=int, default=200,
                   help="minimum of r,g,b for a pixel to count as light (default 200)")
    p.add_argument("--chroma-spread", type=int, default=30,
                   help="maximum max(rgb)-min(rgb) for a light pixel (default 30)")
    p.add_argument("--nms-iou", type=float, default=DEFAULT_NMS_IOU,
                   help="IoU threshold for light-box NMS (default 0.3)")


def build_parser():
    parser = argparse.ArgumentParser(prog="wlsr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-bank", help="build the bank of light patches")
    b.add_argument("--images", required=True, help="corpus image directory")
    b.add_argument("--out", required=True, help="bank output directory")
    b.add_argument("--crops", type=int, default=300, help="original crops (default 300)")
    b.add_argument("--seed", type=int, default=0)
    _threshold_args(b)

    a = sub.add_parser("augment", help="augment an annotated dataset")
    a.add_argument("--images", required=True)
    a.add_argument("--voc", required=True, help="Pascal-VOC XML directory")
    a.add_argument("--bank", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--fraction", type=float, default=0.2)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--max-retries", type=int, default=DEFAULT_MAX_RETRIES)
    a.add_argument("--black-threshold", type=int, default=DEFAULT_BLACK_THRESHOLD)
    a.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    a.add_argument("--debug-dir", default=None)
    a.add_argument("--voc-one-based", action="store_true",
                   help="read VOC boxes as 1-based inclusive")
    a.add_argument("--class-list", default=None, help="file with one class name per line")
    a.add_argument("--workers", type=int, default=1)
    _threshold_args(a)

    v = sub.add_parser("validate", help="re-check an augmented output directory")
    v.add_argument("--out", required=True)
    return parser


def run(args) -> int:
    if args.command == "build-bank":
        params = ThresholdParams(args.min_channel, args.chroma_spread)
        try:
            path = pipeline.cmd_build_bank(args.images, args.out, args.crops, args.seed,
                                           params, args.nms_iou)
        except InsufficientCandidates as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(path)
        return 0

    if args.command == "augment":
        params = ProhibitionParams(ThresholdParams(args.min_channel, args.chroma_spread),
                                   args.nms_iou, args.black_threshold, args.margin)
        classes = read_class_list(args.class_list) if args.class_list else None
        config = pipeline.PipelineConfig(
            args.images, args.voc, args.bank, args.out, args.fraction, args.seed,
            args.max_retries, params, args.debug_dir, args.voc_one_based, classes,
            args.workers)
        manifest = pipeline.cmd_augment(config)
        print(json.dumps(manifest["counts"], sort_keys=True))
        return 0

    report = pipeline.cmd_validate(args.out)
    for v in report["violations"]:
        print(f"violation: {v['image']}: {', '.join(v['kinds'])}")
    print(f"checked {report['checked']} augmented images, "
          f"{len(report['violations'])} violations")
    return 2 if report["violations"] else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (WLSRError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
