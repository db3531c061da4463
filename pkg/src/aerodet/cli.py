"""Command-line entry point.

Subcommands mirror the library modules: ``analyze-cfg`` (shape table and
lint diagnostics), ``anchors`` (IOU k-means over annotation boxes),
``stats`` (dataset statistics), ``split`` (sequence-aware partitions),
``decode`` (head tensor to detections), ``evaluate`` (detections against
truth). Outputs are plain text with stable ordering and fixed float
formatting, so repeated runs with the same flags are byte-identical.

``--threads`` (or the AERODET_THREADS env var) caps worker counts; the
current implementation computes everything on one thread, which trivially
respects any cap, and the flag is accepted for interface stability.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import anchors as anchors_mod
from . import dataset, decoder, evaluate as eval_mod, netcfg

logger = logging.getLogger(__name__)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _threads_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap on worker threads (default: AERODET_THREADS or 1)",
    )


def _resolve_threads(args) -> int:
    value = args.threads
    if value is None:
        value = int(os.environ.get("AERODET_THREADS", "1"))
    if value < 1:
        raise ValueError(f"--threads must be >= 1, got {value}")
    return value


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def cmd_analyze_cfg(args) -> int:
    net = netcfg.parse_cfg(_read_text(args.cfg))
    if args.width or args.height:
        width = args.width or net.input_shape.width
        height = args.height or net.input_shape.height
        net = net.with_input_size(width, height)
    shapes = netcfg.propagate_shapes(net)

    rows = []
    for i, (layer, shape) in enumerate(zip(net.layers, shapes)):
        if layer.kind is netcfg.LayerKind.CONVOLUTIONAL:
            geom = f"{layer.kernel}x{layer.kernel}/{layer.stride}"
        elif layer.kind is netcfg.LayerKind.MAXPOOL:
            geom = f"{layer.kernel}x{layer.kernel}/{layer.stride}"
        elif layer.kind is netcfg.LayerKind.REORG:
            geom = f"/{layer.stride}"
        elif layer.kind is netcfg.LayerKind.ROUTE:
            geom = ",".join(str(s) for s in layer.route_sources)
        else:
            geom = "-"
        filters = str(layer.filters) if layer.filters is not None else "-"
        rows.append((str(i), layer.kind.value, filters, geom, str(shape)))

    headers = ("layer", "kind", "filters", "size/stride", "output")
    widths = [max(len(h), max(len(r[c]) for r in rows)) for c, h in enumerate(headers)]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    for row in rows:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())

    diagnostics = netcfg.validate_net(net)
    for diag in diagnostics:
        print(diag)
    return 1 if any(d.severity == "error" for d in diagnostics) else 0


def cmd_anchors(args) -> int:
    records = dataset.load_annotations(args.annotations)
    boxes = [
        (box.w / rec.width * args.grid_w, box.h / rec.height * args.grid_h)
        for rec in records
        for box in rec.boxes
    ]
    if not boxes:
        raise SystemExit("error: no boxes in annotation file")
    result = anchors_mod.kmeans_anchors(boxes, args.k, seed=args.seed, max_iters=args.max_iters)
    if args.prune_largest:
        result = anchors_mod.prune_largest(result, args.prune_largest)
    print(f"anchors: {anchors_mod.format_anchors(result)}")
    print(f"mean_best_iou={_fmt(anchors_mod.mean_best_iou(boxes, result))}")
    return 0


def cmd_stats(args) -> int:
    records = dataset.load_annotations(args.annotations)
    stats = dataset.compute_stats(records, ratio_mode=args.ratio_mode)
    print(f"images={len(records)}")
    print(f"boxes={sum(len(r.boxes) for r in records)}")
    print(f"mean_box_w={_fmt(stats.mean_box_w)}")
    print(f"mean_box_h={_fmt(stats.mean_box_h)}")
    print(f"area_ratio={_fmt(stats.area_ratio)}")
    print(f"pct_overlapping={_fmt(stats.pct_overlapping)}")
    return 0


def cmd_split(args) -> int:
    records = dataset.load_annotations(args.annotations)
    result = dataset.split(records, train_frac=args.train, val_frac=args.val, seed=args.seed)
    by_seq = dataset.images_by_sequence(records)
    for name, seqs in zip(("train", "val", "test"), result):
        images = sum(len(by_seq[s]) for s in seqs)
        print(f"{name}: {' '.join(seqs)} (sequences={len(seqs)}, images={images})")
    return 0


def cmd_decode(args) -> int:
    tensor = decoder.read_head_tensor(args.tensor)
    anchor_list = anchors_mod.parse_anchors(args.anchors)
    boxes = decoder.decode(
        tensor, anchor_list, args.image_w, args.image_h, conf_threshold=args.conf
    )
    if not args.no_nms:
        boxes = decoder.nms(boxes, iou_threshold=args.nms_iou)
    image_id = args.image_id or os.path.splitext(os.path.basename(args.tensor))[0]
    out = dataset.format_detections({image_id: boxes})
    sys.stdout.write(out)
    return 0


def cmd_evaluate(args) -> int:
    truth_records = dataset.load_annotations(args.truths)
    truths_by_image = {rec.image_id: rec.boxes for rec in truth_records}
    image_dims = {rec.image_id: (rec.width, rec.height) for rec in truth_records}
    dets_by_image = dataset.load_detections(args.dets)

    report = eval_mod.evaluate(
        dets_by_image,
        truths_by_image,
        iou_threshold=args.iou,
        conf_threshold=args.conf,
        image_dims=image_dims if args.size_strata else None,
    )

    width = max(len("image"), max((len(i) for i, _, _ in report.per_image), default=0))
    print(f"per-image results (iou={args.iou:.2f}, conf={args.conf:.2f})")
    print(f"{'image'.ljust(width)}  precision  recall")
    for image_id, p, r in report.per_image:
        print(f"{image_id.ljust(width)}  {_fmt(p)}   {_fmt(r)}")

    if args.ap_mode == "voc":
        ap, ar = eval_mod.voc_ap(
            dets_by_image, truths_by_image, iou_threshold=args.iou, conf_threshold=args.conf
        )
    else:
        ap, ar = report.ap, report.ar
    print(f"ap_mode={args.ap_mode}")
    print(f"ap={_fmt(ap)}")
    print(f"ar={_fmt(ar)}")
    print(f"far={_fmt(eval_mod.far(ap))}")
    print(f"images={len(report.per_image)}")
    print(f"unknown_image_detections={report.unknown_image_detections}")
    if report.size_map is not None:
        for bucket in eval_mod.SIZE_BUCKETS:
            bucket_ap, bucket_ar = report.size_map[bucket]
            print(f"map_{bucket}={_fmt(bucket_ap)}")
            print(f"mar_{bucket}={_fmt(bucket_ar)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aerodet",
        description="Analysis and evaluation tools for aerial vehicle detectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze-cfg", help="print per-layer output shapes and lint diagnostics")
    p.add_argument("cfg", help="network configuration file")
    p.add_argument("--width", type=int, default=None, help="override input width")
    p.add_argument("--height", type=int, default=None, help="override input height")
    _threads_arg(p)
    p.set_defaults(func=cmd_analyze_cfg)

    p = sub.add_parser("anchors", help="estimate anchors from annotation boxes via IOU k-means")
    p.add_argument("annotations", help="annotation file")
    p.add_argument("--k", type=int, default=5, help="number of anchors (default 5)")
    p.add_argument("--seed", type=int, default=0, help="clustering seed (default 0)")
    p.add_argument("--max-iters", type=int, default=100, help="iteration cap (default 100)")
    p.add_argument(
        "--prune-largest", type=int, default=0, metavar="N",
        help="drop the N largest anchors after clustering (default 0)",
    )
    p.add_argument("--grid-w", type=int, default=13, help="detection grid width (default 13)")
    p.add_argument("--grid-h", type=int, default=13, help="detection grid height (default 13)")
    _threads_arg(p)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("annotations", help="annotation file")
    p.add_argument(
        "--ratio-mode", choices=dataset.RATIO_MODES, default="mean-of-ratios",
        help="area ratio formula (default mean-of-ratios)",
    )
    _threads_arg(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="sequence-aware train/val/test split")
    p.add_argument("annotations", help="annotation file")
    p.add_argument("--train", type=float, default=0.6, help="train fraction (default 0.6)")
    p.add_argument("--val", type=float, default=0.2, help="validation fraction (default 0.2)")
    p.add_argument("--seed", type=int, default=0, help="assignment seed (default 0)")
    _threads_arg(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("decode", help="decode a head tensor file into detections")
    p.add_argument("tensor", help="YTN1 tensor file")
    p.add_argument("--anchors", required=True, help="comma-separated w,h pairs in grid cells")
    p.add_argument("--image-w", type=float, required=True, help="image width in pixels")
    p.add_argument("--image-h", type=float, required=True, help="image height in pixels")
    p.add_argument("--conf", type=float, default=0.25, help="confidence threshold (default 0.25)")
    p.add_argument("--nms-iou", type=float, default=0.45, help="NMS IOU threshold (default 0.45)")
    p.add_argument("--no-nms", action="store_true", help="emit raw thresholded boxes")
    p.add_argument("--image-id", default=None, help="image id for output lines (default: file stem)")
    _threads_arg(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="score a detection file against annotations")
    p.add_argument("--dets", required=True, help="detection file")
    p.add_argument("--truths", required=True, help="annotation file")
    p.add_argument("--iou", type=float, default=0.5, help="match IOU threshold (default 0.5)")
    p.add_argument("--conf", type=float, default=0.25, help="confidence threshold (default 0.25)")
    p.add_argument("--size-strata", action="store_true", help="also report per size bucket")
    p.add_argument(
        "--ap-mode", choices=("per-image", "voc"), default="per-image",
        help="per-image averaging or pooled PR-curve AP (default per-image)",
    )
    _threads_arg(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        _resolve_threads(args)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
