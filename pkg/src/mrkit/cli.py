"""``mrkit`` command-line interface.

Exit codes: 0 success, 2 input/format error, 3 semantic error.
"""
from __future__ import annotations

import argparse
import collections
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annotate import DegenerateRecordError, annotate_many, clip_mask
from .config import Config
from .detector import Detection, Source, hungarian_match, weighted_fuse
from .io import (
    FormatError,
    annotation_to_ground_truth,
    dumps,
    read_annotations,
    read_embeddings,
    read_predictions,
    read_weights,
    write_annotations,
    write_predictions,
)
from .losses import LossParts, SaliencySupervision, aux_loss, detr_loss, highlight_loss, total_objective
from .metrics import AVG_IOU_THRESHOLDS, Prediction, evaluate
from .pipeline import WeightsError, build_model, infer_many

log = logging.getLogger("mrkit")

EXIT_OK, EXIT_INPUT, EXIT_SEMANTIC = 0, 2, 3


class SemanticError(Exception):
    pass


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("MRKIT_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise FormatError(f"MRKIT_THREADS must be an integer, got {env!r}") from None


def _config(args, **overrides) -> Config:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as e:
            raise FormatError(f"cannot read config: {e.strerror}", args.config) from None
        except ValueError as e:
            raise FormatError(f"invalid JSON: {e}", args.config) from None
        if not isinstance(base, dict):
            raise FormatError("config must be a JSON object", args.config)
    base.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Config.from_dict(base)
    except (TypeError, ValueError) as e:
        raise FormatError(f"invalid config: {e}") from None


def _write_json(obj, out):
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _check_qids(expected: list[str], got: list[str], what: str):
    missing = sorted(set(expected) - set(got))
    extra = sorted(set(got) - set(expected))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing from {what}: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected in {what}: {', '.join(extra)}")
        raise SemanticError("; ".join(parts))


# ---------------------------------------------------------------- commands

def cmd_annotate(args) -> int:
    cfg = _config(args, min_run=args.min_run)
    records = read_embeddings(args.embeddings)
    out = annotate_many(records, cfg.min_run, _threads(args))
    write_annotations(args.out, out)
    hist = collections.Counter(g for r in out for g in r.saliency_grades)
    summary = {
        "records": len(out),
        "windows": sum(len(r.relevant_windows) for r in out),
        "grade_histogram": {str(g): hist.get(g, 0) for g in range(5)},
    }
    print(dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _config(args, gate_axis=args.gate_axis)
    config, tensors = read_weights(args.weights)
    try:
        model = build_model(config, tensors, cfg.gate_axis)
    except WeightsError as e:
        raise FormatError(str(e), args.weights) from None
    records = read_embeddings(args.embeddings)
    try:
        preds = infer_many(records, model, cfg, _threads(args))
    except WeightsError as e:
        raise FormatError(str(e)) from None
    write_predictions(args.out, preds)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    gts = [annotation_to_ground_truth(r) for r in read_annotations(args.gt)]
    preds = read_predictions(args.pred)
    _check_qids([g.qid for g in gts], [p.qid for p in preds], "predictions")
    r1 = args.r1_thresholds or cfg.r1_thresholds
    avg = args.iou_thresholds or AVG_IOU_THRESHOLDS
    try:
        report = evaluate(gts, preds, r1, cfg.map_thresholds, avg, cfg.grade_threshold)
    except ValueError as e:
        raise SemanticError(str(e)) from None
    _write_json(report, args.out)
    return EXIT_OK


def _fuse_one(a: Prediction, b: Prediction, cfg: Config) -> Prediction:
    dets = []
    for pred, source in ((a, Source.ATSS), (b, Source.DETR)):
        for span, score in pred.windows:
            p = min(max(score, 0.0), 1.0)
            dets.append(Detection(span, p, 1.0, source, score))
    fused = weighted_fuse(dets, cfg.wbf_threshold)
    sal = None
    if a.saliency is not None and b.saliency is not None:
        if len(a.saliency) != len(b.saliency):
            raise SemanticError(f"query {a.qid}: saliency lengths differ")
        sal = tuple(((np.asarray(a.saliency) + np.asarray(b.saliency)) / 2).tolist())
    else:
        sal = a.saliency if a.saliency is not None else b.saliency
    return Prediction(a.qid, tuple((d.span, d.confidence) for d in fused), sal)


def cmd_fuse(args) -> int:
    if len(args.pred) != 2:
        raise FormatError("fuse needs exactly two --pred files")
    cfg = _config(args, wbf_threshold=args.threshold)
    a_list, b_list = read_predictions(args.pred[0]), read_predictions(args.pred[1])
    _check_qids([p.qid for p in a_list], [p.qid for p in b_list], args.pred[1])
    b_map = {p.qid: p for p in b_list}
    write_predictions(args.out, [_fuse_one(a, b_map[a.qid], cfg) for a in a_list])
    return EXIT_OK


def score_query(gt, pred: Prediction, cfg: Config) -> dict:
    """Loss values for one query computed from a gt annotation and a prediction."""
    grades = gt.saliency_grades
    n = len(grades)
    clip_len = gt.duration / n if n else 1.0
    parts = {"atss": None, "detr": None, "hl": None, "aux": None}
    if pred.saliency is not None and n:
        if len(pred.saliency) != n:
            raise SemanticError(f"query {gt.qid}: {len(pred.saliency)} saliency scores for {n} clips")
        sup = SaliencySupervision(grades)
        parts["hl"] = highlight_loss(pred.saliency, sup, cfg.margin, cfg.temperature)
        labels = clip_mask(n, clip_len, gt.relevant_windows).astype(float)
        parts["aux"] = aux_loss(pred.saliency, labels)
    if gt.relevant_windows:
        dets = [Detection(s, min(max(sc, 0.0), 1.0), min(max(sc, 0.0), 1.0)) for s, sc in pred.ranked()]
        duration = gt.duration if gt.duration > 0 else 1.0
        match = hungarian_match(dets, list(gt.relevant_windows), cfg.match, duration)
        parts["detr"] = detr_loss(dets, list(gt.relevant_windows), match, duration, cfg.losses)
    return parts


def cmd_score_losses(args) -> int:
    cfg = _config(args)
    gts = read_annotations(args.gt)
    preds = read_predictions(args.pred)
    _check_qids([g.qid for g in gts], [p.qid for p in preds], "predictions")
    pmap = {p.qid: p for p in preds}
    per = [score_query(g, pmap[g.qid], cfg) for g in sorted(gts, key=lambda g: g.qid)]
    means = {}
    for k in ("atss", "detr", "hl", "aux"):
        vals = [p[k] for p in per if p[k] is not None]
        means[k] = float(np.mean(vals)) if vals else None
    total = total_objective(LossParts(**{k: v or 0.0 for k, v in means.items()}), cfg.losses)
    report = {"queries": len(per), "parts": means, "total": total, "weights": cfg.loss_weights}
    _write_json(report, args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import SynthSizes, write_fixtures

    sizes = SynthSizes(num_videos=args.num_videos, dim=args.dim, hidden_dim=args.hidden_dim)
    sums = write_fixtures(args.out, args.seed, sizes)
    for name, digest in sums.items():
        print(f"{digest}  {name}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    d = Config()
    p = argparse.ArgumentParser(prog="mrkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mrkit {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: $MRKIT_THREADS or 1); output does not depend on it",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("annotate", parents=[common], help="annotate embeddings with windows and grades")
    s.add_argument("--embeddings", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--min-run", type=int, default=None, help=f"shortest kept run of clips (default {d.min_run})")
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("infer", parents=[common], help="predict windows and clip saliency")
    s.add_argument("--embeddings", required=True)
    s.add_argument("--weights", required=True, help="weights manifest (.json) with its .bin blob")
    s.add_argument("--out", required=True)
    s.add_argument("--gate-axis", choices=["video", "text"], default=None,
                   help=f"SGCA gate indexing (default {d.gate_axis})")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", parents=[common], help="moment retrieval and highlight metrics")
    s.add_argument("--gt", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--out", default=None, help="report path (default stdout)")
    s.add_argument("--iou-thresholds", type=float, nargs="+", default=None,
                   help="thresholds averaged for MR-mAP@Avg (default 0.5:0.05:0.95)")
    s.add_argument("--r1-thresholds", type=float, nargs="+", default=None,
                   help=f"R1 thresholds (default {' '.join(map(str, d.r1_thresholds))})")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("fuse", parents=[common], help="weighted fusion of two prediction files")
    s.add_argument("--pred", action="append", required=True, help="prediction file (give twice)")
    s.add_argument("--out", required=True)
    s.add_argument("--threshold", type=float, default=None,
                   help=f"IoU clustering threshold (default {d.wbf_threshold})")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("score-losses", parents=[common], help="loss values of predictions vs ground truth")
    s.add_argument("--gt", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--out", default=None, help="report path (default stdout)")
    s.set_defaults(func=cmd_score_losses)

    s = sub.add_parser("synth", parents=[common], help="write deterministic synthetic fixtures")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--num-videos", type=int, default=8)
    s.add_argument("--dim", type=int, default=16)
    s.add_argument("--hidden-dim", type=int, default=16)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateRecordError, SemanticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SEMANTIC


if __name__ == "__main__":
    sys.exit(main())
