"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .cstag import CameraNode
from .dataset import (
    Difficulty,
    FrameRaster,
    SequenceManifest,
    find_manifests,
    load_manifest,
    load_model,
    load_rgb,
    save_model,
    save_rgb,
)
from .errors import CstagError
from .evaluation import EvalConfig, evaluate, report_rows
from .iarc import iarc_fuse, read_tensor, read_weights, write_tensor
from .model import Baseline, Prediction
from .pipeline import (
    DEFAULT_DELTA_K,
    PipelineParams,
    frame_graph_json,
    predict_sequence,
    prediction_to_json,
    prepare_sequence,
)
from .regions import ObjectNode
from .synth import generate, suite_specs, write_sequence
from .training import SgdConfig, TrainingSet, train_detailed

YELLOW = (255, 255, 0)


class UsageError(Exception):
    def __init__(self, message, reported=False):
        super().__init__(message)
        self.reported = reported


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message, reported=True)


# ---------------------------------------------------------------------------
# overlay
# ---------------------------------------------------------------------------
def _line(x0: int, y0: int, x1: int, y1: int):
    """Integer Bresenham line, both endpoints included."""
    pts = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def render_overlay(frame: FrameRaster, prediction: Prediction, camera: CameraNode,
                   node: ObjectNode) -> FrameRaster:
    """2-px yellow ray from the camera to the chosen centroid plus its bbox outline."""
    img = frame.to_array().copy()
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    h, w = img.shape[:2]
    cx, cy = node.centroid
    x1, y1 = int(np.floor(cx + 0.5)), int(np.floor(cy + 0.5))
    steep = abs(y1 - camera.y) > abs(x1 - camera.x)
    for x, y in _line(camera.x, camera.y, x1, y1):
        for ox, oy in ((0, 0), (1, 0) if steep else (0, -1)):
            if 0 <= x + ox < w and 0 <= y + oy < h:
                img[y + oy, x + ox] = YELLOW
    bx, by, bw, bh = node.region.bbox
    img[by, bx:bx + bw] = YELLOW
    img[by + bh - 1, bx:bx + bw] = YELLOW
    img[by:by + bh, bx] = YELLOW
    img[by:by + bh, bx + bw - 1] = YELLOW
    return FrameRaster.from_array(img)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------
class _Out:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def info(self, text: str):
        if not self.quiet:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")

    def artifact(self, path):
        sys.stdout.write(f"{path}\n")


def _manifests(data, split: Optional[str] = None) -> List[SequenceManifest]:
    paths = find_manifests(data) if Path(data).is_dir() else [Path(data)]
    if not paths:
        raise CstagError(f"no manifest.json under {data}")
    ms = [load_manifest(p) for p in paths]
    if split is not None:
        chosen = [m for m in ms if m.split == split]
        if chosen:
            return chosen
    return ms


def _csv(rows: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow(r)
    return buf.getvalue()


def _params(args) -> PipelineParams:
    return PipelineParams(delta_k=args.delta_k, seed=args.seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def cmd_synth(args, out: _Out) -> int:
    diff = Difficulty(args.difficulty) if args.difficulty else None
    specs = suite_specs(args.seed, args.sequences, diff, test_every=args.test_every,
                        frame_count=args.frames, mask_noise=args.mask_noise)
    root = Path(args.out)
    for spec in specs:
        path = write_sequence(generate(spec), root / spec.sequence_id)
        out.info(f"wrote {path}")
    out.artifact(root)
    return 0


def cmd_graph(args, out: _Out) -> int:
    params = _params(args)
    lines = []
    for m in _manifests(args.data):
        prep = prepare_sequence(m, params)
        for i in range(len(prep.graphs)):
            doc = frame_graph_json(prep, i)
            doc["sequence_id"] = m.sequence_id
            lines.append(json.dumps(doc, sort_keys=True))
    text = "".join(l + "\n" for l in lines)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        out.artifact(args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_train(args, out: _Out) -> int:
    params = _params(args)
    seqs = [prepare_sequence(m, params) for m in _manifests(args.data, "train")]
    cfg = SgdConfig(learning_rate=args.lr, epochs=args.epochs, seed=args.seed, delta_k=args.delta_k)
    out.info("stage,epoch,loss")
    res = train_detailed(TrainingSet(seqs), cfg, on_epoch=lambda s, e, l: out.info(f"{s},{e},{l!r}"))
    out.info("lambda,mistakes")
    for lam, m in zip(res.search.grid, res.search.mistakes):
        out.info(f"{lam},{m}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_model(res.model, args.out)
    out.artifact(args.out)
    return 0


def cmd_predict(args, out: _Out) -> int:
    params = _params(args)
    predictor = Baseline(args.baseline) if args.baseline else load_model(args.model)
    outdir = Path(args.out) if args.out else None
    lines = []
    for m in _manifests(args.data):
        prep = prepare_sequence(m, params)
        preds = predict_sequence(prep, predictor, params)
        for g, p in zip(prep.graphs, preds):
            doc = prediction_to_json(p)
            doc["sequence_id"] = m.sequence_id
            lines.append(json.dumps(doc, sort_keys=True))
            if args.overlay and outdir is not None:
                img = render_overlay(load_rgb(m.frame_path(g.frame_index)), p, g.camera, g.nodes[p.chosen_node])
                target = outdir / "overlays" / m.sequence_id / f"{g.frame_index:06d}.ppm"
                target.parent.mkdir(parents=True, exist_ok=True)
                save_rgb(img, target)
    text = "".join(l + "\n" for l in lines)
    if outdir is None:
        sys.stdout.write(text)
        return 0
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "predictions.jsonl").write_text(text, encoding="utf-8")
    out.artifact(outdir / "predictions.jsonl")
    return 0


def cmd_eval(args, out: _Out) -> int:
    params = _params(args)
    if args.model is None and not args.baselines:
        raise UsageError("eval needs --model and/or --baselines")
    seqs = [prepare_sequence(m, params) for m in _manifests(args.data, "test")]
    cfg = EvalConfig(r=args.r)
    predictors = []
    if args.model is not None:
        predictors.append(load_model(args.model))
    if args.baselines:
        predictors += list(Baseline)
    reports = [evaluate(p, seqs, cfg, params, with_sweep=True) for p in predictors]
    text = _csv(report_rows(reports), ("difficulty", "predictor", "r", "accuracy"))
    summary = json.dumps({"reports": [r.to_json() for r in reports]}, indent=1, sort_keys=True) + "\n"
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.csv").write_text(text, encoding="utf-8")
        (outdir / "summary.json").write_text(summary, encoding="utf-8")
        out.info(text)
        out.artifact(outdir / "report.csv")
    else:
        sys.stdout.write(text)
    return 0


def cmd_iarc(args, out: _Out) -> int:
    y = iarc_fuse(read_tensor(args.ye), read_tensor(args.yd), read_tensor(args.x), read_weights(args.weights))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_tensor(y, args.out)
    out.artifact(args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--quiet", action="store_true", help="print only the final artifact path")

    p = _Parser(prog="cstagnav", description="Walkable-direction estimation on segmented video.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", parents=[common], help="generate synthetic sequences")
    s.add_argument("--out", required=True)
    s.add_argument("--difficulty", choices=[d.value for d in Difficulty])
    s.add_argument("--sequences", type=int, default=4)
    s.add_argument("--frames", type=int, default=200)
    s.add_argument("--mask-noise", type=float, default=0.0)
    s.add_argument("--test-every", type=int, default=4, help="every n-th sequence goes to the test split")
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("graph", help="inspect frame graphs")
    gsub = g.add_subparsers(dest="action", parser_class=_Parser)
    gsub.required = True
    gd = gsub.add_parser("dump", parents=[common], help="one JSON document per frame")
    gd.add_argument("--data", required=True)
    gd.add_argument("--out")
    gd.add_argument("--delta-k", type=int, default=DEFAULT_DELTA_K)
    gd.set_defaults(func=cmd_graph)

    t = sub.add_parser("train", parents=[common], help="fit a cost model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--delta-k", type=int, default=DEFAULT_DELTA_K)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", parents=[common], help="per-frame walking direction")
    pr.add_argument("--data", required=True)
    src = pr.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--baseline", choices=[b.value for b in Baseline])
    pr.add_argument("--out")
    pr.add_argument("--overlay", action="store_true", help="write overlay PPMs under --out")
    pr.add_argument("--delta-k", type=int, default=DEFAULT_DELTA_K)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", parents=[common], help="safety + collision accuracy")
    e.add_argument("--data", required=True)
    e.add_argument("--model")
    e.add_argument("--baselines", action="store_true")
    e.add_argument("--r", type=float, default=100.0)
    e.add_argument("--out")
    e.add_argument("--delta-k", type=int, default=DEFAULT_DELTA_K)
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("iarc", parents=[common], help="fuse tensors with supplied weights")
    i.add_argument("--ye", required=True)
    i.add_argument("--yd", required=True)
    i.add_argument("--x", required=True)
    i.add_argument("--weights", required=True)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_iarc)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, _Out(args.quiet))
    except UsageError as exc:
        if not exc.reported:
            parser.print_usage(sys.stderr)
            sys.stderr.write(f"error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except CstagError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
