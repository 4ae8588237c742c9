"""Safety + collision accuracy, radius sweeps and per-difficulty reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cstag import CameraNode
from .dataset import Difficulty, SafeAnnotation, SequenceManifest
from .errors import InvariantViolation
from .model import Prediction
from .pipeline import (
    PipelineParams,
    Predictor,
    PreparedSequence,
    predict_sequence,
    predictor_name,
    prepare_sequence,
)

DEFAULT_RADIUS = 100.0
DEFAULT_SWEEP = (25.0, 50.0, 100.0, 150.0, 200.0)


@dataclass(frozen=True)
class EvalConfig:
    r: float = DEFAULT_RADIUS
    sweep: Tuple[float, ...] = DEFAULT_SWEEP

    def __post_init__(self):
        if not self.r > 0:
            raise InvariantViolation("safety radius must be positive")
        if any(not x > 0 for x in self.sweep):
            raise InvariantViolation("sweep radii must be positive")


@dataclass
class EvalReport:
    predictor: str
    r: float
    frame_bits: Dict[str, List[int]]
    per_sequence: Dict[str, float]
    per_difficulty: Dict[str, Optional[float]]
    overall: float
    sweep: List[Tuple[float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "predictor": self.predictor,
            "r": self.r,
            "overall": self.overall,
            "per_difficulty": self.per_difficulty,
            "per_sequence": self.per_sequence,
            "sweep": [list(x) for x in self.sweep],
        }


def frame_accuracy(pred: Prediction, ann: SafeAnnotation, camera: CameraNode,
                   node_centroid: Tuple[float, float], r: float) -> int:
    """1 iff the direction is inside the safe interval (inclusive) and the
    radius-r discs around camera and chosen node are disjoint (distance > 2r)."""
    safe = ann.theta0 <= pred.theta <= ann.theta1
    dist = math.hypot(node_centroid[0] - camera.x, node_centroid[1] - camera.y)
    return int(safe and dist > 2.0 * r)


FrameFn = Callable[..., Prediction]
AnyPredictor = Union[Predictor, FrameFn]


def sequence_predictions(prepared: PreparedSequence, predictor: AnyPredictor,
                         params: PipelineParams = PipelineParams()) -> List[Prediction]:
    """Predictions for every frame. A plain callable is invoked as
    ``fn(graph, deltas, annotation)``."""
    if callable(predictor) and not hasattr(predictor, "w_sp"):
        deltas = prepared.deltas(params.delta_k)
        return [predictor(g, d, a) for g, d, a in zip(prepared.graphs, deltas, prepared.annotations)]
    return predict_sequence(prepared, predictor, params)


def score_sequence(prepared: PreparedSequence, preds: Sequence[Prediction], r: float) -> List[int]:
    bits = []
    for g, ann, p in zip(prepared.graphs, prepared.annotations, preds):
        bits.append(frame_accuracy(p, ann, g.camera, g.nodes[p.chosen_node].centroid, r))
    return bits


def _name(predictor) -> str:
    if callable(predictor) and not hasattr(predictor, "w_sp"):
        return getattr(predictor, "__name__", "custom")
    return predictor_name(predictor)


def _prepare_all(sequences, params) -> List[PreparedSequence]:
    return [s if isinstance(s, PreparedSequence) else prepare_sequence(s, params) for s in sequences]


def aggregate(predictor: str, r: float, prepared: Sequence[PreparedSequence],
              bits: Dict[str, List[int]]) -> EvalReport:
    per_seq = {s.sequence_id: (float(np.mean(bits[s.sequence_id])) if bits[s.sequence_id] else 0.0)
               for s in prepared}
    per_diff: Dict[str, Optional[float]] = {}
    for d in Difficulty:
        vals = [per_seq[s.sequence_id] for s in prepared if s.difficulty is d]
        per_diff[d.value] = float(np.mean(vals)) if vals else None
    overall = float(np.mean(list(per_seq.values()))) if per_seq else 0.0
    return EvalReport(predictor, r, bits, per_seq, per_diff, overall)


def evaluate(predictor: AnyPredictor,
             sequences: Sequence[Union[SequenceManifest, PreparedSequence]],
             cfg: EvalConfig = EvalConfig(),
             params: PipelineParams = PipelineParams(),
             with_sweep: bool = False) -> EvalReport:
    prepared = _prepare_all(sequences, params)
    preds = {s.sequence_id: sequence_predictions(s, predictor, params) for s in prepared}
    bits = {s.sequence_id: score_sequence(s, preds[s.sequence_id], cfg.r) for s in prepared}
    report = aggregate(_name(predictor), cfg.r, prepared, bits)
    if with_sweep:
        report.sweep = _sweep(prepared, preds, cfg.sweep)
    return report


def _sweep(prepared, preds, radii) -> List[Tuple[float, float]]:
    out = []
    for r in radii:
        bits = {s.sequence_id: score_sequence(s, preds[s.sequence_id], r) for s in prepared}
        out.append((float(r), aggregate("", r, prepared, bits).overall))
    return out


def radius_sweep(predictor: AnyPredictor,
                 sequences: Sequence[Union[SequenceManifest, PreparedSequence]],
                 cfg: EvalConfig = EvalConfig(),
                 params: PipelineParams = PipelineParams()) -> List[Tuple[float, float]]:
    """Overall accuracy per radius; predictions are computed once and rescored."""
    radii = list(cfg.sweep)
    if not radii or radii != sorted(radii):
        raise InvariantViolation("sweep must be non-empty and ascending")
    prepared = _prepare_all(sequences, params)
    preds = {s.sequence_id: sequence_predictions(s, predictor, params) for s in prepared}
    return _sweep(prepared, preds, radii)


def report_rows(reports: Sequence[EvalReport]) -> List[dict]:
    """Flat CSV rows: one per (difficulty or overall) x predictor x radius."""
    rows = []
    for rep in reports:
        for diff, acc in rep.per_difficulty.items():
            if acc is not None:
                rows.append({"difficulty": diff, "predictor": rep.predictor, "r": rep.r, "accuracy": acc})
        rows.append({"difficulty": "overall", "predictor": rep.predictor, "r": rep.r, "accuracy": rep.overall})
        for r, acc in rep.sweep:
            if r != rep.r:
                rows.append({"difficulty": "overall", "predictor": rep.predictor, "r": r, "accuracy": acc})
    return rows
