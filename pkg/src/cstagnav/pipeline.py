"""Sequential driver: rasters -> regions -> frame graphs -> temporal links -> predictions."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cstag import FrameGraph, build_frame_graph, graph_to_json
from .dataset import (
    CategoryMap,
    Difficulty,
    FrameRaster,
    SafeAnnotation,
    SequenceManifest,
    load_mask,
    load_rgb,
)
from .errors import CstagError, FrameError
from .model import Baseline, CostModel, Prediction, baseline_predict, predict
from .regions import MIN_AREA, extract_objects
from .temporal import EntityRegistry, MatchParams, TemporalEdge, frame_deltas

DEFAULT_DELTA_K = 10

Predictor = Union[CostModel, Baseline]


@dataclass(frozen=True)
class PipelineParams:
    match: MatchParams = MatchParams()
    delta_k: int = DEFAULT_DELTA_K
    min_area: int = MIN_AREA
    seed: int = 42  # seeds the random baselines


@dataclass
class PreparedSequence:
    """Graphs and entity tracks of one sequence; everything prediction needs."""

    sequence_id: str
    difficulty: Optional[Difficulty]
    graphs: List[FrameGraph]
    annotations: List[Optional[SafeAnnotation]]
    registry: EntityRegistry
    timing: Dict[str, float] = field(default_factory=dict)
    _deltas: Dict[int, list] = field(default_factory=dict, repr=False)

    @property
    def features(self) -> Dict[int, Dict[int, np.ndarray]]:
        return {g.frame_index: g.features for g in self.graphs}

    def deltas(self, k: int) -> list:
        """Per-frame {node_id: dF or None} at interval ``k`` (cached)."""
        if k not in self._deltas:
            feats = self.features
            self._deltas[k] = [frame_deltas(self.registry, g, k, feats) for g in self.graphs]
        return self._deltas[k]

    @property
    def temporal_edges(self) -> List[TemporalEdge]:
        return self.registry.edges


@dataclass
class PipelineRun:
    prepared: PreparedSequence
    predictor: str
    predictions: List[Prediction]
    timing: Dict[str, float]

    def to_json(self) -> dict:
        """Deterministic serialisation (timings excluded)."""
        return {
            "sequence_id": self.prepared.sequence_id,
            "predictor": self.predictor,
            "predictions": [prediction_to_json(p) for p in self.predictions],
            "temporal_edges": [
                [e.from_frame, e.from_node, e.to_frame, e.to_node, e.similarity]
                for e in self.prepared.temporal_edges
            ],
            "entities": [[u.entity_id for u in g.nodes] for g in self.prepared.graphs],
        }


def prediction_to_json(p: Prediction) -> dict:
    return {
        "frame": p.frame_index,
        "node": p.chosen_node,
        "theta": p.theta,
        "cue": p.cue.value,
        "costs": {str(k): list(v) for k, v in sorted(p.per_node_costs.items())},
    }


def frame_graph_json(prepared: PreparedSequence, i: int) -> dict:
    g = prepared.graphs[i]
    out = graph_to_json(g)
    out["temporal_edges"] = [
        {"from": [e.from_frame, e.from_node], "to": [e.to_frame, e.to_node], "similarity": e.similarity}
        for e in prepared.temporal_edges
        if e.to_frame == g.frame_index
    ]
    return out


def prepare_frames(
    frames: Iterable[Tuple[FrameRaster, FrameRaster]],
    cats: CategoryMap,
    params: PipelineParams = PipelineParams(),
    sequence_id: str = "",
    difficulty: Optional[Difficulty] = None,
    annotations: Optional[Sequence[SafeAnnotation]] = None,
) -> PreparedSequence:
    """Build graphs and link them in frame order. ``frames`` yields (rgb, mask)."""
    registry = EntityRegistry(params.match)
    graphs = []
    timing = {"regions_ms": 0.0, "graph_ms": 0.0, "temporal_ms": 0.0}
    for i, (rgb, mask) in enumerate(frames):
        try:
            t0 = time.perf_counter()
            nodes = extract_objects(rgb, mask, cats, params.min_area)
            t1 = time.perf_counter()
            g = build_frame_graph(nodes, mask.width, mask.height, i)
            t2 = time.perf_counter()
            registry.link(g)
            t3 = time.perf_counter()
        except CstagError as exc:
            raise FrameError(i, exc) from exc
        timing["regions_ms"] += (t1 - t0) * 1e3
        timing["graph_ms"] += (t2 - t1) * 1e3
        timing["temporal_ms"] += (t3 - t2) * 1e3
        graphs.append(g)
    anns = list(annotations) if annotations is not None else [None] * len(graphs)
    return PreparedSequence(sequence_id, difficulty, graphs, anns, registry, timing)


def _manifest_frames(manifest: SequenceManifest):
    for i in range(manifest.frame_count):
        try:
            yield load_rgb(manifest.frame_path(i)), load_mask(manifest.mask_path(i))
        except CstagError as exc:
            raise FrameError(i, exc) from exc


def prepare_sequence(manifest: SequenceManifest, params: PipelineParams = PipelineParams()) -> PreparedSequence:
    t0 = time.perf_counter()
    prep = prepare_frames(
        _manifest_frames(manifest), manifest.categories, params,
        manifest.sequence_id, manifest.difficulty, manifest.annotations,
    )
    prep.timing["total_ms"] = (time.perf_counter() - t0) * 1e3
    return prep


def predictor_name(predictor: Predictor) -> str:
    return predictor.value if isinstance(predictor, Baseline) else "learned"


def predict_sequence(prepared: PreparedSequence, predictor: Predictor,
                     params: PipelineParams = PipelineParams()) -> List[Prediction]:
    deltas = prepared.deltas(params.delta_k)
    out = []
    if isinstance(predictor, Baseline):
        rng = np.random.default_rng(params.seed)
        step: Callable = lambda g, d: baseline_predict(predictor, g, d, rng)
    else:
        step = lambda g, d: predict(predictor, g, d)
    for g, d in zip(prepared.graphs, deltas):
        try:
            out.append(step(g, d))
        except CstagError as exc:
            raise FrameError(g.frame_index, exc) from exc
    return out


def run_sequence(manifest: SequenceManifest, predictor: Predictor,
                 params: PipelineParams = PipelineParams()) -> PipelineRun:
    prepared = prepare_sequence(manifest, params)
    t0 = time.perf_counter()
    preds = predict_sequence(prepared, predictor, params)
    timing = dict(prepared.timing)
    timing["predict_ms"] = (time.perf_counter() - t0) * 1e3
    return PipelineRun(prepared, predictor_name(predictor), preds, timing)
