"""Linear spatio-temporal cost, direction prediction and the reference baselines."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .cstag import FEATURE_DIM, LAYOUT_TAG, SLOT, FrameGraph, node_angle
from .dataset import Category
from .errors import InvariantViolation, LayoutMismatch, NoCandidates

GROUND_FALLBACK = "ground-fallback"


class Cue(enum.Enum):
    LEFT = "left"
    SLIGHT_LEFT = "slight_left"
    STRAIGHT = "straight"
    SLIGHT_RIGHT = "slight_right"
    RIGHT = "right"


class Baseline(enum.Enum):
    RANDOM = "random"
    MAX_DISTANCE = "max_distance"
    RANDOM_TEMPORAL = "random_temporal"
    MAX_TEMPORAL = "max_temporal"


@dataclass
class CostModel:
    w_sp: np.ndarray
    w_T: np.ndarray
    lam: float = 0.3
    layout_tag: str = LAYOUT_TAG

    def __post_init__(self):
        self.w_sp = np.asarray(self.w_sp, dtype=float)
        self.w_T = np.asarray(self.w_T, dtype=float)
        if self.w_sp.shape != (FEATURE_DIM,) or self.w_T.shape != (FEATURE_DIM,):
            raise InvariantViolation(f"weights must have {FEATURE_DIM} entries")
        if not (np.isfinite(self.w_sp).all() and np.isfinite(self.w_T).all()):
            raise InvariantViolation("weights must be finite")
        if not 0.0 <= self.lam <= 1.0:
            raise InvariantViolation("lambda must lie in [0, 1]")

    def with_lambda(self, lam: float) -> "CostModel":
        return CostModel(self.w_sp.copy(), self.w_T.copy(), lam, self.layout_tag)

    def __eq__(self, other):
        return (
            isinstance(other, CostModel)
            and self.layout_tag == other.layout_tag
            and self.lam == other.lam
            and np.array_equal(self.w_sp, other.w_sp)
            and np.array_equal(self.w_T, other.w_T)
        )


@dataclass
class Prediction:
    frame_index: int
    chosen_node: int
    theta: float
    cue: Cue
    per_node_costs: Dict[int, Tuple[float, float, float]] = field(default_factory=dict)
    # True when the choice came from the baselines' ground fallback
    fallback: bool = False


def _check_layout(model: CostModel):
    if model.layout_tag != LAYOUT_TAG:
        raise LayoutMismatch(f"model layout {model.layout_tag!r} != {LAYOUT_TAG!r}")


def spatial_cost(model: CostModel, F: np.ndarray) -> float:
    _check_layout(model)
    return float(np.dot(model.w_sp, F))


def temporal_cost(model: CostModel, dF: Optional[np.ndarray]) -> float:
    """w_T . dF, with no temporal evidence (None) counted as zero cost."""
    _check_layout(model)
    if dF is None:
        return 0.0
    return float(np.dot(model.w_T, dF))


def cue_of(theta: float) -> Cue:
    if theta < 45:
        return Cue.RIGHT
    if theta < 75:
        return Cue.SLIGHT_RIGHT
    if theta <= 105:
        return Cue.STRAIGHT
    if theta <= 135:
        return Cue.SLIGHT_LEFT
    return Cue.LEFT


def _cam_dist(graph: FrameGraph, node_id: int) -> float:
    cx, cy = graph.nodes[node_id].centroid
    return math.hypot(cx - graph.camera.x, cy - graph.camera.y)


def _finish(graph: FrameGraph, node_id: int, costs=None, fallback=False) -> Prediction:
    theta = node_angle(graph.camera, graph.nodes[node_id])
    return Prediction(graph.frame_index, node_id, theta, cue_of(theta), costs or {}, fallback)


def node_costs(model: CostModel, graph: FrameGraph,
               deltas: Mapping[int, Optional[np.ndarray]]) -> Dict[int, Tuple[float, float, float]]:
    out = {}
    for u in graph.nodes:
        c_sp = spatial_cost(model, graph.features[u.node_id])
        c_t = temporal_cost(model, deltas.get(u.node_id))
        out[u.node_id] = (c_sp, c_t, model.lam * c_sp + (1.0 - model.lam) * c_t)
    return out


def argmin_node(graph: FrameGraph, costs: Mapping[int, float]) -> int:
    """Minimum cost; ties go to the node farther from the camera, then lower id."""
    return min(costs, key=lambda i: (costs[i], -_cam_dist(graph, i), i))


def predict(model: CostModel, graph: FrameGraph,
            deltas: Mapping[int, Optional[np.ndarray]]) -> Prediction:
    if not graph.nodes:
        raise NoCandidates(f"frame {graph.frame_index} has no object nodes")
    costs = node_costs(model, graph, deltas)
    chosen = argmin_node(graph, {i: c[2] for i, c in costs.items()})
    return _finish(graph, chosen, costs)


def _not_approaching(dF: Optional[np.ndarray]) -> bool:
    return dF is None or dF[SLOT["cam_dist_n"]] >= 0


def _ground_fallback(graph: FrameGraph) -> int:
    ground = [u for u in graph.nodes if u.category is Category.GROUND]
    pool = ground or graph.nodes
    return max(pool, key=lambda u: (u.region.contour_area, -u.node_id)).node_id


def baseline_predict(kind: Baseline, graph: FrameGraph,
                     deltas: Mapping[int, Optional[np.ndarray]],
                     rng: np.random.Generator) -> Prediction:
    """Reference predictors: random / farthest node, optionally restricted to
    nodes that are not approaching the camera."""
    kind = Baseline(kind)
    if not graph.nodes:
        raise NoCandidates(f"frame {graph.frame_index} has no object nodes")
    ids = [u.node_id for u in graph.nodes]
    if kind in (Baseline.RANDOM_TEMPORAL, Baseline.MAX_TEMPORAL):
        ids = [i for i in ids if _not_approaching(deltas.get(i))]
        if not ids:
            return _finish(graph, _ground_fallback(graph), fallback=True)
    if kind in (Baseline.RANDOM, Baseline.RANDOM_TEMPORAL):
        chosen = ids[int(rng.integers(len(ids)))]
    else:
        chosen = max(ids, key=lambda i: (_cam_dist(graph, i), -i))
    return _finish(graph, chosen)
