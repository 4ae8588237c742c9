"""Frame-to-frame node association and temporal feature deltas.

A node ``v`` in frame t+1 is linked to the candidate ``u`` of its category that
maximises the softmax posterior over appearance similarity, provided that the
raw similarity clears ``sim_floor`` and the centroid moved less than ``tau``
pixels. Otherwise ``v`` starts a new entity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .cstag import FrameGraph
from .dataset import Category
from .errors import FrameIndexMismatch, InvariantViolation
from .regions import ObjectNode


@dataclass(frozen=True)
class MatchParams:
    tau: float = 20.0
    persist_window: int = 5
    sim_floor: float = 0.5

    def __post_init__(self):
        if not self.tau > 0:
            raise InvariantViolation("tau must be positive")
        if self.persist_window < 0:
            raise InvariantViolation("persist_window must be >= 0")
        if not 0.0 <= self.sim_floor <= 1.0:
            raise InvariantViolation("sim_floor must lie in [0, 1]")


@dataclass(frozen=True)
class TemporalEdge:
    from_frame: int
    from_node: int
    to_frame: int
    to_node: int
    similarity: float


@dataclass
class EntityTrack:
    entity_id: int
    category: Category
    nodes: Dict[int, int] = field(default_factory=dict)  # frame -> node_id
    last_node: Optional[ObjectNode] = None

    @property
    def first_frame(self) -> int:
        return next(iter(self.nodes))

    @property
    def last_frame(self) -> int:
        return next(reversed(self.nodes))

    def add(self, frame: int, node: ObjectNode):
        if self.nodes and frame <= self.last_frame:
            raise InvariantViolation("track frames must be strictly increasing")
        if node.category is not self.category:
            raise InvariantViolation("track category must stay constant")
        self.nodes[frame] = node.node_id
        self.last_node = node
        node.entity_id = self.entity_id


# ---------------------------------------------------------------------------
# similarity
# ---------------------------------------------------------------------------
def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    sa = float((da * da).sum())
    sb = float((db * db).sum())
    if sa == 0.0 and sb == 0.0:
        return 1.0 if a[0] == b[0] else 0.0
    if sa == 0.0 or sb == 0.0:
        return 0.0
    return float((da * db).sum()) / math.sqrt(sa * sb)


def color_similarity(u: ObjectNode, v: ObjectNode) -> float:
    au, av = u.appearance, v.appearance
    inter = au.patch_mask & av.patch_mask
    if not inter.any():
        return 0.5
    pu = au.patch_rgb[inter].astype(np.float64)
    pv = av.patch_rgb[inter].astype(np.float64)
    ncc = sum(_ncc(pu[:, c], pv[:, c]) for c in range(3)) / 3.0
    return min(1.0, max(0.0, (1.0 + ncc) / 2.0))


def bhattacharyya(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sqrt(p * q).sum())


def intensity_similarity(u: ObjectNode, v: ObjectNode) -> float:
    # three per-channel coefficients, averaged so self-similarity is 1
    return bhattacharyya(u.appearance.hsv_hist, v.appearance.hsv_hist) / 3.0


def energy_similarity(u: ObjectNode, v: ObjectNode) -> float:
    su, sv = u.appearance.singular_values, v.appearance.singular_values
    num = float(np.linalg.norm(su - sv))
    den = float(np.linalg.norm(su)) + float(np.linalg.norm(sv)) + 1e-9
    return math.exp(-num / den)


def similarity_f(u: ObjectNode, v: ObjectNode) -> float:
    """Mean of colour, intensity and energy similarity, in [0, 1]."""
    return (color_similarity(u, v) + intensity_similarity(u, v) + energy_similarity(u, v)) / 3.0


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class MatchResult:
    best: Optional[int]  # index into the candidate list
    probs: np.ndarray
    scores: np.ndarray


def _dist(a: ObjectNode, b: ObjectNode) -> float:
    (ax, ay), (bx, by) = a.centroid, b.centroid
    return math.hypot(ax - bx, ay - by)


def map_match(v: ObjectNode, candidates: Sequence[ObjectNode], sim_floor: float = 0.5,
              scores: Optional[Sequence[float]] = None) -> MatchResult:
    """Posterior Pr(u|v) = softmax of f(v, u) over the candidates; argmax or None."""
    if not candidates:
        return MatchResult(None, np.zeros(0), np.zeros(0))
    f = np.array(scores if scores is not None else [similarity_f(v, u) for u in candidates], dtype=float)
    e = np.exp(f - f.max())
    probs = e / e.sum()
    best = min(
        range(len(candidates)),
        key=lambda i: (-f[i], _dist(v, candidates[i]), candidates[i].node_id),
    )
    if f[best] < sim_floor:
        return MatchResult(None, probs, f)
    return MatchResult(best, probs, f)


class EntityRegistry:
    """Mutable entity state threaded through a sequence, one writer, frame order."""

    def __init__(self, params: MatchParams = MatchParams()):
        self.params = params
        self.tracks: Dict[int, EntityTrack] = {}
        self.open: List[int] = []
        self.last_frame: Optional[int] = None
        self.edges: List[TemporalEdge] = []
        self._next_id = 0

    def _new_track(self, frame: int, node: ObjectNode) -> EntityTrack:
        tr = EntityTrack(self._next_id, node.category)
        self._next_id += 1
        tr.add(frame, node)
        self.tracks[tr.entity_id] = tr
        self.open.append(tr.entity_id)
        return tr

    def start(self, graph: FrameGraph):
        if self.last_frame is not None:
            raise FrameIndexMismatch("registry already started")
        for v in graph.nodes:
            self._new_track(graph.frame_index, v)
        self.last_frame = graph.frame_index

    def link(self, graph: FrameGraph) -> List[TemporalEdge]:
        t1 = graph.frame_index
        if self.last_frame is None:
            self.start(graph)
            return []
        if t1 != self.last_frame + 1:
            raise FrameIndexMismatch(f"expected frame {self.last_frame + 1}, got {t1}")
        p = self.params
        alive = [self.tracks[i] for i in self.open if t1 - self.tracks[i].last_frame - 1 <= p.persist_window]

        proposals = []
        for v in sorted(graph.nodes, key=lambda n: n.node_id):
            cands = [tr for tr in alive if tr.category is v.category]
            res = map_match(v, [tr.last_node for tr in cands], p.sim_floor)
            if res.best is None:
                continue
            tr = cands[res.best]
            if _dist(v, tr.last_node) < p.tau:
                proposals.append((float(res.scores[res.best]), v, tr))

        proposals.sort(key=lambda t: (-t[0], t[1].node_id))
        taken = set()
        matched = {}
        for f, v, tr in proposals:
            if tr.entity_id in taken:
                continue
            taken.add(tr.entity_id)
            matched[v.node_id] = (f, tr)

        new_edges = []
        for v in sorted(graph.nodes, key=lambda n: n.node_id):
            if v.node_id in matched:
                f, tr = matched[v.node_id]
                e = TemporalEdge(tr.last_frame, tr.last_node.node_id, t1, v.node_id, f)
                tr.add(t1, v)
                new_edges.append(e)
            else:
                self._new_track(t1, v)

        self.open = [i for i in self.open if t1 - self.tracks[i].last_frame <= p.persist_window]
        self.last_frame = t1
        self.edges.extend(new_edges)
        return new_edges

    def track_of(self, node: ObjectNode) -> EntityTrack:
        return self.tracks[node.entity_id]


def link_frames(g_t: FrameGraph, g_t1: FrameGraph, params: MatchParams,
                tracks: EntityRegistry) -> List[TemporalEdge]:
    """Link ``g_t1`` against the registry, which must have last seen ``g_t``."""
    if g_t1.frame_index != g_t.frame_index + 1:
        raise FrameIndexMismatch(f"frames {g_t.frame_index} -> {g_t1.frame_index} are not adjacent")
    if tracks.params != params:
        raise InvariantViolation("registry was built with different match parameters")
    if tracks.last_frame is None:
        tracks.start(g_t)
    elif tracks.last_frame != g_t.frame_index:
        raise FrameIndexMismatch(f"registry is at frame {tracks.last_frame}, not {g_t.frame_index}")
    return tracks.link(g_t1)


# ---------------------------------------------------------------------------
# temporal deltas
# ---------------------------------------------------------------------------
def delta_features(track: EntityTrack, t: int, k: int,
                   features: Mapping[int, Mapping[int, np.ndarray]]) -> Optional[np.ndarray]:
    """F(node at t) - F(node at t-k) along ``track``.

    When the track has a gap exactly at t-k, its most recent node before t-k is
    used. Returns None if the track does not span [t-k, t].
    """
    if k < 1:
        raise InvariantViolation("interval k must be >= 1")
    if t not in track.nodes or track.first_frame > t - k:
        return None
    s = t - k
    if s not in track.nodes:
        s = max(fr for fr in track.nodes if fr <= t - k)
    return features[t][track.nodes[t]] - features[s][track.nodes[s]]


def frame_deltas(registry: EntityRegistry, graph: FrameGraph, k: int,
                 features: Mapping[int, Mapping[int, np.ndarray]]) -> Dict[int, Optional[np.ndarray]]:
    t = graph.frame_index
    return {
        u.node_id: delta_features(registry.tracks[u.entity_id], t, k, features)
        for u in graph.nodes
    }
