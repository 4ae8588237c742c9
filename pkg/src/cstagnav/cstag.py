"""Per-frame attribute graph: camera node, object nodes, spatial edges, F(u).

Feature layout (``LAYOUT_TAG``), 16 slots::

    0 area_n            area / (W*H)
    1 perimeter_n       perimeter / (2*(W+H))
    2 cx_n, 3 cy_n      centroid / (W, H)
    4 bw_n, 5 bh_n      bbox size / (W, H)
    6 cam_dist_n        camera->centroid distance / diagonal
    7 cam_orient_n      camera->centroid angle / 180
    8 cam_proj_n        |cx - camera x| / diagonal
    9 nbr_dist_mean_n   mean neighbour distance / diagonal (1.0 if no neighbour)
    10 nbr_dist_min_n   min neighbour distance / diagonal (1.0 if no neighbour)
    11 nbr_overlap_mean mean neighbour bbox IoU (0.0 if no neighbour)
    12-14               one-hot ground / ambulatory / non-ambulatory
    15 bias             always 1
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Category
from .errors import DegenerateAngle, MissingCameraEdge
from .regions import ObjectNode

LAYOUT_TAG = "cstag-f16-v1"
FEATURE_DIM = 16
K_NN = 3
CAMERA_ID = -1

FEATURE_NAMES = (
    "area_n", "perimeter_n", "cx_n", "cy_n", "bw_n", "bh_n",
    "cam_dist_n", "cam_orient_n", "cam_proj_n",
    "nbr_dist_mean_n", "nbr_dist_min_n", "nbr_overlap_mean",
    "cat_ground", "cat_ambulatory", "cat_nonambulatory", "bias",
)
SLOT = {name: i for i, name in enumerate(FEATURE_NAMES)}
CATEGORY_SLOTS = (SLOT["cat_ground"], SLOT["cat_ambulatory"], SLOT["cat_nonambulatory"])
_CAT_INDEX = {Category.GROUND: 0, Category.AMBULATORY: 1, Category.NON_AMBULATORY: 2}


class EdgeKind(enum.Enum):
    OBJECT_OBJECT = "object_object"
    CAMERA_OBJECT = "camera_object"


@dataclass(frozen=True)
class CameraNode:
    x: int
    y: int


def camera_for(width: int, height: int) -> CameraNode:
    """Bottom row, principal-point column (image centre, rounded half up)."""
    return CameraNode((width + 1) // 2, height - 1)


@dataclass(frozen=True)
class SpatialEdge:
    kind: EdgeKind
    a: int
    b: int
    pixel_distance: float
    orientation: float
    bbox_overlap: Optional[float] = None
    projected_distance: Optional[float] = None


@dataclass
class FrameGraph:
    frame_index: int
    width: int
    height: int
    camera: CameraNode
    nodes: List[ObjectNode]
    spatial_edges: List[SpatialEdge]
    features: Dict[int, np.ndarray] = field(default_factory=dict)

    def node(self, node_id: int) -> ObjectNode:
        return self.nodes[node_id]

    def camera_edge(self, node_id: int) -> SpatialEdge:
        for e in self.spatial_edges:
            if e.kind is EdgeKind.CAMERA_OBJECT and e.b == node_id:
                return e
        raise MissingCameraEdge(f"node {node_id} has no camera edge")

    def incident(self, node_id: int) -> List[SpatialEdge]:
        return [e for e in self.spatial_edges if e.a == node_id or e.b == node_id]


def node_angle(camera: CameraNode, node) -> float:
    """Counter-clockwise angle in degrees from the image horizontal through the
    camera node to the node centroid (image y grows downward)."""
    cx, cy = node.centroid if hasattr(node, "centroid") else node
    dx = cx - camera.x
    dy = camera.y - cy
    if dx == 0 and dy == 0:
        raise DegenerateAngle("node centroid coincides with the camera node")
    return math.degrees(math.atan2(dy, dx))


def bbox_iou(b1, b2) -> float:
    x1, y1, w1, h1 = b1
    x2, y2, w2, h2 = b2
    iw = max(0, min(x1 + w1, x2 + w2) - max(x1, x2))
    ih = max(0, min(y1 + h1, y2 + h2) - max(y1, y2))
    inter = iw * ih
    union = w1 * h1 + w2 * h2 - inter
    return inter / union if union > 0 else 0.0


def knn_pairs(centroids: np.ndarray, k: int = K_NN) -> List[Tuple[int, int]]:
    """Symmetric closure of each node's k nearest neighbours; ties by node id."""
    n = len(centroids)
    if n < 2:
        return []
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    pairs = set()
    ids = np.arange(n)
    for i in range(n):
        order = np.lexsort((ids, dist[i]))
        nbrs = [j for j in order if j != i][:k]
        for j in nbrs:
            pairs.add((min(i, j), max(i, j)))
    return sorted(pairs)


def _camera_edge(camera: CameraNode, node: ObjectNode) -> SpatialEdge:
    cx, cy = node.centroid
    return SpatialEdge(
        EdgeKind.CAMERA_OBJECT,
        CAMERA_ID,
        node.node_id,
        pixel_distance=math.hypot(cx - camera.x, cy - camera.y),
        orientation=node_angle(camera, node),
        projected_distance=abs(cx - camera.x),
    )


def _object_edge(u: ObjectNode, v: ObjectNode) -> SpatialEdge:
    (ux, uy), (vx, vy) = u.centroid, v.centroid
    orient = math.degrees(math.atan2(uy - vy, vx - ux)) % 360.0
    return SpatialEdge(
        EdgeKind.OBJECT_OBJECT,
        u.node_id,
        v.node_id,
        pixel_distance=math.hypot(vx - ux, vy - uy),
        orientation=orient,
        bbox_overlap=bbox_iou(u.region.bbox, v.region.bbox),
    )


def feature_vector(
    node: ObjectNode,
    camera: CameraNode,
    incident_edges: Sequence[SpatialEdge],
    width: int,
    height: int,
) -> np.ndarray:
    cam = [e for e in incident_edges if e.kind is EdgeKind.CAMERA_OBJECT and e.b == node.node_id]
    if not cam:
        raise MissingCameraEdge(f"node {node.node_id} has no camera edge")
    cam = cam[0]
    nbrs = [e for e in incident_edges if e.kind is EdgeKind.OBJECT_OBJECT]
    diag = math.hypot(width, height)
    reg = node.region
    f = np.zeros(FEATURE_DIM)
    f[0] = reg.contour_area / (width * height)
    f[1] = reg.contour_perimeter / (2 * (width + height))
    f[2] = reg.centroid[0] / width
    f[3] = reg.centroid[1] / height
    f[4] = reg.bbox[2] / width
    f[5] = reg.bbox[3] / height
    f[6] = cam.pixel_distance / diag
    f[7] = cam.orientation / 180.0
    f[8] = cam.projected_distance / diag
    if nbrs:
        d = [e.pixel_distance for e in nbrs]
        f[9] = sum(d) / len(d) / diag
        f[10] = min(d) / diag
        f[11] = sum(e.bbox_overlap for e in nbrs) / len(nbrs)
    else:
        f[9] = 1.0
        f[10] = 1.0
        f[11] = 0.0
    f[12 + _CAT_INDEX[node.category]] = 1.0
    f[15] = 1.0
    return f


def build_frame_graph(nodes: List[ObjectNode], width: int, height: int, frame_index: int) -> FrameGraph:
    camera = camera_for(width, height)
    edges = [_camera_edge(camera, u) for u in nodes]
    if nodes:
        cents = np.array([u.centroid for u in nodes], dtype=float)
        edges += [_object_edge(nodes[i], nodes[j]) for i, j in knn_pairs(cents)]
    incident: Dict[int, List[SpatialEdge]] = {u.node_id: [] for u in nodes}
    for e in edges:
        if e.a != CAMERA_ID:
            incident[e.a].append(e)
        incident[e.b].append(e)
    feats = {u.node_id: feature_vector(u, camera, incident[u.node_id], width, height) for u in nodes}
    return FrameGraph(frame_index, width, height, camera, list(nodes), edges, feats)


def graph_to_json(graph: FrameGraph) -> dict:
    """Inspection dump of one frame graph."""
    nodes = []
    for u in graph.nodes:
        r = u.region
        nodes.append({
            "node_id": u.node_id,
            "entity_id": u.entity_id,
            "category": u.category.value,
            "mask_label": u.mask_label,
            "area": r.contour_area,
            "perimeter": r.contour_perimeter,
            "centroid": list(r.centroid),
            "bbox": list(r.bbox),
        })
    edges = []
    for e in graph.spatial_edges:
        d = {"kind": e.kind.value, "a": e.a, "b": e.b,
             "pixel_distance": e.pixel_distance, "orientation": e.orientation}
        if e.bbox_overlap is not None:
            d["bbox_overlap"] = e.bbox_overlap
        if e.projected_distance is not None:
            d["projected_distance"] = e.projected_distance
        edges.append(d)
    return {
        "frame": graph.frame_index,
        "width": graph.width,
        "height": graph.height,
        "camera": [graph.camera.x, graph.camera.y],
        "nodes": nodes,
        "spatial_edges": edges,
        "features": {str(k): [float(x) for x in v] for k, v in sorted(graph.features.items())},
    }
