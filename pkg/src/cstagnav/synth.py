"""Deterministic synthetic street scenes with ground-truth safe intervals.

The world is a sidewalk trapezoid seen from a hand-held camera at the bottom
centre of the image. Walkers (ambulatory) move along rays through the camera,
either away from it (Safe) or towards it (Avoid), sometimes in small groups
sharing a bearing. Static obstacles (non-ambulatory, Avoid) drift outward from
the vanishing point and grow, the image flow of a camera walking forward.

Kinematic boxes are kept in pixel-edge coordinates (pixel i covers [i, i+1));
centroids handed to the rest of the package are in pixel-index coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cstag import CameraNode, camera_for, node_angle
from .dataset import (
    Category,
    CategoryMap,
    Difficulty,
    FrameRaster,
    SafeAnnotation,
    SequenceManifest,
    difficulty_for_count,
    save_manifest,
    save_mask,
    save_rgb,
)
from .errors import InvariantViolation, NoSafeInterval, OverlapUnresolvable
from .regions import MIN_AREA, label_components

GROUND_LABEL = 1
FIRST_OBJECT_LABEL = 2
MAX_RETRIES = 100
COLOR_SEPARATION = 32
BACKGROUND_RGB = (46, 104, 52)
GROUND_RGB = (150, 150, 146)

# annotation constants at 720 rows, scaled to the frame height
REF_HEIGHT = 720
REF_RADIUS = 100.0
REF_CAP = 120.0


class Safety(enum.Enum):
    SAFE = "safe"
    AVOID = "avoid"


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class ObjectKinematics:
    """Constant-velocity box with linear size change.

    ``bbox`` is (x0, y0, w, h) at ``spawn_frame`` in pixel-edge coordinates;
    ``velocity`` moves the box centre; ``growth`` is the relative size change
    per frame, so size(a) = size(0) * (1 + growth * a).
    """

    label: int
    category: Category
    safety: Safety
    spawn_frame: int
    bbox: Tuple[float, float, float, float]
    velocity: Tuple[float, float] = (0.0, 0.0)
    growth: float = 0.0
    color: Tuple[int, int, int] = (255, 0, 0)

    def box_at(self, t: int) -> Tuple[float, float, float, float]:
        a = t - self.spawn_frame
        x0, y0, w, h = self.bbox
        s = 1.0 + self.growth * a
        cx = x0 + w / 2 + self.velocity[0] * a
        cy = y0 + h / 2 + self.velocity[1] * a
        return cx - w * s / 2, cy - h * s / 2, cx + w * s / 2, cy + h * s / 2

    def rect_at(self, t: int) -> Tuple[int, int, int, int]:
        """Rendered pixels: columns [x_lo, x_hi), rows [y_lo, y_hi)."""
        x0, y0, x1, y1 = self.box_at(t)
        return _round(x0), _round(y0), _round(x1), _round(y1)

    def centroid_at(self, t: int) -> Tuple[float, float]:
        """Kinematic centre in pixel-index coordinates."""
        x0, y0, x1, y1 = self.box_at(t)
        return (x0 + x1) / 2 - 0.5, (y0 + y1) / 2 - 0.5

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "category": self.category.value,
            "safety": self.safety.value,
            "avoid_level": None,  # reserved: high / medium / low
            "spawn_frame": self.spawn_frame,
            "bbox": list(self.bbox),
            "velocity": list(self.velocity),
            "growth": self.growth,
            "color": list(self.color),
        }

    @classmethod
    def from_json(cls, obj) -> "ObjectKinematics":
        return cls(
            label=int(obj["label"]),
            category=Category(obj["category"]),
            safety=Safety(obj["safety"]),
            spawn_frame=int(obj["spawn_frame"]),
            bbox=tuple(float(v) for v in obj["bbox"]),
            velocity=tuple(float(v) for v in obj["velocity"]),
            growth=float(obj["growth"]),
            color=tuple(int(v) for v in obj["color"]),
        )


@dataclass(frozen=True)
class Ground:
    """Sidewalk trapezoid symmetric about ``axis_x`` (pixel-index coordinates)."""

    axis_x: float
    horizon: float
    bottom: float
    half_top: float
    half_bottom: float

    def half_width(self, y):
        return self.half_top + (self.half_bottom - self.half_top) * (y - self.horizon) / (self.bottom - self.horizon)

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (y >= self.horizon) & (y <= self.bottom)
        return inside & (np.abs(x - self.axis_x) <= self.half_width(y))

    def raster(self, width: int, height: int) -> np.ndarray:
        ys, xs = np.mgrid[0:height, 0:width]
        return self.contains(xs, ys)


def default_ground(width: int, height: int) -> Ground:
    cam = camera_for(width, height)
    return Ground(
        axis_x=float(cam.x),
        horizon=float(round(0.2 * height)),
        bottom=float(height - 1),
        half_top=0.04 * width,
        half_bottom=0.1 * width,
    )


@dataclass(frozen=True)
class WorldParams:
    """Sampling ranges for generated scenes (fractions of the frame unless noted)."""

    p_safe: float = 0.5
    bearing: Tuple[float, float] = (60.0, 120.0)  # degrees
    walker_speed: Tuple[float, float] = (0.3, 0.8)  # px / frame along the path
    walker_start: Tuple[float, float] = (0.1, 0.9)  # leader position along the path
    walker_height: float = 0.3  # height of a walker at the camera row / H
    file_gap: Tuple[float, float] = (0.12, 0.2)
    file_sizes: Tuple[float, float, float] = (0.3, 0.4, 0.3)  # P(1, 2, 3 walkers)
    spawn_window: float = 0.5  # spawns fall in the first part of the sequence
    static_depth: Tuple[float, float] = (0.06, 0.45)
    static_lateral: Tuple[float, float] = (0.3, 1.2)
    p_static_on_path: float = 0.3
    ego_rate: Tuple[float, float] = (0.004, 0.009)  # relative growth / frame


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 180
    frame_count: int = 200
    fps: float = 20.0
    n_ambulatory: int = 3
    n_static: int = 2
    seed: int = 0
    # explicit kinematics; when given, n_ambulatory / n_static are ignored
    objects: Optional[Tuple[ObjectKinematics, ...]] = None
    mask_noise: float = 0.0
    # annotation radius and ray cap; None scales the 720-row values to height
    radius: Optional[float] = None
    cap: Optional[float] = None
    sequence_id: Optional[str] = None
    split: str = "train"
    world: WorldParams = WorldParams()

    @property
    def r(self) -> float:
        return self.radius if self.radius is not None else REF_RADIUS * self.height / REF_HEIGHT

    @property
    def ray_cap(self) -> float:
        return self.cap if self.cap is not None else REF_CAP * self.height / REF_HEIGHT

    def validate(self):
        if self.width < 8 or self.height < 8:
            raise InvariantViolation("frame must be at least 8x8")
        if self.frame_count < 1:
            raise InvariantViolation("frame_count must be >= 1")
        if self.n_ambulatory < 0 or self.n_static < 0:
            raise InvariantViolation("object counts must be >= 0")
        if not 0.0 <= self.mask_noise <= 1.0:
            raise InvariantViolation("mask_noise must lie in [0, 1]")
        if not self.r > 0 or not self.ray_cap > 0:
            raise InvariantViolation("radius and cap must be positive")
        if self.objects is not None:
            labels = [o.label for o in self.objects]
            if len(set(labels)) != len(labels) or min(labels, default=FIRST_OBJECT_LABEL) < FIRST_OBJECT_LABEL:
                raise InvariantViolation(f"object labels must be unique and >= {FIRST_OBJECT_LABEL}")
            if max(labels, default=0) > 255:
                raise InvariantViolation("object labels must fit in 8 bits")
            cam = camera_for(self.width, self.height)
            for o in self.objects:
                _check_kinematics(o, cam, self.width, self.height, self.frame_count)


def _cam_dist(cam: CameraNode, p) -> float:
    return math.hypot(p[0] - cam.x, p[1] - cam.y)


def _check_kinematics(o: ObjectKinematics, cam, width, height, frame_count):
    if o.category not in (Category.AMBULATORY, Category.NON_AMBULATORY):
        raise InvariantViolation("objects must be ambulatory or non-ambulatory")
    if o.bbox[2] <= 0 or o.bbox[3] <= 0:
        raise InvariantViolation("object size must be positive")
    end = lifetime(o, width, height, frame_count)[1] - 1
    if o.safety is Safety.SAFE:
        if end > o.spawn_frame and _cam_dist(cam, o.centroid_at(end)) < _cam_dist(cam, o.centroid_at(o.spawn_frame)) - 1e-9:
            raise InvariantViolation(f"safe object {o.label} approaches the camera")
    elif not (o.growth > 0 or o.velocity[1] > 0):
        raise InvariantViolation(f"avoid object {o.label} must grow or move down")


def lifetime(o: ObjectKinematics, width: int, height: int, frame_count: int) -> Tuple[int, int]:
    """[first, end) frames in which the object is rendered: from spawn until its
    box first leaves the frame or collapses."""
    t = max(o.spawn_frame, 0)
    start = t
    while t < frame_count:
        x0, y0, x1, y1 = o.rect_at(t)
        if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height) or 1.0 + o.growth * (t - o.spawn_frame) <= 0:
            break
        t += 1
    return start, t


@dataclass
class GeneratedSequence:
    spec: SceneSpec
    manifest: SequenceManifest
    frames: List[FrameRaster]
    masks: List[FrameRaster]
    objects: Tuple[ObjectKinematics, ...]
    ground: Ground
    # per frame: label -> kinematic centroid of the objects on screen
    centroids: List[Dict[int, Tuple[float, float]]] = field(default_factory=list)

    @property
    def annotations(self) -> List[SafeAnnotation]:
        return self.manifest.annotations


# ---------------------------------------------------------------------------
# annotation
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class FrameObject:
    label: int
    rect: Tuple[int, int, int, int]
    centroid: Tuple[float, float]
    safety: Safety


def ray_hits_box(camera: CameraNode, theta: float, cap: float, box) -> bool:
    """Does the segment of length ``cap`` from the camera at angle ``theta``
    intersect the closed box (x0, y0, x1, y1)? Slab test."""
    rad = math.radians(theta)
    d = (math.cos(rad), -math.sin(rad))
    o = (float(camera.x), float(camera.y))
    lo, hi = 0.0, cap
    for axis in range(2):
        b0, b1 = box[axis], box[axis + 2]
        if abs(d[axis]) < 1e-12:
            if o[axis] < b0 or o[axis] > b1:
                return False
            continue
        t0 = (b0 - o[axis]) / d[axis]
        t1 = (b1 - o[axis]) / d[axis]
        if t0 > t1:
            t0, t1 = t1, t0
        lo, hi = max(lo, t0), min(hi, t1)
        if lo > hi:
            return False
    return True


def blocking_boxes(objects: Sequence[FrameObject], camera: CameraNode, r: float):
    """Pixel-covering boxes of Avoid objects whose centroid is within 2r."""
    out = []
    for o in objects:
        if o.safety is Safety.AVOID and _cam_dist(camera, o.centroid) <= 2 * r:
            x0, y0, x1, y1 = o.rect
            out.append((x0 - 0.5, y0 - 0.5, x1 - 0.5, y1 - 0.5))
    return out


def cap_crossing(camera: CameraNode, theta: float, cap: float) -> Tuple[float, float]:
    """Where the ray at ``theta`` meets the row ``cap`` px above the camera."""
    rad = math.radians(theta)
    return camera.x + cap * math.cos(rad) / math.sin(rad), camera.y - cap


def _runs(flags: Sequence[bool], thetas: Sequence[int]):
    runs, start = [], None
    for i, ok in enumerate(flags):
        if ok and start is None:
            start = i
        if not ok and start is not None:
            runs.append((thetas[start], thetas[i - 1]))
            start = None
    if start is not None:
        runs.append((thetas[start], thetas[-1]))
    return runs


def _widest(runs):
    # widest first; ties prefer the run centred closest to straight ahead
    return min(runs, key=lambda r: (-(r[1] - r[0]), abs((r[0] + r[1]) / 2 - 90), r[0]))


def annotate_safe_interval(objects: Sequence[FrameObject], camera: CameraNode, r: float,
                           cap: float, ground: Ground) -> Tuple[int, int]:
    """Widest run of whole-degree rays in (0, 180) that are unblocked within
    ``cap`` px of travel and cross the cap line (``cap`` px above the camera
    row) on the ground, i.e. rays between the top corners of the capped
    walking area."""
    thetas = list(range(1, 180))
    boxes = blocking_boxes(objects, camera, r)
    on_ground, hits = [], []
    for th in thetas:
        ex, ey = cap_crossing(camera, th, cap)
        on_ground.append(bool(ground.contains(ex, ey)))
        hits.append(sum(ray_hits_box(camera, th, cap, b) for b in boxes))
    ok = [g and h == 0 for g, h in zip(on_ground, hits)]
    runs = _runs(ok, thetas)
    if runs:
        return _widest(runs)
    ground_hits = [h for g, h in zip(on_ground, hits) if g]
    if not ground_hits:
        raise NoSafeInterval("no ray ends on the ground", fallback=None)
    least = min(ground_hits)
    fallback = _widest(_runs([g and h == least for g, h in zip(on_ground, hits)], thetas))
    raise NoSafeInterval("every ground ray is blocked", fallback=fallback)


# ---------------------------------------------------------------------------
# scene sampling
# ---------------------------------------------------------------------------
def _sample_color(rng, used: List[Tuple[int, int, int]]) -> Tuple[int, int, int]:
    for _ in range(10000):
        c = tuple(int(v) for v in rng.integers(0, 256, size=3))
        if all(np.abs(np.subtract(c, u)).mean() >= COLOR_SEPARATION for u in used):
            used.append(c)
            return c
    raise InvariantViolation("cannot find a colour separated from the palette")


def _walker_group(rng, spec: SceneSpec, ground: Ground, cam: CameraNode, size: int,
                  labels: List[int], colors) -> List[ObjectKinematics]:
    """A file of walkers on one bearing through the camera, all moving away
    from it (Safe) or all towards it (Avoid); members trail the leader."""
    wp = spec.world
    safe = rng.random() < wp.p_safe
    theta = math.radians(rng.uniform(*wp.bearing))
    L = (cam.y - ground.horizon) / math.sin(theta)
    speed = rng.uniform(*wp.walker_speed)
    sdot = (speed if safe else -speed) / L
    s0 = rng.uniform(*wp.walker_start)
    gap = rng.uniform(*wp.file_gap)
    spawn = int(rng.integers(0, max(1, int(wp.spawn_window * spec.frame_count))))
    h_near = wp.walker_height * spec.height
    out = []
    for j, lab in enumerate(labels[:size]):
        s = s0 + j * gap
        fx = cam.x + s * L * math.cos(theta) + 0.5
        fy = cam.y - s * L * math.sin(theta) + 0.5
        h = h_near * (1 - 0.85 * s)
        w = 0.4 * h
        dh = -0.85 * h_near * sdot
        vel = (sdot * L * math.cos(theta), -sdot * L * math.sin(theta) - dh / 2)
        out.append(ObjectKinematics(
            label=lab,
            category=Category.AMBULATORY,
            safety=Safety.SAFE if safe else Safety.AVOID,
            spawn_frame=spawn,
            bbox=(fx - w / 2, fy - h, w, h),
            velocity=vel,
            growth=dh / h,
            color=colors[j],
        ))
    return out


def _obstacle(rng, spec: SceneSpec, ground: Ground, label: int, color) -> ObjectKinematics:
    """Static object; its image drifts outward from the vanishing point and
    grows as the camera walks forward."""
    wp = spec.world
    depth = ground.bottom - ground.horizon
    y = ground.horizon + rng.uniform(*wp.static_depth) * depth
    if rng.random() < wp.p_static_on_path:
        lateral = rng.uniform(-0.2, 0.2)
    else:
        lateral = rng.choice([-1.0, 1.0]) * rng.uniform(*wp.static_lateral)
    x = ground.axis_x + lateral * (y - ground.horizon)
    h = 0.55 * (y - ground.horizon) * rng.uniform(0.6, 1.2)
    w = h * rng.uniform(0.4, 1.0)
    e = rng.uniform(*wp.ego_rate)
    fx, fy = x + 0.5, y + 0.5
    vx, vy = (x - ground.axis_x) * e, (y - ground.horizon) * e - h * e / 2
    return ObjectKinematics(
        label=label,
        category=Category.NON_AMBULATORY,
        safety=Safety.AVOID,
        spawn_frame=int(rng.integers(0, max(1, int(wp.spawn_window * spec.frame_count)))),
        bbox=(fx - w / 2, fy - h, w, h),
        velocity=(vx, vy),
        growth=e,
        color=color,
    )


def _fully_occluded(objs: Sequence[ObjectKinematics], t: int, width: int, height: int) -> bool:
    """True if some object alive at frame t has no visible pixel."""
    alive = [o for o in objs if _alive(o, t, width, height)]
    if not alive:
        return False
    canvas = np.zeros((height, width), dtype=np.int32)
    for o in _paint_order(alive, t):
        x0, y0, x1, y1 = o.rect_at(t)
        canvas[y0:y1, x0:x1] = o.label
    seen = set(np.unique(canvas).tolist())
    return any(o.label not in seen for o in alive)


def _alive(o: ObjectKinematics, t: int, width: int, height: int) -> bool:
    if t < o.spawn_frame or 1.0 + o.growth * (t - o.spawn_frame) <= 0:
        return False
    x0, y0, x1, y1 = o.rect_at(t)
    return 0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height


def _paint_order(objs, t):
    # nearer (lower bottom edge) objects are painted last
    return sorted(objs, key=lambda o: (o.rect_at(t)[3], o.label))


def _place(rng, placed: List[ObjectKinematics], sample, spec: SceneSpec) -> List[ObjectKinematics]:
    for _ in range(MAX_RETRIES):
        group = sample()
        t = group[0].spawn_frame
        if not all(_alive(o, t, spec.width, spec.height) for o in group):
            continue
        if _fully_occluded(placed + group, t, spec.width, spec.height):
            continue
        return group
    raise OverlapUnresolvable(f"no placement without full occlusion after {MAX_RETRIES} retries")


def sample_objects(spec: SceneSpec, ground: Ground, rng: np.random.Generator) -> Tuple[ObjectKinematics, ...]:
    cam = camera_for(spec.width, spec.height)
    used = [BACKGROUND_RGB, GROUND_RGB]
    placed: List[ObjectKinematics] = []
    label = FIRST_OBJECT_LABEL
    remaining = spec.n_ambulatory
    while remaining > 0:
        size = min(remaining, int(rng.choice([1, 2, 3], p=spec.world.file_sizes)))
        labels = list(range(label, label + size))
        colors = [_sample_color(rng, used) for _ in labels]
        placed += _place(rng, placed, lambda: _walker_group(rng, spec, ground, cam, size, labels, colors), spec)
        label += size
        remaining -= size
    for _ in range(spec.n_static):
        color = _sample_color(rng, used)
        lab = label
        placed += _place(rng, placed, lambda: [_obstacle(rng, spec, ground, lab, color)], spec)
        label += 1
    if label - 1 > 255:
        raise InvariantViolation("too many objects for 8-bit labels")
    return tuple(placed)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------
def _frame_annotation(objs_t: List[FrameObject], mask: np.ndarray, cats: CategoryMap,
                      spec: SceneSpec, ground: Ground, cam: CameraNode) -> SafeAnnotation:
    r = spec.r
    flagged = False
    try:
        theta0, theta1 = annotate_safe_interval(objs_t, cam, r, spec.ray_cap, ground)
    except NoSafeInterval as exc:
        if exc.fallback is None:
            raise
        theta0, theta1 = exc.fallback
        flagged = True

    def scores(c) -> bool:
        try:
            th = node_angle(cam, c)
        except Exception:
            return False
        return theta0 <= th <= theta1 and _cam_dist(cam, c) > 2 * r

    comps = label_components(FrameRaster.from_array(mask), cats, MIN_AREA)
    cents: Dict[int, List[Tuple[float, float]]] = {}
    ground_best = None
    for lab, cat, coords in comps:
        c = (float(coords[:, 1].mean()), float(coords[:, 0].mean()))
        cents.setdefault(lab, []).append(c)
        if cat is Category.GROUND and (ground_best is None or len(coords) > ground_best[0]):
            ground_best = (len(coords), c)

    safe_labels = set()
    for o in objs_t:
        if o.safety is not Safety.SAFE or o.label not in cents:
            continue
        inside = [c for c in cents[o.label] if theta0 <= node_angle(cam, c) <= theta1]
        if inside and all(_cam_dist(cam, c) > 2 * r for c in inside):
            safe_labels.add(o.label)
    avoid_labels = {o.label for o in objs_t if o.safety is Safety.AVOID}
    if not safe_labels and (ground_best is None or not scores(ground_best[1])):
        flagged = True
    return SafeAnnotation(float(theta0), float(theta1), frozenset(safe_labels), frozenset(avoid_labels), flagged)


def generate(spec: SceneSpec) -> GeneratedSequence:
    spec.validate()
    W, H = spec.width, spec.height
    rng = np.random.default_rng(spec.seed)
    ground = default_ground(W, H)
    cam = camera_for(W, H)
    objects = spec.objects if spec.objects is not None else sample_objects(spec, ground, rng)

    cats = CategoryMap({GROUND_LABEL: Category.GROUND, **{o.label: o.category for o in objects}})
    lut = np.zeros((256, 3), dtype=np.uint8)
    lut[0] = BACKGROUND_RGB
    lut[GROUND_LABEL] = GROUND_RGB
    for o in objects:
        lut[o.label] = o.color
    ground_px = ground.raster(W, H)
    noise_rng = np.random.default_rng([spec.seed, 1])
    noise_labels = np.array([0, GROUND_LABEL] + [o.label for o in objects], dtype=np.uint8)

    frames, masks, anns, ledger = [], [], [], []
    for t in range(spec.frame_count):
        mask = np.where(ground_px, GROUND_LABEL, 0).astype(np.uint8)
        alive = [o for o in objects if _alive(o, t, W, H)]
        for o in _paint_order(alive, t):
            x0, y0, x1, y1 = o.rect_at(t)
            mask[y0:y1, x0:x1] = o.label
        objs_t = [FrameObject(o.label, o.rect_at(t), o.centroid_at(t), o.safety) for o in alive]
        anns.append(_frame_annotation(objs_t, mask, cats, spec, ground, cam))
        ledger.append({o.label: o.centroid_at(t) for o in alive})
        rgb = lut[mask]
        if spec.mask_noise > 0:
            flip = noise_rng.random(mask.shape) < spec.mask_noise
            mask = mask.copy()
            mask[flip] = noise_labels[noise_rng.integers(len(noise_labels), size=int(flip.sum()))]
        frames.append(FrameRaster.from_array(rgb))
        masks.append(FrameRaster.from_array(mask))

    n_amb = sum(o.category is Category.AMBULATORY for o in objects)
    seq_id = spec.sequence_id or f"synth-{spec.seed:06d}"
    manifest = SequenceManifest(
        sequence_id=seq_id,
        frame_count=spec.frame_count,
        frame_paths=[f"frames/{i:06d}.ppm" for i in range(spec.frame_count)],
        mask_paths=[f"masks/{i:06d}.pgm" for i in range(spec.frame_count)],
        annotations=anns,
        categories=cats,
        difficulty=difficulty_for_count(n_amb),
        fps=spec.fps,
        split=spec.split,
        ambulatory_count=n_amb,
        objects=[o.to_json() for o in objects],
    )
    manifest.validate()
    return GeneratedSequence(spec, manifest, frames, masks, tuple(objects), ground, ledger)


def write_sequence(gen: GeneratedSequence, out_dir) -> Path:
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    for i, (f, m) in enumerate(zip(gen.frames, gen.masks)):
        save_rgb(f, out / gen.manifest.frame_paths[i])
        save_mask(m, out / gen.manifest.mask_paths[i])
    save_manifest(gen.manifest, out / "manifest.json")
    gen.manifest.root = out
    return out / "manifest.json"


AMBULATORY_RANGE = {
    Difficulty.EASY: (2, 4),
    Difficulty.MODERATE: (5, 8),
    Difficulty.HARD: (9, 12),
}


def suite_specs(seed: int, count: int, difficulty: Optional[Difficulty] = None,
                test_every: int = 0, **overrides) -> List[SceneSpec]:
    """Scene specs for a multi-sequence suite. Without ``difficulty`` the
    sequences cycle easy / moderate / hard. With ``test_every`` n > 0 every n-th
    sequence is put in the test split."""
    rng = np.random.default_rng(seed)
    levels = list(Difficulty)
    specs = []
    for i in range(count):
        d = difficulty or levels[i % 3]
        lo, hi = AMBULATORY_RANGE[d]
        specs.append(SceneSpec(
            n_ambulatory=int(rng.integers(lo, hi + 1)),
            n_static=int(rng.integers(2, 5)),
            seed=seed * 1000 + i,
            sequence_id=f"seq{seed:03d}-{i:03d}",
            split="test" if test_every and i % test_every == test_every - 1 else "train",
            **overrides,
        ))
    return specs
