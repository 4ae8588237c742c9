"""Ingestion and persistence: PPM/PGM rasters, sequence manifests, cost models.

Directory layout of one sequence::

    <seq>/manifest.json
    <seq>/frames/000000.ppm
    <seq>/masks/000000.pgm

Rasters are binary netpbm (P6 for RGB, P5 for label masks, maxval 255).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional

import numpy as np

from .errors import (
    InvariantViolation,
    MalformedHeader,
    ParseError,
    TruncatedData,
    UnsupportedMaxval,
    VersionMismatch,
)

MIN_SIDE = 8
DEFAULT_FPS = 20


class Category(enum.Enum):
    GROUND = "ground"
    AMBULATORY = "ambulatory"
    NON_AMBULATORY = "non_ambulatory"
    BACKGROUND = "background"


class Difficulty(enum.Enum):
    EASY = "easy"
    MODERATE = "moderate"
    HARD = "hard"


def difficulty_for_count(n_ambulatory: int) -> Difficulty:
    """Easy 0-4, Moderate 5-8, Hard above 8 distinct ambulatory objects."""
    if n_ambulatory <= 4:
        return Difficulty.EASY
    if n_ambulatory <= 8:
        return Difficulty.MODERATE
    return Difficulty.HARD


# ---------------------------------------------------------------------------
# rasters
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class FrameRaster:
    width: int
    height: int
    channels: int
    data: bytes

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise InvariantViolation(f"channels must be 1 or 3, got {self.channels}")
        if self.width < MIN_SIDE or self.height < MIN_SIDE:
            raise InvariantViolation(
                f"raster size {self.width}x{self.height} below minimum {MIN_SIDE}x{MIN_SIDE}"
            )
        if len(self.data) != self.width * self.height * self.channels:
            raise InvariantViolation("data length != width * height * channels")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FrameRaster":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        if arr.ndim == 2:
            h, w = arr.shape
            c = 1
        elif arr.ndim == 3:
            h, w, c = arr.shape
        else:
            raise InvariantViolation(f"expected 2-D or 3-D array, got shape {arr.shape}")
        return cls(w, h, c, arr.tobytes())

    def to_array(self) -> np.ndarray:
        """Read-only uint8 view, shape (h, w) for masks or (h, w, 3) for RGB."""
        arr = np.frombuffer(self.data, dtype=np.uint8)
        if self.channels == 1:
            return arr.reshape(self.height, self.width)
        return arr.reshape(self.height, self.width, 3)


def _read_header(buf: bytes, magic: bytes):
    if len(buf) < 2 or buf[:2] != magic:
        raise MalformedHeader(f"expected magic {magic!r}, got {buf[:2]!r}")
    pos = 2
    fields = []
    n = len(buf)
    while len(fields) < 3:
        # whitespace and comments between header tokens
        while pos < n:
            ch = buf[pos:pos + 1]
            if ch.isspace():
                pos += 1
            elif ch == b"#":
                while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < n and buf[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise MalformedHeader("missing or non-numeric header field")
        fields.append(int(buf[start:pos]))
    if pos >= n or not buf[pos:pos + 1].isspace():
        raise MalformedHeader("header must end with a single whitespace byte")
    pos += 1
    width, height, maxval = fields
    if width < MIN_SIDE or height < MIN_SIDE:
        raise MalformedHeader(f"raster size {width}x{height} below minimum")
    if width > 0xFFFFFFFF or height > 0xFFFFFFFF:
        raise MalformedHeader("dimensions exceed u32 range")
    return width, height, maxval, pos


def _load_pnm(path, magic: bytes, channels: int) -> FrameRaster:
    buf = Path(path).read_bytes()
    width, height, maxval, offset = _read_header(buf, magic)
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} (only 255 supported)")
    need = width * height * channels
    if len(buf) - offset < need:
        raise TruncatedData(f"expected {need} data bytes, found {len(buf) - offset}")
    return FrameRaster(width, height, channels, bytes(buf[offset:offset + need]))


def _save_pnm(raster: FrameRaster, path, magic: bytes, channels: int):
    if raster.channels != channels:
        raise InvariantViolation(f"expected a {channels}-channel raster")
    header = b"%s\n%d %d\n255\n" % (magic, raster.width, raster.height)
    Path(path).write_bytes(header + raster.data)


def load_rgb(path) -> FrameRaster:
    return _load_pnm(path, b"P6", 3)


def save_rgb(raster: FrameRaster, path):
    _save_pnm(raster, path, b"P6", 3)


def load_mask(path) -> FrameRaster:
    return _load_pnm(path, b"P5", 1)


def save_mask(raster: FrameRaster, path):
    _save_pnm(raster, path, b"P5", 1)


# ---------------------------------------------------------------------------
# categories and annotations
# ---------------------------------------------------------------------------
class CategoryMap:
    """Mask label -> object category. Label 0 is always background."""

    def __init__(self, mapping: Optional[Dict[int, Category]] = None):
        self._map: Dict[int, Category] = {0: Category.BACKGROUND}
        for label, cat in (mapping or {}).items():
            label = int(label)
            if not 0 <= label <= 255:
                raise InvariantViolation(f"label {label} outside 0..255")
            cat = Category(cat)
            if label == 0 and cat is not Category.BACKGROUND:
                raise InvariantViolation("label 0 must map to background")
            self._map[label] = cat

    def __getitem__(self, label: int) -> Category:
        return self._map[int(label)]

    def __contains__(self, label) -> bool:
        return int(label) in self._map

    def __eq__(self, other):
        return isinstance(other, CategoryMap) and self._map == other._map

    def __repr__(self):
        return f"CategoryMap({self.to_json()})"

    def labels(self, category: Category) -> List[int]:
        return sorted(k for k, v in self._map.items() if v is category)

    def to_json(self) -> Dict[str, str]:
        return {str(k): v.value for k, v in sorted(self._map.items()) if k != 0}

    @classmethod
    def from_json(cls, obj) -> "CategoryMap":
        if not isinstance(obj, dict):
            raise ParseError("categories must be an object")
        try:
            return cls({int(k): Category(v) for k, v in obj.items()})
        except ValueError as exc:
            raise ParseError(f"bad categories entry: {exc}") from exc


@dataclass(frozen=True)
class SafeAnnotation:
    theta0: float
    theta1: float
    safe_labels: FrozenSet[int] = frozenset()
    avoid_labels: FrozenSet[int] = frozenset()
    # set by the generator when no candidate can satisfy the accuracy metric
    flagged: bool = False

    def __post_init__(self):
        object.__setattr__(self, "safe_labels", frozenset(int(x) for x in self.safe_labels))
        object.__setattr__(self, "avoid_labels", frozenset(int(x) for x in self.avoid_labels))
        if not (0 < self.theta0 <= self.theta1 < 180):
            raise InvariantViolation(
                f"theta interval: need 0 < theta0 <= theta1 < 180, got [{self.theta0}, {self.theta1}]"
            )
        if self.safe_labels & self.avoid_labels:
            raise InvariantViolation("safe_labels and avoid_labels overlap")

    def contains(self, theta: float) -> bool:
        return self.theta0 <= theta <= self.theta1

    def to_json(self):
        out = {
            "theta0": self.theta0,
            "theta1": self.theta1,
            "safe_labels": sorted(self.safe_labels),
            "avoid_labels": sorted(self.avoid_labels),
        }
        if self.flagged:
            out["flagged"] = True
        return out

    @classmethod
    def from_json(cls, obj) -> "SafeAnnotation":
        try:
            return cls(
                theta0=float(obj["theta0"]),
                theta1=float(obj["theta1"]),
                safe_labels=frozenset(obj.get("safe_labels", ())),
                avoid_labels=frozenset(obj.get("avoid_labels", ())),
                flagged=bool(obj.get("flagged", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad annotation: {exc}") from exc


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------
@dataclass
class SequenceManifest:
    sequence_id: str
    frame_count: int
    frame_paths: List[str]
    mask_paths: List[str]
    annotations: List[SafeAnnotation]
    categories: CategoryMap
    difficulty: Difficulty
    fps: float = DEFAULT_FPS
    split: str = "train"
    ambulatory_count: Optional[int] = None
    # free-form per-object metadata written by the generator (label, safety,
    # reserved avoid sub-level); carried through untouched
    objects: List[dict] = field(default_factory=list)
    root: Optional[Path] = field(default=None, compare=False, repr=False)

    def validate(self):
        if self.frame_count < 1:
            raise InvariantViolation("frame_count must be >= 1")
        for name in ("frame_paths", "mask_paths", "annotations"):
            if len(getattr(self, name)) != self.frame_count:
                raise InvariantViolation(f"{name} length")
        if self.fps <= 0:
            raise InvariantViolation("fps must be positive")
        n_amb = self.n_ambulatory()
        if difficulty_for_count(n_amb) is not self.difficulty:
            raise InvariantViolation(
                f"difficulty {self.difficulty.value} inconsistent with {n_amb} ambulatory objects"
            )

    def n_ambulatory(self) -> int:
        if self.ambulatory_count is not None:
            return self.ambulatory_count
        return len(self.categories.labels(Category.AMBULATORY))

    def frame_path(self, i: int) -> Path:
        return Path(self.root or ".") / self.frame_paths[i]

    def mask_path(self, i: int) -> Path:
        return Path(self.root or ".") / self.mask_paths[i]

    def to_json(self) -> dict:
        out = {
            "sequence_id": self.sequence_id,
            "frame_count": self.frame_count,
            "fps": self.fps,
            "difficulty": self.difficulty.value,
            "split": self.split,
            "categories": self.categories.to_json(),
            "frame_paths": list(self.frame_paths),
            "mask_paths": list(self.mask_paths),
            "annotations": [a.to_json() for a in self.annotations],
        }
        if self.ambulatory_count is not None:
            out["ambulatory_count"] = self.ambulatory_count
        if self.objects:
            out["objects"] = self.objects
        return out

    @classmethod
    def from_json(cls, obj, root=None) -> "SequenceManifest":
        if not isinstance(obj, dict):
            raise ParseError("manifest must be a JSON object")
        try:
            m = cls(
                sequence_id=str(obj["sequence_id"]),
                frame_count=int(obj["frame_count"]),
                frame_paths=[str(p) for p in obj["frame_paths"]],
                mask_paths=[str(p) for p in obj["mask_paths"]],
                annotations=[SafeAnnotation.from_json(a) for a in obj["annotations"]],
                categories=CategoryMap.from_json(obj.get("categories", {})),
                difficulty=Difficulty(obj["difficulty"]),
                fps=obj.get("fps", DEFAULT_FPS),
                split=str(obj.get("split", "train")),
                ambulatory_count=obj.get("ambulatory_count"),
                objects=list(obj.get("objects", [])),
                root=Path(root) if root is not None else None,
            )
        except KeyError as exc:
            raise ParseError(f"manifest missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvariantViolation):
                raise
            raise ParseError(f"bad manifest field: {exc}") from exc
        m.validate()
        return m


def load_manifest(path) -> SequenceManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return SequenceManifest.from_json(obj, root=path.parent)


def save_manifest(m: SequenceManifest, path):
    m.validate()
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    path.write_text(json.dumps(m.to_json(), indent=1) + "\n", encoding="utf-8")


def find_manifests(data_dir) -> List[Path]:
    """All manifest.json files at or one level below ``data_dir``, sorted."""
    data_dir = Path(data_dir)
    if (data_dir / "manifest.json").is_file():
        return [data_dir / "manifest.json"]
    return sorted(p / "manifest.json" for p in data_dir.iterdir() if (p / "manifest.json").is_file())


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------
def save_model(model, path):
    obj = {
        "layout": model.layout_tag,
        "lambda": model.lam,
        "w_sp": [float(x) for x in model.w_sp],
        "w_T": [float(x) for x in model.w_T],
    }
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def load_model(path):
    from .cstag import FEATURE_DIM, LAYOUT_TAG
    from .model import CostModel

    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("model file must be a JSON object")
    tag = obj.get("layout")
    if tag != LAYOUT_TAG:
        raise VersionMismatch(f"model layout {tag!r} does not match build layout {LAYOUT_TAG!r}")
    try:
        w_sp = [float(x) for x in obj["w_sp"]]
        w_t = [float(x) for x in obj["w_T"]]
        lam = float(obj["lambda"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad model field: {exc}") from exc
    for name, w in (("w_sp", w_sp), ("w_T", w_t)):
        if len(w) != FEATURE_DIM:
            raise InvariantViolation(f"{name} length {len(w)} != {FEATURE_DIM} for layout {tag}")
        if not all(math.isfinite(x) for x in w):
            raise InvariantViolation(f"{name} has non-finite entries")
    return CostModel(np.array(w_sp), np.array(w_t), lam, tag)
