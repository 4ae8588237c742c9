"""Per-object regions from a label mask, and the node attributes computed on them.

Coordinates follow image convention: x is the column, y is the row, origin at
the top-left pixel, and a pixel's coordinate is its integer index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from .dataset import Category, CategoryMap, FrameRaster
from .errors import DimensionMismatch, EmptyRegion, UnknownLabel

MIN_AREA = 25
PATCH_SIZE = 32
HIST_BINS = 16
N_SINGULAR = PATCH_SIZE

_EIGHT = np.ones((3, 3), dtype=bool)
GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class RegionAttributes:
    contour_area: int
    contour_perimeter: int
    centroid: Tuple[float, float]
    bbox: Tuple[int, int, int, int]  # x_min, y_min, width, height
    # run-length encoded pixel set: rows of (y, x_start, run_length)
    pixel_runs: np.ndarray

    def pixels(self) -> np.ndarray:
        """Decode ``pixel_runs`` into an (N, 2) array of (y, x) in raster order."""
        return decode_runs(self.pixel_runs)


@dataclass(frozen=True)
class AppearanceAttributes:
    singular_values: np.ndarray  # (32,) descending
    rgb_hist: np.ndarray  # (48,) three L1-normalized 16-bin histograms
    hsv_hist: np.ndarray  # (48,)
    patch_rgb: np.ndarray  # (32, 32, 3) uint8, zero outside patch_mask
    patch_mask: np.ndarray  # (32, 32) bool


@dataclass
class ObjectNode:
    node_id: int
    category: Category
    mask_label: int
    region: RegionAttributes
    appearance: Optional[AppearanceAttributes]
    entity_id: Optional[int] = None

    @property
    def centroid(self) -> Tuple[float, float]:
        return self.region.centroid


# ---------------------------------------------------------------------------
# run-length encoding
# ---------------------------------------------------------------------------
def encode_runs(coords: np.ndarray) -> np.ndarray:
    """(N, 2) (y, x) coordinates -> (K, 3) runs sorted by (y, x)."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    if len(coords) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    ys, xs = coords[order, 0], coords[order, 1]
    brk = np.flatnonzero((np.diff(ys) != 0) | (np.diff(xs) != 1)) + 1
    starts = np.concatenate(([0], brk))
    lengths = np.diff(np.concatenate((starts, [len(ys)])))
    return np.stack([ys[starts], xs[starts], lengths], axis=1)


def decode_runs(runs: np.ndarray) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64).reshape(-1, 3)
    if len(runs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    lengths = runs[:, 2]
    ys = np.repeat(runs[:, 0], lengths)
    offs = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    xs = np.repeat(runs[:, 1], lengths) + offs
    return np.stack([ys, xs], axis=1)


# ---------------------------------------------------------------------------
# colour conversion
# ---------------------------------------------------------------------------
def rgb_to_hsv(r: int, g: int, b: int) -> Tuple[int, int, int]:
    """Hexcone RGB -> HSV with every channel scaled to a byte.

    Hue is mapped from [0, 360) degrees onto 0..255; grey inputs get hue 0.
    """
    mx = max(r, g, b)
    mn = min(r, g, b)
    d = mx - mn
    v = mx
    s = 0 if mx == 0 else math.floor(255 * d / mx + 0.5)
    if d == 0:
        h = 0.0
    elif mx == r:
        h = 60.0 * (((g - b) / d) % 6)
    elif mx == g:
        h = 60.0 * ((b - r) / d + 2)
    else:
        h = 60.0 * ((r - g) / d + 4)
    return math.floor(h / 360.0 * 255 + 0.5), s, v


def rgb_to_hsv_array(rgb: np.ndarray) -> np.ndarray:
    """Vectorised :func:`rgb_to_hsv` over an (..., 3) uint8 array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    d = mx - mn
    safe_d = np.where(d == 0, 1.0, d)
    s = np.where(mx == 0, 0.0, np.floor(255 * d / np.where(mx == 0, 1.0, mx) + 0.5))
    h = np.where(
        mx == r,
        60.0 * np.mod((g - b) / safe_d, 6),
        np.where(mx == g, 60.0 * ((b - r) / safe_d + 2), 60.0 * ((r - g) / safe_d + 4)),
    )
    h = np.where(d == 0, 0.0, h)
    hb = np.floor(h / 360.0 * 255 + 0.5)
    return np.stack([hb, s, mx], axis=-1).astype(np.uint8)


# ---------------------------------------------------------------------------
# attributes
# ---------------------------------------------------------------------------
def _local_mask(coords: np.ndarray):
    y0, x0 = coords.min(axis=0)
    y1, x1 = coords.max(axis=0)
    local = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
    local[coords[:, 0] - y0, coords[:, 1] - x0] = True
    return local, int(x0), int(y0)


def compute_region_attributes(coords, image_dims) -> RegionAttributes:
    """Region properties of one component.

    ``coords`` is an (N, 2) array of (y, x) pixel indices, ``image_dims`` is
    (height, width). The perimeter counts 4-neighbour edges between a region
    pixel and a non-region pixel; pixels beyond the image border count as
    non-region.
    """
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    if len(coords) == 0:
        raise EmptyRegion("component has no pixels")
    h, w = image_dims
    if coords[:, 0].min() < 0 or coords[:, 1].min() < 0 or coords[:, 0].max() >= h or coords[:, 1].max() >= w:
        raise DimensionMismatch("component pixels outside image bounds")
    local, x0, y0 = _local_mask(coords)
    area = int(local.sum())
    padded = np.pad(local, 1)
    perimeter = int(np.count_nonzero(padded[1:, :] != padded[:-1, :]) + np.count_nonzero(padded[:, 1:] != padded[:, :-1]))
    cy = float(coords[:, 0].mean())
    cx = float(coords[:, 1].mean())
    return RegionAttributes(
        contour_area=area,
        contour_perimeter=perimeter,
        centroid=(cx, cy),
        bbox=(x0, y0, local.shape[1], local.shape[0]),
        pixel_runs=encode_runs(coords),
    )


def _channel_hist(values: np.ndarray) -> np.ndarray:
    """Three L1-normalized 16-bin histograms of (N, 3) byte values, concatenated."""
    bins = values.astype(np.int64) >> 4
    out = np.empty(3 * HIST_BINS)
    n = len(values)
    for c in range(3):
        out[c * HIST_BINS:(c + 1) * HIST_BINS] = np.bincount(bins[:, c], minlength=HIST_BINS) / n
    return out


def _nearest_index(n_src: int, n_dst: int) -> np.ndarray:
    idx = np.floor((np.arange(n_dst) + 0.5) * n_src / n_dst).astype(np.int64)
    return np.minimum(idx, n_src - 1)


def compute_appearance_attributes(frame: FrameRaster, region: RegionAttributes) -> AppearanceAttributes:
    coords = region.pixels()
    if len(coords) == 0:
        raise EmptyRegion("region has no pixels")
    rgb = frame.to_array()
    x0, y0, bw, bh = region.bbox
    if x0 < 0 or y0 < 0 or x0 + bw > frame.width or y0 + bh > frame.height:
        raise DimensionMismatch("region extends beyond the frame")

    values = rgb[coords[:, 0], coords[:, 1]]
    rgb_hist = _channel_hist(values)
    hsv_hist = _channel_hist(rgb_to_hsv_array(values))

    local = np.zeros((bh, bw), dtype=bool)
    local[coords[:, 0] - y0, coords[:, 1] - x0] = True
    ri = _nearest_index(bh, PATCH_SIZE)
    ci = _nearest_index(bw, PATCH_SIZE)
    patch_mask = local[np.ix_(ri, ci)]
    crop = rgb[y0:y0 + bh, x0:x0 + bw]
    patch_rgb = crop[np.ix_(ri, ci)].copy()
    patch_rgb[~patch_mask] = 0

    gray = patch_rgb.astype(np.float64) @ GRAY_WEIGHTS
    sv = np.linalg.svd(gray, compute_uv=False)
    sv = np.maximum(sv, 0.0)
    return AppearanceAttributes(sv, rgb_hist, hsv_hist, patch_rgb, patch_mask)


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------
def label_components(mask: FrameRaster, cats: CategoryMap, min_area: int = MIN_AREA):
    """8-connected components of every non-background label.

    Returns a list of ``(label, category, coords)`` ordered by
    (label, y_min, x_min, first pixel in raster order); components below
    ``min_area`` pixels are dropped.
    """
    labels = mask.to_array()
    present = np.flatnonzero(np.bincount(labels.ravel(), minlength=256))
    for lab in present:
        if lab != 0 and lab not in cats:
            raise UnknownLabel(int(lab))
    slices = ndimage.find_objects(labels)
    out = []
    for lab in present:
        if lab == 0 or cats[lab] is Category.BACKGROUND:
            continue
        sl = slices[lab - 1]
        sub = labels[sl] == lab
        comp, n = ndimage.label(sub, structure=_EIGHT)
        if n == 0:
            continue
        sizes = np.bincount(comp.ravel())
        ys, xs = np.nonzero(comp)
        ids = comp[ys, xs]
        order = np.argsort(ids, kind="stable")
        ys = ys[order] + sl[0].start
        xs = xs[order] + sl[1].start
        bounds = np.concatenate(([0], np.cumsum(sizes[1:])))
        for k in range(1, n + 1):
            if sizes[k] < min_area:
                continue
            cy = ys[bounds[k - 1]:bounds[k]]
            cx = xs[bounds[k - 1]:bounds[k]]
            coords = np.stack([cy, cx], axis=1)
            key = (int(lab), int(cy.min()), int(cx.min()), int(cy[0]) * labels.shape[1] + int(cx[0]))
            out.append((key, cats[lab], coords))
    out.sort(key=lambda t: t[0])
    return [(key[0], cat, coords) for key, cat, coords in out]


def extract_objects(
    frame: FrameRaster,
    mask: FrameRaster,
    cats: CategoryMap,
    min_area: int = MIN_AREA,
    with_appearance: bool = True,
) -> List[ObjectNode]:
    """One :class:`ObjectNode` per 8-connected component of each object label."""
    if mask.channels != 1:
        raise DimensionMismatch("mask must be single-channel")
    if frame is not None and (frame.width, frame.height) != (mask.width, mask.height):
        raise DimensionMismatch(
            f"frame {frame.width}x{frame.height} vs mask {mask.width}x{mask.height}"
        )
    nodes = []
    for node_id, (label, cat, coords) in enumerate(label_components(mask, cats, min_area)):
        region = compute_region_attributes(coords, (mask.height, mask.width))
        app = compute_appearance_attributes(frame, region) if with_appearance else None
        nodes.append(ObjectNode(node_id, cat, label, region, app))
    return nodes
