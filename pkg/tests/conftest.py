import numpy as np
import pytest

from cstagnav.dataset import Category, CategoryMap, FrameRaster
from cstagnav.regions import extract_objects

# filled by the acceptance checks, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def raster_pair(labels, colors, width=None, height=None):
    """(rgb, mask) rasters from a label array and a label -> RGB table."""
    labels = np.asarray(labels, dtype=np.uint8)
    rgb = np.zeros(labels.shape + (3,), dtype=np.uint8)
    for lab, col in colors.items():
        rgb[labels == lab] = col
    return FrameRaster.from_array(rgb), FrameRaster.from_array(labels)


def blocks_frame(blocks, width=64, height=48, ground=None):
    """Frame with rectangular blocks: list of (label, x, y, w, h, rgb).
    ``ground`` optionally paints label 1 over rows >= ground before the blocks."""
    labels = np.zeros((height, width), dtype=np.uint8)
    colors = {0: (0, 0, 0)}
    if ground is not None:
        labels[ground:, :] = 1
        colors[1] = (128, 128, 128)
    for lab, x, y, w, h, col in blocks:
        labels[y:y + h, x:x + w] = lab
        colors[lab] = col
    return raster_pair(labels, colors)


def cats_for(amb=(), non_amb=(), ground=(1,)):
    m = {g: Category.GROUND for g in ground}
    m.update({a: Category.AMBULATORY for a in amb})
    m.update({n: Category.NON_AMBULATORY for n in non_amb})
    return CategoryMap(m)


def nodes_of(blocks, cats, width=64, height=48, ground=None):
    rgb, mask = blocks_frame(blocks, width, height, ground)
    return extract_objects(rgb, mask, cats)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def distinct_colors(rng, n, sep=32):
    cols = []
    while len(cols) < n:
        c = tuple(int(v) for v in rng.integers(0, 256, 3))
        if all(np.abs(np.subtract(c, d)).mean() >= sep for d in cols):
            cols.append(c)
    return cols


def random_walk_frames(rng, n_blobs=5, n_frames=50, step=8.0, width=160, height=120):
    """Frames of distinctly coloured rectangles, each moving at most ``step`` px
    per frame, never overlapping. Returns (frames, cats, tracks) where tracks[t]
    maps label -> top-left corner."""
    sizes = [tuple(int(v) for v in rng.integers(8, 13, 2)) for _ in range(n_blobs)]
    colors = distinct_colors(rng, n_blobs)
    labels = list(range(2, 2 + n_blobs))

    def free(pos):
        for i in range(n_blobs):
            (xi, yi), (wi, hi) = pos[i], sizes[i]
            if not (0 <= xi and xi + wi <= width and 0 <= yi and yi + hi <= height - 1):
                return False
            for j in range(i):
                (xj, yj), (wj, hj) = pos[j], sizes[j]
                if xi < xj + wj + 2 and xj < xi + wi + 2 and yi < yj + hj + 2 and yj < yi + hi + 2:
                    return False
        return True

    while True:
        pos = [(int(rng.integers(0, width - w)), int(rng.integers(0, height - 1 - h))) for w, h in sizes]
        if free(pos):
            break
    frames, tracks = [], []
    for _ in range(n_frames):
        lab = np.zeros((height, width), dtype=np.uint8)
        table = {}
        for l, (x, y), (w, h), c in zip(labels, pos, sizes, colors):
            lab[y:y + h, x:x + w] = l
            table[l] = c
        frames.append(raster_pair(lab, table))
        tracks.append(dict(zip(labels, pos)))
        for _ in range(100):
            new = []
            for x, y in pos:
                # rounding adds at most sqrt(0.5) px, so stay a pixel short of step
                ang = rng.uniform(0, 2 * np.pi)
                d = rng.uniform(0, step - 1)
                new.append((int(round(x + d * np.cos(ang))), int(round(y + d * np.sin(ang)))))
            if free(new):
                pos = new
                break
    return frames, cats_for(amb=tuple(labels)), tracks
