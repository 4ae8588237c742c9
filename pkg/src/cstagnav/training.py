"""Learning the cost weights by SGD and picking the spatial/temporal trade-off.

Regression targets: in every annotated frame one node is chosen as the safe node
(target 0) and every other object node gets target 1, so that a well-fitted
linear cost puts the safe node at the argmin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numba
import numpy as np

from .cstag import FEATURE_DIM, FrameGraph, node_angle
from .dataset import Category, SafeAnnotation
from .errors import (
    DegenerateAngle,
    DivergenceDetected,
    EmptyTrainingSet,
    InvariantViolation,
    NoGroundNode,
    SingularSystem,
)
from .model import CostModel, predict
from .pipeline import DEFAULT_DELTA_K, PreparedSequence

LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(11))
DIVERGENCE_LOSS = 1e6
RIDGE_EPS = 1e-8

Rows = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    seed: int = 42
    k_min: int = 5
    k_max: int = 30
    halve_every: int = 10
    delta_k: int = DEFAULT_DELTA_K  # interval used when predicting during the lambda search

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvariantViolation("learning_rate must be positive")
        if not 1 <= self.k_min <= self.k_max:
            raise InvariantViolation("need 1 <= k_min <= k_max")
        if self.epochs < 1:
            raise InvariantViolation("epochs must be >= 1")


@dataclass
class TrainingSet:
    sequences: List[PreparedSequence]

    def __post_init__(self):
        for seq in self.sequences:
            if any(a is None for a in seq.annotations):
                raise InvariantViolation(f"sequence {seq.sequence_id} has unannotated frames")
        if self.M < 1:
            raise EmptyTrainingSet("training set has no frames")

    @property
    def M(self) -> int:
        return sum(len(s.graphs) for s in self.sequences)


@dataclass
class LambdaSearch:
    grid: Tuple[float, ...]
    mistakes: List[int]

    @property
    def best(self) -> float:
        # first minimum on an ascending grid, i.e. ties go to the smaller lambda
        return self.grid[int(np.argmin(self.mistakes))]


@dataclass
class TrainResult:
    model: CostModel
    spatial_loss: List[float] = field(default_factory=list)
    temporal_loss: List[float] = field(default_factory=list)
    search: Optional[LambdaSearch] = None
    n_spatial_rows: int = 0


# ---------------------------------------------------------------------------
# supervision
# ---------------------------------------------------------------------------
def select_safe_node(graph: FrameGraph, ann: SafeAnnotation, rng: np.random.Generator) -> int:
    """A safe-labelled node inside [theta0, theta1], uniformly at random; else the
    largest ground node."""
    cands = []
    for u in graph.nodes:
        if u.mask_label not in ann.safe_labels:
            continue
        try:
            theta = node_angle(graph.camera, u)
        except DegenerateAngle:
            continue
        if ann.theta0 <= theta <= ann.theta1:
            cands.append(u.node_id)
    if cands:
        return cands[int(rng.integers(len(cands)))]
    ground = [u for u in graph.nodes if u.category is Category.GROUND]
    if not ground:
        raise NoGroundNode(f"frame {graph.frame_index} has no ground node")
    return max(ground, key=lambda u: (u.region.contour_area, -u.node_id)).node_id


def choose_safe_nodes(train: TrainingSet, rng: np.random.Generator) -> List[List[int]]:
    return [
        [select_safe_node(g, a, rng) for g, a in zip(seq.graphs, seq.annotations)]
        for seq in train.sequences
    ]


def _stack(xs, ys) -> Rows:
    if not xs:
        return np.zeros((0, FEATURE_DIM)), np.zeros(0)
    return np.array(xs, dtype=float), np.array(ys, dtype=float)


def spatial_rows(seq: PreparedSequence, safe: Sequence[int]) -> Rows:
    xs, ys = [], []
    for g, s in zip(seq.graphs, safe):
        for u in g.nodes:
            xs.append(g.features[u.node_id])
            ys.append(0.0 if u.node_id == s else 1.0)
    return _stack(xs, ys)


def temporal_rows(seq: PreparedSequence, safe: Sequence[int], k: int) -> Rows:
    """Rows at frames i (1-indexed) with k | i, skipping nodes without a delta."""
    deltas = seq.deltas(k)
    xs, ys = [], []
    for t, (g, s) in enumerate(zip(seq.graphs, safe)):
        if (t + 1) % k:
            continue
        for u in g.nodes:
            d = deltas[t][u.node_id]
            if d is None:
                continue
            xs.append(d)
            ys.append(0.0 if u.node_id == s else 1.0)
    return _stack(xs, ys)


def build_regression_set(train: TrainingSet, mode: str, rng: Optional[np.random.Generator] = None,
                         k: Optional[int] = None,
                         safe_nodes: Optional[List[List[int]]] = None) -> Rows:
    """Regression rows for ``mode`` "spatial" or "temporal" (the latter needs ``k``)."""
    if safe_nodes is None:
        safe_nodes = choose_safe_nodes(train, rng if rng is not None else np.random.default_rng(0))
    parts = []
    for seq, safe in zip(train.sequences, safe_nodes):
        if mode == "spatial":
            parts.append(spatial_rows(seq, safe))
        elif mode == "temporal":
            if k is None or k < 1:
                raise InvariantViolation("temporal rows need an interval k >= 1")
            parts.append(temporal_rows(seq, safe, k))
        else:
            raise InvariantViolation(f"unknown mode {mode!r}")
    X = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, FEATURE_DIM))
    y = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    if len(y) == 0:
        raise EmptyTrainingSet(f"no {mode} rows")
    return X, y


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------
@numba.njit(cache=True)
def _sgd_epoch(X, y, w, order, lr):
    d = X.shape[1]
    for i in order:
        err = y[i]
        for j in range(d):
            err -= X[i, j] * w[j]
        g = 2.0 * lr * err
        for j in range(d):
            w[j] += g * X[i, j]


def mse(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    r = y - X @ w
    return float(r @ r) / len(y)


def sgd_fit(rows: Union[Rows, Callable[[int], Rows]], cfg: SgdConfig = SgdConfig(),
            on_epoch: Optional[Callable[[int, float], None]] = None,
            history: Optional[List[float]] = None) -> np.ndarray:
    """Per-row SGD on the mean squared error.

    ``rows`` is an (X, y) pair or a callable ``epoch -> (X, y)`` when the rows
    change per epoch. Weights start from N(0, 1); rows are shuffled each epoch;
    the step size halves every ``cfg.halve_every`` epochs. ``history`` (if given)
    receives the loss before training followed by the loss after each epoch.
    """
    rng = np.random.default_rng(cfg.seed)
    get = rows if callable(rows) else (lambda _e: rows)
    X0, y0 = get(0)
    if not callable(rows) and len(y0) == 0:
        raise EmptyTrainingSet("sgd_fit needs at least one row")
    w = rng.standard_normal(X0.shape[1])
    if history is not None and len(y0):
        history.append(mse(X0, y0, w))
    for epoch in range(cfg.epochs):
        X, y = get(epoch)
        if len(y) == 0:
            continue
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        lr = cfg.learning_rate * 0.5 ** (epoch // cfg.halve_every)
        _sgd_epoch(X, y, w, rng.permutation(len(y)), lr)
        loss = mse(X, y, w)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise DivergenceDetected(f"loss {loss:.3g} at epoch {epoch}; lower the learning rate")
        if history is not None:
            history.append(loss)
        if on_epoch is not None:
            on_epoch(epoch, loss)
    return w


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    scale = max(np.abs(A).max(), 1.0)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[piv, col]) <= 1e-14 * scale:
            raise SingularSystem(f"zero pivot in column {col}")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        f = A[col + 1:, col] / A[col, col]
        A[col + 1:, col:] -= np.outer(f, A[col, col:])
        b[col + 1:] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1:] @ x[row + 1:]) / A[row, row]
    return x


def least_squares_oracle(rows: Rows, eps: float = RIDGE_EPS) -> np.ndarray:
    """Closed-form ridge solution of (X^T X + eps I) w = X^T y."""
    X, y = rows
    X = np.asarray(X, dtype=float)
    if len(y) == 0:
        raise EmptyTrainingSet("least squares needs at least one row")
    A = X.T @ X + eps * np.eye(X.shape[1])
    return solve_linear(A, X.T @ np.asarray(y, dtype=float))


# ---------------------------------------------------------------------------
# full training
# ---------------------------------------------------------------------------
def count_mistakes(model: CostModel, train: TrainingSet, delta_k: int) -> int:
    m = 0
    for seq in train.sequences:
        deltas = seq.deltas(delta_k)
        for g, ann, d in zip(seq.graphs, seq.annotations, deltas):
            if not g.nodes:
                m += 1
                continue
            if not ann.contains(predict(model, g, d).theta):
                m += 1
    return m


def lambda_search(w_sp: np.ndarray, w_t: np.ndarray, train: TrainingSet, delta_k: int) -> LambdaSearch:
    mistakes = [count_mistakes(CostModel(w_sp, w_t, lam), train, delta_k) for lam in LAMBDA_GRID]
    return LambdaSearch(LAMBDA_GRID, mistakes)


def train_detailed(train: TrainingSet, cfg: SgdConfig = SgdConfig(),
                   on_epoch: Optional[Callable[[str, int, float], None]] = None) -> TrainResult:
    rng = np.random.default_rng(cfg.seed)
    safe = choose_safe_nodes(train, rng)

    # stage 1: spatial weights
    sp_rows = build_regression_set(train, "spatial", safe_nodes=safe)
    sp_hist: List[float] = []
    w_sp = sgd_fit(sp_rows, cfg, history=sp_hist,
                   on_epoch=(lambda e, l: on_epoch("spatial", e, l)) if on_epoch else None)

    # stage 2: temporal weights, one interval k per sequence per epoch
    k_rng = np.random.default_rng([cfg.seed, 1])
    ks = k_rng.integers(cfg.k_min, cfg.k_max + 1, size=(cfg.epochs, len(train.sequences)))
    cache: Dict[Tuple[int, int], Rows] = {}

    def epoch_rows(epoch: int) -> Rows:
        parts = []
        for s, (seq, sf) in enumerate(zip(train.sequences, safe)):
            key = (s, int(ks[epoch, s]))
            if key not in cache:
                cache[key] = temporal_rows(seq, sf, key[1])
            parts.append(cache[key])
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    t_hist: List[float] = []
    if any(len(epoch_rows(e)[1]) for e in range(cfg.epochs)):
        t_cfg = SgdConfig(cfg.learning_rate, cfg.epochs, cfg.seed + 1,
                          cfg.k_min, cfg.k_max, cfg.halve_every, cfg.delta_k)
        w_t = sgd_fit(epoch_rows, t_cfg, history=t_hist,
                      on_epoch=(lambda e, l: on_epoch("temporal", e, l)) if on_epoch else None)
    else:
        # no track spans any drawn interval: no temporal evidence to fit
        w_t = np.zeros(FEATURE_DIM)

    # stage 3: trade-off by mistake count
    search = lambda_search(w_sp, w_t, train, cfg.delta_k)
    model = CostModel(w_sp, w_t, search.best)
    return TrainResult(model, sp_hist, t_hist, search, len(sp_rows[1]))


def train(train_set: TrainingSet, cfg: SgdConfig = SgdConfig()) -> CostModel:
    return train_detailed(train_set, cfg).model
