"""Input-aware residual fusion on small (C, H, W) tensors with supplied weights.

    F(x)   = conv3x3(conv1x1(avgpool3x3(x)))
    y_out  = gate(y_e, F(x)) * y_e + y_d,   gate = 1[sgn(y_e) == sgn(F(x))]
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvariantViolation, ParseError, ShapeMismatch


def as_tensor(a) -> np.ndarray:
    t = np.asarray(a, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeMismatch(f"expected a (C, H, W) tensor, got shape {t.shape}")
    if not np.isfinite(t).all():
        raise InvariantViolation("tensor values must be finite")
    return t


@dataclass(frozen=True)
class IarcWeights:
    conv1x1: np.ndarray  # (c_out, c_in)
    b1: np.ndarray  # (c_out,)
    conv3x3: np.ndarray  # (c_out, c_out, 3, 3)
    b3: np.ndarray  # (c_out,)

    def __post_init__(self):
        for name in ("conv1x1", "b1", "conv3x3", "b3"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        c_out = self.conv1x1.shape[0] if self.conv1x1.ndim == 2 else -1
        if self.conv1x1.ndim != 2:
            raise ShapeMismatch("conv1x1 must be (c_out, c_in)")
        if self.b1.shape != (c_out,) or self.b3.shape != (c_out,):
            raise ShapeMismatch("biases must have c_out entries")
        if self.conv3x3.shape != (c_out, c_out, 3, 3):
            raise ShapeMismatch("conv3x3 must be (c_out, c_out, 3, 3)")
        if not all(np.isfinite(getattr(self, n)).all() for n in ("conv1x1", "b1", "conv3x3", "b3")):
            raise InvariantViolation("weights must be finite")

    @property
    def c_in(self) -> int:
        return self.conv1x1.shape[1]

    @property
    def c_out(self) -> int:
        return self.conv1x1.shape[0]


def avg_pool3(x: np.ndarray, stride_h: int, stride_w: int) -> np.ndarray:
    """3x3 mean with zero padding 1; padded zeros count towards the mean."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))[:, ::stride_h, ::stride_w]
    return win.sum(axis=(-1, -2)) / 9.0


def conv3x3(x: np.ndarray, k: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-correlation with a (c_out, c_in, 3, 3) kernel, zero padding 1."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))
    return np.einsum("ocij,chwij->ohw", k, win) + b[:, None, None]


def input_mapping(x, target_h: int, target_w: int, wts: IarcWeights) -> np.ndarray:
    x = as_tensor(x)
    c, h, w = x.shape
    if target_h < 1 or target_w < 1 or h % target_h or w % target_w:
        raise ShapeMismatch(f"target {target_h}x{target_w} does not divide input {h}x{w}")
    if c != wts.c_in:
        raise ShapeMismatch(f"input has {c} channels, conv1x1 expects {wts.c_in}")
    pooled = avg_pool3(x, h // target_h, w // target_w)
    mapped = np.einsum("oc,chw->ohw", wts.conv1x1, pooled) + wts.b1[:, None, None]
    return conv3x3(mapped, wts.conv3x3, wts.b3)


def sign_gate(a, b) -> np.ndarray:
    """1 where sgn(a) == sgn(b), zeros matching only zeros; else 0."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"gate shapes differ: {a.shape} vs {b.shape}")
    return (np.sign(a) == np.sign(b)).astype(np.float64)


def iarc_fuse(y_e, y_d, x, wts: IarcWeights) -> np.ndarray:
    y_e, y_d = as_tensor(y_e), as_tensor(y_d)
    if y_e.shape != y_d.shape:
        raise ShapeMismatch(f"y_e {y_e.shape} and y_d {y_d.shape} differ")
    if wts.c_out != y_e.shape[0]:
        raise ShapeMismatch(f"c_out {wts.c_out} != {y_e.shape[0]} channels of y_e")
    gate = sign_gate(y_e, input_mapping(x, y_e.shape[1], y_e.shape[2], wts))
    # select rather than multiply so gated-off elements are y_d bit for bit
    return np.where(gate == 1.0, y_e + y_d, y_d)


# ---------------------------------------------------------------------------
# text format: a dims line, then the row-major values
# ---------------------------------------------------------------------------
def _fmt(v: float) -> str:
    return repr(float(v))


def _block(a: np.ndarray) -> str:
    vals = a.reshape(-1)
    if a.ndim >= 2:
        rows = vals.reshape(-1, a.shape[-1])
        body = "\n".join(" ".join(_fmt(v) for v in row) for row in rows)
    else:
        body = " ".join(_fmt(v) for v in vals)
    return " ".join(str(d) for d in a.shape) + "\n" + body + "\n"


class _Tokens:
    def __init__(self, text: str, src):
        self.toks = text.split()
        self.pos = 0
        self.src = src

    def take(self, n: int) -> List[str]:
        if self.pos + n > len(self.toks):
            raise ParseError(f"{self.src}: unexpected end of data")
        out = self.toks[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self, ndim: int) -> np.ndarray:
        try:
            dims = [int(t) for t in self.take(ndim)]
        except ValueError as exc:
            raise ParseError(f"{self.src}: bad dims line: {exc}") from exc
        if any(d < 1 for d in dims):
            raise ParseError(f"{self.src}: dims must be positive")
        try:
            vals = np.array([float(t) for t in self.take(int(np.prod(dims)))], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{self.src}: bad value: {exc}") from exc
        return vals.reshape(dims)

    def done(self):
        if self.pos != len(self.toks):
            raise ParseError(f"{self.src}: trailing data")


def format_tensor(t) -> str:
    return _block(as_tensor(t))


def parse_tensor(text: str, src="<tensor>") -> np.ndarray:
    tok = _Tokens(text, src)
    t = tok.array(3)
    tok.done()
    return as_tensor(t)


def format_weights(w: IarcWeights) -> str:
    return "".join(_block(a) for a in (w.conv1x1, w.b1, w.conv3x3, w.b3))


def parse_weights(text: str, src="<weights>") -> IarcWeights:
    tok = _Tokens(text, src)
    parts = [tok.array(n) for n in (2, 1, 4, 1)]
    tok.done()
    return IarcWeights(*parts)


def read_tensor(path) -> np.ndarray:
    return parse_tensor(Path(path).read_text(encoding="utf-8"), path)


def write_tensor(t, path):
    Path(path).write_text(format_tensor(t), encoding="utf-8")


def read_weights(path) -> IarcWeights:
    return parse_weights(Path(path).read_text(encoding="utf-8"), path)


def write_weights(w: IarcWeights, path):
    Path(path).write_text(format_weights(w), encoding="utf-8")
