"""Forward-only inference for bias-free leaky-ReLU perceptrons.

Weights live in one flat vector: each layer matrix ``W_k`` (shape
``(widths[k+1], widths[k])``) is stored row-major, layers concatenated from
input to output. Every function here accepts either a single weight vector of
shape ``(N,)`` or a batch of shape ``(B, N)``; batched calls broadcast over the
leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Input or weight array does not match the architecture."""


@dataclass(frozen=True)
class Arch:
    layer_widths: tuple[int, ...]
    leakiness: float = 0.1

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("an architecture needs at least input and output widths")
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be >= 1, got {widths}")
        if widths[-1] != 2:
            raise ValueError(f"output width must be 2, got {widths[-1]}")
        if not 0.0 < self.leakiness < 1.0:
            raise ValueError(f"leakiness must lie in (0, 1), got {self.leakiness}")

    @classmethod
    def from_hidden(cls, input_dim: int, hidden: Sequence[int] = (), leakiness: float = 0.1) -> "Arch":
        return cls((input_dim, *hidden, 2), leakiness)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def depth(self) -> int:
        return len(self.layer_widths) - 1

    def shapes(self) -> list[tuple[int, int]]:
        w = self.layer_widths
        return [(w[k + 1], w[k]) for k in range(len(w) - 1)]

    def __str__(self):
        return "-".join(str(w) for w in self.layer_widths)


def weight_count(arch: Arch) -> int:
    """Number of scalar weights, i.e. the dimension of the weight sphere."""
    return sum(r * c for r, c in arch.shapes())


def unflatten(arch: Arch, w: np.ndarray) -> list[np.ndarray]:
    """Split flat weights into layer matrices of shape ``(..., out, in)``."""
    w = np.asarray(w, dtype=np.float64)
    n = weight_count(arch)
    if w.shape[-1] != n:
        raise ShapeError(f"expected {n} weights for arch {arch}, got trailing dim {w.shape[-1]}")
    mats, off = [], 0
    for rows, cols in arch.shapes():
        block = w[..., off:off + rows * cols]
        mats.append(block.reshape(w.shape[:-1] + (rows, cols)))
        off += rows * cols
    return mats


def leaky_relu(z: np.ndarray, leakiness: float) -> np.ndarray:
    return np.where(z >= 0, z, leakiness * z)


def forward(arch: Arch, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Network outputs, leaky ReLU applied after every layer including the last.

    ``x`` may be one input ``(D,)`` or a batch ``(m, D)``. With a weight batch
    ``(B, N)`` the result has shape ``(B, m, 2)`` (or ``(B, 2)`` for a single
    input).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ShapeError(f"inputs must have shape (m, {arch.input_dim}), got {x.shape}")
    h = x
    for mat in unflatten(arch, w):
        h = h @ np.swapaxes(mat, -1, -2)
        h = np.maximum(h, arch.leakiness * h)
    return h[..., 0, :] if single else h


def _prepare(mats: list[np.ndarray]) -> tuple:
    """Rearrange a weight batch for ``_margins``: stacked first layer, middle layers, output difference."""
    first, last = mats[0], mats[-1]
    diff = last[:, 1, :] - last[:, 0, :]
    if len(mats) == 1:
        return None, [], np.ascontiguousarray(diff.T)
    stacked = np.ascontiguousarray(first.reshape(first.shape[0] * first.shape[1], -1).T)
    return stacked, [np.swapaxes(mat, -1, -2) for mat in mats[1:-1]], diff


def _margins(prepared: tuple, x: np.ndarray, leakiness: float, scratch: np.ndarray | None = None) -> np.ndarray:
    """Output difference o1 - o0 before the final activation, shape ``(B, m)``.

    The last activation is strictly increasing, so its sign decides the label.
    The first layer of all B weight vectors runs as one stacked matrix product.
    ``scratch`` (flat, at least twice the first activation block) avoids fresh
    page-faulting allocations in hot loops.
    """
    stacked, middle, diff = prepared
    if stacked is None:
        return (x @ diff).T
    size = x.shape[0] * stacked.shape[1]
    if scratch is None or scratch.size < 2 * size:
        scratch = np.empty(2 * size)
    h = scratch[:size].reshape(x.shape[0], -1)
    tmp = scratch[size:2 * size].reshape(h.shape)
    np.matmul(x, stacked, out=h)
    np.multiply(h, leakiness, out=tmp)
    np.maximum(h, tmp, out=h)
    h = h.reshape(x.shape[0], diff.shape[0], -1)
    if middle:
        h = h.transpose(1, 0, 2)
        for mat in middle:
            h = h @ mat
            np.maximum(h, leakiness * h, out=h)
        h = h.transpose(1, 0, 2)
    return np.einsum("mbh,bh->bm", h, diff)


def predict(arch: Arch, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Predicted labels; on equal outputs the lower index (label 0) wins."""
    x = np.asarray(x, dtype=np.float64)
    single_x = x.ndim == 1
    x2 = x[None, :] if single_x else x
    if x2.ndim != 2 or x2.shape[1] != arch.input_dim:
        raise ShapeError(f"inputs must have shape (m, {arch.input_dim}), got {x.shape}")
    w = np.asarray(w, dtype=np.float64)
    w2 = w[None, :] if w.ndim == 1 else w
    pred = (_margins(_prepare(unflatten(arch, w2)), x2, arch.leakiness) > 0).astype(np.int8)
    if single_x:
        pred = pred[:, 0]
    return pred[0] if w.ndim == 1 else pred


def empirical_error(arch: Arch, w: np.ndarray, data) -> float | np.ndarray:
    """Fraction of ``data`` misclassified by ``w`` (0/1 loss).

    Serves as training error on a training set and as the true-error estimate
    on a held-out test set. Returns an array for a weight batch.
    """
    if len(data) == 0:
        raise ValueError("empirical error is undefined on an empty dataset")
    wrong = mistake_counts(arch, w, data.inputs, data.labels)
    err = wrong / len(data)
    return float(err) if np.ndim(err) == 0 else err


# activation block of one chunked evaluation is kept near this size (cache-resident)
_CHUNK_BYTES = 1 << 21
_SAMPLE_CHUNK = 256


def mistake_counts(arch: Arch, w: np.ndarray, inputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Integer count of misclassified samples for one weight vector or a batch.

    The evaluation is chunked over weights and samples so activations stay
    cache-sized; results are identical to ``predict``.
    """
    w = np.asarray(w, dtype=np.float64)
    single = w.ndim == 1
    w2 = w[None, :] if single else w
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    if inputs.ndim != 2 or inputs.shape[1] != arch.input_dim:
        raise ShapeError(f"inputs must have shape (m, {arch.input_dim}), got {inputs.shape}")
    m = inputs.shape[0]
    widest = max(arch.layer_widths[1:])
    weight_chunk = max(1, _CHUNK_BYTES // (8 * widest * _SAMPLE_CHUNK))
    mats = unflatten(arch, w2)
    out = np.zeros(w2.shape[0], dtype=np.int64)
    scratch = np.empty(2 * min(m, _SAMPLE_CHUNK) * min(weight_chunk, w2.shape[0]) * arch.layer_widths[1])
    for b0 in range(0, w2.shape[0], weight_chunk):
        chunk = _prepare([mat[b0:b0 + weight_chunk] for mat in mats])
        for s0 in range(0, m, _SAMPLE_CHUNK):
            pred = _margins(chunk, inputs[s0:s0 + _SAMPLE_CHUNK], arch.leakiness, scratch) > 0
            out[b0:b0 + weight_chunk] += np.count_nonzero(pred != (labels[s0:s0 + _SAMPLE_CHUNK] == 1), axis=-1)
    return out[0] if single else out
