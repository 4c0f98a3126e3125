"""Reverse-mode autodiff over double-precision matrices, plus Adam.

Everything is a 2-D float64 array; scalars are 1x1. A ``Tape`` records each
operation in execution order (which is already a topological order), and
``backward`` walks it once in reverse, accumulating vector-Jacobian products.
Graphs here are small, so clarity and exact reproducibility win over
generality: no broadcasting beyond the documented cases, no higher-order
derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError, NumericError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class SparseAdjacency:
    """Renormalized adjacency in compressed-row form; symmetric with diagonal."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.float64)
        for i in range(self.n):
            for e in range(self.indptr[i], self.indptr[i + 1]):
                out[i, self.indices[e]] = self.values[e]
        return out


def normalize_adjacency(edge_index: np.ndarray, n: int) -> SparseAdjacency:
    """Build D^{-1/2} (A + I) D^{-1/2} from a directed edge list.

    ``edge_index`` is 2 x E with no self-loops; it is symmetrized and
    deduplicated, and D is the degree matrix of A + I.
    """
    edge_index = np.asarray(edge_index, dtype=np.int64)
    if edge_index.size == 0:
        edge_index = edge_index.reshape(2, 0)
    if edge_index.ndim != 2 or edge_index.shape[0] != 2:
        raise ShapeError(f"edge_index must be 2 x E, got {edge_index.shape}")
    src, dst = edge_index[0], edge_index[1]
    if src.size and (src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n):
        raise DataError(f"edge endpoint outside [0, {n})")
    if np.any(src == dst):
        raise DataError("input edge list must not contain self-loops")

    # Symmetrize, add the diagonal, and deduplicate via row-major keys.
    all_src = np.concatenate([src, dst, np.arange(n, dtype=np.int64)])
    all_dst = np.concatenate([dst, src, np.arange(n, dtype=np.int64)])
    keys = np.unique(all_src * np.int64(n) + all_dst)
    rows = keys // n
    cols = keys % n
    deg = np.bincount(rows, minlength=n).astype(np.float64)  # counts include the diagonal
    inv_sqrt = 1.0 / np.sqrt(deg)
    values = inv_sqrt[rows] * inv_sqrt[cols]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return SparseAdjacency(n=n, indptr=indptr, indices=cols, values=values)


class Tensor:
    """A value node on a tape. ``value`` is a 2-D float64 array."""

    __slots__ = ("value", "index", "parents", "is_param", "name")

    def __init__(self, value, index, parents, is_param=False, name=None):
        self.value = value
        self.index = index
        self.parents = parents  # list of (Tensor, vjp callable)
        self.is_param = is_param
        self.name = name

    @property
    def shape(self):
        return self.value.shape


def _as_matrix(array) -> np.ndarray:
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 1:
        raise ShapeError("tape values must be 2-D; reshape vectors explicitly")
    if arr.ndim != 2:
        raise ShapeError(f"tape values must be 2-D, got shape {arr.shape}")
    return arr


class Tape:
    """Execution-ordered operation recorder with one-shot reverse pass."""

    def __init__(self):
        self._nodes: list[Tensor] = []
        self._consumed = False

    def _record(self, value, parents, is_param=False, name=None) -> Tensor:
        node = Tensor(value, len(self._nodes), parents, is_param=is_param, name=name)
        self._nodes.append(node)
        return node

    def constant(self, array, name=None) -> Tensor:
        return self._record(_as_matrix(array), [], name=name)

    def parameter(self, array, name: str) -> Tensor:
        return self._record(_as_matrix(array), [], is_param=True, name=name)

    # -- kernels -----------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
        out = a.value @ b.value
        parents = [
            (a, lambda g, bv=b.value: g @ bv.T),
            (b, lambda g, av=a.value: av.T @ g),
        ]
        return self._record(out, parents)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise add; ``b`` may be a 1 x K row broadcast over rows."""
        if a.shape == b.shape:
            back_b = lambda g: g
        elif b.shape == (1, a.shape[1]):
            back_b = lambda g: g.sum(axis=0, keepdims=True)
        else:
            raise ShapeError(f"add: {a.shape} + {b.shape}")
        return self._record(a.value + b.value, [(a, lambda g: g), (b, back_b)])

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise product; ``a`` may be E x 1 broadcast over columns."""
        if a.shape == b.shape:
            back_a = lambda g, bv=b.value: g * bv
        elif a.shape == (b.shape[0], 1):
            back_a = lambda g, bv=b.value: (g * bv).sum(axis=1, keepdims=True)
        else:
            raise ShapeError(f"mul: {a.shape} * {b.shape}")
        return self._record(
            a.value * b.value,
            [(a, back_a), (b, lambda g, av=a.value: g * av)],
        )

    def relu(self, x: Tensor) -> Tensor:
        mask = x.value > 0.0
        return self._record(np.where(mask, x.value, 0.0), [(x, lambda g, m=mask: g * m)])

    def leaky_relu(self, x: Tensor, slope: float = 0.2) -> Tensor:
        mask = x.value > 0.0
        out = np.where(mask, x.value, slope * x.value)
        return self._record(out, [(x, lambda g, m=mask: np.where(m, g, slope * g))])

    def dropout(self, x: Tensor, rate: float, seed: int, training: bool) -> Tensor:
        """Seeded inverted dropout; exact identity when not training."""
        if not (0.0 <= rate < 1.0):
            raise ShapeError(f"dropout rate {rate} outside [0, 1)")
        if not training or rate == 0.0:
            return self._record(x.value, [(x, lambda g: g)])
        rng = np.random.default_rng(seed)
        scale = 1.0 / (1.0 - rate)
        mask = (rng.random(x.shape) >= rate) * scale
        return self._record(x.value * mask, [(x, lambda g, m=mask: g * m)])

    def spmm(self, adj: SparseAdjacency, x: Tensor) -> Tensor:
        """Sparse-dense product; adj is symmetric so the VJP reuses it."""
        if adj.n != x.shape[0]:
            raise ShapeError(f"spmm: adjacency n={adj.n} vs dense rows {x.shape[0]}")
        out = kernels.spmm_csr(adj.indptr, adj.indices, adj.values, x.value)
        back = lambda g: kernels.spmm_csr(adj.indptr, adj.indices, adj.values, g)
        return self._record(out, [(x, back)])

    def conv1d_same(self, x: Tensor, kernel: Tensor) -> Tensor:
        """Slide a shared 1 x k_t kernel along each row under zero padding."""
        if kernel.shape[0] != 1 or kernel.shape[1] % 2 == 0:
            raise ShapeError(f"conv1d kernel must be 1 x odd, got {kernel.shape}")
        kvec = kernel.value[0]
        out = kernels.conv1d_rows(x.value, kvec)
        kt = kvec.shape[0]
        parents = [
            (x, lambda g, kv=kvec: kernels.conv1d_rows(g, kv[::-1].copy())),
            (
                kernel,
                lambda g, xv=x.value: kernels.conv1d_rows_kernel_grad(xv, g, kt).reshape(1, kt),
            ),
        ]
        return self._record(out, parents)

    def gather_rows(self, x: Tensor, idx: np.ndarray) -> Tensor:
        idx = np.asarray(idx, dtype=np.int64)
        n = x.shape[0]
        back = lambda g: kernels.scatter_add_rows(g, idx, n)
        return self._record(x.value[idx], [(x, back)])

    def scatter_add_rows(self, x: Tensor, idx: np.ndarray, n_out: int) -> Tensor:
        idx = np.asarray(idx, dtype=np.int64)
        out = kernels.scatter_add_rows(x.value, idx, n_out)
        return self._record(out, [(x, lambda g: g[idx])])

    def row_scale(self, x: Tensor, scale: np.ndarray) -> Tensor:
        """Scale row i by constant scale[i] (linear, non-learnable)."""
        s = np.asarray(scale, dtype=np.float64).reshape(-1, 1)
        if s.shape[0] != x.shape[0]:
            raise ShapeError(f"row_scale: {s.shape[0]} scales for {x.shape[0]} rows")
        return self._record(x.value * s, [(x, lambda g: g * s)])

    def segment_softmax(self, scores: Tensor, seg_ids: np.ndarray, n_segments: int) -> Tensor:
        """Softmax of an E x 1 score column within groups given by seg_ids."""
        if scores.shape[1] != 1:
            raise ShapeError(f"segment_softmax expects E x 1 scores, got {scores.shape}")
        seg_ids = np.asarray(seg_ids, dtype=np.int64)
        col = scores.value[:, 0]
        seg_max = kernels.segment_max(col, seg_ids, n_segments)
        shifted = np.exp(col - seg_max[seg_ids])
        denom = kernels.scatter_add_rows(shifted.reshape(-1, 1), seg_ids, n_segments)[:, 0]
        alpha = (shifted / denom[seg_ids]).reshape(-1, 1)

        def back(g, alpha=alpha, seg_ids=seg_ids, n_segments=n_segments):
            weighted = alpha * g
            seg_dot = kernels.scatter_add_rows(weighted, seg_ids, n_segments)[:, 0]
            return weighted - alpha * seg_dot[seg_ids].reshape(-1, 1)

        return self._record(alpha, [(scores, back)])

    def softmax_xent(self, logits: Tensor, labels: np.ndarray, mask: np.ndarray):
        """Masked mean cross-entropy; returns (scalar loss node, probabilities).

        Probabilities are returned as a plain array (only the loss is
        differentiated). Softmax is max-subtracted per row for stability.
        """
        labels = np.asarray(labels, dtype=np.int64)
        mask = np.asarray(mask, dtype=bool)
        if labels.shape[0] != logits.shape[0] or mask.shape[0] != logits.shape[0]:
            raise ShapeError("softmax_xent: labels/mask length must match logits rows")
        if not mask.any():
            raise DataError("softmax_xent: empty mask")
        z = logits.value - logits.value.max(axis=1, keepdims=True)
        exp_z = np.exp(z)
        probs = exp_z / exp_z.sum(axis=1, keepdims=True)
        log_norm = np.log(exp_z.sum(axis=1))
        picked = z[np.arange(z.shape[0]), labels]
        n_masked = int(mask.sum())
        loss = float((log_norm[mask] - picked[mask]).sum() / n_masked)

        def back(g, probs=probs, labels=labels, mask=mask, n_masked=n_masked):
            d = probs.copy()
            d[np.arange(d.shape[0]), labels] -= 1.0
            d[~mask] = 0.0
            return d * (g[0, 0] / n_masked)

        node = self._record(np.array([[loss]]), [(logits, back)])
        return node, probs

    def sum(self, x: Tensor) -> Tensor:
        out = np.array([[float(x.value.sum())]])
        return self._record(out, [(x, lambda g, shape=x.shape: np.full(shape, g[0, 0]))])

    # -- reverse pass ------------------------------------------------------

    def backward(self, root: Tensor) -> dict[str, np.ndarray]:
        """Reverse accumulation from a scalar root; returns param-name -> grad."""
        if not self._nodes:
            raise NumericError("backward called on an empty tape")
        if self._consumed:
            raise NumericError("tape already consumed; build a new tape per forward")
        if root is not self._nodes[root.index]:
            raise NumericError("root tensor does not belong to this tape")
        if root.shape != (1, 1):
            raise ShapeError(f"backward root must be a 1x1 scalar, got {root.shape}")
        self._consumed = True
        grads: list[np.ndarray | None] = [None] * len(self._nodes)
        grads[root.index] = np.ones((1, 1))
        params: dict[str, np.ndarray] = {}
        for node in reversed(self._nodes[: root.index + 1]):
            g = grads[node.index]
            if g is None:
                if node.is_param:
                    params[node.name] = np.zeros_like(node.value)
                continue
            if node.is_param:
                params[node.name] = g
            for parent, vjp in node.parents:
                contribution = vjp(g)
                if grads[parent.index] is None:
                    grads[parent.index] = contribution
                else:
                    grads[parent.index] = grads[parent.index] + contribution
        # Parameters recorded after the root (none in practice) get zeros too.
        for node in self._nodes[root.index + 1 :]:
            if node.is_param:
                params.setdefault(node.name, np.zeros_like(node.value))
        return params


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-stable softmax for plain arrays (evaluation path)."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def xent_loss(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Masked mean cross-entropy on plain arrays (no tape)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DataError("xent_loss: empty mask")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    picked = z[np.arange(z.shape[0]), np.asarray(labels, dtype=np.int64)]
    return float((log_norm[mask] - picked[mask]).mean())


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators and step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> dict[str, np.ndarray]:
    """One Adam update with coupled L2 (decay added to the gradient)."""
    state.t += 1
    t = state.t
    out: dict[str, np.ndarray] = {}
    for name in params:
        theta = params[name]
        g = grads[name]
        if weight_decay != 0.0:
            g = g + weight_decay * theta
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        out[name] = theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return out
