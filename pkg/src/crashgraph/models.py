"""The GNN zoo: GCN, single-head GAT, mean-aggregator SAGE, and the
spatio-temporal convolution backbone (arch name ``dstgcn``).

Every architecture is expressed as a pure function: seeded parameter init,
then a forward pass recorded on a fresh tape. All blocks share the same
skeleton (inter-block dropout, ReLU activations) and end in a shared linear
head producing N x 2 logits. New architectures can be plugged in through
``register_arch`` (the comparison harness accepts any registered name).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import SparseAdjacency, Tape, normalize_adjacency, softmax_rows
from .errors import ConfigError, ShapeError
from .graphs import Graph

BUILTIN_ARCHS = ("gcn", "gat", "sage", "dstgcn")
LEAKY_SLOPE = 0.2


@dataclass
class ModelConfig:
    arch: str = "dstgcn"
    hidden_dim: int = 32
    num_blocks: int = 2
    dropout: float = 0.30
    temporal_kernel: int = 3  # dstgcn only

    def validate(self) -> None:
        if self.arch not in _REGISTRY:
            raise ConfigError(f"unknown architecture {self.arch!r}; known: {sorted(_REGISTRY)}")
        if self.hidden_dim <= 0:
            raise ConfigError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if self.num_blocks <= 0:
            raise ConfigError(f"num_blocks must be positive, got {self.num_blocks}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.temporal_kernel <= 0 or self.temporal_kernel % 2 == 0:
            raise ConfigError(f"temporal_kernel must be odd positive, got {self.temporal_kernel}")

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "hidden_dim": self.hidden_dim,
            "num_blocks": self.num_blocks,
            "dropout": self.dropout,
            "temporal_kernel": self.temporal_kernel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class ModelInputs:
    """Static per-graph structures shared across epochs."""

    features: np.ndarray
    n: int
    adj: SparseAdjacency | None = None  # gcn / dstgcn
    att_src: np.ndarray | None = None  # gat: edges incl. self-loops
    att_dst: np.ndarray | None = None
    nbr_src: np.ndarray | None = None  # sage: edges without self-loops
    nbr_dst: np.ndarray | None = None
    inv_degree: np.ndarray | None = None

    @classmethod
    def prepare(cls, graph: Graph, arch: str) -> "ModelInputs":
        n = graph.num_nodes
        inputs = cls(features=graph.features, n=n)
        edges = graph.edge_index
        if arch in ("gcn", "dstgcn"):
            inputs.adj = normalize_adjacency(edges, n)
        elif arch == "gat":
            loops = np.arange(n, dtype=np.int64)
            src = np.concatenate([edges[0], loops])
            dst = np.concatenate([edges[1], loops])
            order = np.lexsort((src, dst))  # group by destination
            inputs.att_src = src[order]
            inputs.att_dst = dst[order]
        elif arch == "sage":
            order = np.lexsort((edges[0], edges[1]))
            inputs.nbr_src = edges[0][order]
            inputs.nbr_dst = edges[1][order]
            deg = np.bincount(inputs.nbr_dst, minlength=n).astype(np.float64)
            inputs.inv_degree = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
        else:
            raise ConfigError(f"unknown architecture {arch!r}")
        return inputs


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _block_dims(in_dim: int, config: ModelConfig) -> list[tuple[int, int]]:
    dims = []
    d = in_dim
    for _ in range(config.num_blocks):
        dims.append((d, config.hidden_dim))
        d = config.hidden_dim
    return dims


def init_gcn(config: ModelConfig, in_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {}
    for l, (fi, fo) in enumerate(_block_dims(in_dim, config)):
        params[f"block{l}.w"] = _glorot(rng, fi, fo)
    params["head.w"] = _glorot(rng, config.hidden_dim, 2)
    params["head.b"] = np.zeros((1, 2))
    return params


def init_gat(config: ModelConfig, in_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {}
    for l, (fi, fo) in enumerate(_block_dims(in_dim, config)):
        params[f"block{l}.w"] = _glorot(rng, fi, fo)
        params[f"block{l}.a_dst"] = _glorot(rng, fo, 1)
        params[f"block{l}.a_src"] = _glorot(rng, fo, 1)
    params["head.w"] = _glorot(rng, config.hidden_dim, 2)
    params["head.b"] = np.zeros((1, 2))
    return params


def init_sage(config: ModelConfig, in_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {}
    for l, (fi, fo) in enumerate(_block_dims(in_dim, config)):
        params[f"block{l}.w_self"] = _glorot(rng, fi, fo)
        params[f"block{l}.w_neigh"] = _glorot(rng, fi, fo)
    params["head.w"] = _glorot(rng, config.hidden_dim, 2)
    params["head.b"] = np.zeros((1, 2))
    return params


def init_dstgcn(config: ModelConfig, in_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {}
    for l, (fi, fo) in enumerate(_block_dims(in_dim, config)):
        params[f"block{l}.w_spatial"] = _glorot(rng, fi, fo)
        params[f"block{l}.kernel"] = _glorot(rng, 1, config.temporal_kernel)
    params["head.w"] = _glorot(rng, config.hidden_dim, 2)
    params["head.b"] = np.zeros((1, 2))
    return params


def _head(tape: Tape, h, p: dict) -> object:
    return tape.add(tape.matmul(h, p["head.w"]), p["head.b"])


def _wrap_params(tape: Tape, params: dict[str, np.ndarray]) -> dict:
    return {name: tape.parameter(value, name) for name, value in params.items()}


def _interblock_dropout(tape: Tape, h, l, config, training, dropout_seed):
    if l > 0:
        return tape.dropout(h, config.dropout, dropout_seed + l, training)
    return h


def forward_gcn(inputs, params_np, config, tape, training=False, dropout_seed=0):
    p = _wrap_params(tape, params_np)
    h = tape.constant(inputs.features)
    for l in range(config.num_blocks):
        h = _interblock_dropout(tape, h, l, config, training, dropout_seed)
        h = tape.relu(tape.matmul(tape.spmm(inputs.adj, h), p[f"block{l}.w"]))
    return _head(tape, h, p)


def forward_gat(inputs, params_np, config, tape, training=False, dropout_seed=0):
    p = _wrap_params(tape, params_np)
    src, dst = inputs.att_src, inputs.att_dst
    h = tape.constant(inputs.features)
    for l in range(config.num_blocks):
        h = _interblock_dropout(tape, h, l, config, training, dropout_seed)
        hw = tape.matmul(h, p[f"block{l}.w"])
        s_dst = tape.matmul(hw, p[f"block{l}.a_dst"])
        s_src = tape.matmul(hw, p[f"block{l}.a_src"])
        scores = tape.leaky_relu(
            tape.add(tape.gather_rows(s_dst, dst), tape.gather_rows(s_src, src)),
            LEAKY_SLOPE,
        )
        alpha = tape.segment_softmax(scores, dst, inputs.n)
        weighted = tape.mul(alpha, tape.gather_rows(hw, src))
        h = tape.relu(tape.scatter_add_rows(weighted, dst, inputs.n))
    return _head(tape, h, p)


def forward_sage(inputs, params_np, config, tape, training=False, dropout_seed=0):
    p = _wrap_params(tape, params_np)
    src, dst = inputs.nbr_src, inputs.nbr_dst
    h = tape.constant(inputs.features)
    for l in range(config.num_blocks):
        h = _interblock_dropout(tape, h, l, config, training, dropout_seed)
        nbr_sum = tape.scatter_add_rows(tape.gather_rows(h, src), dst, inputs.n)
        nbr_mean = tape.row_scale(nbr_sum, inputs.inv_degree)
        h = tape.relu(
            tape.add(
                tape.matmul(h, p[f"block{l}.w_self"]),
                tape.matmul(nbr_mean, p[f"block{l}.w_neigh"]),
            )
        )
    return _head(tape, h, p)


def forward_dstgcn(inputs, params_np, config, tape, training=False, dropout_seed=0):
    p = _wrap_params(tape, params_np)
    h = tape.constant(inputs.features)
    for l in range(config.num_blocks):
        h = _interblock_dropout(tape, h, l, config, training, dropout_seed)
        spatial = tape.relu(tape.matmul(tape.spmm(inputs.adj, h), p[f"block{l}.w_spatial"]))
        h = tape.relu(tape.conv1d_same(spatial, p[f"block{l}.kernel"]))
    return _head(tape, h, p)


_REGISTRY: dict[str, tuple] = {
    "gcn": (init_gcn, forward_gcn),
    "gat": (init_gat, forward_gat),
    "sage": (init_sage, forward_sage),
    "dstgcn": (init_dstgcn, forward_dstgcn),
}


def register_arch(name: str, init_fn, forward_fn) -> None:
    """Plug an external architecture into the train/compare harness."""
    if name in _REGISTRY:
        raise ConfigError(f"architecture {name!r} already registered")
    _REGISTRY[name] = (init_fn, forward_fn)


def known_archs() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def init_params(config: ModelConfig, in_dim: int, seed: int) -> dict[str, np.ndarray]:
    """Seeded Glorot-uniform init (biases zero) in a fixed creation order."""
    config.validate()
    if in_dim <= 0:
        raise ShapeError(f"in_dim must be positive, got {in_dim}")
    rng = np.random.default_rng(seed)
    return _REGISTRY[config.arch][0](config, in_dim, rng)


def forward(
    inputs: ModelInputs,
    params: dict[str, np.ndarray],
    config: ModelConfig,
    tape: Tape,
    training: bool = False,
    dropout_seed: int = 0,
):
    """Record one forward pass on ``tape`` and return the logits node."""
    return _REGISTRY[config.arch][1](inputs, params, config, tape, training, dropout_seed)


def forward_logits(
    inputs: ModelInputs, params: dict[str, np.ndarray], config: ModelConfig
) -> np.ndarray:
    """Evaluation-mode logits as a plain array."""
    return forward(inputs, params, config, Tape(), training=False).value


def predict(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row softmax and argmax labels (ties resolve to class 0)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ShapeError(f"predict expects N x 2 logits, got {logits.shape}")
    probs = softmax_rows(logits)
    labels = (probs[:, 1] > probs[:, 0]).astype(np.int64)
    return probs, labels


def param_count(params: dict[str, np.ndarray]) -> int:
    return int(sum(v.size for v in params.values()))
