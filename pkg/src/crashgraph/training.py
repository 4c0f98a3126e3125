"""Training loop, checkpointing, hyperparameter grid search, model comparison.

Training is full-batch: one forward/backward/Adam step per epoch on the train
mask, then evaluation-mode metrics on the train and validation masks. The
best-validation-F1 epoch's parameters are checkpointed (earliest epoch wins
ties); there is no early stopping. Test labels are never read here.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .autodiff import AdamState, Tape, adam_step, xent_loss
from .errors import ConfigError, DataError, GraphFormatError, NumericError
from .graphs import Graph
from .metrics import weighted_f1
from .models import ModelConfig, ModelInputs, forward, init_params, param_count, predict
from .serialize import checksum, fmt_floats, parse_floats, read_document, write_document

CHECKPOINT_FORMAT = "crashgraph-checkpoint"
CHECKPOINT_VERSION = 1

# Uniform baseline hyperparameters shared by every architecture.
DEFAULT_HIDDEN = 32
DEFAULT_DROPOUT = 0.30
DEFAULT_LR = 0.05
DEFAULT_WEIGHT_DECAY = 0.005
DEFAULT_EPOCHS = 30


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    epochs: int = DEFAULT_EPOCHS
    seed: int = 0

    def validate(self) -> None:
        self.model.validate()
        if self.lr < 0:
            raise ConfigError(f"lr must be non-negative, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.epochs <= 0:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    train_acc: float
    val_acc: float
    train_f1: float
    val_f1: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord]
    best_epoch: int
    best_val_f1: float
    best_params: dict[str, np.ndarray]
    config: TrainConfig


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary JSON-serializable parts."""
    payload = json.dumps(parts, sort_keys=True, separators=(",", ":"), default=str)
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _split_metrics(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray):
    loss = xent_loss(logits, labels, mask)
    _, preds = predict(logits[mask])
    truth = labels[mask]
    acc = float(np.mean(preds == truth))
    f1 = weighted_f1(truth, preds)
    return loss, acc, f1


def train(graph: Graph, config: TrainConfig) -> TrainHistory:
    """Run the fixed-epoch loop and checkpoint the best validation state."""
    config.validate()
    if not graph.has_masks():
        raise DataError("graph has no train/val/test masks; build splits first")
    if not graph.train_mask.any() or not graph.val_mask.any():
        raise DataError("train and validation masks must be non-empty")
    inputs = ModelInputs.prepare(graph, config.model.arch)
    labels = graph.labels
    params = init_params(config.model, graph.feature_dim, config.seed)
    state = AdamState()
    history: list[EpochRecord] = []
    best_epoch = -1
    best_f1 = -1.0
    best_params: dict[str, np.ndarray] = {k: v.copy() for k, v in params.items()}

    for epoch in range(config.epochs):
        tape = Tape()
        logits = forward(
            inputs,
            params,
            config.model,
            tape,
            training=True,
            dropout_seed=derive_seed(config.seed, "dropout", epoch),
        )
        loss_node, _ = tape.softmax_xent(logits, labels, graph.train_mask)
        loss_value = float(loss_node.value[0, 0])
        if not np.isfinite(loss_value):
            raise NumericError(
                f"non-finite training loss {loss_value} at epoch {epoch} "
                f"(arch={config.model.arch}, lr={config.lr})"
            )
        grads = tape.backward(loss_node)
        params = adam_step(params, grads, state, config.lr, config.weight_decay)

        eval_logits = forward(inputs, params, config.model, Tape(), training=False).value
        train_loss, train_acc, train_f1 = _split_metrics(eval_logits, labels, graph.train_mask)
        val_loss, val_acc, val_f1 = _split_metrics(eval_logits, labels, graph.val_mask)
        history.append(
            EpochRecord(epoch, train_loss, val_loss, train_acc, val_acc, train_f1, val_f1)
        )
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}

    return TrainHistory(
        epochs=history,
        best_epoch=best_epoch,
        best_val_f1=best_f1,
        best_params=best_params,
        config=config,
    )


def evaluate_split(graph: Graph, params: dict[str, np.ndarray], model: ModelConfig, mask: np.ndarray):
    """Evaluation-mode (labels, predictions, positive-class scores) on a mask."""
    inputs = ModelInputs.prepare(graph, model.arch)
    logits = forward(inputs, params, model, Tape(), training=False).value
    probs, preds = predict(logits)
    mask = np.asarray(mask, dtype=bool)
    return graph.labels[mask], preds[mask], probs[mask, 1]


# -- grid search -------------------------------------------------------------


@dataclass
class SearchGrid:
    hidden: tuple[int, ...] = (32, 64)
    dropout: tuple[float, ...] = (0.3, 0.4)
    lr: tuple[float, ...] = (0.10, 0.07, 0.04, 0.001)
    weight_decay: tuple[float, ...] = (5e-3, 5e-4, 5e-5)

    def configs(self, arch: str, master_seed: int, epochs: int = DEFAULT_EPOCHS):
        if not (self.hidden and self.dropout and self.lr and self.weight_decay):
            raise ConfigError("grid must have at least one value per axis")
        out = []
        for hidden, dropout, lr, wd in product(self.hidden, self.dropout, self.lr, self.weight_decay):
            model = ModelConfig(arch=arch, hidden_dim=hidden, dropout=dropout)
            seed = derive_seed(master_seed, arch, hidden, dropout, lr, wd)
            out.append(TrainConfig(model=model, lr=lr, weight_decay=wd, epochs=epochs, seed=seed))
        return out


@dataclass
class RunResult:
    index: int
    config: TrainConfig
    status: str  # "ok" | "failed"
    best_val_f1: float = float("nan")
    best_epoch: int = -1
    n_params: int = 0
    error: str = ""
    history: TrainHistory | None = None


def _run_one(args) -> RunResult:
    index, graph, config = args
    try:
        hist = train(graph, config)
        return RunResult(
            index=index,
            config=config,
            status="ok",
            best_val_f1=hist.best_val_f1,
            best_epoch=hist.best_epoch,
            n_params=param_count(hist.best_params),
            history=hist,
        )
    except Exception as exc:  # a failed run is recorded, not fatal
        return RunResult(index=index, config=config, status="failed", error=str(exc))


@dataclass
class GridSearchResult:
    ranked: list[RunResult]
    best: RunResult


def grid_search(
    graph: Graph,
    grid: SearchGrid | None = None,
    arch: str = "dstgcn",
    master_seed: int = 0,
    epochs: int = DEFAULT_EPOCHS,
    workers: int = 1,
) -> GridSearchResult:
    """Train every grid combination and rank by best validation F1.

    All runs share the graph's stored split; per-run parameter seeds are
    derived from the master seed and the configuration, so the search is
    reproducible and order-independent under parallel execution.
    """
    grid = grid or SearchGrid()
    configs = grid.configs(arch, master_seed, epochs)
    jobs = [(i, graph, cfg) for i, cfg in enumerate(configs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    results.sort(key=lambda r: r.index)
    ok = [r for r in results if r.status == "ok"]
    failed = [r for r in results if r.status != "ok"]
    if not ok:
        raise NumericError("every grid-search run failed")
    ok.sort(key=lambda r: (-r.best_val_f1, r.n_params, r.index))
    ranked = ok + failed
    return GridSearchResult(ranked=ranked, best=ok[0])


def compare_models(
    graph_fine: Graph,
    graph_coarse: Graph,
    archs: tuple[str, ...] = ("gcn", "gat", "sage", "dstgcn"),
    master_seed: int = 0,
    epochs: int = DEFAULT_EPOCHS,
) -> list[dict]:
    """Uniform-hyperparameter comparison of each arch on both graphs."""
    rows = []
    for arch in archs:
        scores = {}
        for mode, graph in (("fine", graph_fine), ("coarse", graph_coarse)):
            config = TrainConfig(
                model=ModelConfig(arch=arch, hidden_dim=DEFAULT_HIDDEN, dropout=DEFAULT_DROPOUT),
                lr=DEFAULT_LR,
                weight_decay=DEFAULT_WEIGHT_DECAY,
                epochs=epochs,
                seed=derive_seed(master_seed, arch, mode),
            )
            scores[mode] = train(graph, config).best_val_f1
        rows.append(
            {"arch": arch, "fine_best_val_f1": scores["fine"], "coarse_best_val_f1": scores["coarse"]}
        )
    return rows


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(params: dict[str, np.ndarray], model: ModelConfig, in_dim: int, path) -> None:
    body = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": model.to_dict(),
        "in_dim": int(in_dim),
        "params": {
            name: {"shape": list(value.shape), "values": fmt_floats(value)}
            for name, value in sorted(params.items())
        },
    }
    body["checksum"] = checksum({k: v for k, v in body.items()})
    write_document(body, path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], ModelConfig, int]:
    doc = read_document(path, CHECKPOINT_FORMAT, CHECKPOINT_VERSION)
    try:
        model = ModelConfig.from_dict(doc["model"])
        params: dict[str, np.ndarray] = {}
        for name, entry in doc["params"].items():
            shape = tuple(int(s) for s in entry["shape"])
            count = int(np.prod(shape)) if shape else 0
            params[name] = parse_floats(entry["values"], count, f"param {name}").reshape(shape)
        return params, model, int(doc["in_dim"])
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise GraphFormatError(f"{path}: malformed checkpoint ({exc})")
