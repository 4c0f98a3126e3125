"""Fine- and coarse-grained graph construction, masks, and serialization.

Fine mode: one node per crash record (input order); an undirected connection
(stored as two directed edges) joins records within both thresholds
(haversine <= dist_km and |dt| <= window_h, inclusive). Coarse mode: one node
per occupied hexagonal cell (ordered by cell-id string), 423-dim aggregate
features, majority labels, one-ring adjacency.

Graph files are JSON containers with numeric payloads flattened into
space-separated text (floats at 17 significant digits, so round-trips are
bit-exact) and a sha256 checksum over the canonical body.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, EmbeddingError, GraphFormatError
from .features import EMBED_DIM, FINE_FEATURE_DIM, fine_node_features
from .geo import CellId, GeoPoint, PlanarHexIndex
from .records import CrashRecord
from .serialize import checksum, fmt_floats, fmt_ints, parse_floats, parse_ints, read_document, write_document

GRAPH_FORMAT = "crashgraph-graph"
GRAPH_VERSION = 1

SAE_BINS = 6
HOUR_BINS = 24
WEEKDAY_BINS = 7
COARSE_FEATURE_DIM = SAE_BINS + 2 + HOUR_BINS + WEEKDAY_BINS + EMBED_DIM  # 423

FEATURE_DIMS = {"fine": FINE_FEATURE_DIM, "coarse": COARSE_FEATURE_DIM}


@dataclass
class Graph:
    features: np.ndarray  # N x F float64
    edge_index: np.ndarray  # 2 x E int64, directed, reverse-closed, (src, dst)-sorted
    labels: np.ndarray  # N int64 in {0, 1}
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_edges(self) -> int:
        return int(self.edge_index.shape[1])

    @property
    def mode(self) -> str:
        return self.meta.get("mode", "unknown")

    def has_masks(self) -> bool:
        return bool(self.train_mask.any() or self.val_mask.any() or self.test_mask.any())

    def validate(self) -> None:
        n = self.num_nodes
        mode = self.mode
        if mode in FEATURE_DIMS and self.feature_dim != FEATURE_DIMS[mode]:
            raise GraphFormatError(
                f"{mode} graph must have F={FEATURE_DIMS[mode]}, got {self.feature_dim}"
            )
        if self.edge_index.size:
            src, dst = self.edge_index
            if src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n:
                raise GraphFormatError(f"edge endpoint outside [0, {n})")
            if np.any(src == dst):
                raise GraphFormatError("self-loop in edge list")
            fwd = set(zip(src.tolist(), dst.tolist()))
            if any((d, s) not in fwd for s, d in fwd):
                raise GraphFormatError("edge set not closed under reversal")
        if not np.isin(self.labels, (0, 1)).all():
            raise GraphFormatError("labels must be binary")
        masks = np.stack([self.train_mask, self.val_mask, self.test_mask])
        if masks.shape != (3, n):
            raise GraphFormatError("mask length mismatch")
        per_node = masks.sum(axis=0)
        if per_node.max(initial=0) > 1:
            raise GraphFormatError("masks overlap")
        if self.has_masks() and per_node.min(initial=1) < 1:
            raise GraphFormatError("built splits must cover every node")


def _canonical_edges(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Both directions of each pair, deduplicated and sorted by (src, dst)."""
    if src.size == 0:
        return np.zeros((2, 0), dtype=np.int64)
    all_src = np.concatenate([src, dst])
    all_dst = np.concatenate([dst, src])
    n = int(max(all_src.max(), all_dst.max())) + 1
    keys = np.unique(all_src * np.int64(n) + all_dst)
    return np.stack([keys // n, keys % n]).astype(np.int64)


def _empty_masks(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.zeros(n, dtype=bool),
        np.zeros(n, dtype=bool),
        np.zeros(n, dtype=bool),
    )


def build_fine(
    records: list[CrashRecord],
    provider,
    dist_km: float = 30.0,
    window_h: float = 24.0,
) -> Graph:
    """Fine-grained graph: nodes in input order, spatio-temporal proximity edges."""
    if not records:
        raise DataError("build_fine: no records")
    features = np.empty((len(records), FINE_FEATURE_DIM), dtype=np.float64)
    for i, rec in enumerate(records):
        emb = provider.embed(rec)
        if emb.shape != (EMBED_DIM,):
            raise EmbeddingError(f"record {rec.id!r}: embedding dim {emb.shape} != {EMBED_DIM}")
        features[i] = fine_node_features(rec, emb)
    lat = np.array([r.latitude for r in records], dtype=np.float64)
    lon = np.array([r.longitude for r in records], dtype=np.float64)
    t = np.array([r.timestamp for r in records], dtype=np.int64)
    u, v = kernels.st_edge_pairs(lat, lon, t, dist_km, window_h)
    edges = _canonical_edges(u, v)
    labels = np.array([r.severity for r in records], dtype=np.int64)
    train, val, test = _empty_masks(len(records))
    meta = {
        "mode": "fine",
        "dist_km": float(dist_km),
        "window_h": float(window_h),
        "layout": "fine-v1",
        "provider": provider.name,
    }
    return Graph(features, edges, labels, train, val, test, meta)


@dataclass
class CellAggregate:
    """Per-cell histograms, severity counts, and mean narrative embedding."""

    sae_hist: np.ndarray  # 6 counts
    severity_counts: np.ndarray  # [not injured, injury]
    hour_hist: np.ndarray  # 24 counts
    weekday_hist: np.ndarray  # 7 counts
    mean_embedding: np.ndarray  # 384 floats
    label: int

    def feature_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.sae_hist,
                self.severity_counts,
                self.hour_hist,
                self.weekday_hist,
                self.mean_embedding,
            ]
        ).astype(np.float64)


def aggregate_cell(records: list[CrashRecord], embeddings: list[np.ndarray]) -> CellAggregate:
    sae = np.zeros(SAE_BINS, dtype=np.float64)
    sev = np.zeros(2, dtype=np.float64)
    hour = np.zeros(HOUR_BINS, dtype=np.float64)
    weekday = np.zeros(WEEKDAY_BINS, dtype=np.float64)
    emb_sum = np.zeros(EMBED_DIM, dtype=np.float64)
    for rec, emb in zip(records, embeddings):
        dt = rec.datetime_utc()
        sae[rec.sae_level] += 1
        sev[rec.severity] += 1
        hour[dt.hour] += 1
        weekday[dt.weekday()] += 1
        emb_sum += emb
    mean_emb = emb_sum / len(records)
    label = 1 if sev[1] > sev[0] else 0
    return CellAggregate(sae, sev, hour, weekday, mean_emb, label)


def build_coarse(
    records: list[CrashRecord],
    provider,
    resolution: int = 7,
    index: PlanarHexIndex | None = None,
) -> Graph:
    """Coarse-grained graph over occupied hexagonal cells.

    The spatial index defaults to a planar tiling centered on the dataset
    centroid. Node order is ascending cell-id string; labels follow the
    strict majority rule (ties -> 0, counted in meta).
    """
    if not records:
        raise DataError("build_coarse: no records")
    if index is None:
        center = GeoPoint(
            float(np.mean([r.latitude for r in records])),
            float(np.mean([r.longitude for r in records])),
        )
        index = PlanarHexIndex(center, resolution)
    by_cell: dict[CellId, list[int]] = {}
    for i, rec in enumerate(records):
        cell = index.cell_of(GeoPoint(rec.latitude, rec.longitude))
        by_cell.setdefault(cell, []).append(i)

    cells = sorted(by_cell, key=str)
    cell_pos = {c: i for i, c in enumerate(cells)}
    features = np.empty((len(cells), COARSE_FEATURE_DIM), dtype=np.float64)
    labels = np.empty(len(cells), dtype=np.int64)
    ties = 0
    for pos, cell in enumerate(cells):
        members = [records[i] for i in by_cell[cell]]
        embs = [provider.embed(r) for r in members]
        agg = aggregate_cell(members, embs)
        features[pos] = agg.feature_vector()
        labels[pos] = agg.label
        if agg.severity_counts[0] == agg.severity_counts[1]:
            ties += 1

    src_list: list[int] = []
    dst_list: list[int] = []
    for cell in cells:
        for nb in index.neighbors(cell):
            if nb in cell_pos:
                src_list.append(cell_pos[cell])
                dst_list.append(cell_pos[nb])
    edges = _canonical_edges(
        np.asarray(src_list, dtype=np.int64), np.asarray(dst_list, dtype=np.int64)
    )
    train, val, test = _empty_masks(len(cells))
    meta = {
        "mode": "coarse",
        "resolution": int(resolution),
        "center_lat": index.center.latitude,
        "center_lon": index.center.longitude,
        "layout": "coarse-v1",
        "provider": provider.name,
        "label_ties": ties,
        "cells": [str(c) for c in cells],
    }
    return Graph(features, edges, labels, train, val, test, meta)


def _cut_points(count: int, ratios) -> tuple[int, int]:
    b1 = int(np.floor(count * ratios[0] + 1e-9))
    b2 = int(np.floor(count * (ratios[0] + ratios[1]) + 1e-9))
    return b1, b2


def split_masks(
    n: int,
    ratios: tuple[float, float, float] = (0.70, 0.20, 0.10),
    seed: int = 0,
    labels: np.ndarray | None = None,
    stratified: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded permutation split with cumulative floor rounding.

    The default is a plain uniform split; ``stratified=True`` applies the
    same rounding within each label class (extension, off by default).
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    if n < 3:
        raise DataError(f"need at least 3 nodes to split, got {n}")
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    rng = np.random.default_rng(seed)
    if stratified:
        if labels is None:
            raise ConfigError("stratified split requires labels")
        labels = np.asarray(labels)
        if labels.shape[0] != n:
            raise ConfigError(f"labels length {labels.shape[0]} != {n}")
        groups = [np.nonzero(labels == cls)[0] for cls in np.unique(labels)]
    else:
        groups = [np.arange(n)]
    for idx in groups:
        perm = idx[rng.permutation(idx.shape[0])]
        b1, b2 = _cut_points(idx.shape[0], ratios)
        train[perm[:b1]] = True
        val[perm[b1:b2]] = True
        test[perm[b2:]] = True
    return train, val, test


def with_masks(
    graph: Graph, ratios=(0.70, 0.20, 0.10), seed: int = 0, stratified: bool = False
) -> Graph:
    """Copy of ``graph`` with masks assigned and recorded in meta."""
    train, val, test = split_masks(
        graph.num_nodes, tuple(ratios), seed, labels=graph.labels, stratified=stratified
    )
    meta = dict(graph.meta)
    meta["mask_seed"] = int(seed)
    meta["mask_ratios"] = [float(r) for r in ratios]
    meta["mask_stratified"] = bool(stratified)
    return Graph(graph.features, graph.edge_index, graph.labels, train, val, test, meta)


# -- serialization ----------------------------------------------------------


def graph_to_document(g: Graph) -> dict:
    body = {
        "format": GRAPH_FORMAT,
        "version": GRAPH_VERSION,
        "mode": g.mode,
        "meta": g.meta,
        "num_nodes": g.num_nodes,
        "feature_dim": g.feature_dim,
        "features": fmt_floats(g.features),
        "edges": fmt_ints(g.edge_index.T),  # src dst src dst ...
        "labels": fmt_ints(g.labels),
        "masks": {
            "train": fmt_ints(g.train_mask.astype(np.int64)),
            "val": fmt_ints(g.val_mask.astype(np.int64)),
            "test": fmt_ints(g.test_mask.astype(np.int64)),
        },
    }
    body["checksum"] = checksum({k: v for k, v in body.items()})
    return body


def save_graph(g: Graph, path) -> None:
    g.validate()
    write_document(graph_to_document(g), path)


def load_graph(path) -> Graph:
    doc = read_document(path, GRAPH_FORMAT, GRAPH_VERSION)
    try:
        n = int(doc["num_nodes"])
        f = int(doc["feature_dim"])
        features = parse_floats(doc["features"], n * f, "features").reshape(n, f)
        flat_edges = parse_ints(doc["edges"])
        if flat_edges.size % 2:
            raise GraphFormatError(f"{path}: odd edge value count")
        edges = (
            flat_edges.reshape(-1, 2).T.copy() if flat_edges.size else np.zeros((2, 0), dtype=np.int64)
        )
        labels = parse_ints(doc["labels"])
        if labels.shape[0] != n:
            raise GraphFormatError(f"{path}: label count {labels.shape[0]} != {n}")
        masks = doc["masks"]
        parsed_masks = []
        for key in ("train", "val", "test"):
            m = parse_ints(masks[key])
            if m.shape[0] != n:
                raise GraphFormatError(f"{path}: {key} mask length {m.shape[0]} != {n}")
            parsed_masks.append(m.astype(bool))
        g = Graph(features, edges, labels, *parsed_masks, meta=doc["meta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"{path}: malformed graph document ({exc})")
    g.validate()
    return g


def graphs_equal(a: Graph, b: Graph) -> bool:
    return (
        np.array_equal(a.features, b.features)
        and np.array_equal(a.edge_index, b.edge_index)
        and np.array_equal(a.labels, b.labels)
        and np.array_equal(a.train_mask, b.train_mask)
        and np.array_equal(a.val_mask, b.val_mask)
        and np.array_equal(a.test_mask, b.test_mask)
        and a.meta == b.meta
    )
