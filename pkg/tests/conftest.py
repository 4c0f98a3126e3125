import numpy as np
import pytest

from crashgraph.graphs import Graph, with_masks
from crashgraph.records import CrashRecord


def make_record(i, lat=30.0, lon=-97.0, ts=1704067200, sae=0, severity=0, narrative=""):
    return CrashRecord(
        id=f"r{i}",
        latitude=lat,
        longitude=lon,
        timestamp=int(ts),
        sae_level=sae,
        severity=severity,
        narrative=narrative,
    )


def random_undirected_edges(n, p_edge, rng):
    """Random symmetric self-loop-free edge list, (src, dst)-sorted."""
    upper = rng.random((n, n)) < p_edge
    src_list, dst_list = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if upper[i, j]:
                src_list += [i, j]
                dst_list += [j, i]
    if not src_list:
        return np.zeros((2, 0), dtype=np.int64)
    edges = np.stack([np.array(src_list), np.array(dst_list)]).astype(np.int64)
    order = np.lexsort((edges[1], edges[0]))
    return edges[:, order]


def random_graph(n=12, f=7, p_edge=0.35, seed=0, with_splits=True) -> Graph:
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, f))
    edges = random_undirected_edges(n, p_edge, rng)
    labels = rng.integers(0, 2, size=n).astype(np.int64)
    g = Graph(
        features=features,
        edge_index=edges,
        labels=labels,
        train_mask=np.zeros(n, dtype=bool),
        val_mask=np.zeros(n, dtype=bool),
        test_mask=np.zeros(n, dtype=bool),
        meta={"mode": "synthetic-test"},
    )
    if with_splits and n >= 3:
        g = with_masks(g, (0.7, 0.2, 0.1), seed=seed)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
