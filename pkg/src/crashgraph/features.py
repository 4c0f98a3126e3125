"""Per-record numeric features: cyclical time encodings and narrative embeddings.

Two embedding providers implement the same 384-dim contract: a deterministic
signed feature-hash provider (no model runtime, reproducible across platforms)
and a file-backed provider for externally computed sentence embeddings. Hash
embeddings are L2-normalized; file embeddings are used verbatim.
"""

from __future__ import annotations

import csv
import math
import re

import numpy as np

from .errors import DomainError, EmbeddingError
from .records import CrashRecord

EMBED_DIM = 384
FINE_FEATURE_DIM = 5 + EMBED_DIM  # sae, hour sin/cos, weekday sin/cos, embedding

# 64-bit FNV-1a with a fixed seed constant folded into the offset basis.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_EMBED_SEED = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def encode_hour(h: int) -> tuple[float, float]:
    """(sin, cos) of the hour of day mapped onto the unit circle."""
    if not isinstance(h, (int, np.integer)) or not (0 <= h <= 23):
        raise DomainError(f"hour {h!r} outside 0..23")
    angle = 2.0 * math.pi * h / 24.0
    return math.sin(angle), math.cos(angle)


def encode_weekday(d: int) -> tuple[float, float]:
    """(sin, cos) of the weekday (0 = Monday .. 6 = Sunday)."""
    if not isinstance(d, (int, np.integer)) or not (0 <= d <= 6):
        raise DomainError(f"weekday {d!r} outside 0..6")
    angle = 2.0 * math.pi * d / 7.0
    return math.sin(angle), math.cos(angle)


def _hash64(token: str) -> int:
    h = _FNV_OFFSET ^ _EMBED_SEED
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric tokenization (the only tokenizer used here)."""
    return _TOKEN_RE.findall(text.lower())


def embed_hash(narrative: str) -> np.ndarray:
    """Signed token-hash embedding: bin = hash mod 384, sign from the next bit.

    Signed token counts are accumulated and L2-normalized; the all-zero vector
    (no tokens) is returned unnormalized.
    """
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    for token in tokenize(narrative):
        h = _hash64(token)
        bin_idx = h % EMBED_DIM
        sign = 1.0 if (h // EMBED_DIM) % 2 == 0 else -1.0
        vec[bin_idx] += sign
    norm = math.sqrt(float(np.dot(vec, vec)))
    if norm > 0.0:
        vec /= norm
    return vec


def load_embeddings(path) -> dict[str, np.ndarray]:
    """Load a ``id,e0,...,e383`` CSV into an id -> 384-dim vector map."""
    expected_header = ["id"] + [f"e{i}" for i in range(EMBED_DIM)]
    table: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmbeddingError(f"{path}: empty embedding file")
        if header != expected_header:
            raise EmbeddingError(f"{path}: bad embedding header (expected id,e0,...,e383)")
        for ordinal, row in enumerate(reader, start=1):
            if len(row) != EMBED_DIM + 1:
                raise EmbeddingError(
                    f"{path}: row {ordinal} has {len(row) - 1} values, expected {EMBED_DIM}"
                )
            rid = row[0]
            if rid in table:
                raise EmbeddingError(f"{path}: duplicate id {rid!r} at row {ordinal}")
            try:
                values = np.array(row[1:], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingError(f"{path}: row {ordinal}: {exc}")
            if not np.all(np.isfinite(values)):
                raise EmbeddingError(f"{path}: row {ordinal} contains non-finite values")
            table[rid] = values
    return table


class HashEmbeddingProvider:
    """Deterministic hash-embedding provider (the default, no external file)."""

    name = "hash-v1"

    def embed(self, record: CrashRecord) -> np.ndarray:
        return embed_hash(record.narrative)


class FileEmbeddingProvider:
    """Serves externally computed embeddings loaded from a CSV file."""

    name = "file-v1"

    def __init__(self, path):
        self._table = load_embeddings(path)

    def embed(self, record: CrashRecord) -> np.ndarray:
        try:
            return self._table[record.id]
        except KeyError:
            raise EmbeddingError(f"no embedding for record id {record.id!r}")


def fine_node_features(record: CrashRecord, embedding: np.ndarray) -> np.ndarray:
    """Fixed-layout 389-dim vector: [sae, hour sin/cos, weekday sin/cos, emb]."""
    emb = np.asarray(embedding, dtype=np.float64)
    if emb.shape != (EMBED_DIM,):
        raise EmbeddingError(f"embedding shape {emb.shape} != ({EMBED_DIM},)")
    dt = record.datetime_utc()
    hour_sin, hour_cos = encode_hour(dt.hour)
    wd_sin, wd_cos = encode_weekday(dt.weekday())
    out = np.empty(FINE_FEATURE_DIM, dtype=np.float64)
    out[0] = float(record.sae_level)
    out[1] = hour_sin
    out[2] = hour_cos
    out[3] = wd_sin
    out[4] = wd_cos
    out[5:] = emb
    return out
