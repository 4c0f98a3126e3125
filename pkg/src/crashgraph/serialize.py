"""Canonical text serialization shared by graph and checkpoint files.

Floats are written with 17 significant digits so parsing returns the exact
same IEEE double; numeric payloads are flattened into space-separated strings
and documents carry a sha256 checksum over their canonical JSON body.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import GraphFormatError


def fmt_floats(arr: np.ndarray) -> str:
    return " ".join(f"{x:.17g}" for x in np.asarray(arr, dtype=np.float64).ravel())


def fmt_ints(arr: np.ndarray) -> str:
    return " ".join(str(int(x)) for x in np.asarray(arr).ravel())


def parse_floats(text: str, count: int, what: str) -> np.ndarray:
    parts = text.split()
    if len(parts) != count:
        raise GraphFormatError(f"{what}: expected {count} values, got {len(parts)}")
    return np.array(parts, dtype=np.float64) if parts else np.empty(0, dtype=np.float64)


def parse_ints(text: str) -> np.ndarray:
    if not text:
        return np.empty(0, dtype=np.int64)
    return np.array(text.split(), dtype=np.int64)


def checksum(body: dict) -> str:
    payload = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_document(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_document(path, expected_format: str, expected_version: int) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"{path}: not a valid {expected_format} file ({exc})")
    if doc.get("format") != expected_format:
        raise GraphFormatError(f"{path}: unrecognized format {doc.get('format')!r}")
    if doc.get("version") != expected_version:
        raise GraphFormatError(f"{path}: unsupported version {doc.get('version')!r}")
    stated = doc.get("checksum")
    actual = checksum({k: v for k, v in doc.items() if k != "checksum"})
    if stated != actual:
        raise GraphFormatError(f"{path}: checksum mismatch")
    return doc
