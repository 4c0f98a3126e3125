"""Crash record parsing, validation, severity binarization, and balancing.

Ingest format: UTF-8 CSV with the exact header
``id,latitude,longitude,crash_date,crash_time,sae_level,severity,narrative``.
Dates are ISO (YYYY-MM-DD), times 24-hour (HH:MM), both interpreted as UTC
and merged into one epoch-seconds timestamp. Bad rows are skipped and
reported by ordinal; only structural problems (bad header) abort parsing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import BalanceError, DataError, DomainError, SchemaError

CSV_HEADER = [
    "id",
    "latitude",
    "longitude",
    "crash_date",
    "crash_time",
    "sae_level",
    "severity",
    "narrative",
]

# KABC injury-scale strings plus the no-injury category, lowercased.
INJURY_SEVERITIES = frozenset(
    {"killed", "incapacitating injury", "non-incapacitating injury", "possible injury"}
)
NO_INJURY_SEVERITY = "not injured"

# Extra spellings accepted in the CSV severity column (already-binarized
# exports are common); binarize_severity itself stays strict.
_SEVERITY_ALIASES = {"injury": 1, "not injured": 0, "0": 0, "1": 1}


@dataclass(frozen=True)
class CrashRecord:
    id: str
    latitude: float
    longitude: float
    timestamp: int  # epoch seconds, UTC
    sae_level: int
    severity: int
    narrative: str

    def __post_init__(self):
        if not self.id:
            raise DomainError("record id must be a non-empty string")
        if not (-90.0 <= self.latitude <= 90.0):
            raise DomainError(f"latitude {self.latitude} outside [-90, 90]")
        if not (-180.0 <= self.longitude <= 180.0):
            raise DomainError(f"longitude {self.longitude} outside [-180, 180]")
        if self.sae_level not in (0, 1, 2, 3, 4, 5):
            raise DomainError(f"sae_level {self.sae_level} outside 0..5")
        if self.severity not in (0, 1):
            raise DomainError(f"severity {self.severity} not in {{0, 1}}")

    def datetime_utc(self) -> datetime:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc)


@dataclass
class ParseReport:
    """Per-file ingest summary; ``rejected`` holds (row ordinal, reason)."""

    total_rows: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def accepted(self) -> int:
        return self.total_rows - len(self.rejected)


def binarize_severity(raw: str) -> int:
    """Map one of the five canonical severity strings onto {0, 1}."""
    key = raw.strip().lower()
    if key == NO_INJURY_SEVERITY:
        return 0
    if key in INJURY_SEVERITIES:
        return 1
    raise DataError(f"unknown severity value {raw!r}")


def _parse_severity_field(raw: str) -> int:
    try:
        return binarize_severity(raw)
    except DataError:
        key = raw.strip().lower()
        if key in _SEVERITY_ALIASES:
            return _SEVERITY_ALIASES[key]
        raise


def _parse_timestamp(date_text: str, time_text: str) -> int:
    dt = datetime.strptime(f"{date_text.strip()} {time_text.strip()}", "%Y-%m-%d %H:%M")
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


def parse_records(path) -> tuple[list[CrashRecord], ParseReport]:
    """Parse the ingest CSV; returns (valid records in file order, report)."""
    report = ParseReport()
    records: list[CrashRecord] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(CSV_HEADER)}")
        if header != CSV_HEADER:
            raise SchemaError(
                f"{path}: bad header {','.join(header)!r}; expected {','.join(CSV_HEADER)!r}"
            )
        for ordinal, row in enumerate(reader, start=1):
            report.total_rows += 1
            if len(row) != len(CSV_HEADER):
                report.rejected.append((ordinal, f"expected {len(CSV_HEADER)} fields, got {len(row)}"))
                continue
            rid, lat_s, lon_s, date_s, time_s, sae_s, sev_s, narrative = row
            try:
                if rid in seen_ids:
                    raise DataError(f"duplicate id {rid!r}")
                record = CrashRecord(
                    id=rid,
                    latitude=float(lat_s),
                    longitude=float(lon_s),
                    timestamp=_parse_timestamp(date_s, time_s),
                    sae_level=int(sae_s),
                    severity=_parse_severity_field(sev_s),
                    narrative=narrative,
                )
            except (DataError, ValueError) as exc:
                report.rejected.append((ordinal, str(exc)))
                continue
            seen_ids.add(rid)
            records.append(record)
    return records, report


def write_records(records: list[CrashRecord], path) -> None:
    """Serialize records back into the ingest CSV format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            dt = rec.datetime_utc()
            writer.writerow(
                [
                    rec.id,
                    repr(rec.latitude),
                    repr(rec.longitude),
                    dt.strftime("%Y-%m-%d"),
                    dt.strftime("%H:%M"),
                    str(rec.sae_level),
                    "Injury" if rec.severity == 1 else "Not Injured",
                    rec.narrative,
                ]
            )


def balance_undersample(records: list[CrashRecord], seed: int) -> list[CrashRecord]:
    """Undersample the majority class to the minority count, keeping order.

    The retained majority subset is drawn uniformly without replacement from
    a seeded generator; output preserves the original relative order so that
    downstream graph construction is deterministic.
    """
    class0 = [i for i, r in enumerate(records) if r.severity == 0]
    class1 = [i for i, r in enumerate(records) if r.severity == 1]
    if not class0 or not class1:
        raise BalanceError("both severity classes must be present to balance")
    if len(class0) == len(class1):
        return list(records)
    minority, majority = (class0, class1) if len(class0) < len(class1) else (class1, class0)
    rng = np.random.default_rng(seed)
    kept = rng.choice(np.asarray(majority, dtype=np.int64), size=len(minority), replace=False)
    retained = sorted(set(minority) | set(int(i) for i in kept))
    return [records[i] for i in retained]
