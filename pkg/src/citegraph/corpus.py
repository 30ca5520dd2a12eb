"""Case corpus loading, validation, filtering, and persistence."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

KNOWN_KEYS = ("id", "case_name", "justice", "year", "category", "url", "scdb_id", "description")


class CorpusError(Exception):
    """Invalid corpus file or record."""


@dataclass(frozen=True)
class CaseRecord:
    id: str
    case_name: str = ""
    justice: str = ""
    year: int = 0
    category: str = ""
    source_url: str = ""
    scdb_id: str = ""
    description: str = ""
    extra: dict = field(default_factory=dict)

    def token_count(self) -> int:
        return len(self.description.split())


@dataclass(frozen=True)
class Corpus:
    records: tuple[CaseRecord, ...]
    provenance: tuple[dict, ...]

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]


def _validate_record(row: dict, row_num: int) -> CaseRecord:
    rid = str(row.get("id", "") or "").strip()
    if not rid:
        raise CorpusError(f"row {row_num}: field 'id' is missing or empty")
    description = str(row.get("description", "") or "")
    if not description.strip():
        raise CorpusError(f"row {row_num}: field 'description' is empty")
    try:
        year = int(row.get("year", 0))
    except (TypeError, ValueError):
        raise CorpusError(f"row {row_num}: field 'year' is not an integer: {row.get('year')!r}")
    if year <= 0:
        raise CorpusError(f"row {row_num}: field 'year' must be a positive integer, got {year}")
    extra = {k: v for k, v in row.items() if k not in KNOWN_KEYS}
    return CaseRecord(
        id=rid,
        case_name=str(row.get("case_name", "") or ""),
        justice=str(row.get("justice", "") or ""),
        year=year,
        category=str(row.get("category", "") or ""),
        source_url=str(row.get("url", "") or ""),
        scdb_id=str(row.get("scdb_id", "") or ""),
        description=description,
        extra=extra,
    )


def _build(rows: Iterable[tuple[int, dict]], source: str) -> Corpus:
    records = []
    seen: set[str] = set()
    for row_num, row in rows:
        rec = _validate_record(row, row_num)
        if rec.id in seen:
            raise CorpusError(f"row {row_num}: duplicate id {rec.id!r}")
        seen.add(rec.id)
        records.append(rec)
    prov = ({"op": "load", "source": source, "count": len(records)},)
    return Corpus(records=tuple(records), provenance=prov)


def load_corpus(path: str | Path, format: Optional[str] = None) -> Corpus:
    """Load a corpus from JSONL or CSV. Format inferred from suffix when omitted."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format == "jsonl":
        def rows():
            with path.open(encoding="utf-8") as fh:
                for i, line in enumerate(fh):
                    if not line.strip():
                        continue
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as e:
                        raise CorpusError(f"row {i}: malformed JSON: {e}")
                    if not isinstance(obj, dict):
                        raise CorpusError(f"row {i}: expected a JSON object")
                    yield i, obj
        return _build(rows(), str(path))
    elif format == "csv":
        def rows():
            with path.open(encoding="utf-8", newline="") as fh:
                for i, row in enumerate(csv.DictReader(fh)):
                    yield i, row
        return _build(rows(), str(path))
    raise CorpusError(f"unknown corpus format: {format!r}")


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write JSONL, one record per line, preserving order and unknown keys."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in corpus.records:
            obj = {
                "id": r.id,
                "case_name": r.case_name,
                "justice": r.justice,
                "year": r.year,
                "category": r.category,
                "url": r.source_url,
                "scdb_id": r.scdb_id,
                "description": r.description,
            }
            obj.update(r.extra)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def filter_by_min_year(corpus: Corpus, min_year: int) -> Corpus:
    """Keep records with year >= min_year."""
    kept = tuple(r for r in corpus.records if r.year >= min_year)
    entry = {"op": "filter_by_min_year", "min_year": min_year, "removed": len(corpus.records) - len(kept)}
    return Corpus(records=kept, provenance=corpus.provenance + (entry,))


def drop_short_descriptions(corpus: Corpus, min_tokens: int = 50) -> Corpus:
    """Drop records with fewer than min_tokens whitespace tokens (keep at exactly min_tokens)."""
    if min_tokens < 1:
        raise ValueError(f"min_tokens must be >= 1, got {min_tokens}")
    kept = tuple(r for r in corpus.records if r.token_count() >= min_tokens)
    entry = {"op": "drop_short_descriptions", "min_tokens": min_tokens, "removed": len(corpus.records) - len(kept)}
    return Corpus(records=kept, provenance=corpus.provenance + (entry,))


def corpus_stats(corpus: Corpus) -> dict:
    """Record count, per-year and per-justice counts, token-length distribution."""
    lengths = [r.token_count() for r in corpus.records]
    per_year = Counter(r.year for r in corpus.records)
    per_justice = Counter(r.justice for r in corpus.records if r.justice)
    return {
        "record_count": len(corpus.records),
        "per_year": dict(sorted(per_year.items())),
        "per_justice": dict(sorted(per_justice.items())),
        "token_length": {
            "min": min(lengths) if lengths else 0,
            "max": max(lengths) if lengths else 0,
            "mean": (sum(lengths) / len(lengths)) if lengths else 0.0,
            "total": sum(lengths),
        },
    }
