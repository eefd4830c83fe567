"""Load, validate, filter, and persist trial-level evaluation records.

The interchange format is JSONL, one record per line, with fields
``question_id``, ``domain``, ``condition``, ``format``, ``correct``,
``nlp``, ``answer_text`` (optional). CSV with identical header names is
also accepted. ``nlp`` is the mean token log-probability of the generated
answer (nats per token) and serves as the confidence score.

Record order is preserved from the file and is semantically significant:
quantile binning breaks ties by input order, so reordering a file can
change downstream bin assignments.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    DataError,
    DuplicateKey,
    EmptySet,
    MissingField,
    NonFiniteConfidence,
    UnknownSelectorValue,
)

REQUIRED_FIELDS = ("question_id", "domain", "condition", "format", "correct", "nlp")
ALL_FIELDS = REQUIRED_FIELDS + ("answer_text",)

_TRUE_STRINGS = {"true", "1", "yes"}
_FALSE_STRINGS = {"false", "0", "no"}


@dataclass(frozen=True)
class TrialRecord:
    """One question's outcome under one (condition, format)."""

    question_id: str
    domain: str
    condition: str
    format: str
    correct: bool
    nlp: float
    answer_text: str | None = None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.question_id, self.condition, self.format)

    def to_dict(self) -> dict:
        d = {
            "question_id": self.question_id,
            "domain": self.domain,
            "condition": self.condition,
            "format": self.format,
            "correct": self.correct,
            "nlp": self.nlp,
        }
        if self.answer_text is not None:
            d["answer_text"] = self.answer_text
        return d


@dataclass(frozen=True)
class Provenance:
    source: str
    loaded_at: str


class TrialSet:
    """An ordered, immutable collection of trial records.

    Safe to share across concurrent readers; all mutating-looking
    operations return new sets.
    """

    def __init__(self, records: Iterable[TrialRecord], provenance: Provenance | None = None):
        self.records: tuple[TrialRecord, ...] = tuple(records)
        self.provenance = provenance
        self._nlp: np.ndarray | None = None
        self._correct: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TrialRecord]:
        return iter(self.records)

    def __getitem__(self, i) -> TrialRecord:
        return self.records[i]

    @property
    def nlp_values(self) -> np.ndarray:
        if self._nlp is None:
            self._nlp = np.array([r.nlp for r in self.records], dtype=float)
        return self._nlp

    @property
    def correct_mask(self) -> np.ndarray:
        if self._correct is None:
            self._correct = np.array([r.correct for r in self.records], dtype=bool)
        return self._correct

    def domains(self) -> list[str]:
        return sorted({r.domain for r in self.records})

    def conditions(self) -> list[str]:
        return sorted({r.condition for r in self.records})

    def formats(self) -> list[str]:
        return sorted({r.format for r in self.records})

    def question_ids(self) -> list[str]:
        """Unique question ids in first-appearance order."""
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.question_id, None)
        return list(seen)

    def domain_counts(self) -> dict[str, int]:
        counts = Counter(r.domain for r in self.records)
        return dict(sorted(counts.items()))

    def filter(self, domain: str | None = None, condition: str | None = None,
               format: str | None = None) -> "TrialSet":
        return filter_trials(self, domain=domain, condition=condition, format=format)


def _coerce_bool(value, line: int, path: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        v = value.strip().lower()
        if v in _TRUE_STRINGS:
            return True
        if v in _FALSE_STRINGS:
            return False
    raise DataError(f"{path}:{line}: cannot interpret correct={value!r} as a boolean")


def _coerce_nlp(value, line: int, path: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise NonFiniteConfidence(line, path) from None
    if not math.isfinite(x):
        raise NonFiniteConfidence(line, path)
    return x


def _record_from_mapping(row: dict, line: int, path: str) -> TrialRecord:
    for name in REQUIRED_FIELDS:
        if name not in row or row[name] is None or row[name] == "":
            raise MissingField(name, line, path)
    answer = row.get("answer_text")
    if answer == "":
        answer = None
    return TrialRecord(
        question_id=str(row["question_id"]),
        domain=str(row["domain"]),
        condition=str(row["condition"]),
        format=str(row["format"]),
        correct=_coerce_bool(row["correct"], line, path),
        nlp=_coerce_nlp(row["nlp"], line, path),
        answer_text=None if answer is None else str(answer),
    )


def load_trials(path: str | Path, format_hint: str | None = None) -> TrialSet:
    """Read a JSONL or CSV trial file into a validated TrialSet.

    ``format_hint`` is ``"jsonl"`` or ``"csv"``; when omitted it is taken
    from the file suffix (``.csv`` means CSV, anything else JSONL).
    Raises MissingField, DuplicateKey, or NonFiniteConfidence with the
    offending line number; raises EmptySet for a file with no records.
    """
    path = Path(path)
    fmt = format_hint or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    if fmt not in ("jsonl", "csv"):
        raise DataError(f"unknown trial file format {fmt!r}")

    records: list[TrialRecord] = []
    seen: dict[tuple[str, str, str], int] = {}
    sname = str(path)

    if fmt == "jsonl":
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{sname}:{line_no}: invalid JSON ({exc.msg})") from None
                if not isinstance(row, dict):
                    raise DataError(f"{sname}:{line_no}: expected a JSON object")
                rec = _record_from_mapping(row, line_no, sname)
                _check_duplicate(rec, seen, line_no, sname)
                records.append(rec)
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise EmptySet(f"{sname}: no header row")
            for line_no, row in enumerate(reader, start=2):
                rec = _record_from_mapping(row, line_no, sname)
                _check_duplicate(rec, seen, line_no, sname)
                records.append(rec)

    if not records:
        raise EmptySet(f"{sname}: no trial records")

    prov = Provenance(source=sname, loaded_at=datetime.now(timezone.utc).isoformat())
    return TrialSet(records, provenance=prov)


def _check_duplicate(rec: TrialRecord, seen: dict, line_no: int, path: str) -> None:
    if rec.key in seen:
        raise DuplicateKey(rec.key, line_no, path)
    seen[rec.key] = line_no


def save_trials(trials: TrialSet, path: str | Path) -> None:
    """Write a TrialSet as canonical JSONL (load → save → load is identity)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trials:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def filter_trials(trials: TrialSet, domain: str | None = None,
                  condition: str | None = None, format: str | None = None) -> TrialSet:
    """Order-preserving conjunctive subset; absent selectors match all.

    A selector value that occurs nowhere in the set triggers an
    UnknownSelectorValue warning; the (legal) empty result is returned.
    """
    for name, value, known in (
        ("domain", domain, lambda r: r.domain),
        ("condition", condition, lambda r: r.condition),
        ("format", format, lambda r: r.format),
    ):
        if value is not None and all(known(r) != value for r in trials.records):
            warnings.warn(f"{name}={value!r} matches no records", UnknownSelectorValue,
                          stacklevel=2)

    selected = [
        r for r in trials.records
        if (domain is None or r.domain == domain)
        and (condition is None or r.condition == condition)
        and (format is None or r.format == format)
    ]
    return TrialSet(selected, provenance=trials.provenance)


@dataclass(frozen=True)
class PairingReport:
    """Outcome of a question-id pairing check between two trial sets."""

    paired: bool
    n_shared: int
    missing: tuple[str, ...] = ()   # ids present in a but not in b (per domain)
    extra: tuple[str, ...] = ()     # ids present in b but not in a (per domain)


def validate_paired(a: TrialSet, b: TrialSet) -> PairingReport:
    """Check that a and b hold the identical multiset of question ids per domain.

    A failed pairing is a reported outcome, not an error; the verdict is
    symmetric (swapping a and b swaps missing/extra but not ``paired``).
    """
    ca = Counter((r.domain, r.question_id) for r in a.records)
    cb = Counter((r.domain, r.question_id) for r in b.records)
    only_a = ca - cb
    only_b = cb - ca
    shared = ca & cb
    missing = tuple(sorted({qid for (_, qid) in only_a.elements()}))
    extra = tuple(sorted({qid for (_, qid) in only_b.elements()}))
    return PairingReport(
        paired=not only_a and not only_b,
        n_shared=sum(shared.values()),
        missing=missing,
        extra=extra,
    )
