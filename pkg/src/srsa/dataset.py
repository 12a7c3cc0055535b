"""CQED-format JSONL loading and record validation."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from srsa.core import Domain, QueryRecord

log = logging.getLogger(__name__)

_DOMAINS = {d.value for d in Domain}


class DatasetError(ValueError):
    pass


class MalformedLine(DatasetError):
    def __init__(self, line_no: int, problem: str) -> None:
        super().__init__(f"line {line_no}: {problem}")
        self.line_no = line_no


class DuplicateId(DatasetError):
    def __init__(self, line_no: int, record_id: str) -> None:
        super().__init__(f"line {line_no}: duplicate id {record_id!r}")
        self.line_no = line_no
        self.record_id = record_id


class EmptyFile(DatasetError):
    pass


@dataclass(frozen=True)
class Violation:
    field: str
    message: str
    severity: str = "error"  # "error" | "warning"


def validate_record(record: Mapping[str, Any]) -> list[Violation]:
    """Check one raw record; an empty list means it is valid. Warnings do not block loading."""
    violations = []
    rid = record.get("id")
    if not isinstance(rid, (str, int)) or isinstance(rid, bool) or str(rid).strip() == "":
        violations.append(Violation("id", "missing or empty id"))
    query = record.get("query")
    if not isinstance(query, str):
        violations.append(Violation("query", "missing query"))
    elif not query.strip():
        violations.append(Violation("query", "empty text"))
    domain = record.get("domain")
    if not isinstance(domain, str) or domain.strip().lower() not in _DOMAINS:
        violations.append(Violation("domain", f"unknown domain {domain!r}, mapped to 'other'", "warning"))
    asked_at = record.get("asked_at")
    if asked_at is not None and not isinstance(asked_at, str):
        violations.append(Violation("asked_at", "asked_at must be an ISO-8601 string"))
    return violations


def to_query_record(record: Mapping[str, Any]) -> QueryRecord:
    domain = record.get("domain")
    domain = domain.strip().lower() if isinstance(domain, str) else ""
    return QueryRecord(
        id=str(record["id"]).strip(),
        domain=Domain(domain) if domain in _DOMAINS else Domain.OTHER,
        text=record["query"],
        asked_at=record.get("asked_at"),
    )


def load_cqed(path: str | os.PathLike) -> list[QueryRecord]:
    records: list[QueryRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(raw, dict):
                raise MalformedLine(line_no, "record is not a JSON object")
            violations = validate_record(raw)
            errors = [v for v in violations if v.severity == "error"]
            if errors:
                raise MalformedLine(line_no, "; ".join(f"{v.field}: {v.message}" for v in errors))
            for v in violations:
                log.warning("line %d: %s: %s", line_no, v.field, v.message)
            record = to_query_record(raw)
            if record.id in seen:
                raise DuplicateId(line_no, record.id)
            seen.add(record.id)
            records.append(record)
    if not records:
        raise EmptyFile(f"{path}: no records")
    return records


def dump_cqed(records: list[QueryRecord]) -> str:
    lines = []
    for r in records:
        row = {"id": r.id, "domain": r.domain.value, "query": r.text}
        if r.asked_at is not None:
            row["asked_at"] = r.asked_at
        lines.append(json.dumps(row, ensure_ascii=False))
    return "\n".join(lines) + "\n"


def fixture_path() -> Path:
    """The packaged 20-record synthetic dataset."""
    return Path(str(resources.files("srsa") / "data" / "cqed_fixture.jsonl"))
