"""JSONL reading and writing with a format-version header line.

Every file the toolkit writes starts with ``{"_format": "sotkit/1"}``.
Readers accept files without the header (external producers) but reject
files declaring an unknown format.  All output is UTF-8 with LF line
endings and sorted keys, so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Any, Iterable

from .core import DataFormatError, Utterance, ValidationError

FORMAT_VERSION = "sotkit/1"


def dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def write_records(out: IO[str], records: Iterable[dict[str, Any]]) -> None:
    """Write a header line followed by one JSON object per record."""
    out.write(dumps({"_format": FORMAT_VERSION}) + "\n")
    for record in records:
        out.write(dumps(record) + "\n")


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_records(fh, records)


def read_jsonl(path: str | Path) -> list[tuple[int, dict[str, Any]]]:
    """Read data records as (line_number, object) pairs.

    The header line, if present, is checked and dropped.  Malformed JSON
    raises DataFormatError naming the file and line.
    """
    records: list[tuple[int, dict[str, Any]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataFormatError(f"{path}:{lineno}: expected a JSON object")
            if "_format" in obj:
                declared = obj["_format"]
                if declared != FORMAT_VERSION:
                    raise DataFormatError(
                        f"{path}:{lineno}: unsupported format {declared!r} "
                        f"(this toolkit reads {FORMAT_VERSION!r})"
                    )
                continue
            records.append((lineno, obj))
    return records


def get_field(obj: dict, key: str, path: str | Path, lineno: int) -> Any:
    if key not in obj:
        raise ValidationError(f"{path}:{lineno}: missing field {key!r}")
    return obj[key]


def read_utterances(path: str | Path) -> list[Utterance]:
    """Read utterance records: one object per line with a space-joined text."""
    utterances = []
    for lineno, obj in read_jsonl(path):
        try:
            utt = Utterance.build(
                session_id=str(get_field(obj, "session_id", path, lineno)),
                utterance_id=str(get_field(obj, "utterance_id", path, lineno)),
                speaker=str(get_field(obj, "speaker", path, lineno)),
                start_s=float(get_field(obj, "start_s", path, lineno)),
                end_s=float(get_field(obj, "end_s", path, lineno)),
                text=str(get_field(obj, "text", path, lineno)),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad utterance record: {exc}") from exc
        utterances.append(utt)
    return utterances


def utterance_to_record(utt: Utterance) -> dict[str, Any]:
    return {
        "session_id": utt.session_id,
        "utterance_id": utt.utterance_id,
        "speaker": utt.speaker,
        "start_s": utt.start_s,
        "end_s": utt.end_s,
        "text": " ".join(utt.text),
    }
