"""Shared domain types for multi-talker transcription sessions.

All text is pre-tokenized by whitespace; the toolkit performs no
normalization (casing, punctuation) -- that is the caller's job.
Times are seconds with 1 ms resolution on ingest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Special tokens used in serialized multi-speaker sequences.  Reserved:
# they may never occur as corpus words.
SC = "⟨sc⟩"    # speaker change
EOS = "⟨eos⟩"  # end of the entire serialized sequence
RESERVED_TOKENS = frozenset({SC, EOS})

TIME_RESOLUTION_S = 0.001


class SotkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SotkitError):
    """Input data or configuration violates a documented invariant."""


class DataFormatError(SotkitError):
    """A file could not be parsed as the expected format."""


def round_time(seconds: float) -> float:
    """Round to 1 ms, half up.  Applied to all time fields on ingest."""
    return math.floor(seconds * 1000.0 + 0.5) / 1000.0


@dataclass(frozen=True)
class Utterance:
    """One speaker's transcribed segment with time bounds.

    ``text`` is a tuple of word tokens.  It may be empty only when
    ``no_transcript`` is set; such segments are accepted by grouping but
    rejected by scoring and label serialization.
    """

    session_id: str
    utterance_id: str
    speaker: str
    start_s: float
    end_s: float
    text: tuple[str, ...]
    no_transcript: bool = False

    @classmethod
    def build(
        cls,
        session_id: str,
        utterance_id: str,
        speaker: str,
        start_s: float,
        end_s: float,
        text: str,
    ) -> "Utterance":
        """Ingest constructor: rounds times to 1 ms and tokenizes on whitespace.

        An empty/whitespace-only ``text`` marks a no-transcript segment.
        """
        tokens = tuple(text.split())
        return cls(
            session_id=session_id,
            utterance_id=utterance_id,
            speaker=speaker,
            start_s=round_time(start_s),
            end_s=round_time(end_s),
            text=tokens,
            no_transcript=not tokens,
        )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def num_words(self) -> int:
        return len(self.text)

    def sort_key(self) -> tuple:
        """Deterministic ordering: (start, end, speaker, id)."""
        return (self.start_s, self.end_s, self.speaker, self.utterance_id)


@dataclass(frozen=True)
class Session:
    """All utterances of one recording session."""

    session_id: str
    utterances: tuple[Utterance, ...]
    sources: dict[str, str] | None = None  # utterance_id -> audio reference


@dataclass(frozen=True)
class ErrorCounts:
    """Word error tallies against a reference of ``ref_words`` tokens."""

    substitutions: int
    insertions: int
    deletions: int
    ref_words: int

    def __post_init__(self) -> None:
        for name in ("substitutions", "insertions", "deletions", "ref_words"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.substitutions + self.deletions > self.ref_words:
            raise ValidationError("substitutions + deletions exceed ref_words")

    @property
    def total_errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    def __add__(self, other: "ErrorCounts") -> "ErrorCounts":
        return ErrorCounts(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.ref_words + other.ref_words,
        )

    @classmethod
    def zero(cls) -> "ErrorCounts":
        return cls(0, 0, 0, 0)


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono audio, amplitudes in [-1, 1]."""

    samples: np.ndarray = field(repr=False)
    sample_rate_hz: int = 16000

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError("audio must be mono (1-D samples)")
        if samples.size < 1:
            raise ValidationError("audio must contain at least one sample")
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample_rate_hz must be positive")
        peak = float(np.max(np.abs(samples)))
        if peak > 1.0:
            raise ValidationError(f"amplitude out of range: peak {peak:.6g} > 1")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def validate_session(session: Session) -> list[str]:
    """Check every type invariant; return one message per violation.

    Never raises: an empty result means the session is valid.  Each
    message names the offending utterance_id and the broken rule.  The
    result is sorted, so it is identical under any permutation of the
    utterance list.
    """
    violations: list[str] = []
    seen_ids: set[str] = set()
    for utt in session.utterances:
        uid = utt.utterance_id
        if uid in seen_ids:
            violations.append(f"{uid}: duplicate utterance_id in session")
        seen_ids.add(uid)
        if utt.session_id != session.session_id:
            violations.append(
                f"{uid}: session_id {utt.session_id!r} does not match "
                f"session {session.session_id!r}"
            )
        if utt.start_s < 0:
            violations.append(f"{uid}: start_s must be non-negative")
        if not utt.end_s > utt.start_s:
            violations.append(f"{uid}: end_s must be greater than start_s")
        if not utt.text and not utt.no_transcript:
            violations.append(f"{uid}: empty text without no-transcript flag")
        for token in utt.text:
            if not token:
                violations.append(f"{uid}: empty word token")
            elif any(ch.isspace() for ch in token):
                violations.append(f"{uid}: word token {token!r} contains whitespace")
            elif token in RESERVED_TOKENS:
                violations.append(f"{uid}: reserved token {token!r} used as a word")
    return sorted(violations)


def require_valid(session: Session) -> None:
    """Raise ValidationError listing all violations, if any."""
    violations = validate_session(session)
    if violations:
        raise ValidationError(
            f"session {session.session_id!r} has {len(violations)} violation(s): "
            + "; ".join(violations)
        )


def sessions_from_utterances(utterances: list[Utterance]) -> list[Session]:
    """Group a flat utterance list into per-session objects, sorted by id.

    Utterances inside each session are sorted by time so downstream
    behavior never depends on input file order.
    """
    by_session: dict[str, list[Utterance]] = {}
    for utt in utterances:
        by_session.setdefault(utt.session_id, []).append(utt)
    return [
        Session(session_id=sid, utterances=tuple(sorted(utts, key=Utterance.sort_key)))
        for sid, utts in sorted(by_session.items())
    ]
