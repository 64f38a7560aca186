"""Utterance groups: maximal sets of utterances chained by temporal overlap.

Overlap is strict: intervals (a, b) and (c, d) overlap iff
max(a, c) < min(b, d).  Utterances that merely touch (b == c) fall into
separate groups -- a zero-length silence still separates.  The builder
is a sweep over utterances sorted by start time, which yields exactly
the connected components of the pairwise-overlap graph in O(n log n).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .core import Session, Utterance, ValidationError, require_valid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UtteranceGroup:
    """A connected component of overlapping utterances."""

    group_id: str
    utterances: tuple[Utterance, ...]  # ordered by (start, end, speaker)
    num_speakers: int
    span_start_s: float
    span_end_s: float

    @property
    def session_id(self) -> str:
        return self.utterances[0].session_id

    @property
    def num_words(self) -> int:
        return sum(u.num_words for u in self.utterances)

    @property
    def duration_s(self) -> float:
        return self.span_end_s - self.span_start_s


@dataclass(frozen=True)
class BucketStats:
    """One speaker-count row of the group statistics table."""

    num_segments: int
    average_duration_s: float
    total_duration_hr: float
    num_words: int


@dataclass(frozen=True)
class GroupStats:
    """Group statistics bucketed by number of speakers, plus totals."""

    buckets: dict[int, BucketStats]
    total: BucketStats


def overlaps(a: Utterance, b: Utterance) -> bool:
    """Strict temporal overlap between two utterance intervals."""
    return max(a.start_s, b.start_s) < min(a.end_s, b.end_s)


def _warn_same_speaker_overlap(group_utts: list[Utterance]) -> None:
    # Annotation artifact: one speaker overlapping themselves.  Grouped
    # like any other overlap, but worth surfacing.
    by_speaker: dict[str, list[Utterance]] = {}
    for utt in group_utts:
        by_speaker.setdefault(utt.speaker, []).append(utt)
    for speaker, utts in by_speaker.items():
        for prev, cur in zip(utts, utts[1:]):
            if overlaps(prev, cur):
                log.warning(
                    "speaker %r overlaps themselves: %s and %s",
                    speaker,
                    prev.utterance_id,
                    cur.utterance_id,
                )


def build_utterance_groups(session: Session) -> list[UtteranceGroup]:
    """Partition a valid session's utterances into utterance groups.

    Groups are ordered by span start; every utterance lands in exactly
    one group; two utterances share a group iff they are connected by a
    chain of pairwise overlaps.
    """
    require_valid(session)
    ordered = sorted(session.utterances, key=Utterance.sort_key)
    raw_groups: list[list[Utterance]] = []
    current: list[Utterance] = []
    current_end = float("-inf")
    for utt in ordered:
        if current and utt.start_s >= current_end:
            raw_groups.append(current)
            current = []
        current.append(utt)
        # After a close, current_end <= utt.start_s < utt.end_s, so the
        # max also resets correctly for the fresh group.
        current_end = max(current_end, utt.end_s)
    if current:
        raw_groups.append(current)

    groups = []
    for index, utts in enumerate(raw_groups):
        _warn_same_speaker_overlap(utts)
        groups.append(
            UtteranceGroup(
                group_id=f"{session.session_id}-{index:04d}",
                utterances=tuple(utts),
                num_speakers=len({u.speaker for u in utts}),
                span_start_s=min(u.start_s for u in utts),
                span_end_s=max(u.end_s for u in utts),
            )
        )
    return groups


def group_stats(groups: list[UtteranceGroup]) -> GroupStats:
    """Tally segment counts, durations, and word counts per speaker count."""
    if not groups:
        raise ValidationError("cannot summarize an empty group list")
    per_bucket: dict[int, list[UtteranceGroup]] = {}
    for group in groups:
        per_bucket.setdefault(group.num_speakers, []).append(group)

    def summarize(members: list[UtteranceGroup]) -> BucketStats:
        total_dur = sum(g.duration_s for g in members)
        return BucketStats(
            num_segments=len(members),
            average_duration_s=total_dur / len(members) if members else 0.0,
            total_duration_hr=total_dur / 3600.0,
            num_words=sum(g.num_words for g in members),
        )

    buckets = {n: summarize(members) for n, members in sorted(per_bucket.items())}
    return GroupStats(buckets=buckets, total=summarize(list(groups)))
