"""Word error metrics for utterance- and group-based evaluation.

Group-based scoring concatenates each speaker's references inside a
group, then picks the hypothesis-to-reference assignment minimizing the
summed word errors.  Padding the smaller side with empty channels makes
unmatched hypotheses pure insertions and unmatched references pure
deletions.  Costs are raw error counts, not rates, so the assignment
objective equals the numerator of the final WER and the minimum over
assignments equals the minimum over channel permutations.

Both evaluation styles divide by the same denominator: the total number
of reference words.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ErrorCounts, Session, Utterance, ValidationError, require_valid
from .grouping import UtteranceGroup

log = logging.getLogger(__name__)

ACTUAL_LABELS = ("1", "2", "3", "4+")
ESTIMATED_LABELS = ("0", "1", "2", "3", "4", "5+")


@dataclass(frozen=True)
class GroupHypothesis:
    """Decoded output for one group: one token list per detected speaker.

    Channel order carries no meaning; zero channels is a valid
    zero-speaker prediction.
    """

    group_id: str
    channels: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class GroupScore:
    """Error counts for one group under the chosen channel assignment."""

    group_id: str
    counts: ErrorCounts
    permutation: tuple[tuple[str, int | None], ...]  # ref speaker -> hyp index
    ref_speakers: int
    hyp_speakers: int


@dataclass(frozen=True)
class ReportRow:
    label: str
    num_groups: int
    counts: ErrorCounts
    wer_pct: float


@dataclass(frozen=True)
class ConfusionRow:
    actual: str
    counts: dict[str, int]
    pct: dict[str, float]


@dataclass(frozen=True)
class Report:
    counts: ErrorCounts
    wer_pct: float
    by_num_speakers: tuple[ReportRow, ...]
    count_confusion: tuple[ConfusionRow, ...]

    def to_json(self) -> dict:
        return {
            "wer_pct": self.wer_pct,
            "sub": self.counts.substitutions,
            "ins": self.counts.insertions,
            "del": self.counts.deletions,
            "ref_words": self.counts.ref_words,
            "by_num_speakers": [
                {
                    "num_speakers": row.label,
                    "num_groups": row.num_groups,
                    "wer_pct": row.wer_pct,
                    "sub": row.counts.substitutions,
                    "ins": row.counts.insertions,
                    "del": row.counts.deletions,
                    "ref_words": row.counts.ref_words,
                }
                for row in self.by_num_speakers
            ],
            "count_confusion": [
                {"actual": row.actual, "counts": row.counts, "pct": row.pct}
                for row in self.count_confusion
            ],
        }

    def to_text(self) -> str:
        c = self.counts
        lines = [
            f"WER {self.wer_pct:.1f}%  "
            f"[{c.total_errors} errors / {c.ref_words} words: "
            f"{c.substitutions} sub, {c.insertions} ins, {c.deletions} del]"
        ]
        if self.by_num_speakers:
            lines.append("")
            lines.append(f"{'speakers':>8} {'groups':>7} {'ref_words':>9} {'wer_pct':>8}")
            for row in self.by_num_speakers:
                lines.append(
                    f"{row.label:>8} {row.num_groups:>7} "
                    f"{row.counts.ref_words:>9} {row.wer_pct:>8.1f}"
                )
        if self.count_confusion:
            lines.append("")
            header = "  ".join(f"{label:>6}" for label in ESTIMATED_LABELS)
            lines.append(f"{'actual':>6} | estimated %: {header}")
            for row in self.count_confusion:
                cells = "  ".join(
                    f"{row.pct.get(label, 0.0):>6.1f}" for label in ESTIMATED_LABELS
                )
                lines.append(f"{row.actual:>6} |              {cells}")
        return "\n".join(lines)


def word_errors(ref: Sequence[str], hyp: Sequence[str]) -> ErrorCounts:
    """Minimum-edit-distance error counts with unit costs.

    The total is the classic Levenshtein distance.  When several edit
    scripts tie, the reported sub/ins/del split follows a fixed
    preference -- substitution, then deletion, then insertion -- so
    results are deterministic.
    """
    n_ref, n_hyp = len(ref), len(hyp)
    # Each cell holds (total, sub, ins, del) for the best alignment of
    # the prefixes.
    prev = [(j, 0, j, 0) for j in range(n_hyp + 1)]
    for i in range(1, n_ref + 1):
        cur = [(i, 0, 0, i)]
        for j in range(1, n_hyp + 1):
            match = ref[i - 1] == hyp[j - 1]
            d_total, d_sub, d_ins, d_del = prev[j - 1]
            if not match:
                d_total, d_sub = d_total + 1, d_sub + 1
            best = (d_total, d_sub, d_ins, d_del)
            u_total, u_sub, u_ins, u_del = prev[j]
            if u_total + 1 < best[0]:
                best = (u_total + 1, u_sub, u_ins, u_del + 1)
            l_total, l_sub, l_ins, l_del = cur[j - 1]
            if l_total + 1 < best[0]:
                best = (l_total + 1, l_sub, l_ins + 1, l_del)
            cur.append(best)
        prev = cur
    total, subs, ins, dels = prev[n_hyp]
    return ErrorCounts(
        substitutions=subs, insertions=ins, deletions=dels, ref_words=n_ref
    )


def concat_refs(group: UtteranceGroup) -> dict[str, tuple[str, ...]]:
    """Concatenate each speaker's references in start-time order.

    Speakers appear in order of their earliest utterance.  Groups
    containing no-transcript segments cannot be scored.
    """
    refs: dict[str, list[str]] = {}
    for utt in sorted(group.utterances, key=Utterance.sort_key):
        if not utt.text:
            raise ValidationError(
                f"utterance {utt.utterance_id!r} has no transcript; "
                f"group {group.group_id!r} cannot be scored"
            )
        refs.setdefault(utt.speaker, []).extend(utt.text)
    return {speaker: tuple(tokens) for speaker, tokens in refs.items()}


def score_group(
    refs: Mapping[str, Sequence[str]], hyp: GroupHypothesis
) -> GroupScore:
    """Score one group's hypothesis channels against per-speaker references.

    The smaller side is padded with empty channels to square the cost
    matrix; a polynomial minimum-cost assignment then selects the best
    channel pairing.  Channels are ordered canonically (references by
    speaker label, hypotheses by content) before solving, so the
    reported counts never depend on input iteration order.
    """
    if not refs:
        raise ValidationError(f"group {hyp.group_id!r} has an empty reference map")
    ref_rows: list[tuple[str | None, tuple[str, ...]]] = sorted(
        ((speaker, tuple(tokens)) for speaker, tokens in refs.items()),
        key=lambda item: item[0],
    )
    hyp_cols: list[tuple[int | None, tuple[str, ...]]] = sorted(
        ((idx, tuple(ch)) for idx, ch in enumerate(hyp.channels)),
        key=lambda item: item[1],
    )
    n_ref, n_hyp = len(ref_rows), len(hyp_cols)
    size = max(n_ref, n_hyp)
    ref_rows += [(None, ())] * (size - n_ref)
    hyp_cols += [(None, ())] * (size - n_hyp)

    pair_counts = [
        [word_errors(row_tokens, col_tokens) for _, col_tokens in hyp_cols]
        for _, row_tokens in ref_rows
    ]
    cost = np.array(
        [[counts.total_errors for counts in row] for row in pair_counts]
    )
    row_idx, col_idx = linear_sum_assignment(cost)

    total = ErrorCounts.zero()
    assignment: dict[str, int | None] = {}
    for i, j in zip(row_idx, col_idx):
        total = total + pair_counts[i][j]
        speaker = ref_rows[i][0]
        if speaker is not None:
            assignment[speaker] = hyp_cols[j][0]
    permutation = tuple(sorted(assignment.items()))
    return GroupScore(
        group_id=hyp.group_id,
        counts=total,
        permutation=permutation,
        ref_speakers=n_ref,
        hyp_speakers=n_hyp,
    )


def _wer_pct(counts: ErrorCounts) -> float:
    return round(100.0 * counts.total_errors / counts.ref_words, 1)


def _actual_label(n: int) -> str:
    if n >= 5:
        log.warning("folding %d-speaker group into the 4+ bucket", n)
    return str(n) if n <= 3 else "4+"


def _estimated_label(n: int) -> str:
    return str(n) if n <= 4 else "5+"


def aggregate(scores: Sequence[GroupScore]) -> Report:
    """Sum group errors into one WER plus per-speaker-count breakdowns."""
    total = ErrorCounts.zero()
    for score in scores:
        total = total + score.counts
    if total.ref_words == 0:
        raise ValidationError("cannot aggregate: zero total reference words")

    by_bucket: dict[str, list[GroupScore]] = {}
    for score in scores:
        by_bucket.setdefault(_actual_label(score.ref_speakers), []).append(score)

    rows = []
    confusion = []
    for label in ACTUAL_LABELS:
        members = by_bucket.get(label)
        if not members:
            continue
        bucket_counts = ErrorCounts.zero()
        estimated: dict[str, int] = {}
        for score in members:
            bucket_counts = bucket_counts + score.counts
            est = _estimated_label(score.hyp_speakers)
            estimated[est] = estimated.get(est, 0) + 1
        rows.append(
            ReportRow(
                label=label,
                num_groups=len(members),
                counts=bucket_counts,
                wer_pct=_wer_pct(bucket_counts),
            )
        )
        confusion.append(
            ConfusionRow(
                actual=label,
                counts={k: estimated[k] for k in ESTIMATED_LABELS if k in estimated},
                pct={
                    k: 100.0 * v / len(members) for k, v in sorted(estimated.items())
                },
            )
        )
    return Report(
        counts=total,
        wer_pct=_wer_pct(total),
        by_num_speakers=tuple(rows),
        count_confusion=tuple(confusion),
    )


def utterance_error_counts(
    session: Session, hyps: Mapping[str, Sequence[str]]
) -> list[ErrorCounts]:
    """Per-utterance word errors against hypotheses keyed by utterance_id."""
    require_valid(session)
    counts = []
    for utt in session.utterances:
        if not utt.text:
            raise ValidationError(
                f"utterance {utt.utterance_id!r} has no transcript; cannot be scored"
            )
        if utt.utterance_id not in hyps:
            raise ValidationError(
                f"missing hypothesis for utterance {utt.utterance_id!r}"
            )
        counts.append(word_errors(utt.text, tuple(hyps[utt.utterance_id])))
    return counts


def score_utterance_eval(
    sessions: Sequence[Session], hyps: Mapping[str, Sequence[str]]
) -> Report:
    """Classic utterance-based evaluation: per-segment errors, summed."""
    total = ErrorCounts.zero()
    for session in sessions:
        for counts in utterance_error_counts(session, hyps):
            total = total + counts
    if total.ref_words == 0:
        raise ValidationError("cannot score: zero total reference words")
    return Report(
        counts=total,
        wer_pct=_wer_pct(total),
        by_num_speakers=(),
        count_confusion=(),
    )


def brute_force_group_errors(
    refs: Mapping[str, Sequence[str]], channels: Sequence[Sequence[str]]
) -> int:
    """Total errors minimized over every channel permutation, by enumeration.

    Exponential; retained as the definitional reference for the
    assignment solver on small channel counts.
    """
    ref_lists = [tuple(t) for t in refs.values()]
    hyp_lists = [tuple(c) for c in channels]
    size = max(len(ref_lists), len(hyp_lists))
    ref_lists += [()] * (size - len(ref_lists))
    hyp_lists += [()] * (size - len(hyp_lists))
    best = None
    for perm in itertools.permutations(range(size)):
        cost = sum(
            word_errors(ref_lists[i], hyp_lists[perm[i]]).total_errors
            for i in range(size)
        )
        if best is None or cost < best:
            best = cost
    return int(best or 0)
