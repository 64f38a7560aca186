"""Serialization of multi-speaker references into single token sequences.

A serialized sequence is the words of each channel in first-in,
first-out order, with a speaker-change token between channels and an
end token closing the whole sequence.  Two channel layouts exist:

* utterance FIFO -- one channel per utterance, ordered by start time;
* speaker FIFO -- one channel per speaker (that speaker's utterances
  concatenated in time order), speakers ordered by earliest start.

Same-speaker boundaries inside a speaker channel carry no token: the
change token marks speaker changes only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import EOS, SC, Utterance, ValidationError
from .grouping import UtteranceGroup


class SotMode(enum.Enum):
    FIFO_UTTERANCE = "utterance"
    FIFO_SPEAKER = "speaker"


@dataclass(frozen=True)
class SotSequence:
    """A well-formed serialized token sequence.

    Invariants (checked on construction): the end token appears exactly
    once, as the final token; no two consecutive change tokens; a change
    token is never first and never immediately precedes the end token.
    """

    tokens: tuple[str, ...]
    mode: SotMode

    def __post_init__(self) -> None:
        toks = self.tokens
        if not toks or toks[-1] != EOS:
            raise ValidationError("serialized sequence must end with the end token")
        if EOS in toks[:-1]:
            raise ValidationError("end token may appear only once, at the end")
        if toks[0] == SC:
            raise ValidationError("speaker-change token may not be first")
        for prev, cur in zip(toks, toks[1:]):
            if prev == SC and cur in (SC, EOS):
                raise ValidationError(
                    "speaker-change token may not precede another special token"
                )

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def num_channels(self) -> int:
        return sum(1 for t in self.tokens if t == SC) + 1

    def word_tokens(self) -> tuple[str, ...]:
        return tuple(t for t in self.tokens if t not in (SC, EOS))


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of splitting a (possibly malformed) token stream."""

    channels: tuple[tuple[str, ...], ...]
    speaker_count: int
    warnings: tuple[str, ...]

    @property
    def channel_texts(self) -> list[str]:
        return [" ".join(ch) for ch in self.channels]


def from_channels(channels: Sequence[Sequence[str]], mode: SotMode) -> SotSequence:
    """Join non-empty word channels with change tokens and append the end token."""
    if not channels:
        raise ValidationError("cannot serialize zero channels")
    tokens: list[str] = []
    for i, channel in enumerate(channels):
        if not channel:
            raise ValidationError(f"channel {i} is empty")
        if i:
            tokens.append(SC)
        tokens.extend(channel)
    tokens.append(EOS)
    return SotSequence(tokens=tuple(tokens), mode=mode)


def serialize_fifo(group: UtteranceGroup, mode: SotMode) -> SotSequence:
    """Serialize a group's references in first-in, first-out order."""
    if not group.utterances:
        raise ValidationError(f"group {group.group_id!r} is empty")
    for utt in group.utterances:
        if not utt.text:
            raise ValidationError(
                f"utterance {utt.utterance_id!r} has no transcript; "
                "cannot serialize"
            )
    ordered = sorted(group.utterances, key=Utterance.sort_key)
    if mode is SotMode.FIFO_UTTERANCE:
        channels: list[list[str]] = [list(u.text) for u in ordered]
    elif mode is SotMode.FIFO_SPEAKER:
        by_speaker: dict[str, list[str]] = {}
        for utt in ordered:  # dict preserves first-start speaker order
            by_speaker.setdefault(utt.speaker, []).extend(utt.text)
        channels = list(by_speaker.values())
    else:
        raise ValidationError(f"unknown serialization mode: {mode!r}")
    return from_channels(channels, mode)


def deserialize(tokens: SotSequence | Iterable[str]) -> DecodeResult:
    """Split a decoded token stream into channels plus a speaker count.

    Total over arbitrary input, so raw model output can always be
    scored: tokens after the end token are discarded, empty channels
    are dropped, and every repair is reported as a warning.  An input
    that carries no words at all is a clean zero-speaker prediction.
    """
    toks = list(tokens.tokens) if isinstance(tokens, SotSequence) else list(tokens)
    warnings: list[str] = []
    if EOS in toks:
        cut = toks.index(EOS)
        trailing = len(toks) - cut - 1
        if trailing:
            warnings.append(f"discarded {trailing} token(s) after the end token")
        toks = toks[:cut]
    else:
        warnings.append("no end token in decoded sequence")

    raw_channels: list[list[str]] = [[]]
    for tok in toks:
        if tok == SC:
            raw_channels.append([])
        else:
            raw_channels[-1].append(tok)

    if toks:
        channels = []
        for i, channel in enumerate(raw_channels):
            if channel:
                channels.append(tuple(channel))
            else:
                warnings.append(f"dropped empty channel at position {i}")
    else:
        channels = []  # zero-speaker prediction, not a malformation

    return DecodeResult(
        channels=tuple(channels),
        speaker_count=len(channels),
        warnings=tuple(warnings),
    )
