"""Shared fixtures and independent oracle helpers.

The oracles here are deliberately naive (exhaustive enumeration, union-find
over pairwise checks) so the production sweep/assignment code is tested
against a different algorithm, not against itself.
"""

from __future__ import annotations

import itertools
import random
import sys

import pytest

from sotkit import Session, Utterance, sessions_from_utterances


def random_session(
    rng: random.Random,
    session_id: str = "sess",
    max_utterances: int = 20,
    num_speakers: int = 4,
    max_words: int = 5,
) -> Session:
    """A valid random session: arbitrary overlap structure, rounded times."""
    n = rng.randint(1, max_utterances)
    utts = []
    for i in range(n):
        start = round(rng.uniform(0.0, 30.0), 3)
        dur = round(rng.uniform(0.2, 6.0), 3)
        words = " ".join(
            rng.choice(["a", "b", "c", "ok", "right", "now"])
            for _ in range(rng.randint(1, max_words))
        )
        utts.append(
            Utterance.build(
                session_id=session_id,
                utterance_id=f"u{i:03d}",
                speaker=f"spk{rng.randint(0, num_speakers - 1)}",
                start_s=start,
                end_s=start + dur,
                text=words,
            )
        )
    (session,) = sessions_from_utterances(utts)
    return session


def oracle_components(utterances) -> list[frozenset[str]]:
    """Connected components of the strict-overlap graph via union-find."""
    parent = {u.utterance_id: u.utterance_id for u in utterances}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in itertools.combinations(utterances, 2):
        if max(a.start_s, b.start_s) < min(a.end_s, b.end_s):
            parent[find(a.utterance_id)] = find(b.utterance_id)
    groups: dict[str, set[str]] = {}
    for u in utterances:
        groups.setdefault(find(u.utterance_id), set()).add(u.utterance_id)
    return sorted(
        (frozenset(g) for g in groups.values()), key=lambda g: sorted(g)[0]
    )


def oracle_edit_distance(ref: tuple[str, ...], hyp: tuple[str, ...]) -> int:
    """Plain Levenshtein total, no error-type split; independent recursion."""
    memo: dict[tuple[int, int], int] = {}

    def go(i: int, j: int) -> int:
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        key = (i, j)
        if key not in memo:
            best = go(i + 1, j + 1) + (ref[i] != hyp[j])
            best = min(best, go(i + 1, j) + 1, go(i, j + 1) + 1)
            memo[key] = best
        return memo[key]

    sys.setrecursionlimit(10000)
    return go(0, 0)


def validate_spec(spec, config) -> list[str]:
    """Independent mixture-constraint checker, no sampler bookkeeping reused."""
    problems = []
    n = len(spec.entries)
    if not 1 <= n <= config.max_speakers:
        problems.append(f"N={n} outside 1..{config.max_speakers}")
    speakers = [e.speaker for e in spec.entries]
    if len(set(speakers)) != n:
        problems.append("speakers not distinct")
    offsets = [e.offset_s for e in spec.entries]
    if offsets and offsets[0] != 0.0:
        problems.append("first offset not zero")
    for a, b in zip(offsets, offsets[1:]):
        if b - a < config.min_start_gap_s:
            problems.append(f"gap {b - a} below {config.min_start_gap_s}")
    if n >= 2:
        for i, e in enumerate(spec.entries):
            lo, hi = e.offset_s, e.offset_s + e.duration_s
            if not any(
                max(lo, o.offset_s) < min(hi, o.offset_s + o.duration_s)
                for j, o in enumerate(spec.entries)
                if j != i
            ):
                problems.append(f"entry {i} overlaps nothing")
    low, high = config.speed_range
    if config.speed_discrete:
        if spec.speed_factor not in config.discrete_speed_factors:
            problems.append("speed factor not in discrete set")
    elif not low <= spec.speed_factor <= high:
        problems.append("speed factor out of range")
    return problems


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20260823)
