from __future__ import annotations

import logging
import random

import pytest

from sotkit import (
    Utterance,
    ValidationError,
    build_utterance_groups,
    group_stats,
    overlaps,
    sessions_from_utterances,
)

from conftest import oracle_components, random_session


def _session(utts):
    (session,) = sessions_from_utterances(utts)
    return session


def _utt(uid: str, start: float, end: float) -> Utterance:
    return Utterance.build("s", uid, "a", start, end, "x")


class TestOverlaps:
    def test_strict_overlap(self):
        assert overlaps(_utt("a", 0.0, 2.0), _utt("b", 1.0, 3.0))
        assert overlaps(_utt("a", 1.0, 3.0), _utt("b", 0.0, 2.0))
        assert overlaps(_utt("a", 0.0, 5.0), _utt("b", 1.0, 2.0))

    def test_touching_intervals_do_not_overlap(self):
        assert not overlaps(_utt("a", 0.0, 1.0), _utt("b", 1.0, 2.0))
        assert not overlaps(_utt("a", 1.0, 2.0), _utt("b", 0.0, 1.0))

    def test_disjoint(self):
        assert not overlaps(_utt("a", 0.0, 1.0), _utt("b", 5.0, 6.0))


class TestBuildUtteranceGroups:
    def test_single_utterance_single_group(self):
        groups = build_utterance_groups(
            _session([Utterance.build("s", "u1", "a", 0.0, 1.0, "x")])
        )
        assert len(groups) == 1
        assert groups[0].group_id == "s-0000"
        assert groups[0].num_speakers == 1

    def test_chain_overlap_merges_transitively(self):
        # u1 and u3 never overlap each other, but u2 bridges them.
        groups = build_utterance_groups(
            _session(
                [
                    Utterance.build("s", "u1", "a", 0.0, 2.0, "x"),
                    Utterance.build("s", "u2", "b", 1.5, 4.0, "x"),
                    Utterance.build("s", "u3", "c", 3.5, 5.0, "x"),
                ]
            )
        )
        assert len(groups) == 1
        assert groups[0].num_speakers == 3
        assert groups[0].span_start_s == 0.0
        assert groups[0].span_end_s == 5.0

    def test_touching_utterances_split(self):
        groups = build_utterance_groups(
            _session(
                [
                    Utterance.build("s", "u1", "a", 0.0, 1.0, "x"),
                    Utterance.build("s", "u2", "b", 1.0, 2.0, "x"),
                ]
            )
        )
        assert [len(g.utterances) for g in groups] == [1, 1]

    def test_contained_interval_does_not_end_group(self):
        # A short utterance nested inside a long one must not close the
        # sweep early for the next utterance.
        groups = build_utterance_groups(
            _session(
                [
                    Utterance.build("s", "u1", "a", 0.0, 10.0, "x"),
                    Utterance.build("s", "u2", "b", 1.0, 2.0, "x"),
                    Utterance.build("s", "u3", "c", 3.0, 4.0, "x"),
                ]
            )
        )
        assert len(groups) == 1

    def test_group_ids_sequential_per_session(self):
        groups = build_utterance_groups(
            _session(
                [
                    Utterance.build("s", "u1", "a", 0.0, 1.0, "x"),
                    Utterance.build("s", "u2", "a", 2.0, 3.0, "x"),
                    Utterance.build("s", "u3", "a", 4.0, 5.0, "x"),
                ]
            )
        )
        assert [g.group_id for g in groups] == ["s-0000", "s-0001", "s-0002"]

    def test_invalid_session_rejected(self):
        with pytest.raises(ValidationError):
            build_utterance_groups(
                _session([Utterance.build("s", "u1", "a", 1.0, 1.0, "x")])
            )

    def test_same_speaker_self_overlap_warns(self, caplog):
        session = _session(
            [
                Utterance.build("s", "u1", "a", 0.0, 3.0, "x"),
                Utterance.build("s", "u2", "a", 1.0, 2.0, "x"),
            ]
        )
        with caplog.at_level(logging.WARNING, logger="sotkit"):
            build_utterance_groups(session)
        assert any("overlap" in rec.message for rec in caplog.records)


class TestOracleEquivalence:
    def test_sweep_matches_union_find_on_random_sessions(self, rng):
        for case in range(200):
            session = random_session(rng, session_id=f"s{case}")
            groups = build_utterance_groups(session)
            got = sorted(
                (frozenset(u.utterance_id for u in g.utterances) for g in groups),
                key=lambda g: sorted(g)[0],
            )
            assert got == oracle_components(session.utterances), f"case {case}"

    def test_word_denominator_conserved(self, rng):
        for case in range(200):
            session = random_session(rng, session_id=f"s{case}")
            groups = build_utterance_groups(session)
            assert sum(g.num_words for g in groups) == sum(
                len(u.text) for u in session.utterances
            ), f"case {case}"

    def test_input_order_invariance(self, rng):
        for case in range(50):
            session = random_session(rng, session_id=f"s{case}")
            shuffled = list(session.utterances)
            rng.shuffle(shuffled)
            (scrambled,) = sessions_from_utterances(shuffled)
            a = build_utterance_groups(session)
            b = build_utterance_groups(scrambled)
            assert [g.group_id for g in a] == [g.group_id for g in b]
            assert [tuple(u.utterance_id for u in g.utterances) for g in a] == [
                tuple(u.utterance_id for u in g.utterances) for g in b
            ]


class TestGroupStats:
    def test_buckets_and_totals(self):
        session = _session(
            [
                Utterance.build("s", "u1", "a", 0.0, 2.0, "one two"),
                Utterance.build("s", "u2", "b", 1.0, 3.0, "three"),
                Utterance.build("s", "u3", "a", 10.0, 12.0, "four five six"),
            ]
        )
        stats = group_stats(build_utterance_groups(session))
        assert set(stats.buckets) == {1, 2}
        assert stats.buckets[2].num_segments == 1
        assert stats.buckets[2].num_words == 3
        assert stats.buckets[2].average_duration_s == pytest.approx(3.0)
        assert stats.buckets[1].num_words == 3
        assert stats.total.num_segments == 2
        assert stats.total.num_words == 6
        assert stats.total.total_duration_hr == pytest.approx(5.0 / 3600.0)

    def test_empty_group_list_rejected(self):
        with pytest.raises(ValidationError):
            group_stats([])
