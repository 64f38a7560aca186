"""Command-line interface: group / stats / sot / simulate / score.

Conventions: all data goes to --out (or stdout), all diagnostics to
stderr.  Exit codes: 0 success, 1 validation error, 2 I/O error.  Every
JSONL output starts with a format-version header line, keys are sorted,
and records are ordered by their id, so repeated runs diff clean.  All
randomness requires an explicit --seed; there is no wall-clock default.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .core import (
    DataFormatError,
    Session,
    Utterance,
    ValidationError,
    require_valid,
    sessions_from_utterances,
)
from .grouping import UtteranceGroup, build_utterance_groups, group_stats
from .jsonl import FORMAT_VERSION, get_field, read_jsonl, read_utterances, write_records
from .mixsim import SimConfig, load_pool, run_simulation
from .scoring import (
    GroupHypothesis,
    GroupScore,
    Report,
    aggregate,
    concat_refs,
    score_group,
    score_utterance_eval,
)
from .sot import SotMode, deserialize, serialize_fifo

log = logging.getLogger("sotkit")


class _Parser(argparse.ArgumentParser):
    # Argument problems are validation errors (exit 1), not argparse's
    # default exit 2.
    def error(self, message: str):
        raise ValidationError(message)


def _require_files(*paths: str) -> None:
    for path in paths:
        if not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")


def _write_output(records: list[dict], out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            write_records(fh, records)
    else:
        write_records(sys.stdout, records)


def _write_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_sessions(path: str) -> list[Session]:
    utterances = read_utterances(path)
    if not utterances:
        raise ValidationError(f"no utterances in {path}")
    sessions = sessions_from_utterances(utterances)
    for session in sessions:
        require_valid(session)
    return sessions


def _load_groups(groups_path: str, sessions: list[Session]) -> list[UtteranceGroup]:
    """Rebuild group objects from a groups file plus the reference utterances."""
    by_key: dict[tuple[str, str], Utterance] = {
        (s.session_id, u.utterance_id): u for s in sessions for u in s.utterances
    }
    claimed: set[tuple[str, str]] = set()
    groups = []
    for lineno, obj in read_jsonl(groups_path):
        group_id = str(get_field(obj, "group_id", groups_path, lineno))
        session_id = str(get_field(obj, "session_id", groups_path, lineno))
        utts = []
        for uid in get_field(obj, "utterance_ids", groups_path, lineno):
            key = (session_id, str(uid))
            if key not in by_key:
                raise ValidationError(
                    f"{groups_path}:{lineno}: group {group_id!r} references "
                    f"unknown utterance {uid!r} in session {session_id!r}"
                )
            if key in claimed:
                raise ValidationError(
                    f"{groups_path}:{lineno}: utterance {uid!r} appears in "
                    "more than one group"
                )
            claimed.add(key)
            utts.append(by_key[key])
        if not utts:
            raise ValidationError(f"{groups_path}:{lineno}: group {group_id!r} is empty")
        ordered = tuple(sorted(utts, key=Utterance.sort_key))
        groups.append(
            UtteranceGroup(
                group_id=group_id,
                utterances=ordered,
                num_speakers=len({u.speaker for u in ordered}),
                span_start_s=min(u.start_s for u in ordered),
                span_end_s=max(u.end_s for u in ordered),
            )
        )
    if not groups:
        raise ValidationError(f"no groups in {groups_path}")
    unclaimed = len(by_key) - len(claimed)
    if unclaimed:
        log.warning("%d utterance(s) belong to no group and will not be scored", unclaimed)
    return sorted(groups, key=lambda g: g.group_id)


def _group_record(group: UtteranceGroup) -> dict:
    return {
        "group_id": group.group_id,
        "session_id": group.session_id,
        "span_start_s": group.span_start_s,
        "span_end_s": group.span_end_s,
        "num_speakers": group.num_speakers,
        "utterance_ids": [u.utterance_id for u in group.utterances],
    }


def cmd_group(args: argparse.Namespace) -> int:
    _require_files(args.infile)
    sessions = _load_sessions(args.infile)
    records = []
    for session in sessions:
        records.extend(_group_record(g) for g in build_utterance_groups(session))
    records.sort(key=lambda r: r["group_id"])
    _write_output(records, args.out)
    return 0


def _stats_text(stats) -> str:
    header = f"{'speakers':>8} {'segments':>9} {'avg_dur_s':>10} {'total_hr':>9} {'words':>10}"
    lines = [header]

    def fmt(label, b):
        return (
            f"{label:>8} {b.num_segments:>9} {b.average_duration_s:>10.1f} "
            f"{b.total_duration_hr:>9.3f} {b.num_words:>10}"
        )

    for n, bucket in stats.buckets.items():
        lines.append(fmt(str(n), bucket))
    lines.append(fmt("Total", stats.total))
    return "\n".join(lines)


def cmd_stats(args: argparse.Namespace) -> int:
    _require_files(args.groups, args.utterances)
    sessions = _load_sessions(args.utterances)
    groups = _load_groups(args.groups, sessions)
    stats = group_stats(groups)
    if args.format == "json":
        def bucket_dict(b):
            return {
                "num_segments": b.num_segments,
                "average_duration_s": b.average_duration_s,
                "total_duration_hr": b.total_duration_hr,
                "num_words": b.num_words,
            }

        record = {
            "buckets": [
                {"num_speakers": n, **bucket_dict(b)} for n, b in stats.buckets.items()
            ],
            "total": bucket_dict(stats.total),
        }
        _write_output([record], args.out)
    else:
        _write_text(_stats_text(stats), args.out)
    return 0


def cmd_sot_encode(args: argparse.Namespace) -> int:
    _require_files(args.groups, args.utterances)
    sessions = _load_sessions(args.utterances)
    groups = _load_groups(args.groups, sessions)
    mode = SotMode(args.mode)
    records = [
        {"group_id": g.group_id, "sot_text": serialize_fifo(g, mode).text}
        for g in groups
    ]
    _write_output(records, args.out)
    return 0


def cmd_sot_decode(args: argparse.Namespace) -> int:
    _require_files(args.infile)
    records = []
    for lineno, obj in read_jsonl(args.infile):
        group_id = str(get_field(obj, "group_id", args.infile, lineno))
        tokens = str(get_field(obj, "sot_text", args.infile, lineno)).split()
        result = deserialize(tokens)
        for warning in result.warnings:
            log.warning("%s: %s", group_id, warning)
        records.append(
            {
                "group_id": group_id,
                "texts": result.channel_texts,
                "num_speakers": result.speaker_count,
            }
        )
    records.sort(key=lambda r: r["group_id"])
    _write_output(records, args.out)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    _require_files(args.pool)
    config = SimConfig(
        seed=args.seed,
        max_speakers=args.max_speakers,
        min_start_gap_s=args.min_start_gap,
        speed_range=(args.speed_range[0], args.speed_range[1]),
        sample_rate_hz=args.sample_rate,
        speed_discrete=args.speed_discrete,
    )
    pool = load_pool(args.pool)
    records = run_simulation(pool, config, args.count, args.out_dir, jobs=args.jobs)
    manifest = Path(args.out_dir) / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        write_records(fh, records)
    log.info("wrote %d mixtures and %s", len(records), manifest)
    return 0


def _read_group_hyps(path: str) -> dict[str, GroupHypothesis]:
    hyps: dict[str, GroupHypothesis] = {}
    for lineno, obj in read_jsonl(path):
        group_id = str(get_field(obj, "group_id", path, lineno))
        if group_id in hyps:
            raise ValidationError(f"{path}:{lineno}: duplicate hypothesis for group {group_id!r}")
        texts = get_field(obj, "texts", path, lineno)
        channels = tuple(tuple(str(t).split()) for t in texts)
        hyps[group_id] = GroupHypothesis(group_id=group_id, channels=channels)
    return hyps


def _score_one_group(task: tuple[dict, str, tuple]) -> GroupScore:
    refs, group_id, channels = task
    return score_group(refs, GroupHypothesis(group_id=group_id, channels=channels))


def _score_group_mode(args: argparse.Namespace) -> Report:
    _require_files(args.refs, args.groups, args.hyps)
    sessions = _load_sessions(args.refs)
    groups = _load_groups(args.groups, sessions)
    hyps = _read_group_hyps(args.hyps)
    known = {g.group_id for g in groups}
    for group_id in hyps:
        if group_id not in known:
            raise ValidationError(f"hypothesis for unknown group {group_id!r}")
    tasks = []
    for group in groups:
        if group.group_id not in hyps:
            raise ValidationError(f"missing hypothesis for group {group.group_id!r}")
        tasks.append((concat_refs(group), group.group_id, hyps[group.group_id].channels))
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as executor:
            scores = list(executor.map(_score_one_group, tasks))
    else:
        scores = [_score_one_group(task) for task in tasks]
    return aggregate(scores)


def _score_utterance_mode(args: argparse.Namespace) -> Report:
    _require_files(args.refs, args.hyps)
    sessions = _load_sessions(args.refs)
    all_ids: set[str] = set()
    for session in sessions:
        for utt in session.utterances:
            if utt.utterance_id in all_ids:
                raise ValidationError(
                    f"utterance_id {utt.utterance_id!r} is not unique across "
                    "sessions; utterance-mode hypotheses cannot be keyed"
                )
            all_ids.add(utt.utterance_id)
    hyps: dict[str, tuple[str, ...]] = {}
    for lineno, obj in read_jsonl(args.hyps):
        uid = str(get_field(obj, "utterance_id", args.hyps, lineno))
        if uid in hyps:
            raise ValidationError(f"{args.hyps}:{lineno}: duplicate hypothesis for {uid!r}")
        if uid not in all_ids:
            raise ValidationError(f"{args.hyps}:{lineno}: hypothesis for unknown utterance {uid!r}")
        hyps[uid] = tuple(str(get_field(obj, "text", args.hyps, lineno)).split())
    return score_utterance_eval(sessions, hyps)


def cmd_score(args: argparse.Namespace) -> int:
    if args.mode == "group":
        report = _score_group_mode(args)
    else:
        report = _score_utterance_mode(args)
    if args.format == "json":
        _write_output([report.to_json()], args.out)
    else:
        _write_text(report.to_text(), args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="sotkit", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"sotkit {__version__} (format {FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_group = sub.add_parser("group", help="segment sessions into utterance groups")
    p_group.add_argument("--in", dest="infile", required=True)
    p_group.add_argument("--out")
    p_group.set_defaults(func=cmd_group)

    p_stats = sub.add_parser("stats", help="speaker-count statistics over groups")
    p_stats.add_argument("--groups", required=True)
    p_stats.add_argument("--utterances", required=True)
    p_stats.add_argument("--format", choices=("table", "json"), default="table")
    p_stats.add_argument("--out")
    p_stats.set_defaults(func=cmd_stats)

    p_sot = sub.add_parser("sot", help="serialize / deserialize multi-speaker labels")
    sot_sub = p_sot.add_subparsers(dest="sot_command", required=True)
    p_enc = sot_sub.add_parser("encode")
    p_enc.add_argument("--groups", required=True)
    p_enc.add_argument("--utterances", required=True)
    p_enc.add_argument("--mode", choices=("speaker", "utterance"), required=True)
    p_enc.add_argument("--out")
    p_enc.set_defaults(func=cmd_sot_encode)
    p_dec = sot_sub.add_parser("decode")
    p_dec.add_argument("--in", dest="infile", required=True)
    p_dec.add_argument("--out")
    p_dec.set_defaults(func=cmd_sot_decode)

    p_sim = sub.add_parser("simulate", help="render constrained multi-talker mixtures")
    p_sim.add_argument("--pool", required=True)
    p_sim.add_argument("--out-dir", required=True)
    p_sim.add_argument("--count", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--max-speakers", type=int, default=5)
    p_sim.add_argument("--min-start-gap", type=float, default=0.5)
    p_sim.add_argument("--speed-range", type=float, nargs=2, default=(0.9, 1.1),
                       metavar=("LOW", "HIGH"))
    p_sim.add_argument("--speed-discrete", action="store_true")
    p_sim.add_argument("--sample-rate", type=int, default=16000)
    p_sim.add_argument("--jobs", type=int, default=1)
    p_sim.set_defaults(func=cmd_simulate)

    p_score = sub.add_parser("score", help="utterance or group WER reports")
    p_score.add_argument("--mode", choices=("group", "utterance"), required=True)
    p_score.add_argument("--refs", required=True)
    p_score.add_argument("--groups")
    p_score.add_argument("--hyps", required=True)
    p_score.add_argument("--format", choices=("table", "json"), default="table")
    p_score.add_argument("--jobs", type=int, default=1)
    p_score.add_argument("--out")
    p_score.set_defaults(func=cmd_score)

    return parser


def run(argv: Sequence[str]) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "score" and args.mode == "group" and not args.groups:
            raise ValidationError("--groups is required with --mode group")
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
