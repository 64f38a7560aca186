from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sotkit import AudioBuffer, write_wav
from sotkit.jsonl import write_jsonl


def run_cli(*args: str, cwd=None) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "sotkit", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def read_records(path: Path) -> list[dict]:
    lines = path.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == {"_format": "sotkit/1"}
    return [json.loads(line) for line in lines[1:]]


@pytest.fixture
def utterances_file(tmp_path: Path) -> Path:
    path = tmp_path / "utts.jsonl"
    write_jsonl(
        path,
        [
            {
                "session_id": "s1",
                "utterance_id": "u1",
                "speaker": "alice",
                "start_s": 0.0,
                "end_s": 2.0,
                "text": "hello world",
            },
            {
                "session_id": "s1",
                "utterance_id": "u2",
                "speaker": "bob",
                "start_s": 1.0,
                "end_s": 3.0,
                "text": "good morning",
            },
            {
                "session_id": "s1",
                "utterance_id": "u3",
                "speaker": "alice",
                "start_s": 5.0,
                "end_s": 6.0,
                "text": "bye",
            },
        ],
    )
    return path


@pytest.fixture
def pool_dir(tmp_path: Path) -> Path:
    wav_dir = tmp_path / "wavs"
    wav_dir.mkdir()
    records = []
    for i in range(6):
        n = 16000 + 4000 * (i % 3)
        samples = 0.2 * np.sin(2 * np.pi * (150 + 40 * i) * np.arange(n) / 16000)
        write_wav(wav_dir / f"s{i}.wav", AudioBuffer(samples=samples, sample_rate_hz=16000))
        records.append(
            {
                "source_id": f"s{i}",
                "speaker": f"spk{i % 3}",
                "transcript": f"alpha{i} beta{i}",
                "wav": f"wavs/s{i}.wav",
            }
        )
    write_jsonl(tmp_path / "pool.jsonl", records)
    return tmp_path


class TestExitCodes:
    def test_version_exits_zero(self):
        proc = run_cli("--version")
        assert proc.returncode == 0
        assert "sotkit" in proc.stdout
        assert "sotkit/1" in proc.stdout

    def test_unknown_flag_is_validation_error(self, utterances_file):
        proc = run_cli("group", "--in", str(utterances_file), "--bogus")
        assert proc.returncode == 1
        assert "error" in proc.stderr.lower()

    def test_no_subcommand_is_validation_error(self):
        assert run_cli().returncode == 1

    def test_missing_input_file_is_io_error(self, tmp_path):
        proc = run_cli("group", "--in", str(tmp_path / "nope.jsonl"))
        assert proc.returncode == 2
        assert "nope.jsonl" in proc.stderr

    def test_malformed_jsonl_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n", encoding="utf-8")
        proc = run_cli("group", "--in", str(bad))
        assert proc.returncode == 2
        assert "bad.jsonl:1" in proc.stderr

    def test_empty_utterance_list_is_validation_error(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        write_jsonl(empty, [])
        proc = run_cli("group", "--in", str(empty))
        assert proc.returncode == 1
        assert "no utterances" in proc.stderr

    def test_invalid_session_is_validation_error(self, tmp_path):
        path = tmp_path / "utts.jsonl"
        write_jsonl(
            path,
            [
                {
                    "session_id": "s",
                    "utterance_id": "u1",
                    "speaker": "a",
                    "start_s": 2.0,
                    "end_s": 1.0,
                    "text": "x",
                }
            ],
        )
        proc = run_cli("group", "--in", str(path))
        assert proc.returncode == 1
        assert "u1" in proc.stderr


class TestGroupCommand:
    def test_writes_sorted_groups_with_header(self, utterances_file, tmp_path):
        out = tmp_path / "groups.jsonl"
        proc = run_cli("group", "--in", str(utterances_file), "--out", str(out))
        assert proc.returncode == 0
        records = read_records(out)
        assert [r["group_id"] for r in records] == ["s1-0000", "s1-0001"]
        assert records[0]["utterance_ids"] == ["u1", "u2"]
        assert records[0]["num_speakers"] == 2

    def test_stdout_when_no_out_flag(self, utterances_file):
        proc = run_cli("group", "--in", str(utterances_file))
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[0] == '{"_format": "sotkit/1"}'


class TestPipeline:
    def _encode_decode(self, utterances_file, tmp_path, mode):
        groups = tmp_path / "groups.jsonl"
        enc = tmp_path / "enc.jsonl"
        dec = tmp_path / "dec.jsonl"
        assert run_cli("group", "--in", str(utterances_file), "--out", str(groups)).returncode == 0
        assert (
            run_cli(
                "sot", "encode",
                "--groups", str(groups),
                "--utterances", str(utterances_file),
                "--mode", mode,
                "--out", str(enc),
            ).returncode
            == 0
        )
        assert run_cli("sot", "decode", "--in", str(enc), "--out", str(dec)).returncode == 0
        return groups, enc, dec

    def test_round_trip_scores_zero_wer(self, utterances_file, tmp_path):
        groups, enc, dec = self._encode_decode(utterances_file, tmp_path, "speaker")
        hyps = tmp_path / "hyps.jsonl"
        write_jsonl(
            hyps,
            [
                {"group_id": r["group_id"], "texts": r["texts"]}
                for r in read_records(dec)
            ],
        )
        proc = run_cli(
            "score", "--mode", "group",
            "--refs", str(utterances_file),
            "--groups", str(groups),
            "--hyps", str(hyps),
            "--format", "json",
        )
        assert proc.returncode == 0
        (report,) = [json.loads(l) for l in proc.stdout.splitlines()[1:]]
        assert report["wer_pct"] == 0.0
        assert report["ref_words"] == 5

    def test_encode_utterance_mode_separates_same_speaker(self, utterances_file, tmp_path):
        _, enc, _ = self._encode_decode(utterances_file, tmp_path, "utterance")
        records = read_records(enc)
        assert records[0]["sot_text"] == "hello world ⟨sc⟩ good morning ⟨eos⟩"

    def test_decode_warns_on_malformed_to_stderr(self, tmp_path):
        enc = tmp_path / "enc.jsonl"
        write_jsonl(enc, [{"group_id": "g1", "sot_text": "a ⟨sc⟩ ⟨sc⟩ b"}])
        out = tmp_path / "dec.jsonl"
        proc = run_cli("sot", "decode", "--in", str(enc), "--out", str(out))
        assert proc.returncode == 0
        assert "g1" in proc.stderr
        (record,) = read_records(out)
        assert record["texts"] == ["a", "b"]

    def test_score_fixture_one_sub_in_four_words(self, utterances_file, tmp_path):
        groups = tmp_path / "groups.jsonl"
        run_cli("group", "--in", str(utterances_file), "--out", str(groups))
        hyps = tmp_path / "hyps.jsonl"
        write_jsonl(
            hyps,
            [
                {"group_id": "s1-0000", "texts": ["hello word", "good morning"]},
                {"group_id": "s1-0001", "texts": ["bye"]},
            ],
        )
        proc = run_cli(
            "score", "--mode", "group",
            "--refs", str(utterances_file),
            "--groups", str(groups),
            "--hyps", str(hyps),
            "--format", "json",
        )
        assert proc.returncode == 0
        (report,) = [json.loads(l) for l in proc.stdout.splitlines()[1:]]
        rows = {r["num_speakers"]: r for r in report["by_num_speakers"]}
        assert rows["2"]["wer_pct"] == 25.0
        assert rows["2"]["sub"] == 1

    def test_single_group_fixture_reports_25_percent(self, tmp_path):
        # One two-speaker group, four reference words, one substitution.
        utts = tmp_path / "one.jsonl"
        write_jsonl(
            utts,
            [
                {"session_id": "s", "utterance_id": "u1", "speaker": "alice",
                 "start_s": 0.0, "end_s": 2.0, "text": "hello world"},
                {"session_id": "s", "utterance_id": "u2", "speaker": "bob",
                 "start_s": 1.0, "end_s": 3.0, "text": "good morning"},
            ],
        )
        groups = tmp_path / "groups.jsonl"
        run_cli("group", "--in", str(utts), "--out", str(groups))
        hyps = tmp_path / "hyps.jsonl"
        write_jsonl(
            hyps, [{"group_id": "s-0000", "texts": ["good morning", "hello word"]}]
        )
        proc = run_cli(
            "score", "--mode", "group", "--refs", str(utts),
            "--groups", str(groups), "--hyps", str(hyps), "--format", "json",
        )
        assert proc.returncode == 0
        (report,) = [json.loads(l) for l in proc.stdout.splitlines()[1:]]
        assert report["wer_pct"] == 25.0
        assert report["sub"] == 1
        assert report["ref_words"] == 4

    def test_score_jobs_parity(self, utterances_file, tmp_path):
        groups = tmp_path / "groups.jsonl"
        run_cli("group", "--in", str(utterances_file), "--out", str(groups))
        hyps = tmp_path / "hyps.jsonl"
        write_jsonl(
            hyps,
            [
                {"group_id": "s1-0000", "texts": ["hello word", "good morning"]},
                {"group_id": "s1-0001", "texts": ["bye"]},
            ],
        )
        reports = []
        for jobs in ("1", "2"):
            proc = run_cli(
                "score", "--mode", "group", "--refs", str(utterances_file),
                "--groups", str(groups), "--hyps", str(hyps),
                "--format", "json", "--jobs", jobs,
            )
            assert proc.returncode == 0, proc.stderr
            reports.append(proc.stdout)
        assert reports[0] == reports[1]

    def test_missing_group_hypothesis_is_validation_error(self, utterances_file, tmp_path):
        groups = tmp_path / "groups.jsonl"
        run_cli("group", "--in", str(utterances_file), "--out", str(groups))
        hyps = tmp_path / "hyps.jsonl"
        write_jsonl(hyps, [{"group_id": "s1-0000", "texts": ["hello world"]}])
        proc = run_cli(
            "score", "--mode", "group",
            "--refs", str(utterances_file),
            "--groups", str(groups),
            "--hyps", str(hyps),
        )
        assert proc.returncode == 1
        assert "s1-0001" in proc.stderr

    def test_score_utterance_mode(self, utterances_file, tmp_path):
        hyps = tmp_path / "uhyps.jsonl"
        write_jsonl(
            hyps,
            [
                {"utterance_id": "u1", "text": "hello word"},
                {"utterance_id": "u2", "text": "good morning"},
                {"utterance_id": "u3", "text": "bye"},
            ],
        )
        proc = run_cli(
            "score", "--mode", "utterance",
            "--refs", str(utterances_file),
            "--hyps", str(hyps),
            "--format", "json",
        )
        assert proc.returncode == 0
        (report,) = [json.loads(l) for l in proc.stdout.splitlines()[1:]]
        assert report["wer_pct"] == 20.0
        assert report["by_num_speakers"] == []

    def test_group_mode_requires_groups_flag(self, utterances_file, tmp_path):
        hyps = tmp_path / "hyps.jsonl"
        write_jsonl(hyps, [{"group_id": "g", "texts": []}])
        proc = run_cli(
            "score", "--mode", "group",
            "--refs", str(utterances_file),
            "--hyps", str(hyps),
        )
        assert proc.returncode == 1
        assert "--groups" in proc.stderr


class TestStatsCommand:
    def test_table_and_json(self, utterances_file, tmp_path):
        groups = tmp_path / "groups.jsonl"
        run_cli("group", "--in", str(utterances_file), "--out", str(groups))
        table = run_cli(
            "stats", "--groups", str(groups), "--utterances", str(utterances_file)
        )
        assert table.returncode == 0
        assert "Total" in table.stdout
        js = run_cli(
            "stats", "--groups", str(groups), "--utterances", str(utterances_file),
            "--format", "json",
        )
        (record,) = [json.loads(l) for l in js.stdout.splitlines()[1:]]
        assert record["total"]["num_segments"] == 2
        assert {b["num_speakers"] for b in record["buckets"]} == {1, 2}


class TestSimulateCommand:
    def test_seed_required(self, pool_dir):
        proc = run_cli(
            "simulate", "--pool", str(pool_dir / "pool.jsonl"),
            "--out-dir", str(pool_dir / "out"), "--count", "2",
        )
        assert proc.returncode == 1
        assert "--seed" in proc.stderr

    def test_byte_identical_across_runs_and_jobs(self, pool_dir):
        args = [
            "simulate", "--pool", str(pool_dir / "pool.jsonl"),
            "--count", "4", "--seed", "123", "--max-speakers", "3",
        ]
        outputs = []
        for name, jobs in [("a", "1"), ("b", "1"), ("c", "2")]:
            out = pool_dir / name
            proc = run_cli(*args, "--out-dir", str(out), "--jobs", jobs)
            assert proc.returncode == 0, proc.stderr
            manifest = (out / "manifest.jsonl").read_bytes()
            wavs = {
                p.name: p.read_bytes() for p in sorted(out.glob("*.wav"))
            }
            outputs.append((manifest, wavs))
        assert outputs[0] == outputs[1]
        assert outputs[0] == outputs[2]

    def test_manifest_contents(self, pool_dir):
        out = pool_dir / "mixes"
        proc = run_cli(
            "simulate", "--pool", str(pool_dir / "pool.jsonl"),
            "--out-dir", str(out), "--count", "3", "--seed", "5",
            "--max-speakers", "3",
        )
        assert proc.returncode == 0, proc.stderr
        records = read_records(out / "manifest.jsonl")
        assert [r["mixture_id"] for r in records] == [
            "mix-000000", "mix-000001", "mix-000002",
        ]
        for record in records:
            assert (out / record["wav"]).is_file()
            assert record["sot_text"].endswith("⟨eos⟩")
            assert record["num_speakers"] == len({e["speaker"] for e in record["entries"]})
