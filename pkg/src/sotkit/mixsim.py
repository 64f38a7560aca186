"""Constrained multi-talker mixture simulation.

One mixture draws N sources (uniform over 1..max_speakers, pairwise
distinct speakers), then places them left to right: each source after
the first starts at least the configured gap after its predecessor but
strictly before that predecessor ends, which guarantees every source
has an overlapping region with another one.  The delayed sources are
summed at unchanged gain, peak-protected, and speed-perturbed.

All randomness flows through a Philox-backed generator whose draws are
logged, so a (pool, config, seed) triple reproduces every mixture
bit-exactly, in any batch order, on any worker count.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .core import AudioBuffer, RESERVED_TOKENS, ValidationError
from .jsonl import get_field, read_jsonl
from .sot import SotMode, from_channels
from .wavio import read_wav, wav_duration_s, write_wav


@dataclass(frozen=True)
class SimConfig:
    """Knobs of the mixture sampler."""

    seed: int
    max_speakers: int = 5
    min_start_gap_s: float = 0.5
    speed_range: tuple[float, float] = (0.9, 1.1)
    sample_rate_hz: int = 16000
    max_retries: int = 100
    speed_discrete: bool = False

    def __post_init__(self) -> None:
        if self.max_speakers < 1:
            raise ValidationError("max_speakers must be at least 1")
        if self.min_start_gap_s <= 0:
            raise ValidationError("min_start_gap_s must be positive")
        low, high = self.speed_range
        if not 0 < low <= high:
            raise ValidationError("speed_range must satisfy 0 < low <= high")
        if self.speed_discrete and not low <= 1.0 <= high:
            raise ValidationError("discrete speed factors require low <= 1.0 <= high")
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample_rate_hz must be positive")
        if self.max_retries < 1:
            raise ValidationError("max_retries must be at least 1")

    @property
    def discrete_speed_factors(self) -> tuple[float, ...]:
        low, high = self.speed_range
        return tuple(sorted({low, 1.0, high}))


@dataclass(frozen=True)
class PoolSource:
    """A single-speaker utterance available for mixing."""

    source_id: str
    speaker: str
    text: tuple[str, ...]
    duration_s: float
    wav_path: Path | None = None


@dataclass(frozen=True)
class MixEntry:
    source_id: str
    speaker: str
    text: tuple[str, ...]
    offset_s: float
    duration_s: float


@dataclass(frozen=True)
class MixtureSpec:
    """A sampled simulation plan, sufficient to re-render the mixture."""

    mixture_id: str
    entries: tuple[MixEntry, ...]
    speed_factor: float
    seed_trace: dict = field(compare=False)

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValidationError("mixture must contain at least one entry")
        offsets = [e.offset_s for e in self.entries]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValidationError("entry offsets must be strictly increasing")
        speakers = [e.speaker for e in self.entries]
        if len(set(speakers)) != len(speakers):
            raise ValidationError("mixture speakers must be pairwise distinct")


@dataclass(frozen=True, eq=False)
class MixtureResult:
    audio: AudioBuffer
    spec: MixtureSpec
    sot_text: str
    num_speakers: int


class TraceRng:
    """Named, versioned random stream with a log of every draw.

    Streams with the same seed but different indices are statistically
    independent, so a batch can be sampled in parallel with one stream
    per mixture and stay reproducible.
    """

    GENERATOR = "philox4x64"

    def __init__(self, seed: int, stream: int = 0):
        self.seed = seed
        self.stream = stream
        key = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
        self._gen = np.random.Generator(np.random.Philox(key))
        self._draws: list[dict] = []

    def integers(self, name: str, low: int, high: int) -> int:
        value = int(self._gen.integers(low, high))
        self._draws.append({"draw": name, "value": value})
        return value

    def uniform(self, name: str, low: float, high: float) -> float:
        value = float(self._gen.uniform(low, high))
        self._draws.append({"draw": name, "value": value})
        return value

    def trace(self) -> dict:
        return {
            "rng": self.GENERATOR,
            "seed": self.seed,
            "stream": self.stream,
            "draws": list(self._draws),
        }


def check_pool(pool: list[PoolSource], config: SimConfig) -> None:
    """Enforce the sampler's preconditions on the source pool."""
    if len(pool) < config.max_speakers:
        raise ValidationError(
            f"pool has {len(pool)} sources; need at least {config.max_speakers}"
        )
    speakers = {s.speaker for s in pool}
    if len(speakers) < min(2, config.max_speakers):
        raise ValidationError("pool must span at least 2 distinct speakers")


def sample_spec(
    pool: list[PoolSource],
    config: SimConfig,
    rng: TraceRng,
    mixture_id: str,
) -> MixtureSpec:
    """Draw one mixture plan satisfying all placement constraints.

    N is uniform over 1..max_speakers.  Infeasible draws (a predecessor
    too short to host the required gap plus an overlap, or speakers
    exhausted) resample the sources up to max_retries, keeping N fixed.
    """
    check_pool(pool, config)
    epsilon = 1.0 / config.sample_rate_hz
    n = rng.integers("num_speakers", 1, config.max_speakers + 1)
    last_problem = "no draw attempted"
    for _ in range(config.max_retries):
        chosen: list[PoolSource] = []
        used_speakers: set[str] = set()
        for i in range(n):
            eligible = [s for s in pool if s.speaker not in used_speakers]
            if not eligible:
                break
            src = eligible[rng.integers(f"source_{i}", 0, len(eligible))]
            chosen.append(src)
            used_speakers.add(src.speaker)
        if len(chosen) < n:
            last_problem = f"only {len(chosen)} distinct speakers available"
            continue

        offsets = [0.0]
        placed = True
        for i in range(1, n):
            prev = chosen[i - 1]
            low = offsets[-1] + config.min_start_gap_s
            high = offsets[-1] + prev.duration_s - epsilon
            if high < low:
                last_problem = (
                    f"source {prev.source_id!r} ({prev.duration_s:.3f} s) too "
                    f"short for gap {config.min_start_gap_s} s plus overlap"
                )
                placed = False
                break
            offsets.append(rng.uniform(f"offset_{i}", low, high))
        if not placed:
            continue

        if config.speed_discrete:
            factors = config.discrete_speed_factors
            speed = factors[rng.integers("speed_factor", 0, len(factors))]
        else:
            speed = rng.uniform("speed_factor", *config.speed_range)

        entries = tuple(
            MixEntry(
                source_id=src.source_id,
                speaker=src.speaker,
                text=src.text,
                offset_s=offset,
                duration_s=src.duration_s,
            )
            for src, offset in zip(chosen, offsets)
        )
        return MixtureSpec(
            mixture_id=mixture_id,
            entries=entries,
            speed_factor=speed,
            seed_trace=rng.trace(),
        )
    raise ValidationError(
        f"infeasible pool: {last_problem} (gave up after {config.max_retries} attempts)"
    )


def speed_perturb(audio: AudioBuffer, factor: float) -> AudioBuffer:
    """Resample by linear interpolation at positions i * factor.

    Output length is round(input_length / factor); factor 1.0 returns
    the input unchanged, bit for bit.
    """
    if factor <= 0:
        raise ValidationError(f"speed factor must be positive, got {factor}")
    if factor == 1.0:
        return audio
    n_in = len(audio)
    n_out = max(1, int(math.floor(n_in / factor + 0.5)))
    positions = np.arange(n_out, dtype=np.float64) * factor
    samples = np.interp(positions, np.arange(n_in, dtype=np.float64), audio.samples)
    return AudioBuffer(samples=samples, sample_rate_hz=audio.sample_rate_hz)


AudioLookup = Mapping[str, AudioBuffer] | Callable[[str], AudioBuffer | None]


def render(
    spec: MixtureSpec,
    audio_lookup: AudioLookup,
    sample_rate_hz: int | None = None,
) -> MixtureResult:
    """Mix the planned sources into audio plus a serialized transcript.

    Sources are summed at unchanged gain after delay-shifting (offsets
    discretized to samples, half up).  If the summed peak exceeds full
    scale the whole mixture is scaled down by 1/peak; then the speed
    factor is applied.  The transcript serializes entry texts in offset
    order and is unaffected by the speed factor.
    """
    resolve = audio_lookup.get if isinstance(audio_lookup, Mapping) else audio_lookup
    buffers: list[AudioBuffer] = []
    for entry in spec.entries:
        audio = resolve(entry.source_id)
        if audio is None:
            raise ValidationError(f"missing audio for source {entry.source_id!r}")
        buffers.append(audio)
    rates = {b.sample_rate_hz for b in buffers}
    if len(rates) > 1 or (sample_rate_hz is not None and rates != {sample_rate_hz}):
        raise ValidationError(
            f"sample-rate mismatch: sources at {sorted(rates)} Hz"
            + (f", expected {sample_rate_hz} Hz" if sample_rate_hz else "")
        )
    rate = rates.pop()

    starts = [
        int(math.floor(entry.offset_s * rate + 0.5)) for entry in spec.entries
    ]
    length = max(start + len(buf) for start, buf in zip(starts, buffers))
    mix = np.zeros(length, dtype=np.float64)
    for start, buf in zip(starts, buffers):
        mix[start : start + len(buf)] += buf.samples
    peak = float(np.max(np.abs(mix)))
    if peak > 1.0:
        mix = mix / peak

    audio_out = speed_perturb(
        AudioBuffer(samples=mix, sample_rate_hz=rate), spec.speed_factor
    )
    sequence = from_channels(
        [entry.text for entry in spec.entries], SotMode.FIFO_UTTERANCE
    )
    return MixtureResult(
        audio=audio_out,
        spec=spec,
        sot_text=sequence.text,
        num_speakers=len({entry.speaker for entry in spec.entries}),
    )


def load_pool(path: str | Path) -> list[PoolSource]:
    """Read a source pool: one record per single-speaker clip.

    Records carry {"source_id", "speaker", "transcript", "wav"}; wav
    paths are resolved relative to the pool file.  Durations come from
    the WAV headers.
    """
    base = Path(path).parent
    sources = []
    seen: set[str] = set()
    for lineno, obj in read_jsonl(path):
        source_id = str(get_field(obj, "source_id", path, lineno))
        if source_id in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate source_id {source_id!r}")
        seen.add(source_id)
        text = tuple(str(get_field(obj, "transcript", path, lineno)).split())
        if not text:
            raise ValidationError(f"{path}:{lineno}: source {source_id!r} has an empty transcript")
        for token in text:
            if token in RESERVED_TOKENS:
                raise ValidationError(
                    f"{path}:{lineno}: source {source_id!r} uses reserved token {token!r}"
                )
        wav_path = base / str(get_field(obj, "wav", path, lineno))
        sources.append(
            PoolSource(
                source_id=source_id,
                speaker=str(get_field(obj, "speaker", path, lineno)),
                text=text,
                duration_s=wav_duration_s(wav_path),
                wav_path=wav_path,
            )
        )
    return sources


def manifest_record(result: MixtureResult, wav_name: str) -> dict:
    return {
        "mixture_id": result.spec.mixture_id,
        "wav": wav_name,
        "speed_factor": result.spec.speed_factor,
        "num_speakers": result.num_speakers,
        "entries": [
            {
                "source_id": e.source_id,
                "speaker": e.speaker,
                "offset_s": e.offset_s,
                "duration_s": e.duration_s,
                "transcript": " ".join(e.text),
            }
            for e in result.spec.entries
        ],
        "sot_text": result.sot_text,
    }


_WORKER: dict = {}


def _init_worker(pool: list[PoolSource], config: SimConfig, out_dir: str) -> None:
    _WORKER["pool"] = pool
    _WORKER["config"] = config
    _WORKER["out_dir"] = Path(out_dir)
    _WORKER["audio"] = {}


def _pool_audio(pool: list[PoolSource], cache: dict) -> dict[str, AudioBuffer]:
    for src in pool:
        if src.source_id not in cache:
            if src.wav_path is None:
                raise ValidationError(f"source {src.source_id!r} has no audio file")
            cache[src.source_id] = read_wav(src.wav_path)
    return cache


def _simulate_one(index: int) -> dict:
    pool, config = _WORKER["pool"], _WORKER["config"]
    rng = TraceRng(config.seed, stream=index)
    spec = sample_spec(pool, config, rng, mixture_id=f"mix-{index:06d}")
    audio = _pool_audio([s for s in pool if s.source_id in {e.source_id for e in spec.entries}],
                        _WORKER["audio"])
    result = render(spec, audio, sample_rate_hz=config.sample_rate_hz)
    wav_name = f"{spec.mixture_id}.wav"
    write_wav(_WORKER["out_dir"] / wav_name, result.audio)
    return manifest_record(result, wav_name)


def run_simulation(
    pool: list[PoolSource],
    config: SimConfig,
    count: int,
    out_dir: str | Path,
    jobs: int = 1,
) -> list[dict]:
    """Render ``count`` mixtures into out_dir; return manifest records.

    Mixture i always uses random stream i, so the output is independent
    of the worker count and ordered by mixture_id.
    """
    if count < 1:
        raise ValidationError("count must be at least 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_init_worker,
            initargs=(pool, config, str(out_dir)),
        ) as executor:
            records = list(executor.map(_simulate_one, range(count)))
    else:
        _init_worker(pool, config, str(out_dir))
        records = [_simulate_one(i) for i in range(count)]
    return sorted(records, key=lambda r: r["mixture_id"])
