"""Multi-talker transcription toolkit.

Segments meeting transcripts into overlap-connected utterance groups,
serializes them into single-stream token sequences with speaker-change
markers, simulates constrained multi-talker audio mixtures, and scores
hypotheses with speaker-attributed and utterance-based word error rates.
"""

from .core import (
    EOS,
    SC,
    AudioBuffer,
    DataFormatError,
    ErrorCounts,
    Session,
    SotkitError,
    Utterance,
    ValidationError,
    require_valid,
    round_time,
    sessions_from_utterances,
    validate_session,
)
from .grouping import (
    BucketStats,
    GroupStats,
    UtteranceGroup,
    build_utterance_groups,
    group_stats,
    overlaps,
)
from .jsonl import FORMAT_VERSION, read_jsonl, read_utterances, write_jsonl
from .mixsim import (
    MixEntry,
    MixtureResult,
    MixtureSpec,
    PoolSource,
    SimConfig,
    TraceRng,
    render,
    run_simulation,
    sample_spec,
    speed_perturb,
)
from .scoring import (
    GroupHypothesis,
    GroupScore,
    Report,
    aggregate,
    concat_refs,
    score_group,
    score_utterance_eval,
    word_errors,
)
from .sot import DecodeResult, SotMode, SotSequence, deserialize, from_channels, serialize_fifo
from .wavio import read_wav, wav_duration_s, write_wav

__version__ = "0.1.0"

__all__ = [
    "EOS",
    "SC",
    "AudioBuffer",
    "BucketStats",
    "DataFormatError",
    "DecodeResult",
    "ErrorCounts",
    "FORMAT_VERSION",
    "GroupHypothesis",
    "GroupScore",
    "GroupStats",
    "MixEntry",
    "MixtureResult",
    "MixtureSpec",
    "PoolSource",
    "Report",
    "Session",
    "SimConfig",
    "SotMode",
    "SotSequence",
    "SotkitError",
    "TraceRng",
    "Utterance",
    "UtteranceGroup",
    "ValidationError",
    "aggregate",
    "build_utterance_groups",
    "concat_refs",
    "deserialize",
    "from_channels",
    "group_stats",
    "overlaps",
    "read_jsonl",
    "read_utterances",
    "read_wav",
    "render",
    "require_valid",
    "round_time",
    "run_simulation",
    "sample_spec",
    "score_group",
    "score_utterance_eval",
    "serialize_fifo",
    "sessions_from_utterances",
    "speed_perturb",
    "validate_session",
    "wav_duration_s",
    "word_errors",
    "write_jsonl",
    "write_wav",
]
