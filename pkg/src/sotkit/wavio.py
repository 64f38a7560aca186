"""16-bit PCM mono WAV reading and writing (RIFF, little-endian).

Quantization is round-half-away-from-zero of amplitude x 32767, and
reading divides by 32767, so write -> read round-trips bit-exactly for
any legal amplitude.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .core import AudioBuffer, DataFormatError


def write_wav(path: str | Path, audio: AudioBuffer) -> None:
    scaled = audio.samples * 32767.0
    quantized = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    pcm = quantized.astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(audio.sample_rate_hz)
        fh.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> AudioBuffer:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise DataFormatError(f"{path}: expected mono audio")
        if fh.getsampwidth() != 2:
            raise DataFormatError(f"{path}: expected 16-bit PCM")
        rate = fh.getframerate()
        frames = fh.readframes(fh.getnframes())
    pcm = np.frombuffer(frames, dtype="<i2")
    samples = np.clip(pcm.astype(np.float64) / 32767.0, -1.0, 1.0)
    return AudioBuffer(samples=samples, sample_rate_hz=rate)


def wav_duration_s(path: str | Path) -> float:
    """Duration from the header without reading sample data."""
    with wave.open(str(path), "rb") as fh:
        return fh.getnframes() / fh.getframerate()
