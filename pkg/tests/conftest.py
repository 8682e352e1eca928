"""Shared helpers: hand-built WAV files (independent of the package writer)."""

import struct

import numpy as np
import pytest


def _wav_bytes(fmt_tag: int, channels: int, rate: int, bits: int, payload: bytes) -> bytes:
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, channels, rate, rate * block, block, bits)
    body = (
        b"WAVE"
        + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"data" + struct.pack("<I", len(payload)) + payload
    )
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_pcm16(path, frames: np.ndarray, rate: int = 44100) -> None:
    """frames: (n, channels) int16 values."""
    frames = np.asarray(frames, dtype="<i2")
    path.write_bytes(_wav_bytes(1, frames.shape[1], rate, 16, frames.tobytes()))


def write_pcm24(path, values: np.ndarray, rate: int = 44100) -> None:
    """values: (n,) mono ints in [-2^23, 2^23 - 1]."""
    raw = bytearray()
    for value in np.asarray(values, dtype=np.int64):
        raw += struct.pack("<i", int(value))[:3]
    path.write_bytes(_wav_bytes(1, 1, rate, 24, bytes(raw)))


def write_float32(path, frames: np.ndarray, rate: int = 44100) -> None:
    frames = np.asarray(frames, dtype="<f4")
    if frames.ndim == 1:
        frames = frames[:, None]
    path.write_bytes(_wav_bytes(3, frames.shape[1], rate, 32, frames.tobytes()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
