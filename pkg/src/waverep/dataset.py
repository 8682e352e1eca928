"""Audio ingestion, segmentation, activity gating and training-pair synthesis.

Signals are plain 1-D float64 arrays at a fixed 44100 Hz sample rate; files at
any other rate are rejected rather than resampled, because every model
hyper-parameter in this package is tied to 44100 Hz.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .wavio import read_wav

SAMPLE_RATE = 44100

#: numerical-stability epsilon shared with the additivity metric
ACTIVITY_EPS = 1e-24


@dataclass(frozen=True)
class CorruptionConfig:
    """Controls the two corruption processes that build training pairs."""

    gaussian_std: float = 1e-4
    segment_len: int = SAMPLE_RATE
    train_hop: int = SAMPLE_RATE // 2
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_std < 0:
            raise ValueError("gaussian_std must be >= 0")
        if not 0 < self.train_hop <= self.segment_len:
            raise ValueError("need 0 < train_hop <= segment_len")


class TrainingPair(NamedTuple):
    """One denoising training example.

    ``mixture`` is built by pure addition (no clipping), so it may exceed
    [-1, 1]; ``accomp`` is the exact segment that was added, kept so the
    additive construction stays bit-checkable.
    """

    voice: np.ndarray        # clean voice segment
    noisy_voice: np.ndarray  # voice + i.i.d. Gaussian noise
    mixture: np.ndarray      # voice + shuffled accompaniment segment
    accomp: np.ndarray       # the accompaniment segment used in `mixture`


def load_and_downmix(path) -> np.ndarray:
    """Load a WAV file as a mono float64 signal at 44100 Hz.

    Multi-channel audio is down-mixed by the per-sample mean across channels,
    which keeps the nominal [-1, 1] range.
    """
    frames, rate = read_wav(path)
    if rate != SAMPLE_RATE:
        raise DataError(f"{path}: sample rate {rate} != {SAMPLE_RATE} (resampling is unsupported)")
    mono = frames.mean(axis=1)
    if not np.all(np.isfinite(mono)):
        raise DataError(f"{path}: non-finite samples")
    return mono


def segment(x: np.ndarray, length: int, hop: int) -> list[np.ndarray]:
    """Split ``x`` into segments starting at 0, hop, 2*hop, ...

    The final partial segment is zero-padded to ``length`` so that every
    sample of the input appears in some segment.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot segment an empty signal")
    if length <= 0 or hop <= 0:
        raise ValueError("segment length and hop must be positive")
    out = []
    for start in range(0, x.size, hop):
        piece = x[start : start + length]
        if piece.size < length:
            piece = np.concatenate([piece, np.zeros(length - piece.size)])
        out.append(piece)
    return out


def is_active(x: np.ndarray, threshold_db: float = -10.0, eps: float = ACTIVITY_EPS) -> bool:
    """Energy gate used to discard silent voice segments.

    A segment is active iff ``10*log10(||x||^2 + eps) >= threshold_db``
    (boundary inclusive).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    x = np.asarray(x, dtype=np.float64)
    level_db = 10.0 * np.log10(float(x @ x) + eps)
    return bool(level_db >= threshold_db)


def make_training_pairs(
    voice_segments: Sequence[np.ndarray],
    accomp_segments: Sequence[np.ndarray],
    cfg: CorruptionConfig,
) -> Iterator[TrainingPair]:
    """Yield one :class:`TrainingPair` per voice segment.

    Both segment pools are shuffled independently, then paired; the pairing,
    the shuffles and the Gaussian noise are all a deterministic function of
    ``cfg.seed``.  With ``gaussian_std == 0`` the noisy voice equals the clean
    voice exactly (degenerate test mode).
    """
    if not len(voice_segments) or not len(accomp_segments):
        raise ValueError("both segment pools must be non-empty")
    n = cfg.segment_len
    for pool in (voice_segments, accomp_segments):
        for s in pool:
            if np.asarray(s).shape != (n,):
                raise ValueError(f"segment of shape {np.asarray(s).shape} != ({n},)")

    rng = np.random.default_rng(cfg.seed)
    voice_order = rng.permutation(len(voice_segments))
    accomp_order = rng.permutation(len(accomp_segments))
    for i, vi in enumerate(voice_order):
        voice = np.asarray(voice_segments[vi], dtype=np.float64)
        accomp = np.asarray(accomp_segments[accomp_order[i % len(accomp_order)]], dtype=np.float64)
        noise = rng.normal(0.0, cfg.gaussian_std, size=n)
        yield TrainingPair(
            voice=voice,
            noisy_voice=voice + noise,
            mixture=voice + accomp,
            accomp=accomp,
        )
