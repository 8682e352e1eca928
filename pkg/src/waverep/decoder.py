"""Amplitude-modulated cosine synthesis back end.

Each of the C components owns a carrier frequency, a phase and a length-L
modulation envelope; its synthesis kernel is

    w[c, l] = cos(2*pi * g(f_c) * l + rho_c) * b[c, l],

where g squares the normalized carrier frequency by default (the squaring is
a learnable-frequency warping that favors low frequencies; it can be switched
off).  A representation is rendered by weighting kernels with the frame
activations and overlap-adding frames every ``stride`` samples.  Only f, rho
and b are ever trained; w is recomputed from them on every forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .autodiff import Node, Tape, as_node
from .dataset import SAMPLE_RATE


@dataclass
class DecoderParameters:
    freq: np.ndarray       # (C,) carrier frequencies, normalized by the sample rate
    phase: np.ndarray      # (C,) phases in radians
    modulator: np.ndarray  # (C, L) amplitude envelopes
    stride: int
    square_freq: bool = True

    @property
    def n_components(self) -> int:
        return self.freq.shape[0]

    @property
    def kernel_len(self) -> int:
        return self.modulator.shape[1]


def mel_scale(f_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz, dtype=np.float64) / 700.0)


def mel_inverse(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_init_frequencies(n_components: int, f_lo: float = 30.0, f_hi: float = 22050.0) -> np.ndarray:
    """Normalized carrier frequencies spaced linearly on the mel scale.

    Returns ``n_components`` strictly increasing values in (0, 0.5], the
    endpoints mapping back to ``f_lo`` and ``f_hi`` Hz.
    """
    if n_components < 2:
        raise ValueError("need at least 2 components")
    mels = np.linspace(mel_scale(f_lo), mel_scale(f_hi), n_components)
    # the top endpoint can overshoot Nyquist by one ulp through the round trip
    return np.minimum(mel_inverse(mels) / SAMPLE_RATE, 0.5)


def init_decoder(
    n_components: int,
    kernel_len: int,
    stride: int,
    square_freq: bool = True,
) -> DecoderParameters:
    """Mel-spaced carriers, zero phases, constant 1/(C+L) modulators."""
    freq = mel_init_frequencies(n_components)
    phase = np.zeros(n_components)
    modulator = np.full((n_components, kernel_len), 1.0 / (n_components + kernel_len))
    return DecoderParameters(freq, phase, modulator, int(stride), square_freq)


def build_kernels(
    freq: Node,
    phase: Node,
    modulator: Node,
    square_freq: bool = True,
    tape: Tape | None = None,
) -> Node:
    """Materialize the (C, L) synthesis kernels from their parameterization."""
    f = freq.value[:, None]
    carrier = f * f if square_freq else f
    l_idx = np.arange(modulator.value.shape[1], dtype=np.float64)[None, :]
    theta = 2.0 * np.pi * carrier * l_idx + phase.value[:, None]
    cos_t = np.cos(theta)
    out = Node(cos_t * modulator.value)

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            g = out.grad
            modulator.add_grad(g * cos_t)
            msin = g * np.sin(theta) * modulator.value
            phase.add_grad(-msin.sum(axis=1))
            dcarrier = 2.0 * freq.value if square_freq else np.ones_like(freq.value)
            freq.add_grad(-(msin * l_idx).sum(axis=1) * 2.0 * np.pi * dcarrier)
        tape.record(backward)
    return out


def synthesize(
    a: Node,
    kernels: Node,
    stride: int,
    out_len: int,
    tape: Tape | None = None,
) -> Node:
    """Overlap-add synthesis: frame t contributes ``a[:, t] @ kernels`` at
    sample offset ``t * stride``; the natural (T-1)*stride + L samples are
    truncated (or zero-extended) to ``out_len``."""
    av, wv = a.value, kernels.value
    if av.shape[0] != wv.shape[0]:
        raise ValueError(f"representation has {av.shape[0]} rows but there are {wv.shape[0]} kernels")
    n_frames = av.shape[1]
    frame_len = wv.shape[1]
    full = (n_frames - 1) * stride + frame_len
    frames = wv.T @ av  # (L, T) modulated components
    y = np.zeros(full)
    for t in range(n_frames):
        y[t * stride : t * stride + frame_len] += frames[:, t]
    if out_len <= full:
        y = y[:out_len]
    else:
        y = np.concatenate([y, np.zeros(out_len - full)])
    out = Node(y)

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            g = np.zeros(full)
            upto = min(out_len, full)
            g[:upto] = out.grad[:upto]
            dframes = np.empty_like(frames)
            for t in range(n_frames):
                dframes[:, t] = g[t * stride : t * stride + frame_len]
            kernels.add_grad(av @ dframes.T)
            a.add_grad(wv @ dframes)
        tape.record(backward)
    return out


def decode(
    a: Node,
    params: DecoderParameters,
    out_len: int,
    tape: Tape | None = None,
    nodes: Mapping[str, Node] | None = None,
) -> Node:
    """Build kernels from the current parameters and synthesize ``a``."""
    nodes = nodes or {}
    fn = nodes.get("freq") or as_node(params.freq)
    pn = nodes.get("phase") or as_node(params.phase)
    mn = nodes.get("modulator") or as_node(params.modulator)
    w = build_kernels(fn, pn, mn, params.square_freq, tape)
    return synthesize(a, w, params.stride, out_len, tape)


def kernel_matrix(params: DecoderParameters) -> np.ndarray:
    """Forward-only (C, L) kernel matrix for the current parameters."""
    return build_kernels(as_node(params.freq), as_node(params.phase),
                         as_node(params.modulator), params.square_freq).value


def decode_values(a: np.ndarray, params: DecoderParameters, out_len: int) -> np.ndarray:
    """Forward-only decode of a plain (C, T) array."""
    return decode(as_node(a), params, out_len).value
