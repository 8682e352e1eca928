"""Strided/dilated convolutional analysis front end.

A signal of N samples is mapped to a non-negative representation of shape
(C, T) with T = ceil(N / stride): a strided cross-correlation against C
kernels, a dilated channel-mixing convolution on top of it, a residual
connection, and a ReLU.  Both layers zero-pad on the right, so frame t is
aligned with sample ``t * stride``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autodiff import Node, Tape, as_node


@dataclass
class EncoderParameters:
    kernels: np.ndarray          # (C, L) first-layer analysis kernels
    dilated_kernels: np.ndarray  # (C, L2, C) second-layer channel-mixing kernels
    stride: int
    dilation: int

    @property
    def n_components(self) -> int:
        return self.kernels.shape[0]

    @property
    def kernel_len(self) -> int:
        return self.kernels.shape[1]


@dataclass
class Representation:
    """Encoder output with the latents retained for the backward pass."""

    a: Node   # (C, T) non-negative representation
    h1: Node  # (C, T) first-layer latent
    h2: Node  # (C, T) dilated-layer latent


def init_encoder(
    n_components: int,
    kernel_len: int,
    kernel2_len: int,
    stride: int,
    dilation: int,
    seed: int = 0,
) -> EncoderParameters:
    """Draw both kernel sets i.i.d. uniform on (-sqrt(3/C), +sqrt(3/C))."""
    if min(n_components, kernel_len, kernel2_len, stride, dilation) < 1:
        raise ValueError("all encoder dimensions must be positive")
    bound = math.sqrt(3.0 / n_components)
    rng = np.random.default_rng(seed)
    kernels = rng.uniform(-bound, bound, size=(n_components, kernel_len))
    dilated = rng.uniform(-bound, bound, size=(n_components, kernel2_len, n_components))
    return EncoderParameters(kernels, dilated, int(stride), int(dilation))


def num_frames(n_samples: int, stride: int) -> int:
    return -(-n_samples // stride)


def _windows(x: np.ndarray, length: int, stride: int, frames: int) -> np.ndarray:
    """(frames, length) view of x with right zero-padding as needed."""
    needed = (frames - 1) * stride + length
    if needed > x.size:
        x = np.concatenate([x, np.zeros(needed - x.size)])
    return sliding_window_view(x, length)[:: stride][:frames]


def conv1(x: np.ndarray, kernels: Node, stride: int, tape: Tape | None = None) -> Node:
    """First layer: cross-correlation of ``x`` with each kernel at ``stride``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("conv1 expects a non-empty 1-D signal")
    frames = num_frames(x.size, stride)
    win = _windows(x, kernels.value.shape[1], stride, frames)  # (T, L)
    out = Node(kernels.value @ win.T)

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            kernels.add_grad(out.grad @ win)
        tape.record(backward)
    return out


def conv2_dilated(h: Node, kernels: Node, dilation: int, tape: Tape | None = None) -> Node:
    """Second layer: unit-stride dilated convolution mixing all channels.

    Output frame t aggregates input frames t, t+d, t+2d, ...; the input is
    zero-padded on the right so the output keeps exactly T frames.
    """
    kp = kernels.value  # (C_out, L2, C_in)
    c_out, l2, c_in = kp.shape
    hv = h.value
    if hv.shape[0] != c_in:
        raise ValueError(f"channel mismatch: latent has {hv.shape[0]} rows, kernels expect {c_in}")
    t = hv.shape[1]
    pad = dilation * (l2 - 1)
    hp = np.pad(hv, ((0, 0), (0, pad)))
    out_val = np.zeros((c_out, t))
    for tap in range(l2):
        off = tap * dilation
        out_val += kp[:, tap, :] @ hp[:, off : off + t]
    out = Node(out_val)

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            g = out.grad
            dk = np.empty_like(kp)
            dhp = np.zeros_like(hp)
            for tap in range(l2):
                off = tap * dilation
                dk[:, tap, :] = g @ hp[:, off : off + t].T
                dhp[:, off : off + t] += kp[:, tap, :].T @ g
            kernels.add_grad(dk)
            h.add_grad(dhp[:, :t])
        tape.record(backward)
    return out


def relu_residual(h2: Node, h1: Node, tape: Tape | None = None, linear: bool = False) -> Node:
    """Residual add followed by ReLU; ``linear=True`` bypasses the ReLU.

    The linear mode is a diagnostic hook (it makes the whole encoder a linear
    map); the subgradient at exactly zero is taken as zero.
    """
    pre = h2.value + h1.value
    if linear:
        out = Node(pre)
        mask = None
    else:
        mask = pre > 0
        out = Node(np.where(mask, pre, 0.0))

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            g = out.grad if mask is None else out.grad * mask
            h1.add_grad(g)
            h2.add_grad(g)
        tape.record(backward)
    return out


def encode(
    x: np.ndarray,
    params: EncoderParameters,
    tape: Tape | None = None,
    linear: bool = False,
    nodes: Mapping[str, Node] | None = None,
) -> Representation:
    """Run the full analysis front end.

    ``nodes`` lets a training loop supply shared parameter nodes (keyed
    ``"kernels"`` / ``"dilated_kernels"``) so gradients accumulate there.
    """
    nodes = nodes or {}
    kn = nodes.get("kernels") or as_node(params.kernels)
    dn = nodes.get("dilated_kernels") or as_node(params.dilated_kernels)
    h1 = conv1(x, kn, params.stride, tape)
    h2 = conv2_dilated(h1, dn, params.dilation, tape)
    a = relu_residual(h2, h1, tape, linear=linear)
    return Representation(a=a, h1=h1, h2=h2)


def encode_values(x: np.ndarray, params: EncoderParameters, linear: bool = False) -> np.ndarray:
    """Forward-only encode returning the (C, T) representation array."""
    return encode(x, params, linear=linear).a.value
