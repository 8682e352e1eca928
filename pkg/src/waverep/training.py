"""Training loop: Adam over the encoder/decoder parameters with per-batch
gradient accumulation on a shared tape, optional early stopping on the
epoch-mean reconstruction loss, and deterministic behavior as a function of
(seed, config, data).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Node, Tape
from .checkpoint import save_model
from .dataset import CorruptionConfig, make_training_pairs
from .decoder import DecoderParameters, decode
from .encoder import EncoderParameters, encode
from .errors import NumericalError
from .losses import LossConfig, total_loss


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_adam(params: dict[str, np.ndarray], lr: float = 1e-4) -> AdamState:
    state = AdamState(lr=lr)
    for name, p in params.items():
        state.m[name] = np.zeros_like(p)
        state.v[name] = np.zeros_like(p)
    return state


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """Bias-corrected Adam update, applied to the parameter arrays in place."""
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name!r} at step {state.step}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    epochs: int = 10
    variant: str = "tv"            # "tv" or "sinkhorn"
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    early_stop: bool = True
    lr: float = 1e-4
    gaussian_std: float = 1e-4

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass
class TrainResult:
    encoder: EncoderParameters
    decoder: DecoderParameters
    history: list[dict]             # one record per optimizer step
    epoch_mean_neg_snr: list[float]  # index 0 is the pre-training baseline
    epochs_run: int
    early_stopped: bool


def backward(loss_node: Node, tape: Tape, param_nodes: dict[str, Node], seed=1.0) -> dict[str, np.ndarray]:
    """Replay the tape and collect gradients for every parameter node.

    Parameters whose gradient path vanished (e.g. a fully clamped loss)
    get zero gradients.
    """
    tape.backward(loss_node, seed)
    return {
        name: (node.grad if node.grad is not None else np.zeros_like(node.value))
        for name, node in param_nodes.items()
    }


def _param_dict(enc: EncoderParameters, dec: DecoderParameters) -> dict[str, np.ndarray]:
    # the decoder kernels themselves are deliberately absent: they are
    # recomputed from freq/phase/modulator on every forward pass
    return {
        "kernels": enc.kernels,
        "dilated_kernels": enc.dilated_kernels,
        "freq": dec.freq,
        "phase": dec.phase,
        "modulator": dec.modulator,
    }


def _epoch_seed(seed: int, epoch: int) -> int:
    return (seed * 1_000_003 + epoch) % 2**63


def train(
    voice_segments: Sequence[np.ndarray],
    accomp_segments: Sequence[np.ndarray],
    enc: EncoderParameters,
    dec: DecoderParameters,
    cfg: TrainConfig,
    log_path=None,
    checkpoint_path=None,
) -> TrainResult:
    """Optimize the autoencoder on pre-segmented stems.

    Every epoch reshuffles both pools and regenerates corruption noise,
    deterministically in ``cfg.seed``.  Per batch item the noisy voice is
    encoded and decoded against the clean voice (reconstruction term) and the
    synthetic mixture is encoded for the representation term.  Early stopping
    triggers when the epoch-mean reconstruction loss stops decreasing.
    Parameter arrays inside ``enc``/``dec`` are updated in place.
    """
    if not len(voice_segments) or not len(accomp_segments):
        raise ValueError("training needs non-empty voice and accompaniment segment pools")
    seg_len = len(voice_segments[0])
    params = _param_dict(enc, dec)
    adam = init_adam(params, lr=cfg.lr)
    history: list[dict] = []
    log_file = open(log_path, "w") if log_path is not None else None

    def pairs_for(epoch: int):
        cc = CorruptionConfig(
            gaussian_std=cfg.gaussian_std,
            segment_len=seg_len,
            train_hop=seg_len,  # hop is segmentation metadata, unused here
            seed=_epoch_seed(cfg.seed, epoch),
        )
        return make_training_pairs(voice_segments, accomp_segments, cc)

    def forward(pair, tape=None, nodes=None):
        rep_v = encode(pair.noisy_voice, enc, tape, nodes=nodes)
        xhat = decode(rep_v.a, dec, len(pair.voice), tape, nodes=nodes)
        rep_m = encode(pair.mixture, enc, tape, nodes=nodes)
        return total_loss(pair.voice, xhat, rep_m.a, cfg.loss, cfg.variant, tape)

    try:
        # pre-training baseline over the first epoch's stream, no updates
        baseline = [forward(pair).neg_snr_db for pair in pairs_for(1)]
        epoch_means = [float(np.mean(baseline))]

        step = 0
        early_stopped = False
        epochs_run = 0
        for epoch in range(1, cfg.epochs + 1):
            epochs_run = epoch
            epoch_neg_snrs: list[float] = []
            batch: list = []

            def run_batch(items):
                nonlocal step
                nodes = {name: Node(arr) for name, arr in params.items()}
                breakdowns = []
                for pair in items:
                    tape = Tape()
                    bd = forward(pair, tape, nodes)
                    tape.backward(bd.total, seed=1.0 / len(items))
                    breakdowns.append(bd)
                grads = {
                    name: (node.grad if node.grad is not None else np.zeros_like(node.value))
                    for name, node in nodes.items()
                }
                adam_step(params, grads, adam)
                step += 1
                record = {
                    "step": step,
                    "epoch": epoch,
                    "neg_snr": float(np.mean([b.neg_snr_db for b in breakdowns])),
                    "rep_loss": float(np.mean([b.rep_loss for b in breakdowns])),
                    "total": float(np.mean([float(b.total.value) for b in breakdowns])),
                    "saturation": float(max(b.saturation for b in breakdowns)),
                }
                history.append(record)
                if log_file is not None:
                    log_file.write(json.dumps(record) + "\n")
                epoch_neg_snrs.extend(b.neg_snr_db for b in breakdowns)

            for pair in pairs_for(epoch):
                batch.append(pair)
                if len(batch) == cfg.batch_size:
                    run_batch(batch)
                    batch = []
            if batch:
                run_batch(batch)

            epoch_means.append(float(np.mean(epoch_neg_snrs)))
            if cfg.early_stop and epoch >= 2 and epoch_means[epoch] >= epoch_means[epoch - 1]:
                early_stopped = True
                break
    finally:
        if log_file is not None:
            log_file.close()

    if checkpoint_path is not None:
        save_model(checkpoint_path, enc, dec)
    return TrainResult(enc, dec, history, epoch_means, epochs_run, early_stopped)
