"""Self-contained correctness oracles: central-difference gradient checks for
every differentiable operation, and brute-force optimal-transport checks
(permutation enumeration) for the Sinkhorn solver.

The oracles deliberately share no code with the analytic paths they verify:
gradients are re-derived numerically from forward evaluations only, and
transport optima are found by enumerating assignments.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from .autodiff import Node, Tape, as_node
from .decoder import build_kernels, decode, synthesize
from .encoder import EncoderParameters, conv1, conv2_dilated, encode, init_encoder, relu_residual
from .decoder import DecoderParameters, mel_init_frequencies
from .losses import (
    LossConfig,
    neg_snr,
    sinkhorn_loss,
    sinkhorn_plan,
    total_loss,
    tv_loss,
)

GRAD_TOLERANCE = 1e-4
FD_STEP = 1e-5


def central_difference(fn: Callable[[], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of ``fn()`` w.r.t. every entry of ``x``.

    ``fn`` must read ``x`` by reference; entries are perturbed in place and
    restored afterwards.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        f_plus = fn()
        x[idx] = orig - step
        f_minus = fn()
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
        it.iternext()
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    """Entrywise |a - n| / max(|a|, |n|, floor), maximized.

    The floor keeps finite-difference round-off on near-zero entries from
    inflating the relative error; genuine formula bugs show up at the scale
    of the gradients themselves, far above it.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / scale))


def _weighted_sum(node: Node, weights: np.ndarray, tape: Tape | None) -> Node:
    """Reduce a node to a scalar via a fixed random functional."""
    out = Node(float((node.value * weights).sum()))
    if tape is not None:
        def backward():
            if out.grad is None:
                return
            node.add_grad(float(out.grad) * weights)
        tape.record(backward)
    return out


def _compare(forward: Callable[[], float], analytic: dict[str, np.ndarray],
             tensors: dict[str, np.ndarray], out: dict[str, float], prefix: str) -> None:
    for name, arr in tensors.items():
        numeric = central_difference(forward, arr)
        out[f"{prefix}/{name}"] = max_relative_error(analytic[name], numeric)


def _toy_model(seed: int) -> tuple[EncoderParameters, DecoderParameters, np.random.Generator]:
    rng = np.random.default_rng(seed)
    enc = init_encoder(n_components=3, kernel_len=8, kernel2_len=2, stride=2, dilation=2, seed=seed)
    dec = DecoderParameters(
        freq=mel_init_frequencies(3) + rng.uniform(0.01, 0.05, 3),
        phase=rng.uniform(-0.5, 0.5, 3),
        modulator=rng.normal(0.1, 0.05, (3, 8)),
        stride=2,
        square_freq=True,
    )
    return enc, dec, rng


def grad_check_report(seed: int = 0) -> dict[str, float]:
    """Max relative error of analytic vs central-difference gradients, per op."""
    rng = np.random.default_rng(seed)
    report: dict[str, float] = {}

    # --- conv1 -----------------------------------------------------------
    x = rng.uniform(-1, 1, 11)
    k = rng.normal(0, 0.5, (3, 5))
    r = rng.normal(size=(3, 4))
    tape = Tape()
    kn = Node(k)
    s = _weighted_sum(conv1(x, kn, 3, tape), r, tape)
    tape.backward(s)
    _compare(lambda: float((conv1(x, as_node(k), 3).value * r).sum()),
             {"kernels": kn.grad}, {"kernels": k}, report, "conv1")

    # --- conv2 (dilated) ---------------------------------------------------
    h = rng.normal(0, 1, (3, 6))
    kp = rng.normal(0, 0.5, (3, 2, 3))
    r = rng.normal(size=(3, 6))
    tape = Tape()
    hn, kn = Node(h), Node(kp)
    s = _weighted_sum(conv2_dilated(hn, kn, 2, tape), r, tape)
    tape.backward(s)
    _compare(lambda: float((conv2_dilated(as_node(h), as_node(kp), 2).value * r).sum()),
             {"latent": hn.grad, "kernels": kn.grad}, {"latent": h, "kernels": kp}, report, "conv2")

    # --- relu residual (away from the kink) --------------------------------
    while True:
        h1 = rng.normal(0, 1, (3, 5))
        h2 = rng.normal(0, 1, (3, 5))
        if np.min(np.abs(h1 + h2)) > 1e-2:
            break
    r = rng.normal(size=(3, 5))
    tape = Tape()
    n1, n2 = Node(h1), Node(h2)
    s = _weighted_sum(relu_residual(n2, n1, tape), r, tape)
    tape.backward(s)
    _compare(lambda: float((relu_residual(as_node(h2), as_node(h1)).value * r).sum()),
             {"h1": n1.grad, "h2": n2.grad}, {"h1": h1, "h2": h2}, report, "relu_residual")

    # --- modulated-cosine kernels ------------------------------------------
    freq = np.array([0.06, 0.19, 0.37]) + rng.uniform(0, 0.02, 3)
    phase = rng.uniform(-1, 1, 3)
    mod = rng.normal(0.2, 0.1, (3, 8))
    r = rng.normal(size=(3, 8))
    for squared in (True, False):
        tape = Tape()
        fn, pn, mn = Node(freq), Node(phase), Node(mod)
        s = _weighted_sum(build_kernels(fn, pn, mn, squared, tape), r, tape)
        tape.backward(s)
        label = "build_kernels" if squared else "build_kernels_nosquare"
        _compare(
            lambda: float((build_kernels(as_node(freq), as_node(phase), as_node(mod), squared).value * r).sum()),
            {"freq": fn.grad, "phase": pn.grad, "modulator": mn.grad},
            {"freq": freq, "phase": phase, "modulator": mod}, report, label)

    # --- overlap-add synthesis (with truncation) ----------------------------
    a = rng.normal(0, 1, (3, 4))
    w = rng.normal(0, 1, (3, 5))
    r = rng.normal(size=9)
    tape = Tape()
    an, wn = Node(a), Node(w)
    s = _weighted_sum(synthesize(an, wn, 2, 9, tape), r, tape)
    tape.backward(s)
    _compare(lambda: float((synthesize(as_node(a), as_node(w), 2, 9).value * r).sum()),
             {"representation": an.grad, "kernels": wn.grad},
             {"representation": a, "kernels": w}, report, "synthesize")

    # --- neg-SNR (away from the floor) --------------------------------------
    ref = rng.uniform(-1, 1, 16)
    est = ref + 0.3 * rng.normal(0, 1, 16)
    tape = Tape()
    en = Node(est)
    loss = neg_snr(ref, en, tape=tape)
    tape.backward(loss)
    _compare(lambda: float(neg_snr(ref, as_node(est)).value),
             {"estimate": en.grad}, {"estimate": est}, report, "neg_snr")

    # --- total variation (away from ties) -----------------------------------
    while True:
        a = rng.normal(0, 1, (4, 5))
        if min(np.min(np.abs(np.diff(a, axis=0))), np.min(np.abs(np.diff(a, axis=1)))) > 1e-3:
            break
    tape = Tape()
    an = Node(a)
    loss = tv_loss(an, tape)
    tape.backward(loss)
    _compare(lambda: float(tv_loss(as_node(a)).value),
             {"representation": an.grad}, {"representation": a}, report, "tv_loss")

    # --- Sinkhorn loss with the plan held fixed ------------------------------
    for p in (1, 2):
        a = _separated_representation(rng, 3, 4)
        cfg = LossConfig(lam=2.0, p=p, max_iters=2000, tau=1e-10)
        _, plan = sinkhorn_loss(as_node(a), cfg)
        tape = Tape()
        an = Node(a)
        loss, _ = sinkhorn_loss(an, cfg, tape, plan=plan)
        tape.backward(loss)
        _compare(lambda: float(sinkhorn_loss(as_node(a), cfg, plan=plan)[0].value),
                 {"representation": an.grad}, {"representation": a}, report, f"sinkhorn_loss_p{p}")

    # --- end-to-end training objectives --------------------------------------
    for variant in ("tv", "sinkhorn"):
        report.update(_end_to_end_check(seed, variant))
    return report


def _separated_representation(rng: np.random.Generator, c: int, t: int) -> np.ndarray:
    """Non-negative matrix whose normalized columns stay clear of L1-cost ties."""
    while True:
        a = np.abs(rng.normal(1.0, 0.8, (c, t))) + 0.05
        ao = a / (a.sum(axis=0) + 1.0)
        gaps = [np.min(np.abs(ao[:, i] - ao[:, j])) for i in range(t) for j in range(t) if i != j]
        if min(gaps) > 1e-3:
            return a


def _end_to_end_check(seed: int, variant: str) -> dict[str, float]:
    """Gradients of the full objective w.r.t. all five parameter tensors."""
    for attempt in range(50):
        enc, dec, rng = _toy_model(seed + 1000 * attempt)
        x_v = rng.uniform(-0.8, 0.8, 12)
        noisy = x_v + 0.01 * rng.normal(0, 1, 12)
        mixture = x_v + rng.uniform(-0.8, 0.8, 12)
        cfg = LossConfig(omega=0.7, lam=2.0, p=1, max_iters=2000, tau=1e-10)

        rep_v = encode(noisy, enc)
        rep_m = encode(mixture, enc)
        pre_v = rep_v.h1.value + rep_v.h2.value
        pre_m = rep_m.h1.value + rep_m.h2.value
        if min(np.min(np.abs(pre_v)), np.min(np.abs(pre_m))) < 1e-3:
            continue  # too close to a ReLU kink for finite differences
        a_m = rep_m.a.value
        d_comp = np.abs(np.diff(a_m, axis=0))
        d_time = np.abs(np.diff(a_m, axis=1))
        active_gaps = np.concatenate([d_comp[d_comp > 0], d_time[d_time > 0]])
        if active_gaps.size and np.min(active_gaps) < 1e-3:
            continue  # too close to a total-variation tie
        break
    else:
        raise RuntimeError("could not find a kink-free toy configuration")

    plan = None
    if variant == "sinkhorn":
        _, plan = sinkhorn_loss(as_node(rep_m.a.value), cfg)

    def forward() -> float:
        rep_v = encode(noisy, enc)
        xhat = decode(rep_v.a, dec, len(x_v))
        rep_m = encode(mixture, enc)
        bd = total_loss(x_v, xhat, rep_m.a, cfg, variant, plan=plan)
        return float(bd.total.value)

    tensors = {
        "kernels": enc.kernels,
        "dilated_kernels": enc.dilated_kernels,
        "freq": dec.freq,
        "phase": dec.phase,
        "modulator": dec.modulator,
    }
    nodes = {name: Node(arr) for name, arr in tensors.items()}
    tape = Tape()
    rep_v = encode(noisy, enc, tape, nodes=nodes)
    xhat = decode(rep_v.a, dec, len(x_v), tape, nodes=nodes)
    rep_m = encode(mixture, enc, tape, nodes=nodes)
    bd = total_loss(x_v, xhat, rep_m.a, cfg, variant, tape, plan=plan)
    tape.backward(bd.total)

    report = {}
    for name, arr in tensors.items():
        numeric = central_difference(forward, arr)
        analytic = nodes[name].grad if nodes[name].grad is not None else np.zeros_like(arr)
        report[f"total_{variant}/{name}"] = max_relative_error(analytic, numeric)
    return report


# ---------------------------------------------------------------------------
# optimal-transport oracles
# ---------------------------------------------------------------------------

def assignment_cost(m: np.ndarray) -> float:
    """Exact minimum of sum_i M[i, perm(i)] over all permutations."""
    m = np.asarray(m, dtype=np.float64)
    t = m.shape[0]
    return min(sum(m[i, p[i]] for i in range(t)) for p in itertools.permutations(range(t)))


def random_cost_matrix(rng: np.random.Generator, t: int) -> np.ndarray:
    """Random non-negative cost matrix with a non-trivial optimal assignment.

    Entries are bounded away from zero so the exact optimum is positive
    (a zero-diagonal distance matrix would make the identity assignment
    trivially optimal at zero cost).
    """
    return rng.uniform(0.2, 2.0, (t, t))


def ot_check_report(seed: int = 0, n_marginal_trials: int = 20) -> dict:
    """Sinkhorn solver vs the brute-force assignment oracle.

    Checks that (a) at strong regularization the transport cost matches the
    optimal assignment within 1%, (b) the transport cost never undershoots the
    exact optimum at any regularization strength, and (c) row sums and column
    sums of converged plans each agree mutually within 1e-6.
    """
    rng = np.random.default_rng(seed)
    worst_gap = 0.0
    dominated = True
    for t in (3, 4):
        for _ in range(3):
            m = random_cost_matrix(rng, t)
            opt = assignment_cost(m)
            plan = sinkhorn_plan(m, lam=50.0, max_iters=2000, tau=1e-9)
            cost = float((plan.plan * m).sum())
            worst_gap = max(worst_gap, abs(cost - opt) / opt)
            for lam in (0.5, 2.0, 5.0, 20.0, 50.0):
                p = sinkhorn_plan(m, lam=lam, max_iters=2000, tau=1e-9)
                # 1e-12 of slack: a converged plan at strong regularization IS
                # the optimal permutation, and the two sums round differently
                if float((p.plan * m).sum()) < opt - 1e-12:
                    dominated = False

    worst_row_spread = 0.0
    worst_col_spread = 0.0
    all_converged = True
    for _ in range(n_marginal_trials):
        t = int(rng.integers(3, 9))
        m = random_cost_matrix(rng, t)
        plan = sinkhorn_plan(m, lam=2.0, max_iters=10_000, tau=1e-6)
        all_converged &= plan.converged
        rows = plan.plan.sum(axis=1)
        cols = plan.plan.sum(axis=0)
        worst_row_spread = max(worst_row_spread, float(rows.max() - rows.min()))
        worst_col_spread = max(worst_col_spread, float(cols.max() - cols.min()))

    return {
        "assignment_gap": worst_gap,
        "never_undershoots": dominated,
        "row_sum_spread": worst_row_spread,
        "col_sum_spread": worst_col_spread,
        "all_converged": all_converged,
        "ok": bool(worst_gap <= 0.01 and dominated
                   and worst_row_spread <= 1e-6 and worst_col_spread <= 1e-6
                   and all_converged),
    }
