"""Training objectives: reconstruction (neg-SNR) plus one of two
representation losses (anisotropic total variation, or an entropic-regularized
optimal-transport distance between the representation's time frames solved by
Sinkhorn-Knopp scaling).

The transport plan is treated as a constant during backpropagation (the usual
envelope treatment for Sinkhorn losses); gradients flow only through the cost
matrix and the simplex normalization that feeds it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Node, Tape, as_node
from .errors import SaturationError

_LN10 = math.log(10.0)


@dataclass(frozen=True)
class LossConfig:
    omega: float = 1.0        # weight of the representation loss
    lam: float = 0.5          # entropic regularization strength (> 0)
    p: int = 1                # exponent of the pairwise frame distance (1 or 2)
    max_iters: int = 100      # Sinkhorn iteration cap
    tau: float = 1e-6         # Sinkhorn termination threshold on marginal error
    snr_floor_db: float = -120.0  # neg-SNR cap for (near-)perfect reconstruction

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be >= 0")
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")


@dataclass
class TransportPlan:
    plan: np.ndarray      # (T, T) non-negative coupling
    u: np.ndarray         # row scaling vector
    v: np.ndarray         # column scaling vector
    gibbs: np.ndarray     # exp(-lam * M)
    iterations: int
    converged: bool
    saturation: float     # fraction of Gibbs-kernel entries that underflowed to 0


@dataclass
class LossBreakdown:
    total: Node
    neg_snr_db: float
    rep_loss: float
    plan: TransportPlan | None = None

    @property
    def saturation(self) -> float:
        return self.plan.saturation if self.plan is not None else 0.0


def neg_snr(x: np.ndarray, est, floor_db: float = -120.0, tape: Tape | None = None) -> Node:
    """Negative signal-to-noise ratio in dB: -10*log10(||x||^2 / ||x - est||^2).

    Clamped at ``floor_db`` when the residual (nearly) vanishes; on the
    clamped plateau the gradient is zero.
    """
    x = np.asarray(x, dtype=np.float64)
    est_node = as_node(est)
    if x.shape != est_node.value.shape:
        raise ValueError("signals must have equal length")
    energy = float(x @ x)
    if energy == 0.0:
        raise ValueError("neg_snr reference signal is all-zero")
    diff = x - est_node.value
    resid = float(diff @ diff)
    raw = -10.0 * math.log10(energy / resid) if resid > 0.0 else -math.inf
    capped = raw < floor_db
    out = Node(floor_db if capped else raw)

    if tape is not None:
        def backward():
            if out.grad is None or capped:
                return
            est_node.add_grad(float(out.grad) * (-20.0 / _LN10) * diff / resid)
        tape.record(backward)
    return out


def tv_loss(a, tape: Tape | None = None) -> Node:
    """Mean absolute first-order difference of the representation, along both
    the component and the time axis.  Zero iff the matrix is constant."""
    a_node = as_node(a)
    av = a_node.value
    if av.ndim != 2:
        raise ValueError("tv_loss expects a (C, T) matrix")
    c, t = av.shape
    dc = av[1:, :] - av[:-1, :]
    dt = av[:, 1:] - av[:, :-1]
    out = Node((np.abs(dc).sum() + np.abs(dt).sum()) / (c * t))

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            g = float(out.grad) / (c * t)
            grad = np.zeros_like(av)
            sc = np.sign(dc)  # subgradient 0 at ties
            st = np.sign(dt)
            grad[1:, :] += sc
            grad[:-1, :] -= sc
            grad[:, 1:] += st
            grad[:, :-1] -= st
            a_node.add_grad(g * grad)
        tape.record(backward)
    return out


def normalize_simplex(a, tape: Tape | None = None) -> Node:
    """Per-frame normalization A[:, t] / (sum_c A[:, t] + 1).

    The +1 comes from adding 1/C to every entry of the column sum, so an
    all-zero column stays all-zero and every output column sums to s/(s+1) < 1.
    """
    a_node = as_node(a)
    av = a_node.value
    den = av.sum(axis=0) + 1.0
    out = Node(av / den)

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            g = out.grad
            dot = (g * out.value).sum(axis=0)
            a_node.add_grad((g - dot) / den)
        tape.record(backward)
    return out


def pairwise_cost(ao: np.ndarray, p: int = 1) -> np.ndarray:
    """(T, T) Minkowski distance matrix between the columns of ``ao``.

    Symmetric, zero-diagonal, and satisfies the triangle inequality.
    """
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    ao = np.asarray(ao, dtype=np.float64)
    t = ao.shape[1]
    m = np.empty((t, t))
    for i in range(t):
        d = np.abs(ao - ao[:, [i]])
        m[i] = d.sum(axis=0) if p == 1 else np.sqrt((d * d).sum(axis=0))
    return m


def sinkhorn_plan(
    m: np.ndarray,
    lam: float,
    max_iters: int = 100,
    tau: float = 1e-6,
) -> TransportPlan:
    """Entropic-regularized transport plan between uniform marginals.

    Scales K = exp(-lam * M) with diagonal vectors u, v until every row and
    column of P = diag(u) K diag(v) sums to 1, i.e. P lives in the polytope
    of non-negative matrices with unit row/column sums (whose vertices are
    the permutation matrices).  Iteration stops once the summed absolute
    marginal error drops below ``tau``, or after ``max_iters``.

    Raises :class:`SaturationError` instead of dividing by zero when the
    Gibbs kernel underflows on a full row or column (large ``lam``).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ValueError("cost matrix must be finite and non-negative")
    if lam <= 0:
        raise ValueError("lam must be > 0")

    gibbs = np.exp(-lam * m)
    saturation = float(np.mean(gibbs == 0.0))
    if np.any(np.all(gibbs == 0.0, axis=1)) or np.any(np.all(gibbs == 0.0, axis=0)):
        raise SaturationError(lam, saturation)

    t = m.shape[0]
    u = np.full(t, 1.0 / t)
    v = np.full(t, 1.0 / t)
    plan = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        ktu = gibbs.T @ u
        if np.any(ktu <= 0.0) or not np.all(np.isfinite(ktu)):
            raise SaturationError(lam, saturation)
        v = 1.0 / ktu
        kv = gibbs @ v
        if np.any(kv <= 0.0) or not np.all(np.isfinite(kv)):
            raise SaturationError(lam, saturation)
        u = 1.0 / kv
        plan = (u[:, None] * gibbs) * v[None, :]
        err = np.abs(plan.sum(axis=1) - 1.0).sum() + np.abs(plan.sum(axis=0) - 1.0).sum()
        if err < tau:
            converged = True
            break
    return TransportPlan(plan, u, v, gibbs, iterations, converged, saturation)


def _plan_cost_inner(ao: Node, m: np.ndarray, plan: np.ndarray, p: int, tape: Tape | None) -> Node:
    """<P, M(ao)> with P held constant; gradients flow into ``ao`` only."""
    out = Node(float((plan * m).sum()))

    if tape is not None:
        def backward():
            if out.grad is None:
                return
            q = float(out.grad) * (plan + plan.T)
            av = ao.value
            grad = np.empty_like(av)
            for i in range(av.shape[1]):
                diff = av[:, [i]] - av
                if p == 1:
                    grad[:, i] = np.sign(diff) @ q[i]
                else:
                    w = np.divide(q[i], m[i], out=np.zeros_like(q[i]), where=m[i] > 0)
                    grad[:, i] = diff @ w
            ao.add_grad(grad)
        tape.record(backward)
    return out


def sinkhorn_loss(
    a,
    cfg: LossConfig,
    tape: Tape | None = None,
    plan: TransportPlan | None = None,
) -> tuple[Node, TransportPlan]:
    """Transport distance between the time frames of a representation.

    The representation is simplex-normalized, the pairwise frame-distance
    matrix M is computed once, the plan is solved on M, and the loss is the
    Frobenius inner product <P, M>.  Passing ``plan`` reuses a precomputed
    plan (useful for gradient checking, since the plan is detached anyway).
    """
    a_node = as_node(a)
    ao = normalize_simplex(a_node, tape)
    m = pairwise_cost(ao.value, cfg.p)
    if plan is None:
        plan = sinkhorn_plan(m, cfg.lam, cfg.max_iters, cfg.tau)
    loss = _plan_cost_inner(ao, m, plan.plan, cfg.p, tape)
    return loss, plan


def total_loss(
    x_v: np.ndarray,
    xhat_v,
    a_m,
    cfg: LossConfig,
    variant: str = "tv",
    tape: Tape | None = None,
    plan: TransportPlan | None = None,
) -> LossBreakdown:
    """Reconstruction loss plus ``omega`` times the representation loss.

    ``variant`` selects the representation term: ``"tv"`` or ``"sinkhorn"``.
    The representation term is computed on the mixture representation only.
    """
    rec = neg_snr(x_v, xhat_v, cfg.snr_floor_db, tape)
    plan_out = None
    if variant == "tv":
        rep = tv_loss(a_m, tape)
    elif variant == "sinkhorn":
        rep, plan_out = sinkhorn_loss(a_m, cfg, tape, plan)
    else:
        raise ValueError(f"unknown loss variant {variant!r} (expected 'tv' or 'sinkhorn')")

    total = Node(float(rec.value) + cfg.omega * float(rep.value))
    if tape is not None:
        def backward():
            if total.grad is None:
                return
            rec.add_grad(total.grad)
            rep.add_grad(cfg.omega * total.grad)
        tape.record(backward)
    return LossBreakdown(total, float(rec.value), float(rep.value), plan_out)
