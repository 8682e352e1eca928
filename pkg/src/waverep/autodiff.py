"""Minimal reverse-mode gradient tape over numpy arrays.

Every differentiable operation in this package computes its result eagerly,
wraps it in a :class:`Node`, and (when a :class:`Tape` is supplied) records a
closure that pushes the output gradient back to the operation's inputs.
Operations are recorded in execution order, so replaying the tape in reverse
visits each one exactly once in a valid reverse topological order; shared
inputs accumulate gradients additively.

Operations are coarse-grained (a whole convolution, a whole loss) rather than
elementwise, which keeps both the forward pass and the backward pass vectorized.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class Node:
    """A value in the computation graph plus its gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None

    def add_grad(self, g) -> None:
        g = np.asarray(g, dtype=np.float64)
        if self.grad is None:
            # own the buffer: g may be a view into someone else's array
            self.grad = g.copy()
        else:
            self.grad += g

    @property
    def shape(self):
        return self.value.shape


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


class Tape:
    """Records backward closures during a forward pass."""

    def __init__(self):
        self._ops: list[Callable[[], None]] = []

    def record(self, op: Callable[[], None]) -> None:
        self._ops.append(op)

    def __len__(self) -> int:
        return len(self._ops)

    def backward(self, root: Node, seed=1.0) -> None:
        """Seed ``root.grad`` and replay every recorded closure in reverse.

        ``seed`` scales the whole gradient; passing ``1/batch_size`` while
        reusing shared parameter nodes across a batch accumulates the
        batch-mean gradient in a fixed, deterministic order.
        """
        if not self._ops:
            raise ValueError("backward on an empty tape: no operations were recorded")
        root.add_grad(np.asarray(seed, dtype=np.float64))
        for op in reversed(self._ops):
            op()
