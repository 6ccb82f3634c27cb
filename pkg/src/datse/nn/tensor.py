"""Tensors and the gradient tape.

A Tensor wraps a dense ndarray plus an optional gradient slot. Operations
that support differentiation append an entry to a Tape as they execute;
backward() replays the tape in reverse, accumulating gradients into every
reachable input. Since entries are appended in execution order, reverse
order is a valid topological order of the data flow.

Network math defaults to float32; passing float64 arrays switches the whole
graph to float64 (used by the finite-difference checks).
"""

import numpy as np

DEFAULT_DTYPE = np.float32


class Tensor:
    """Dense n-d value with an optional same-shape gradient."""

    __slots__ = ("values", "grad", "requires_grad")

    def __init__(self, values, requires_grad=False, dtype=None):
        if isinstance(values, np.ndarray) and dtype is None:
            self.values = values
        else:
            self.values = np.asarray(values, dtype=dtype or DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.values.dtype, copy=True)
        else:
            self.grad += g

    def detach(self):
        return Tensor(self.values.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


class TapeEntry:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Execution-ordered record of differentiable operations."""

    def __init__(self):
        self.entries = []

    def record(self, inputs, output, backward_fn):
        """backward_fn(grad_out) must return grads aligned with inputs (None allowed)."""
        self.entries.append(TapeEntry(tuple(inputs), output, backward_fn))
        return output


def zero_grad(params):
    for p in params:
        p.grad = None


def backward(tape: Tape, loss: Tensor, params=()):
    """Reverse-mode accumulation from a scalar loss over the whole tape.

    Gradients land in Tensor.grad. Parameters listed in `params` that the
    loss never touched get an exact-zero gradient instead of None.
    """
    if loss.values.size != 1:
        raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.values)
    for entry in reversed(tape.entries):
        g_out = entry.output.grad
        if g_out is None:
            continue
        grads = entry.backward_fn(g_out)
        for t, g in zip(entry.inputs, grads):
            if g is not None:
                t.accumulate_grad(g)
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.values)
