"""Bidirectional LSTM encoder producing one dense semantic vector per
token occurrence in a node's content."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .tensor import Tensor


@dataclass
class LstmDirectionParams:
    """Weights for one recurrence direction.

    Each gate weight maps the concatenated [token embedding, previous
    hidden state] row (width embed_dim + feature_dim) to feature_dim;
    biases are 1-row vectors.
    """

    w_forget: Tensor
    w_input: Tensor
    w_cell: Tensor
    w_output: Tensor
    b_forget: Tensor
    b_input: Tensor
    b_cell: Tensor
    b_output: Tensor

    @classmethod
    def init(cls, embed_dim: int, feature_dim: int, rng: np.random.Generator) -> "LstmDirectionParams":
        """Uniform init in [-1/sqrt(feature_dim), 1/sqrt(feature_dim)]."""
        bound = 1.0 / np.sqrt(feature_dim)
        in_dim = embed_dim + feature_dim

        def w() -> Tensor:
            return Tensor(rng.uniform(-bound, bound, size=(in_dim, feature_dim)))

        def b() -> Tensor:
            return Tensor(rng.uniform(-bound, bound, size=(1, feature_dim)))

        return cls(w_forget=w(), w_input=w(), w_cell=w(), w_output=w(),
                   b_forget=b(), b_input=b(), b_cell=b(), b_output=b())

    @property
    def feature_dim(self) -> int:
        return self.w_forget.cols

    @property
    def embed_dim(self) -> int:
        return self.w_forget.rows - self.feature_dim

    def named_parameters(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [
            (f"{prefix}.w_forget", self.w_forget),
            (f"{prefix}.w_input", self.w_input),
            (f"{prefix}.w_cell", self.w_cell),
            (f"{prefix}.w_output", self.w_output),
            (f"{prefix}.b_forget", self.b_forget),
            (f"{prefix}.b_input", self.b_input),
            (f"{prefix}.b_cell", self.b_cell),
            (f"{prefix}.b_output", self.b_output),
        ]

    def gate_weights(self) -> list[Tensor]:
        """The four gate weight matrices (the L2-regularized subset)."""
        return [self.w_forget, self.w_input, self.w_cell, self.w_output]

    def _gate_tensors(self) -> tuple[tuple[Tensor, ...], tuple[Tensor, ...]]:
        return ((self.w_forget, self.w_input, self.w_cell, self.w_output),
                (self.b_forget, self.b_input, self.b_cell, self.b_output))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    y = np.tanh(0.5 * z)
    y += 1.0
    y *= 0.5
    return y


def _scatter_grad(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _run_direction(params: LstmDirectionParams, seq: Tensor,
                   order: Sequence[int],
                   c0: Tensor | None, h0: Tensor | None) -> list[Tensor]:
    """Run the recurrence over ``seq`` rows in the given visit order.

    Each step is recorded as a single taped operation: the four gate
    products are batched into one matmul against the horizontally
    concatenated weights, and the step's closure back-propagates through
    the whole cell (gates, cell state, output) at once.
    """
    weights, biases = params._gate_tensors()
    d = params.feature_dim
    embed_dim = params.embed_dim
    if seq.cols != embed_dim:
        raise ShapeError(
            f"sequence width {seq.cols} does not match embedding dim {embed_dim}")
    w_all = np.hstack([w.data for w in weights])
    b_all = np.hstack([b.data for b in biases])
    tape = T.current_tape()
    needs_grad = seq.requires_grad or any(w.requires_grad for w in weights) \
        or any(b.requires_grad for b in biases)

    h_prev_data = h0.data if h0 is not None else np.zeros((1, d))
    h_prev: Tensor | None = h0
    c_prev_data = c0.data if c0 is not None else None
    c_prev: Tensor | None = c0
    outputs: list[Tensor] = []

    for t_idx in order:
        x_in = np.concatenate((seq.data[t_idx:t_idx + 1], h_prev_data), axis=1)
        pre = x_in @ w_all + b_all
        f = _sigmoid(pre[:, :d])
        i = _sigmoid(pre[:, d:2 * d])
        g = np.tanh(pre[:, 2 * d:3 * d])
        o = _sigmoid(pre[:, 3 * d:])
        c_data = i * g if c_prev_data is None else f * c_prev_data + i * g
        tanh_c = np.tanh(c_data)
        h = T.Tensor.__new__(T.Tensor)
        h.data, h.grad, h.requires_grad = o * tanh_c, None, needs_grad
        c = T.Tensor.__new__(T.Tensor)
        c.data, c.grad, c.requires_grad = c_data, None, needs_grad

        if tape is not None and needs_grad:
            step = _make_cell_step(seq, t_idx, x_in, f, i, g, o, tanh_c,
                                   c_prev_data, c_prev, h_prev, h, c,
                                   w_all, weights, biases, embed_dim, d)
            tape.record(step)

        outputs.append(h)
        h_prev_data, h_prev = h.data, h
        c_prev_data, c_prev = c_data, c
    return outputs


def _make_cell_step(seq, t_idx, x_in, f, i, g, o, tanh_c, c_prev_data, c_prev,
                    h_prev, h_out, c_out, w_all, weights, biases, embed_dim, d):
    def step() -> None:
        grad_h = h_out.grad
        grad_c = c_out.grad
        if grad_h is None and grad_c is None:
            return
        if grad_h is not None:
            dc = grad_h * (o * (1.0 - tanh_c * tanh_c))
            if grad_c is not None:
                dc += grad_c
            dz_o = (grad_h * tanh_c) * (o * (1.0 - o))
        else:
            dc = grad_c
            dz_o = None
        dz = np.zeros((1, 4 * d))
        if c_prev_data is not None:
            dz[:, :d] = (dc * c_prev_data) * (f * (1.0 - f))
        dz[:, d:2 * d] = (dc * g) * (i * (1.0 - i))
        dz[:, 2 * d:3 * d] = (dc * i) * (1.0 - g * g)
        if dz_o is not None:
            dz[:, 3 * d:] = dz_o

        dx = dz @ w_all.T
        if seq.requires_grad:
            if seq.grad is None:
                seq.grad = np.zeros_like(seq.data)
            seq.grad[t_idx] += dx[0, :embed_dim]
        if h_prev is not None and h_prev.requires_grad:
            h_prev.accumulate_grad(dx[:, embed_dim:])
        if c_prev is not None and c_prev.requires_grad:
            c_prev.accumulate_grad(dc * f)

        dw = x_in.T @ dz
        for k, w in enumerate(weights):
            if w.requires_grad:
                _scatter_grad(w, dw[:, k * d:(k + 1) * d])
        for k, b in enumerate(biases):
            if b.requires_grad:
                _scatter_grad(b, dz[:, k * d:(k + 1) * d])

    return step


def lstm_forward(
    params: LstmDirectionParams,
    seq: Tensor,
    c0: Tensor | None = None,
    h0: Tensor | None = None,
) -> list[Tensor]:
    """Run the recurrence over sequence rows in temporal order.

    Per step: gates f, i, o are sigmoids and the cell candidate g a tanh
    of [x_t, h_{t-1}] times the gate weight plus bias; the cell state is
    c_t = f*c_{t-1} + i*g and the output h_t = o*tanh(c_t). Initial
    states default to zero. Returns the list of per-step outputs.
    """
    return _run_direction(params, seq, range(seq.rows), c0, h0)


def bilstm_encode(fwd: LstmDirectionParams, bwd: LstmDirectionParams, seq: Tensor) -> Tensor:
    """Encode a token-embedding sequence with both directions combined.

    The backward direction runs over the reversed sequence; the two
    per-position outputs are combined by elementwise sum, giving one
    row per token in original order.
    """
    if fwd.embed_dim != bwd.embed_dim or fwd.feature_dim != bwd.feature_dim:
        raise ShapeError("forward/backward parameter dimensions disagree")
    n = seq.rows
    if n < 1:
        raise ValueError("cannot encode an empty token sequence")
    ahead = _run_direction(fwd, seq, range(n), None, None)
    behind = _run_direction(bwd, seq, range(n - 1, -1, -1), None, None)
    combined = [T.add(ahead[j], behind[n - 1 - j]) for j in range(n)]
    return T.stack_rows(combined)
