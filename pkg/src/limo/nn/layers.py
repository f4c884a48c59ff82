"""Learnable building blocks assembled from tape primitives.

Layers own Parameters and expose forward methods returning Tensors; the
backward pass comes entirely from the tape, so there is no layer-specific
gradient code to get wrong. Transformer blocks are pre-LN with the final
stack norm applied by the caller.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeMismatch
from .tensor import (
    Parameter,
    Tensor,
    add,
    concat,
    embedding,
    gelu,
    layer_norm,
    matmul,
    pad_rows,
    reshape,
    scale,
    softmax,
    swapaxes,
)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


class Affine:
    """y = x @ W + b over the last axis."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        self.w = Parameter(glorot(rng, in_dim, out_dim, (in_dim, out_dim)), f"{name}.w")
        self.b = Parameter(np.zeros(out_dim), f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.w.shape[0]:
            raise ShapeMismatch(
                f"{self.w.name}: input width {x.shape[-1]} != {self.w.shape[0]}"
            )
        return add(matmul(x, self.w), self.b)

    def parameters(self):
        return [self.w, self.b]


class Conv1dSame:
    """Kernel-3 stride-1 convolution along axis 0 with zero same-padding."""

    KERNEL = 3

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        fan_in = self.KERNEL * in_dim
        self.w = Parameter(
            glorot(rng, fan_in, out_dim, (self.KERNEL, in_dim, out_dim)), f"{name}.w"
        )
        self.b = Parameter(np.zeros(out_dim), f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        t = x.shape[0]
        xp = pad_rows(x, 1, 1)
        y = add(matmul(xp[0:t], self.w[0]), self.b)
        y = add(y, matmul(xp[1 : t + 1], self.w[1]))
        y = add(y, matmul(xp[2 : t + 2], self.w[2]))
        return y

    def parameters(self):
        return [self.w, self.b]


class LayerNorm:
    def __init__(self, width: int, name: str, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(width), f"{name}.gamma")
        self.beta = Parameter(np.zeros(width), f"{name}.beta")
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)

    def parameters(self):
        return [self.gamma, self.beta]


class MultiHeadAttention:
    """Scaled dot-product attention; queries may differ from the key/value source."""

    def __init__(self, width: int, heads: int, rng: np.random.Generator, name: str):
        if width % heads != 0:
            raise ShapeMismatch(f"width {width} not divisible by heads {heads}")
        self.width = width
        self.heads = heads
        self.head_dim = width // heads
        self.wq = Affine(width, width, rng, f"{name}.q")
        self.wk = Affine(width, width, rng, f"{name}.k")
        self.wv = Affine(width, width, rng, f"{name}.v")
        self.wo = Affine(width, width, rng, f"{name}.out")

    def _split(self, x: Tensor) -> Tensor:
        t = x.shape[0]
        return swapaxes(reshape(x, (t, self.heads, self.head_dim)), 0, 1)

    def __call__(self, query: Tensor, memory: Tensor | None = None) -> Tensor:
        kv = query if memory is None else memory
        tq = query.shape[0]
        q = self._split(self.wq(query))
        k = self._split(self.wk(kv))
        v = self._split(self.wv(kv))
        scores = scale(matmul(q, swapaxes(k, -1, -2)), 1.0 / math.sqrt(self.head_dim))
        attn = softmax(scores)
        mixed = matmul(attn, v)
        merged = reshape(swapaxes(mixed, 0, 1), (tq, self.width))
        return self.wo(merged)

    def parameters(self):
        return (
            self.wq.parameters()
            + self.wk.parameters()
            + self.wv.parameters()
            + self.wo.parameters()
        )


class FeedForward:
    def __init__(self, width: int, hidden: int, rng: np.random.Generator, name: str):
        self.lin1 = Affine(width, hidden, rng, f"{name}.lin1")
        self.lin2 = Affine(hidden, width, rng, f"{name}.lin2")

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(gelu(self.lin1(x)))

    def parameters(self):
        return self.lin1.parameters() + self.lin2.parameters()


class EncoderLayer:
    """Pre-LN self-attention block."""

    def __init__(self, width, heads, ffn_width, rng, name):
        self.ln1 = LayerNorm(width, f"{name}.ln1")
        self.attn = MultiHeadAttention(width, heads, rng, f"{name}.attn")
        self.ln2 = LayerNorm(width, f"{name}.ln2")
        self.ff = FeedForward(width, ffn_width, rng, f"{name}.ff")

    def __call__(self, x: Tensor) -> Tensor:
        x = add(x, self.attn(self.ln1(x)))
        x = add(x, self.ff(self.ln2(x)))
        return x

    def parameters(self):
        return (
            self.ln1.parameters()
            + self.attn.parameters()
            + self.ln2.parameters()
            + self.ff.parameters()
        )


class DecoderLayer:
    """Pre-LN block: self-attention, cross-attention to memory, feed-forward."""

    def __init__(self, width, heads, ffn_width, rng, name):
        self.ln1 = LayerNorm(width, f"{name}.ln1")
        self.self_attn = MultiHeadAttention(width, heads, rng, f"{name}.self")
        self.ln2 = LayerNorm(width, f"{name}.ln2")
        self.cross_attn = MultiHeadAttention(width, heads, rng, f"{name}.cross")
        # memory branch opens slowly: with a full-scale output projection the
        # untrained readout turns condition variation into prediction noise
        # and the optimizer flattens the conditions instead of learning them
        self.cross_attn.wo.w.data *= 0.15
        self.ln3 = LayerNorm(width, f"{name}.ln3")
        self.ff = FeedForward(width, ffn_width, rng, f"{name}.ff")

    def __call__(self, x: Tensor, memory: Tensor) -> Tensor:
        x = add(x, self.self_attn(self.ln1(x)))
        x = add(x, self.cross_attn(self.ln2(x), memory))
        x = add(x, self.ff(self.ln3(x)))
        return x

    def parameters(self):
        return (
            self.ln1.parameters()
            + self.self_attn.parameters()
            + self.ln2.parameters()
            + self.cross_attn.parameters()
            + self.ln3.parameters()
            + self.ff.parameters()
        )


class EmbeddingTable:
    # unit-scale rows so token identity is not drowned out when sinusoidal
    # positions (rms ~0.7) are added right after the lookup
    def __init__(self, vocab_size: int, width: int, rng: np.random.Generator, name: str):
        self.table = Parameter(rng.normal(0.0, 1.0, size=(vocab_size, width)), f"{name}.table")

    def __call__(self, ids) -> Tensor:
        return embedding(self.table, ids)

    def parameters(self):
        return [self.table]


def concat_features(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last (feature) axis."""
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeMismatch(f"cannot concat features of {a.shape} and {b.shape}")
    return concat([a, b], axis=-1)
