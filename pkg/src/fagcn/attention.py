"""Per-token attention weights and weighted aggregation of a node's
token-feature matrix into a single node feature vector.

Three variants: "none" (plain mean), "self" (each token scored against a
shared trained vector), and "context" (a neighbor's tokens scored by a
bilinear form against the aggregating node's context vector).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor

VARIANTS = ("none", "self", "context")


@dataclass
class AttentionParams:
    """Trained attention parameters for exactly one variant.

    ``score_vector`` (1 x feature_dim) belongs to the "self" variant,
    ``bilinear`` (feature_dim x feature_dim) to "context"; "none" has no
    parameters.
    """

    variant: str
    score_vector: Tensor | None = None
    bilinear: Tensor | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown attention variant {self.variant!r}")
        if (self.variant == "self") != (self.score_vector is not None):
            raise ConfigError("score_vector is present iff variant is 'self'")
        if (self.variant == "context") != (self.bilinear is not None):
            raise ConfigError("bilinear is present iff variant is 'context'")

    @classmethod
    def init(cls, variant: str, feature_dim: int, rng: np.random.Generator) -> "AttentionParams":
        if variant == "self":
            bound = 1.0 / np.sqrt(feature_dim)
            return cls(variant, score_vector=Tensor(
                rng.uniform(-bound, bound, size=(1, feature_dim))))
        if variant == "context":
            bound = 1.0 / feature_dim
            return cls(variant, bilinear=Tensor(
                rng.uniform(-bound, bound, size=(feature_dim, feature_dim))))
        if variant == "none":
            return cls(variant)
        raise ConfigError(f"unknown attention variant {variant!r}")

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        if self.variant == "self":
            return [("attention.score_vector", self.score_vector)]
        if self.variant == "context":
            return [("attention.bilinear", self.bilinear)]
        return []


def attention_self(features: Tensor, score_vector: Tensor) -> Tensor:
    """Score each token by tanh(features) projected on the shared vector.

    Returns the softmax of the scores as a 1 x num_tokens row summing
    to one.
    """
    if features.rows < 1:
        raise ShapeError("attention needs at least one token row")
    scores = T.matmul(T.tanh(features), T.transpose(score_vector))
    return T.rowwise_softmax(T.transpose(scores))


def context_vector(features: Tensor) -> Tensor:
    """Elementwise sum of a node's token feature rows (1 x feature_dim)."""
    if features.rows < 1:
        raise ShapeError("context vector needs at least one token row")
    return T.sum_rows(features)


def attention_context(features: Tensor, context: Tensor, bilinear: Tensor) -> Tensor:
    """Score a neighbor's tokens by a bilinear form against the context.

    Each token row h gets the score h @ bilinear @ context^T; the scores
    are normalized by softmax over this node's tokens only (each
    neighbor contributes its own weight simplex).
    """
    scores = T.matmul(features, T.matmul(bilinear, T.transpose(context)))
    return T.rowwise_softmax(T.transpose(scores))


def aggregate(features: Tensor, weights: Tensor | None) -> Tensor:
    """Weighted sum of token feature rows into one 1 x feature_dim row.

    With ``weights=None`` (the no-attention variant) tokens are averaged
    uniformly, which keeps the result inside the convex hull of the rows
    regardless of content length.
    """
    if weights is None:
        return T.scale(T.sum_rows(features), 1.0 / features.rows)
    if weights.cols != features.rows or weights.rows != 1:
        raise ShapeError(
            f"weights shape {weights.shape} does not match {features.rows} token rows")
    return T.matmul(weights, features)
