"""Deterministic text embeddings used by the oracle provider and fixtures.

The embedder is a seeded feature hash over character n-grams: each n-gram is
hashed into one of ``dim`` buckets with a +/-1 sign, the bucket sums are then
unit-normalized. Identical strings always map to identical vectors; there is
no vocabulary and no model download.
"""

from __future__ import annotations

import hashlib
import math

from sketchedit.core import Embedding, ValidationError


class HashEmbedder:
    """Character n-gram feature hashing into a fixed-dim unit vector."""

    def __init__(self, dim: int = 64, seed: int = 0, ngram: int = 3):
        if dim < 1:
            raise ValidationError(f"embedding dim must be >= 1, got {dim}")
        if ngram < 1:
            raise ValidationError(f"ngram must be >= 1, got {ngram}")
        self.dim = dim
        self.ngram = ngram
        self._key = seed.to_bytes(8, "big", signed=True)

    def embed(self, text: str) -> Embedding:
        if not text:
            raise ValidationError("cannot embed an empty string")
        padded = f"#{text.lower()}#"
        n = self.ngram
        acc = [0.0] * self.dim
        for i in range(max(1, len(padded) - n + 1)):
            gram = padded[i : i + n]
            digest = hashlib.blake2b(
                gram.encode("utf-8"), key=self._key, digest_size=8
            ).digest()
            v = int.from_bytes(digest, "big")
            sign = 1.0 if v & (1 << 63) == 0 else -1.0
            acc[v % self.dim] += sign
        norm = math.sqrt(sum(x * x for x in acc))
        if norm == 0.0:
            # Sign cancellation across buckets; fall back to a fixed basis
            # vector so the function stays total and deterministic.
            acc[0] = 1.0
            norm = 1.0
        return Embedding(tuple(x / norm for x in acc))


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity, clamped into [-1, 1]."""
    if a.dim != b.dim:
        raise ValidationError(f"embedding dims differ: {a.dim} vs {b.dim}")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    denom = a.norm() * b.norm()
    if denom == 0.0:
        raise ValidationError("cosine undefined for zero-norm embedding")
    return max(-1.0, min(1.0, dot / denom))


def hash_embedding(text: str, dim: int = 64, seed: int = 0) -> Embedding:
    """One-shot convenience wrapper around HashEmbedder."""
    return HashEmbedder(dim=dim, seed=seed).embed(text)
