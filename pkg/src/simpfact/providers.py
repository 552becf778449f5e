"""Similarity and masked-LM providers.

Real embedding / masked-LM backends run out of process behind small HTTP
protocols; the classes here are the local clients plus deterministic stubs
used for tests and offline runs. Every provider is deterministic for fixed
inputs.

Wire protocols:
  embedding service:  POST {"texts": [str, ...]} -> {"vectors": [[float, ...], ...]}
  masked-LM service:  POST {"text": str, "mask_positions": [int, ...], "rank": int}
                      -> {"tokens": [str, ...]}
Mask positions are 0-based indices into the whitespace-token sequence.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import urllib.error
import urllib.request

__all__ = [
    "ProviderError",
    "HashEmbeddingProvider",
    "TokenOverlapScorer",
    "HttpEmbeddingProvider",
    "StubMaskFiller",
    "HttpMaskFiller",
]


class ProviderError(RuntimeError):
    """A provider call failed; carries the provider name and the cause."""

    def __init__(self, provider: str, cause: Exception | str):
        super().__init__(f"provider {provider!r} failed: {cause}")
        self.provider = provider
        self.cause = cause


def _hash_floats(key: str, count: int) -> list[float]:
    """Derive `count` floats in [-1, 1) from a string key via SHA-256."""
    out: list[float] = []
    block = 0
    while len(out) < count:
        digest = hashlib.sha256(f"{key}\x00{block}".encode("utf-8")).digest()
        for i in range(0, len(digest) - 7, 8):
            (value,) = struct.unpack_from(">Q", digest, i)
            out.append(value / 2**63 - 1.0)
            if len(out) == count:
                break
        block += 1
    return out


class HashEmbeddingProvider:
    """Deterministic stand-in for a sentence-embedding backend.

    Embeds a text as the mean of per-token pseudo-random unit vectors, so
    texts sharing tokens get correlated embeddings. Not semantically
    meaningful; useful for plumbing and regression tests.
    """

    max_concurrency = 0  # pure local computation: no limit

    def __init__(self, dimension: int = 32, seed: int = 0, name: str = "hash-stub"):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.name = name
        self.dimension = dimension
        self._seed = seed

    def embed(self, text: str) -> list[float]:
        tokens = text.lower().split() or [""]
        acc = [0.0] * self.dimension
        for token in tokens:
            vec = _hash_floats(f"{self._seed}\x00{token}", self.dimension)
            norm = math.sqrt(sum(x * x for x in vec)) or 1.0
            for i, x in enumerate(vec):
                acc[i] += x / norm
        return [x / len(tokens) for x in acc]


class TokenOverlapScorer:
    """Pair scorer: token-level F1 between two texts.

    Local surrogate for scorers (greedy token-matching style) that are not a
    single-vector cosine. Scores in [0, 1].
    """

    name = "token-overlap-f1"
    max_concurrency = 0

    def pair_score(self, a: str, b: str) -> float:
        tokens_a = a.lower().split()
        tokens_b = b.lower().split()
        if not tokens_a and not tokens_b:
            return 1.0
        if not tokens_a or not tokens_b:
            return 0.0
        from collections import Counter

        overlap = sum((Counter(tokens_a) & Counter(tokens_b)).values())
        if overlap == 0:
            return 0.0
        precision = overlap / len(tokens_b)
        recall = overlap / len(tokens_a)
        return 2 * precision * recall / (precision + recall)


def _post_json(url: str, payload: dict, timeout: float) -> dict:
    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8"))


class HttpEmbeddingProvider:
    """Client for an embedding service speaking the texts/vectors protocol."""

    def __init__(self, endpoint: str, dimension: int, name: str = "http-embed", timeout: float = 10.0,
                 max_concurrency: int = 4):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.endpoint = endpoint.rstrip("/")
        self.dimension = dimension
        self.name = name
        self.timeout = timeout
        self.max_concurrency = max_concurrency

    def embed(self, text: str) -> list[float]:
        return self.embed_many([text])[0]

    def embed_many(self, texts: list[str]) -> list[list[float]]:
        try:
            response = _post_json(self.endpoint, {"texts": texts}, self.timeout)
            vectors = response["vectors"]
        except (urllib.error.URLError, OSError, KeyError, ValueError) as exc:
            raise ProviderError(self.name, exc) from exc
        if len(vectors) != len(texts):
            raise ProviderError(self.name, f"expected {len(texts)} vectors, got {len(vectors)}")
        for vec in vectors:
            if len(vec) != self.dimension:
                raise ProviderError(
                    self.name, f"vector length {len(vec)} != declared dimension {self.dimension}"
                )
        return [[float(x) for x in vec] for vec in vectors]


# Small fixed vocabulary the stub mask filler draws from; sampling is by
# hash, so fills are stable across runs and machines.
_STUB_VOCAB = (
    "time", "people", "city", "water", "group", "school", "house", "country",
    "world", "family", "night", "music", "river", "light", "paper", "story",
    "plan", "field", "road", "game", "team", "book", "idea", "market",
)


class StubMaskFiller:
    """Deterministic stand-in for a masked-LM fill service.

    The returned token depends on the text, position, and requested rank, so
    different ranks give different fills, mirroring a ranked candidate list.
    """

    max_concurrency = 0

    def __init__(self, name: str = "masklm-stub", seed: int = 0):
        self.name = name
        self._seed = seed

    def fill(self, text: str, mask_positions: list[int], rank: int) -> list[str]:
        tokens = []
        for position in mask_positions:
            key = f"{self._seed}\x00{text}\x00{position}\x00{rank}"
            digest = hashlib.sha256(key.encode("utf-8")).digest()
            index = int.from_bytes(digest[:4], "big") % len(_STUB_VOCAB)
            tokens.append(_STUB_VOCAB[index])
        return tokens


class HttpMaskFiller:
    """Client for a masked-LM service speaking the text/mask_positions/rank protocol."""

    def __init__(self, endpoint: str, name: str = "http-masklm", timeout: float = 10.0,
                 max_concurrency: int = 4):
        self.endpoint = endpoint.rstrip("/")
        self.name = name
        self.timeout = timeout
        self.max_concurrency = max_concurrency

    def fill(self, text: str, mask_positions: list[int], rank: int) -> list[str]:
        payload = {"text": text, "mask_positions": list(mask_positions), "rank": rank}
        try:
            response = _post_json(self.endpoint, payload, self.timeout)
            tokens = response["tokens"]
        except (urllib.error.URLError, OSError, KeyError, ValueError) as exc:
            raise ProviderError(self.name, exc) from exc
        if len(tokens) != len(mask_positions):
            raise ProviderError(
                self.name, f"expected {len(mask_positions)} tokens, got {len(tokens)}"
            )
        if any(not token for token in tokens):
            raise ProviderError(self.name, "service returned an empty fill token")
        return [str(token) for token in tokens]
