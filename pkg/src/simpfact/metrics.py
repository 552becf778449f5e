"""Per-pair surface and semantic metrics.

All token-based metrics lowercase their inputs and let punctuation tokens
participate; the shared tokenizer lives in :mod:`simpfact.corpus`.

SARI convention used here (published implementations disagree on the
details, so this is pinned): for n = 1..4 over lowercased token n-grams,
with fractional reference weight r(g) = (#references containing g) / m,

  ADD   F1 over distinct n-grams: output-minus-source vs union(refs)-minus-source
  KEEP  F1 with weighted counts: numerator sum of r(g) over kept n-grams,
        precision denominator |kept|, recall denominator sum of r(g) over
        all source n-grams
  DEL   precision only: mean of (1 - r(g)) over deleted n-grams

Any precision or recall with a zero denominator is 0, and an F1 with
P + R = 0 is 0. SARI = 100 * mean over n of (F_add + F_keep + P_del) / 3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import SentencePair, token_surfaces
from .providers import ProviderError

__all__ = [
    "MetricVector",
    "DegenerateInputError",
    "UndefinedSimilarityError",
    "levenshtein",
    "normalized_edit_distance",
    "length_change_pct",
    "jaccard",
    "sari",
    "corpus_sari",
    "embed_similarity",
    "compute_metrics",
    "write_metrics_jsonl",
    "write_metrics_tsv",
]

TSV_COLUMNS = ("pair_id", "sari", "norm_edit_distance", "length_change_pct", "jaccard", "embed_similarity")


class DegenerateInputError(ValueError):
    """An input is too degenerate for the metric to be defined."""


class UndefinedSimilarityError(ValueError):
    """Cosine similarity is undefined (a zero vector was produced)."""


@dataclass
class MetricVector:
    """Computed metrics for one pair. `sari` is present only when references
    exist; `embed_similarity` only when a provider was supplied."""

    pair_id: str
    norm_edit_distance: float
    length_change_pct: float
    jaccard: float
    sari: float | None = None
    embed_similarity: float | None = None
    embed_provider: str | None = None

    def to_record(self) -> dict:
        record = {
            "pair_id": self.pair_id,
            "sari": self.sari,
            "norm_edit_distance": self.norm_edit_distance,
            "length_change_pct": self.length_change_pct,
            "jaccard": self.jaccard,
            "embed_similarity": self.embed_similarity,
        }
        if self.embed_provider is not None:
            record["embed_provider"] = self.embed_provider
        return record


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Edit distance with unit-cost insert/delete/substitute, over any units."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, unit_a in enumerate(a, start=1):
        current = [i]
        for j, unit_b in enumerate(b, start=1):
            cost = 0 if unit_a == unit_b else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def _units(text: str, unit: str) -> list[str]:
    if unit == "token":
        return token_surfaces(text, lowercase=True)
    if unit == "char":
        return list(text)
    raise ValueError(f"unit must be 'token' or 'char', got {unit!r}")


def normalized_edit_distance(a: str, b: str, unit: str = "token") -> float:
    """Levenshtein distance divided by max(|a|, |b|) in the chosen units.

    0.0 when both sides are empty. Token units are lowercased.
    """
    units_a = _units(a, unit)
    units_b = _units(b, unit)
    longest = max(len(units_a), len(units_b))
    if longest == 0:
        return 0.0
    return levenshtein(units_a, units_b) / longest


def length_change_pct(complex_text: str, simple_text: str) -> float:
    """100 * (simple token count - complex token count) / complex token count."""
    n_complex = len(token_surfaces(complex_text))
    n_simple = len(token_surfaces(simple_text))
    if n_complex == 0:
        raise DegenerateInputError("complex side has no tokens; length change undefined")
    return 100.0 * (n_simple - n_complex) / n_complex


def jaccard(a: str, b: str) -> float:
    """|A ∩ B| / |A ∪ B| over lowercased token sets; 1.0 when both empty."""
    set_a = set(token_surfaces(a, lowercase=True))
    set_b = set(token_surfaces(b, lowercase=True))
    if not set_a and not set_b:
        return 1.0
    return len(set_a & set_b) / len(set_a | set_b)


def _ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def sari(source: str, output: str, references: Sequence[str]) -> float:
    """SARI score in [0, 100] under the conventions in the module docstring."""
    if not references:
        raise ValueError("sari requires at least one reference")
    source_tokens = token_surfaces(source, lowercase=True)
    output_tokens = token_surfaces(output, lowercase=True)
    reference_tokens = [token_surfaces(ref, lowercase=True) for ref in references]
    m = len(references)

    per_n_scores = []
    for n in range(1, 5):
        src = set(_ngrams(source_tokens, n))
        out = set(_ngrams(output_tokens, n))
        ref_sets = [set(_ngrams(tokens, n)) for tokens in reference_tokens]
        ref_union = set().union(*ref_sets)

        def r(gram: tuple[str, ...]) -> float:
            return sum(1 for ref in ref_sets if gram in ref) / m

        # ADD: n-grams the output introduced vs those the references sanction
        added_out = out - src
        added_ref = ref_union - src
        add_hits = len(added_out & added_ref)
        p_add = add_hits / len(added_out) if added_out else 0.0
        r_add = add_hits / len(added_ref) if added_ref else 0.0
        f_add = _f1(p_add, r_add)

        # KEEP: kept n-grams weighted by how many references keep them.
        # Sorted iteration pins the float summation order, so scores are
        # bit-identical across processes.
        kept = src & out
        kept_weight = sum(r(gram) for gram in sorted(kept))
        p_keep = kept_weight / len(kept) if kept else 0.0
        src_ref_weight = sum(r(gram) for gram in sorted(src))
        r_keep = kept_weight / src_ref_weight if src_ref_weight > 0 else 0.0
        f_keep = _f1(p_keep, r_keep)

        # DEL: precision only; a deletion is correct to the extent references delete it
        deleted = src - out
        p_del = sum(1.0 - r(gram) for gram in sorted(deleted)) / len(deleted) if deleted else 0.0

        per_n_scores.append((f_add + f_keep + p_del) / 3.0)

    return 100.0 * sum(per_n_scores) / len(per_n_scores)


def corpus_sari(
    sources: Sequence[str], outputs: Sequence[str], references: Sequence[Sequence[str]]
) -> float:
    """Mean sentence-level SARI over a corpus of aligned (source, output, refs)."""
    if not (len(sources) == len(outputs) == len(references)):
        raise ValueError("sources, outputs, and references must be aligned")
    if not sources:
        raise ValueError("corpus_sari requires at least one example")
    scores = [sari(s, o, r) for s, o, r in zip(sources, outputs, references)]
    return sum(scores) / len(scores)


def embed_similarity(a: str, b: str, provider) -> float:
    """Similarity of two texts under a provider.

    Vector providers (with `embed` and `dimension`) are scored by cosine;
    pair scorers (with `pair_score`) are called directly. Provider failures
    are wrapped in ProviderError carrying the provider name.
    """
    name = getattr(provider, "name", provider.__class__.__name__)
    if hasattr(provider, "embed"):
        try:
            vec_a = provider.embed(a)
            vec_b = provider.embed(b)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(name, exc) from exc
        norm_a = math.sqrt(sum(x * x for x in vec_a))
        norm_b = math.sqrt(sum(x * x for x in vec_b))
        if norm_a == 0 or norm_b == 0:
            raise UndefinedSimilarityError(f"provider {name!r} produced a zero vector")
        score = sum(x * y for x, y in zip(vec_a, vec_b)) / (norm_a * norm_b)
        # guard against float drift outside [-1, 1]
        return max(-1.0, min(1.0, score))
    if hasattr(provider, "pair_score"):
        try:
            return float(provider.pair_score(a, b))
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(name, exc) from exc
    raise TypeError(f"provider {name!r} has neither embed nor pair_score")


def compute_metrics(
    pair: SentencePair,
    references: Sequence[str] | None = None,
    provider=None,
    edit_unit: str = "token",
) -> MetricVector:
    """Compute the full metric vector for one pair."""
    vector = MetricVector(
        pair_id=pair.id,
        norm_edit_distance=normalized_edit_distance(pair.complex_text, pair.simple_text, unit=edit_unit),
        length_change_pct=length_change_pct(pair.complex_text, pair.simple_text),
        jaccard=jaccard(pair.complex_text, pair.simple_text),
    )
    if references:
        vector.sari = sari(pair.complex_text, pair.simple_text, references)
    if provider is not None:
        vector.embed_similarity = embed_similarity(pair.complex_text, pair.simple_text, provider)
        vector.embed_provider = getattr(provider, "name", provider.__class__.__name__)
    return vector


def write_metrics_jsonl(vectors: Iterable[MetricVector], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for vector in vectors:
            fh.write(json.dumps(vector.to_record(), ensure_ascii=False) + "\n")


def _tsv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    # json rendering keeps TSV numerically identical to the JSON emission
    return json.dumps(value)


def write_metrics_tsv(vectors: Iterable[MetricVector], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(TSV_COLUMNS) + "\n")
        for vector in vectors:
            record = vector.to_record()
            fh.write("\t".join(_tsv_cell(record[col]) for col in TSV_COLUMNS) + "\n")
