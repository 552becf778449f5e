"""Synthetic error generators for insertion and substitution training data.

Five generators, each deterministic given (input text, seed, provider stub):

  name_insertion     person name -> pronoun, then swap source/target
  phrase_insertion   delete a phrase, swap, keep by similarity band
  number_alteration  numeric literal -> random same-digit-count number
  statement_negation toggle negation on each auxiliary verb
  mask_fill          mask tokens, fill with ranked masked-LM candidates

The insertion generators build a deletion first and then swap the two sides,
so the "inserted" content is grounded in real text. Severity bands for
phrase insertion default to the [0.6, 0.8] (level 1) and [0.2, 0.4]
(level 2) score intervals; anything outside both bands is discarded.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import SentencePair
from .providers import ProviderError

__all__ = [
    "PerturbedExample",
    "GENERATORS",
    "load_name_lexicon",
    "gen_name_insertion",
    "gen_phrase_insertion",
    "gen_number_alteration",
    "gen_statement_negation",
    "gen_mask_fill",
    "generate_examples",
    "assemble_synthetic_dataset",
    "write_dataset",
]

GENERATORS = (
    "name_insertion",
    "phrase_insertion",
    "number_alteration",
    "statement_negation",
    "mask_fill",
)

CATEGORY_BY_GENERATOR = {
    "name_insertion": "insertion",
    "phrase_insertion": "insertion",
    "number_alteration": "substitution",
    "statement_negation": "substitution",
    "mask_fill": "substitution",
}


@dataclass
class PerturbedExample:
    """One synthetic (source, target) training instance."""

    source_text: str
    target_text: str
    category: str
    severity: int
    generator: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator: {self.generator!r}")
        if self.category != CATEGORY_BY_GENERATOR[self.generator]:
            raise ValueError(
                f"generator {self.generator} emits {CATEGORY_BY_GENERATOR[self.generator]}, "
                f"not {self.category}"
            )
        if self.severity not in (1, 2):
            raise ValueError(f"severity must be 1 or 2, got {self.severity}")
        if self.source_text == self.target_text:
            raise ValueError("source and target must differ")

    def to_record(self) -> dict:
        return {
            "source_text": self.source_text,
            "target_text": self.target_text,
            "category": self.category,
            "severity": self.severity,
            "generator": self.generator,
            "provenance": self.provenance,
        }


_EDGE_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"


def _split_word(word: str) -> tuple[str, str, str]:
    """Split a whitespace token into (leading punct, core, trailing punct)."""
    start = 0
    end = len(word)
    while start < end and word[start] in _EDGE_PUNCT:
        start += 1
    while end > start and word[end - 1] in _EDGE_PUNCT:
        end -= 1
    return word[:start], word[start:end], word[end:]


def load_name_lexicon() -> frozenset[str]:
    """The bundled first-name lexicon used by name detection."""
    text = resources.files("simpfact.data").joinpath("first_names.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def _is_sentence_initial(words: Sequence[str], index: int) -> bool:
    if index == 0:
        return True
    _, _, trailing = _split_word(words[index - 1])
    return any(ch in ".!?" for ch in trailing)


def gen_name_insertion(
    source: str,
    lexicon: frozenset[str] | None = None,
    pronoun: str = "They",
    pair_id: str = "",
) -> list[PerturbedExample]:
    """Replace each detected person name, one at a time, with a pronoun, then
    swap the texts so the name becomes inserted content. Level 1 insertion.

    Detection: the token is in the name lexicon, or it is a capitalized
    alphabetic token in non-sentence-initial position. The replacement
    pronoun defaults to "They" (lowercased mid-sentence); verb agreement is
    not repaired.
    """
    if lexicon is None:
        lexicon = load_name_lexicon()
    words = source.split()
    examples = []
    for i, word in enumerate(words):
        leading, core, trailing = _split_word(word)
        if not core or not core.isalpha() or not core[0].isupper() or core == "I":
            continue
        initial = _is_sentence_initial(words, i)
        if core not in lexicon and initial:
            continue
        replacement = pronoun if initial else pronoun.lower()
        replaced_words = list(words)
        replaced_words[i] = leading + replacement + trailing
        replaced = " ".join(replaced_words)
        if replaced == source:
            continue
        # the swap must actually insert a token the source lacks
        if core in set(_split_word(w)[1] for w in replaced_words):
            continue
        examples.append(
            PerturbedExample(
                source_text=replaced,
                target_text=source,
                category="insertion",
                severity=1,
                generator="name_insertion",
                provenance={"pair_id": pair_id, "name": core, "position": i, "pronoun": replacement},
            )
        )
    return examples


_CHUNK_DELIMITERS = ",;:"


def _phrase_spans(words: Sequence[str], min_window: int, max_window: int) -> list[tuple[int, int]]:
    """Candidate phrase spans: punctuation-delimited chunks, parentheticals,
    and contiguous token windows, all as half-open word index ranges."""
    n = len(words)
    spans: set[tuple[int, int]] = set()
    # punctuation-delimited chunks
    boundaries = [0]
    for i, word in enumerate(words):
        _, _, trailing = _split_word(word)
        if any(ch in _CHUNK_DELIMITERS for ch in trailing):
            boundaries.append(i + 1)
    boundaries.append(n)
    for lo, hi in zip(boundaries, boundaries[1:]):
        if hi > lo and not (lo == 0 and hi == n):
            spans.add((lo, hi))
    # parentheticals
    open_index = None
    for i, word in enumerate(words):
        if word.startswith("(") and open_index is None:
            open_index = i
        if open_index is not None and ")" in word:
            spans.add((open_index, i + 1))
            open_index = None
    # token windows
    for length in range(min_window, max_window + 1):
        for lo in range(0, n - length + 1):
            if length < n:
                spans.add((lo, lo + length))
    return sorted(spans)


def gen_phrase_insertion(
    source: str,
    provider,
    level1_band: tuple[float, float] = (0.6, 0.8),
    level2_band: tuple[float, float] = (0.2, 0.4),
    min_window: int = 3,
    max_window: int = 8,
    pair_id: str = "",
) -> list[PerturbedExample]:
    """Delete candidate phrases one at a time, swap source/target, and keep
    each example only when the provider's similarity score lands in the
    level-1 or level-2 band (inclusive)."""
    words = source.split()
    examples = []
    seen_sources: set[str] = set()
    for lo, hi in _phrase_spans(words, min_window, max_window):
        remaining = words[:lo] + words[hi:]
        if not remaining:
            continue
        shortened = " ".join(remaining)
        if shortened == source or shortened in seen_sources:
            continue
        try:
            score = float(provider.pair_score(source, shortened))
        except ProviderError:
            raise
        except Exception as exc:
            name = getattr(provider, "name", provider.__class__.__name__)
            raise ProviderError(name, exc) from exc
        if level1_band[0] <= score <= level1_band[1]:
            severity = 1
        elif level2_band[0] <= score <= level2_band[1]:
            severity = 2
        else:
            continue
        deleted_cores = {_split_word(w)[1] for w in words[lo:hi]}
        remaining_cores = {_split_word(w)[1] for w in remaining}
        if not (deleted_cores - remaining_cores):
            continue
        seen_sources.add(shortened)
        examples.append(
            PerturbedExample(
                source_text=shortened,
                target_text=source,
                category="insertion",
                severity=severity,
                generator="phrase_insertion",
                provenance={"pair_id": pair_id, "span": [lo, hi], "score": score},
            )
        )
    return examples


_NUMBER = re.compile(r"\d+")


def gen_number_alteration(source: str, seed: int, pair_id: str = "") -> list[PerturbedExample]:
    """Replace each numeric literal, one at a time, with a different uniformly
    drawn number of the same digit count. Level 1 substitution."""
    rng = random.Random(seed)
    examples = []
    for match in _NUMBER.finditer(source):
        original = match.group()
        width = len(original)
        while True:
            if width == 1:
                candidate = str(rng.randint(0, 9))
            else:
                candidate = str(rng.randint(1, 9)) + "".join(
                    str(rng.randint(0, 9)) for _ in range(width - 1)
                )
            if candidate != original:
                break
        altered = source[: match.start()] + candidate + source[match.end() :]
        examples.append(
            PerturbedExample(
                source_text=source,
                target_text=altered,
                category="substitution",
                severity=1,
                generator="number_alteration",
                provenance={
                    "pair_id": pair_id,
                    "original": original,
                    "replacement": candidate,
                    "offset": match.start(),
                },
            )
        )
    return examples


AUXILIARIES = frozenset(
    "is are was were has have had do does did can could will would may might must should".split()
)

_CONTRACTION_TO_POSITIVE = {
    "isn't": "is", "aren't": "are", "wasn't": "was", "weren't": "were",
    "hasn't": "has", "haven't": "have", "hadn't": "had",
    "don't": "do", "doesn't": "does", "didn't": "did",
    "can't": "can", "cannot": "can", "couldn't": "could",
    "won't": "will", "wouldn't": "would",
    "mayn't": "may", "mightn't": "might", "mustn't": "must", "shouldn't": "should",
}


def _match_case(template: str, word: str) -> str:
    if template and template[0].isupper():
        return word[0].upper() + word[1:]
    return word


def gen_statement_negation(
    source: str,
    auxiliaries: frozenset[str] = AUXILIARIES,
    pair_id: str = "",
) -> list[PerturbedExample]:
    """Toggle negation on each auxiliary verb, one at a time: insert "not"
    after a positive auxiliary, strip the negation from a negative one.
    Level 1 substitution."""
    words = source.split()
    examples = []
    for i, word in enumerate(words):
        leading, core, trailing = _split_word(word)
        lowered = core.lower()
        edited: list[str] | None = None
        action = None
        if lowered in _CONTRACTION_TO_POSITIVE:
            positive = _match_case(core, _CONTRACTION_TO_POSITIVE[lowered])
            edited = list(words)
            edited[i] = leading + positive + trailing
            action = "strip_negation"
        elif lowered in auxiliaries:
            next_core = _split_word(words[i + 1])[1].lower() if i + 1 < len(words) else ""
            if next_core == "not":
                edited = list(words)
                next_leading, _, next_trailing = _split_word(words[i + 1])
                # punctuation around "not" reattaches to the auxiliary
                edited[i] = word + next_leading + next_trailing
                del edited[i + 1]
                action = "strip_negation"
            else:
                edited = list(words)
                edited[i] = leading + core
                edited.insert(i + 1, "not" + trailing)
                action = "insert_negation"
        if edited is None:
            continue
        altered = " ".join(edited)
        if altered == source:
            continue
        examples.append(
            PerturbedExample(
                source_text=source,
                target_text=altered,
                category="substitution",
                severity=1,
                generator="statement_negation",
                provenance={"pair_id": pair_id, "auxiliary": core, "position": i, "action": action},
            )
        )
    return examples


def _maskable_positions(words: Sequence[str], exclude_punct: bool) -> list[int]:
    if not exclude_punct:
        return list(range(len(words)))
    return [i for i, word in enumerate(words) if _split_word(word)[1]]


def gen_mask_fill(
    source: str,
    provider,
    mode: str,
    seed: int,
    exclude_punct: bool = True,
    pair_id: str = "",
) -> PerturbedExample | None:
    """Mask-and-fill substitution errors.

    level1 masks 2 random token positions and fills with rank-3 candidates;
    level2 masks every fifth token (1-based positions 5, 10, ...) and fills
    with rank-5 candidates. Pure-punctuation tokens are skipped by default.
    Returns None when the text is too short or the fills reproduce it.
    """
    if mode not in ("level1", "level2"):
        raise ValueError(f"mode must be 'level1' or 'level2', got {mode!r}")
    words = source.split()
    maskable = _maskable_positions(words, exclude_punct)
    if mode == "level1":
        if len(maskable) < 2:
            return None
        rng = random.Random(seed)
        positions = sorted(rng.sample(maskable, 2))
        rank = 3
        severity = 1
    else:
        positions = [i for i in range(4, len(words), 5) if i in set(maskable)]
        if not positions:
            return None
        rank = 5
        severity = 2
    try:
        fills = provider.fill(source, positions, rank)
    except ProviderError:
        raise
    except Exception as exc:
        name = getattr(provider, "name", provider.__class__.__name__)
        raise ProviderError(name, exc) from exc
    edited = list(words)
    for position, fill in zip(positions, fills):
        leading, _, trailing = _split_word(words[position])
        edited[position] = leading + fill + trailing
    altered = " ".join(edited)
    if altered == source:
        return None
    return PerturbedExample(
        source_text=source,
        target_text=altered,
        category="substitution",
        severity=severity,
        generator="mask_fill",
        provenance={
            "pair_id": pair_id,
            "mode": mode,
            "rank": rank,
            "positions": positions,
            "fills": list(fills),
        },
    )


def _derived_seed(seed: int, *parts: str) -> int:
    key = f"{seed}\x00" + "\x00".join(parts)
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


def generate_examples(
    sources: Sequence[tuple[str, str]],
    seed: int,
    similarity_provider=None,
    mask_provider=None,
    generators: Sequence[str] = GENERATORS,
    lexicon: frozenset[str] | None = None,
    exclude_punct: bool = True,
) -> list[PerturbedExample]:
    """Run the selected generators over (pair_id, text) sources.

    Per-sentence seeds are derived from the run seed and the pair id, so
    output is stable under corpus reordering.
    """
    unknown = set(generators) - set(GENERATORS)
    if unknown:
        raise ValueError(f"unknown generators: {sorted(unknown)}")
    if lexicon is None and "name_insertion" in generators:
        lexicon = load_name_lexicon()
    examples: list[PerturbedExample] = []
    for pair_id, text in sources:
        if "name_insertion" in generators:
            examples.extend(gen_name_insertion(text, lexicon=lexicon, pair_id=pair_id))
        if "phrase_insertion" in generators:
            if similarity_provider is None:
                raise ValueError("phrase_insertion requires a similarity provider")
            examples.extend(gen_phrase_insertion(text, similarity_provider, pair_id=pair_id))
        if "number_alteration" in generators:
            examples.extend(
                gen_number_alteration(text, seed=_derived_seed(seed, pair_id, "number"), pair_id=pair_id)
            )
        if "statement_negation" in generators:
            examples.extend(gen_statement_negation(text, pair_id=pair_id))
        if "mask_fill" in generators:
            if mask_provider is None:
                raise ValueError("mask_fill requires a masked-LM provider")
            for mode in ("level1", "level2"):
                example = gen_mask_fill(
                    text,
                    mask_provider,
                    mode=mode,
                    seed=_derived_seed(seed, pair_id, mode),
                    exclude_punct=exclude_punct,
                    pair_id=pair_id,
                )
                if example is not None:
                    examples.append(example)
    return examples


def assemble_synthetic_dataset(
    category: str,
    examples: Iterable[PerturbedExample],
    clean_pairs: Iterable[SentencePair],
    seed: int,
    level_caps: dict[int, int] | None = None,
) -> tuple[list[dict], dict]:
    """Merge generated examples with level-0 originals into one dataset.

    For insertion, level-1 examples are downsampled to match the level-2
    count. Returns (records, manifest); the manifest carries per-generator
    and per-level counts plus the seed.
    """
    if category not in ("insertion", "substitution"):
        raise ValueError(f"category must be insertion or substitution, got {category!r}")
    rng = random.Random(seed)
    selected = [ex for ex in examples if ex.category == category]
    by_level: dict[int, list[PerturbedExample]] = {1: [], 2: []}
    for ex in selected:
        by_level[ex.severity].append(ex)

    if category == "insertion" and len(by_level[1]) > len(by_level[2]):
        keep = sorted(rng.sample(range(len(by_level[1])), len(by_level[2])))
        by_level[1] = [by_level[1][i] for i in keep]

    records: list[dict] = []
    for pair in clean_pairs:
        records.append(
            {
                "source_text": pair.complex_text,
                "target_text": pair.simple_text,
                "category": category,
                "severity": 0,
                "generator": "original",
                "provenance": {"pair_id": pair.id},
            }
        )
    for level in (1, 2):
        bucket = by_level[level]
        cap = (level_caps or {}).get(level)
        if cap is not None and len(bucket) > cap:
            keep = sorted(rng.sample(range(len(bucket)), cap))
            bucket = [bucket[i] for i in keep]
        records.extend(ex.to_record() for ex in bucket)

    level_counts = {0: 0, 1: 0, 2: 0}
    generator_counts: dict[str, dict[str, int]] = {}
    for record in records:
        level_counts[record["severity"]] += 1
        per_gen = generator_counts.setdefault(record["generator"], {"0": 0, "1": 0, "2": 0})
        per_gen[str(record["severity"])] += 1
    manifest = {
        "category": category,
        "seed": seed,
        "level_counts": {str(k): v for k, v in level_counts.items()},
        "generator_counts": generator_counts,
        "total": len(records),
    }
    return records, manifest


def write_dataset(records: Sequence[dict], manifest: dict, examples_path: str | Path, manifest_path: str | Path) -> None:
    with open(examples_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
