"""Data model and file ingestion for parallel simplification corpora.

Pairs arrive either as two line-aligned plain-text files (one sentence per
line) or as JSON-lines records, which is the canonical internal format.
Annotation votes are stored separately and joined to pairs by ``pair_id`` so
the same pairs can be re-annotated.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

__all__ = [
    "Severity",
    "Origin",
    "SentencePair",
    "AnnotationVote",
    "Token",
    "AlignmentError",
    "CorpusDecodeError",
    "RecordError",
    "tokenize",
    "load_parallel_corpus",
    "load_pairs",
    "save_pairs",
    "load_votes",
    "save_votes",
    "sentence_count",
    "noise_filter",
]

VALID_SPLITS = ("train", "validation", "test", "unsplit")
VALID_ORIGIN_KINDS = ("reference", "system")


class Severity(enum.IntEnum):
    """Per-category severity of an information change.

    The gibberish label (-1) sits above 2 in the severity ordering, so its
    ordinal rank is 3.
    """

    NONE = 0
    MINOR = 1
    MAJOR = 2
    GIBBERISH = -1

    @property
    def ordinal_rank(self) -> int:
        return 3 if self.value == -1 else self.value


SEVERITY_VALUES = (0, 1, 2, -1)


def ordinal_rank(value: int) -> int:
    """Map a severity value to its ordinal rank (0->0, 1->1, 2->2, -1->3)."""
    if value not in SEVERITY_VALUES:
        raise ValueError(f"not a severity value: {value!r}")
    return 3 if value == -1 else value


class AlignmentError(ValueError):
    """Parallel files disagree on line counts."""


class CorpusDecodeError(ValueError):
    """A corpus file contains bytes that are not valid UTF-8."""

    def __init__(self, path: str | Path, byte_offset: int, reason: str):
        super().__init__(f"{path}: invalid UTF-8 at byte {byte_offset}: {reason}")
        self.path = str(path)
        self.byte_offset = byte_offset


class RecordError(ValueError):
    """A JSON-lines record is malformed."""

    def __init__(self, path: str | Path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class Origin:
    """Where a pair came from: a dataset (`reference`) or a model (`system`)."""

    kind: str
    name: str

    def __post_init__(self) -> None:
        if self.kind not in VALID_ORIGIN_KINDS:
            raise ValueError(f"origin kind must be one of {VALID_ORIGIN_KINDS}, got {self.kind!r}")
        if not self.name:
            raise ValueError("origin name must be non-empty")


@dataclass
class SentencePair:
    """One (complex, simple) sentence pair with provenance."""

    id: str
    complex_text: str
    simple_text: str
    origin: Origin
    split: str = "unsplit"
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("pair id must be non-empty")
        if not self.complex_text.strip():
            raise ValueError(f"pair {self.id}: complex_text is empty")
        if not self.simple_text.strip():
            raise ValueError(f"pair {self.id}: simple_text is empty")
        if self.split not in VALID_SPLITS:
            raise ValueError(f"pair {self.id}: split must be one of {VALID_SPLITS}, got {self.split!r}")

    def to_record(self) -> dict:
        record = {
            "id": self.id,
            "complex_text": self.complex_text,
            "simple_text": self.simple_text,
            "origin": {"kind": self.origin.kind, "name": self.origin.name},
            "split": self.split,
        }
        record.update(self.extra)
        return record

    @classmethod
    def from_record(cls, record: dict) -> "SentencePair":
        known = {"id", "complex_text", "simple_text", "origin", "split"}
        origin = record["origin"]
        return cls(
            id=record["id"],
            complex_text=record["complex_text"],
            simple_text=record["simple_text"],
            origin=Origin(kind=origin["kind"], name=origin["name"]),
            split=record.get("split", "unsplit"),
            extra={k: v for k, v in record.items() if k not in known},
        )


@dataclass
class AnnotationVote:
    """One annotator's three category labels for one pair."""

    pair_id: str
    annotator_id: str
    insertion: int
    deletion: int
    substitution: int
    submitted_at: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for category in ("insertion", "deletion", "substitution"):
            value = getattr(self, category)
            if value not in SEVERITY_VALUES:
                raise ValueError(
                    f"vote ({self.pair_id}, {self.annotator_id}): {category} label "
                    f"must be one of {SEVERITY_VALUES}, got {value!r}"
                )

    def label(self, category: str) -> int:
        if category not in ("insertion", "deletion", "substitution"):
            raise ValueError(f"unknown category: {category!r}")
        return getattr(self, category)

    def to_record(self) -> dict:
        record = {
            "pair_id": self.pair_id,
            "annotator_id": self.annotator_id,
            "insertion": self.insertion,
            "deletion": self.deletion,
            "substitution": self.substitution,
            "submitted_at": self.submitted_at,
        }
        record.update(self.extra)
        return record

    @classmethod
    def from_record(cls, record: dict) -> "AnnotationVote":
        known = {"pair_id", "annotator_id", "insertion", "deletion", "substitution", "submitted_at"}
        return cls(
            pair_id=record["pair_id"],
            annotator_id=record["annotator_id"],
            insertion=record["insertion"],
            deletion=record["deletion"],
            substitution=record["substitution"],
            submitted_at=record["submitted_at"],
            extra={k: v for k, v in record.items() if k not in known},
        )


@dataclass(frozen=True)
class Token:
    """A surface token with its character span in the source text."""

    surface: str
    start: int
    end: int


# Characters peeled off token edges by the shared tokenizer. Internal
# punctuation (e.g. "U.S.-based") stays attached.
_PUNCT = set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")

_WS_CHUNK = re.compile(r"\S+")


def tokenize(text: str) -> list[Token]:
    """Split on whitespace, then peel leading/trailing punctuation into
    separate single-character tokens.

    Lowercasing is not applied here; callers decide. Deterministic, and the
    token spans tile the non-whitespace characters of the input.
    """
    tokens: list[Token] = []
    for match in _WS_CHUNK.finditer(text):
        chunk = match.group()
        lo, hi = match.start(), match.end()
        # peel leading punctuation
        while lo < hi and chunk[lo - match.start()] in _PUNCT:
            tokens.append(Token(text[lo], lo, lo + 1))
            lo += 1
        # collect trailing punctuation, emitted after the core
        trailing: list[Token] = []
        while hi > lo and chunk[hi - 1 - match.start()] in _PUNCT:
            trailing.append(Token(text[hi - 1], hi - 1, hi))
            hi -= 1
        if lo < hi:
            tokens.append(Token(text[lo:hi], lo, hi))
        tokens.extend(reversed(trailing))
    return tokens


def token_surfaces(text: str, lowercase: bool = False) -> list[str]:
    surfaces = [t.surface for t in tokenize(text)]
    return [s.lower() for s in surfaces] if lowercase else surfaces


def _read_lines(path: str | Path) -> list[str]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusDecodeError(path, exc.start, exc.reason) from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_parallel_corpus(
    complex_path: str | Path,
    simple_path: str | Path,
    origin: Origin,
    split: str = "unsplit",
) -> list[SentencePair]:
    """Load two line-aligned files into pairs, one pair per line.

    Ids are assigned as ``<origin name>:<line number>`` (1-based), preserving
    file order.
    """
    complex_lines = _read_lines(complex_path)
    simple_lines = _read_lines(simple_path)
    if len(complex_lines) != len(simple_lines):
        raise AlignmentError(
            f"line-count mismatch between {complex_path} and {simple_path}: "
            f"{len(complex_lines)} vs {len(simple_lines)}"
        )
    pairs = []
    for i, (complex_text, simple_text) in enumerate(zip(complex_lines, simple_lines), start=1):
        pairs.append(
            SentencePair(
                id=f"{origin.name}:{i}",
                complex_text=complex_text,
                simple_text=simple_text,
                origin=origin,
                split=split,
            )
        )
    return pairs


def _iter_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordError(path, line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise RecordError(path, line_no, "record is not a JSON object")
        yield line_no, record


def load_pairs(path: str | Path) -> list[SentencePair]:
    """Load SentencePair records from a JSON-lines file."""
    pairs = []
    seen: set[str] = set()
    for line_no, record in _iter_records(path):
        try:
            pair = SentencePair.from_record(record)
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordError(path, line_no, f"bad pair record: {exc}") from exc
        if pair.id in seen:
            raise RecordError(path, line_no, f"duplicate pair id {pair.id!r}")
        seen.add(pair.id)
        pairs.append(pair)
    return pairs


def save_pairs(pairs: Iterable[SentencePair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_record(), ensure_ascii=False) + "\n")


def load_votes(path: str | Path) -> list[AnnotationVote]:
    """Load AnnotationVote records from a JSON-lines file."""
    votes = []
    seen: set[tuple[str, str]] = set()
    for line_no, record in _iter_records(path):
        try:
            vote = AnnotationVote.from_record(record)
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordError(path, line_no, f"bad vote record: {exc}") from exc
        key = (vote.pair_id, vote.annotator_id)
        if key in seen:
            raise RecordError(path, line_no, f"duplicate vote for {key}")
        seen.add(key)
        votes.append(vote)
    return votes


def save_votes(votes: Iterable[AnnotationVote], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for vote in votes:
            fh.write(json.dumps(vote.to_record(), ensure_ascii=False) + "\n")


_TERMINAL_RUN = re.compile(r"[.!?]+")


def sentence_count(text: str) -> int:
    """Number of sentences, counted as runs of terminal punctuation (., !, ?).

    Texts without terminal punctuation count as one sentence.
    """
    return max(1, len(_TERMINAL_RUN.findall(text)))


def _token_set_jaccard(a: str, b: str, lowercase: bool) -> float:
    set_a = set(token_surfaces(a, lowercase=lowercase))
    set_b = set(token_surfaces(b, lowercase=lowercase))
    if not set_a and not set_b:
        return 1.0
    return len(set_a & set_b) / len(set_a | set_b)


def noise_filter(
    pairs: Iterable[SentencePair],
    single_sentence_threshold: float = 0.4,
    multi_sentence_threshold: float = 0.2,
    lowercase: bool = True,
    sentence_counter=sentence_count,
) -> list[SentencePair]:
    """Drop noisy alignments by token-set Jaccard similarity.

    A pair is kept iff Jaccard(complex, simple) is at least 0.4 when the
    simple side is a single sentence, or at least 0.2 when it is longer than
    one sentence. The default sentence counter counts terminal-punctuation
    runs; pass another callable to change that convention. Output order
    follows input order; filtering is idempotent.
    """
    kept = []
    for pair in pairs:
        threshold = (
            single_sentence_threshold
            if sentence_counter(pair.simple_text) == 1
            else multi_sentence_threshold
        )
        if _token_set_jaccard(pair.complex_text, pair.simple_text, lowercase) >= threshold:
            kept.append(pair)
    return kept
