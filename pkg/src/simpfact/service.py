"""Event-sourced annotation backend.

All state mutations append one record to a JSON-lines event log; the full
service state is a deterministic fold of that log, so replaying it after a
crash reconstructs exactly the pre-crash state. Periodic snapshots bound
replay time. The workflow mirrors the crowdsourcing protocol: annotators
qualify on a 10-pair gold set (>= 75% category-level accuracy), qualified
annotators are served incomplete pairs (closest to completion first), each
pair collects votes from 3 distinct annotators, and export runs the same
aggregation and agreement code as the offline library.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import SEVERITY_VALUES, AnnotationVote, SentencePair
from .stats import CATEGORIES, agreement_report, aggregate_votes

__all__ = [
    "ServiceError",
    "GoldItem",
    "load_gold_set",
    "QualificationOutcome",
    "EventLog",
    "AnnotationService",
    "QUALIFICATION_THRESHOLD",
]

QUALIFICATION_THRESHOLD = 0.75
GOLD_SET_SIZE = 10


class ServiceError(Exception):
    """Service-level failure with a stable machine-readable code."""

    code = "error"
    http_status = 400

    def __init__(self, message: str):
        super().__init__(message)


class UnknownAnnotatorError(ServiceError):
    code = "unknown_annotator"
    http_status = 404


class NotQualifiedError(ServiceError):
    code = "not_qualified"
    http_status = 403


class UnknownPairError(ServiceError):
    code = "unknown_pair"
    http_status = 404


class NotAssignedError(ServiceError):
    code = "unassigned"
    http_status = 409


class DuplicateVoteError(ServiceError):
    code = "duplicate"
    http_status = 409


class InvalidLabelError(ServiceError):
    code = "invalid_label"
    http_status = 400


class BadAnswersError(ServiceError):
    code = "bad_answers"
    http_status = 400


@dataclass(frozen=True)
class GoldItem:
    id: str
    complex_text: str
    simple_text: str
    gold: dict


def load_gold_set(path: str | Path) -> list[GoldItem]:
    """Load the qualification gold set: 10 pairs, 3 gold labels each."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    items = [
        GoldItem(
            id=entry["id"],
            complex_text=entry["complex_text"],
            simple_text=entry["simple_text"],
            gold={c: entry["gold"][c] for c in CATEGORIES},
        )
        for entry in payload["pairs"]
    ]
    if len(items) != GOLD_SET_SIZE:
        raise ValueError(f"gold set must contain exactly {GOLD_SET_SIZE} pairs, got {len(items)}")
    for item in items:
        for category in CATEGORIES:
            if item.gold[category] not in SEVERITY_VALUES:
                raise ValueError(f"gold item {item.id}: bad {category} label {item.gold[category]!r}")
    return items


@dataclass
class QualificationOutcome:
    annotator_id: str
    score: float
    qualified: bool

    def to_record(self) -> dict:
        return {"annotator_id": self.annotator_id, "score": self.score, "qualified": self.qualified}


@dataclass
class _AnnotatorState:
    annotator_id: str
    qualified: bool = False
    score: float | None = None
    answers: list | None = None
    voted: set = field(default_factory=set)
    assigned: set = field(default_factory=set)


@dataclass
class _PairState:
    pair: SentencePair
    assigned: list = field(default_factory=list)  # annotator ids, assignment order
    votes: dict = field(default_factory=dict)  # annotator id -> {category: label, "ts": float}

    @property
    def complete(self) -> bool:
        return len(self.votes) >= 3


class EventLog:
    """Append-only JSON-lines event log.

    Replay tolerates a torn trailing line (a crash mid-write); everything
    before it is intact because records are written line-atomically and
    flushed.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = None

    def append(self, record: dict) -> None:
        if self._fh is None:
            self._fh = open(self.path, "a", encoding="utf-8")
        self._fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def replay(self, after_seq: int = 0) -> list[dict]:
        if not self.path.exists():
            return []
        events = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.endswith("\n"):
                    break  # torn final line from a crash; ignore
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn or corrupt tail; stop replaying
                if record.get("seq", 0) > after_seq:
                    events.append(record)
        return events


class AnnotationService:
    """In-process annotation engine; all mutations are serialized through a
    single lock and appended to the event log before being applied."""

    def __init__(
        self,
        pairs: Sequence[SentencePair],
        gold_items: Sequence[GoldItem],
        data_dir: str | Path,
        snapshot_every: int | None = 200,
        clock=time.time,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.gold_items = list(gold_items)
        self._clock = clock
        self._snapshot_every = snapshot_every
        self._lock = threading.RLock()
        self.log = EventLog(self.data_dir / "events.jsonl")

        self.annotators: dict[str, _AnnotatorState] = {}
        self.pair_order = [p.id for p in pairs]
        self.pairs: dict[str, _PairState] = {p.id: _PairState(pair=p) for p in pairs}
        self.seq = 0

        self._restore()

    # ------------------------------------------------------------------ state

    def _restore(self) -> None:
        snapshot = self._latest_snapshot()
        if snapshot is not None:
            self._load_snapshot(snapshot)
        for event in self.log.replay(after_seq=self.seq):
            self._apply(event)

    def _latest_snapshot(self) -> Path | None:
        snaps = sorted(self.data_dir.glob("snapshot-*.json"))
        return snaps[-1] if snaps else None

    def _load_snapshot(self, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            snap = json.load(fh)
        self.seq = snap["seq"]
        self.annotators = {}
        for record in snap["annotators"]:
            self.annotators[record["annotator_id"]] = _AnnotatorState(
                annotator_id=record["annotator_id"],
                qualified=record["qualified"],
                score=record["score"],
                answers=record["answers"],
                voted=set(record["voted"]),
                assigned=set(record["assigned"]),
            )
        for pair_id, record in snap["pairs"].items():
            if pair_id in self.pairs:
                self.pairs[pair_id].assigned = list(record["assigned"])
                self.pairs[pair_id].votes = {a: dict(v) for a, v in record["votes"].items()}

    def _write_snapshot(self) -> None:
        snap = {
            "seq": self.seq,
            "annotators": [
                {
                    "annotator_id": a.annotator_id,
                    "qualified": a.qualified,
                    "score": a.score,
                    "answers": a.answers,
                    "voted": sorted(a.voted),
                    "assigned": sorted(a.assigned),
                }
                for a in self.annotators.values()
            ],
            "pairs": {
                pid: {"assigned": ps.assigned, "votes": ps.votes}
                for pid, ps in self.pairs.items()
                if ps.assigned or ps.votes
            },
        }
        path = self.data_dir / f"snapshot-{self.seq:012d}.json"
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(snap, fh, ensure_ascii=False, sort_keys=True)
        tmp.rename(path)

    def _emit(self, kind: str, payload: dict) -> dict:
        self.seq += 1
        event = {"seq": self.seq, "ts": self._clock(), "kind": kind, "payload": payload}
        self.log.append(event)
        self._apply(event, emitting=True)
        if self._snapshot_every and self.seq % self._snapshot_every == 0:
            self._write_snapshot()
        return event

    def _apply(self, event: dict, emitting: bool = False) -> None:
        """Fold one event into the state. Replayed events are trusted but the
        core invariants are still asserted."""
        kind = event["kind"]
        payload = event["payload"]
        if not emitting:
            self.seq = event["seq"]
        if kind == "register":
            annotator_id = payload["annotator_id"]
            self.annotators.setdefault(annotator_id, _AnnotatorState(annotator_id=annotator_id))
        elif kind == "qualification_answer":
            state = self.annotators[payload["annotator_id"]]
            state.answers = payload["answers"]
            state.score = payload["score"]
            state.qualified = payload["qualified"]
        elif kind == "assignment":
            pair_state = self.pairs[payload["pair_id"]]
            annotator_id = payload["annotator_id"]
            if annotator_id in pair_state.assigned:
                raise ValueError(f"log corruption: {annotator_id} assigned twice to {payload['pair_id']}")
            if len(pair_state.assigned) >= 3:
                raise ValueError(f"log corruption: >3 assignments for {payload['pair_id']}")
            pair_state.assigned.append(annotator_id)
            self.annotators[annotator_id].assigned.add(payload["pair_id"])
        elif kind == "vote":
            pair_state = self.pairs[payload["pair_id"]]
            annotator_id = payload["annotator_id"]
            if annotator_id in pair_state.votes:
                raise ValueError(f"log corruption: duplicate vote by {annotator_id}")
            if len(pair_state.votes) >= 3:
                raise ValueError(f"log corruption: >3 votes for {payload['pair_id']}")
            pair_state.votes[annotator_id] = {
                "insertion": payload["insertion"],
                "deletion": payload["deletion"],
                "substitution": payload["substitution"],
                "ts": event["ts"],
            }
            self.annotators[annotator_id].voted.add(payload["pair_id"])
        elif kind == "export":
            pass  # audit record only
        else:
            raise ValueError(f"unknown event kind: {kind!r}")

    def state_fingerprint(self) -> str:
        """Canonical JSON of the mutable state, for replay-equivalence checks."""
        state = {
            "seq": self.seq,
            "annotators": {
                a.annotator_id: {
                    "qualified": a.qualified,
                    "score": a.score,
                    "answers": a.answers,
                    "voted": sorted(a.voted),
                    "assigned": sorted(a.assigned),
                }
                for a in self.annotators.values()
            },
            "pairs": {
                pid: {"assigned": ps.assigned, "votes": ps.votes}
                for pid, ps in self.pairs.items()
                if ps.assigned or ps.votes
            },
        }
        return json.dumps(state, sort_keys=True)

    # ------------------------------------------------------------- operations

    def register_and_qualify(self, annotator_id: str, answers: Sequence[dict]) -> QualificationOutcome:
        """Score 10 gold answers (3 categories each, 30 judgments) and
        persist the outcome. Re-registration returns the stored outcome."""
        if not annotator_id:
            raise BadAnswersError("annotator id must be non-empty")
        with self._lock:
            existing = self.annotators.get(annotator_id)
            if existing is not None and existing.score is not None:
                return QualificationOutcome(annotator_id, existing.score, existing.qualified)
            if len(answers) != len(self.gold_items):
                raise BadAnswersError(
                    f"expected {len(self.gold_items)} answers, got {len(answers)}"
                )
            matches = 0
            normalized = []
            for answer, item in zip(answers, self.gold_items):
                entry = {}
                for category in CATEGORIES:
                    try:
                        value = answer[category]
                    except (KeyError, TypeError):
                        raise BadAnswersError(f"answer for {item.id} missing {category}") from None
                    if value not in SEVERITY_VALUES:
                        raise BadAnswersError(f"answer for {item.id}: bad {category} label {value!r}")
                    entry[category] = value
                    if value == item.gold[category]:
                        matches += 1
                normalized.append(entry)
            score = matches / (len(self.gold_items) * len(CATEGORIES))
            qualified = score >= QUALIFICATION_THRESHOLD
            if existing is None:
                self._emit("register", {"annotator_id": annotator_id})
            self._emit(
                "qualification_answer",
                {
                    "annotator_id": annotator_id,
                    "answers": normalized,
                    "score": score,
                    "qualified": qualified,
                },
            )
            return QualificationOutcome(annotator_id, score, qualified)

    def qualification_status(self, annotator_id: str) -> QualificationOutcome | None:
        with self._lock:
            state = self.annotators.get(annotator_id)
            if state is None or state.score is None:
                return None
            return QualificationOutcome(annotator_id, state.score, state.qualified)

    def _require_qualified(self, annotator_id: str) -> _AnnotatorState:
        state = self.annotators.get(annotator_id)
        if state is None:
            raise UnknownAnnotatorError(f"unknown annotator {annotator_id!r}")
        if not state.qualified:
            raise NotQualifiedError(f"annotator {annotator_id!r} is not qualified")
        return state

    def next_task(self, annotator_id: str) -> SentencePair | None:
        """Serve an incomplete pair this annotator has not seen, preferring
        pairs closest to completion. Returns None when exhausted. A pending
        (assigned but unvoted) pair is served again rather than a new one."""
        with self._lock:
            state = self._require_qualified(annotator_id)
            pending = state.assigned - state.voted
            if pending:
                pair_id = min(pending, key=self.pair_order.index)
                return self.pairs[pair_id].pair
            best: tuple[int, int] | None = None
            best_pair: _PairState | None = None
            for order_index, pair_id in enumerate(self.pair_order):
                pair_state = self.pairs[pair_id]
                if pair_state.complete:
                    continue
                if annotator_id in pair_state.assigned:
                    continue
                if len(pair_state.assigned) >= 3:
                    continue
                key = (-len(pair_state.votes), order_index)
                if best is None or key < best:
                    best = key
                    best_pair = pair_state
            if best_pair is None:
                return None
            self._emit("assignment", {"annotator_id": annotator_id, "pair_id": best_pair.pair.id})
            return best_pair.pair

    def submit_vote(self, annotator_id: str, pair_id: str, labels: dict) -> dict:
        """Record one vote; the pair becomes complete on its third vote."""
        with self._lock:
            state = self._require_qualified(annotator_id)
            clean = {}
            for category in CATEGORIES:
                try:
                    value = labels[category]
                except (KeyError, TypeError):
                    raise InvalidLabelError(f"missing {category} label") from None
                if value not in SEVERITY_VALUES:
                    raise InvalidLabelError(f"{category} label must be one of {SEVERITY_VALUES}, got {value!r}")
                clean[category] = value
            pair_state = self.pairs.get(pair_id)
            if pair_state is None:
                raise UnknownPairError(f"unknown pair {pair_id!r}")
            if annotator_id in pair_state.votes:
                raise DuplicateVoteError(f"{annotator_id} already voted on {pair_id}")
            if annotator_id not in pair_state.assigned:
                raise NotAssignedError(f"{annotator_id} was not assigned pair {pair_id}")
            self._emit("vote", {"annotator_id": annotator_id, "pair_id": pair_id, **clean})
            return {"pair_id": pair_id, "complete": pair_state.complete}

    # ---------------------------------------------------------------- exports

    def collected_votes(self, complete_only: bool = True) -> list[AnnotationVote]:
        """Votes as corpus records, ordered by pair order then vote time."""
        votes = []
        with self._lock:
            for pair_id in self.pair_order:
                pair_state = self.pairs[pair_id]
                if complete_only and not pair_state.complete:
                    continue
                entries = sorted(pair_state.votes.items(), key=lambda kv: (kv[1]["ts"], kv[0]))
                for annotator_id, entry in entries:
                    votes.append(
                        AnnotationVote(
                            pair_id=pair_id,
                            annotator_id=annotator_id,
                            insertion=entry["insertion"],
                            deletion=entry["deletion"],
                            substitution=entry["substitution"],
                            submitted_at=entry["ts"],
                        )
                    )
        return votes

    def export_results(self) -> dict:
        """Aggregated labels plus the agreement report over complete pairs.

        Built with the same stats-module code as the offline CLI, so the two
        paths emit identical bytes for the same votes.
        """
        with self._lock:
            votes = self.collected_votes(complete_only=True)
            self._emit("export", {"n_votes": len(votes)})
        return export_payload(votes)

    def export_files(self, out_dir: str | Path) -> dict[str, Path]:
        """Write votes.jsonl, aggregated.jsonl, and agreement.json.

        Re-running the aggregation offline on the written vote file yields
        byte-identical aggregated/agreement outputs.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = self.export_results()
        votes = self.collected_votes(complete_only=True)
        paths = {
            "votes": out / "votes.jsonl",
            "aggregated": out / "aggregated.jsonl",
            "agreement": out / "agreement.json",
        }
        from .corpus import save_votes

        save_votes(votes, paths["votes"])
        with open(paths["aggregated"], "w", encoding="utf-8") as fh:
            for record in payload["aggregated"]:
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
        with open(paths["agreement"], "wb") as fh:
            fh.write(export_bytes(payload["agreement"]))
        return paths

    def progress(self) -> dict:
        with self._lock:
            complete = sum(1 for ps in self.pairs.values() if ps.complete)
            total_votes = sum(len(ps.votes) for ps in self.pairs.values())
            return {
                "pairs_total": len(self.pairs),
                "pairs_complete": complete,
                "votes": total_votes,
                "annotators": len(self.annotators),
                "annotators_qualified": sum(1 for a in self.annotators.values() if a.qualified),
            }

    def close(self) -> None:
        self.log.close()


def export_payload(votes: Sequence[AnnotationVote]) -> dict:
    """The canonical export structure for a vote collection."""
    if votes:
        aggregated = [label.to_record() for label in aggregate_votes(votes)]
        agreement = {c: r.to_record() for c, r in agreement_report(votes).items()}
    else:
        aggregated = []
        agreement = {}
    return {"aggregated": aggregated, "agreement": agreement}


def export_bytes(payload: dict) -> bytes:
    """Deterministic serialization used by both the service and the CLI."""
    return (json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n").encode("utf-8")
