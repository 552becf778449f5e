"""Label aggregation, inter-annotator agreement, and rank correlation.

Votes are aggregated per category by 3-way majority; pairs where all three
annotators disagree get no label for that category. Agreement is quantified
three ways per category: share of pairs with a defined majority, the same
share restricted to majority-nonzero pairs, and Krippendorff's alpha at the
ordinal level (severity -1 ranks above 2).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import SEVERITY_VALUES, AnnotationVote, ordinal_rank

__all__ = [
    "CATEGORIES",
    "AggregatedLabel",
    "CategoryAgreement",
    "DistributionReport",
    "StratumStat",
    "VoteCountError",
    "DegenerateVarianceError",
    "UndefinedCorrelationError",
    "majority_label",
    "group_votes_by_pair",
    "aggregate_votes",
    "category_agreement",
    "agreement_report",
    "krippendorff_alpha_ordinal",
    "spearman",
    "distribution_report",
    "stratified_stat",
]

CATEGORIES = ("insertion", "deletion", "substitution")


class VoteCountError(ValueError):
    """Some pairs do not have exactly 3 votes."""

    def __init__(self, offending: Mapping[str, int]):
        detail = ", ".join(f"{pid} has {n}" for pid, n in sorted(offending.items()))
        super().__init__(f"every pair needs exactly 3 votes: {detail}")
        self.offending = dict(offending)


class DegenerateVarianceError(ValueError):
    """All ratings identical: expected disagreement is zero, alpha undefined."""

    def __init__(self) -> None:
        super().__init__("undefined: no variance")


class UndefinedCorrelationError(ValueError):
    """A constant vector has no rank ordering to correlate."""


@dataclass
class AggregatedLabel:
    """Per-category majority outcome for one pair; None means undefined
    (all three annotators disagreed) and the pair is discarded for that
    category."""

    pair_id: str
    insertion: int | None
    deletion: int | None
    substitution: int | None

    def outcome(self, category: str) -> int | None:
        if category not in CATEGORIES:
            raise ValueError(f"unknown category: {category!r}")
        return getattr(self, category)

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "insertion": "undefined" if self.insertion is None else self.insertion,
            "deletion": "undefined" if self.deletion is None else self.deletion,
            "substitution": "undefined" if self.substitution is None else self.substitution,
        }


def majority_label(votes: Sequence[int]) -> int | None:
    """The value cast by at least 2 of 3 voters, or None when all differ."""
    if len(votes) != 3:
        raise ValueError(f"majority_label needs exactly 3 votes, got {len(votes)}")
    for value in votes:
        if value not in SEVERITY_VALUES:
            raise ValueError(f"not a severity value: {value!r}")
    value, count = Counter(votes).most_common(1)[0]
    return value if count >= 2 else None


def group_votes_by_pair(votes: Iterable[AnnotationVote]) -> dict[str, list[AnnotationVote]]:
    """Group votes by pair id, preserving first-appearance order of pairs."""
    grouped: dict[str, list[AnnotationVote]] = {}
    for vote in votes:
        grouped.setdefault(vote.pair_id, []).append(vote)
    return grouped


def _require_three_votes(grouped: Mapping[str, list[AnnotationVote]]) -> None:
    offending = {pid: len(vs) for pid, vs in grouped.items() if len(vs) != 3}
    if offending:
        raise VoteCountError(offending)


def aggregate_votes(votes: Iterable[AnnotationVote]) -> list[AggregatedLabel]:
    """Majority-aggregate a vote file into per-pair, per-category labels.

    Pairs with more or fewer than 3 votes are rejected, never truncated.
    """
    grouped = group_votes_by_pair(votes)
    _require_three_votes(grouped)
    labels = []
    for pair_id, pair_votes in grouped.items():
        labels.append(
            AggregatedLabel(
                pair_id=pair_id,
                insertion=majority_label([v.insertion for v in pair_votes]),
                deletion=majority_label([v.deletion for v in pair_votes]),
                substitution=majority_label([v.substitution for v in pair_votes]),
            )
        )
    return labels


@dataclass
class CategoryAgreement:
    """Agreement statistics for one category."""

    pct_majority: float
    n_pairs: int
    pct_majority_nonzero: float | None
    n_majority_nonzero: int
    kripp_alpha: float | None
    kripp_alpha_note: str | None = None

    def to_record(self) -> dict:
        return {
            "pct_majority": self.pct_majority,
            "n_pairs": self.n_pairs,
            "pct_majority_nonzero": self.pct_majority_nonzero,
            "n_majority_nonzero": self.n_majority_nonzero,
            "kripp_alpha": self.kripp_alpha,
            "kripp_alpha_note": self.kripp_alpha_note,
        }


def category_agreement(ratings_by_pair: Mapping[str, Sequence[int]]) -> CategoryAgreement:
    """Agreement statistics from per-pair vote triples for one category.

    pct_majority counts pairs with a defined majority over all pairs;
    pct_majority_nonzero restricts the denominator to pairs where at least
    2 of the 3 votes are nonzero, still counting defined majorities.
    """
    if not ratings_by_pair:
        raise ValueError("no pairs supplied")
    n_pairs = len(ratings_by_pair)
    n_majority = 0
    n_nonzero = 0
    n_nonzero_majority = 0
    for ratings in ratings_by_pair.values():
        majority = majority_label(list(ratings))
        if majority is not None:
            n_majority += 1
        if sum(1 for r in ratings if r != 0) >= 2:
            n_nonzero += 1
            if majority is not None:
                n_nonzero_majority += 1
    alpha: float | None
    note: str | None = None
    try:
        alpha = krippendorff_alpha_ordinal(list(ratings_by_pair.values()))
    except DegenerateVarianceError as exc:
        alpha, note = None, str(exc)
    except ValueError as exc:
        alpha, note = None, str(exc)
    return CategoryAgreement(
        pct_majority=100.0 * n_majority / n_pairs,
        n_pairs=n_pairs,
        pct_majority_nonzero=(100.0 * n_nonzero_majority / n_nonzero) if n_nonzero else None,
        n_majority_nonzero=n_nonzero,
        kripp_alpha=alpha,
        kripp_alpha_note=note,
    )


def agreement_report(votes: Iterable[AnnotationVote]) -> dict[str, CategoryAgreement]:
    """Per-category agreement statistics from a vote collection."""
    grouped = group_votes_by_pair(votes)
    _require_three_votes(grouped)
    report = {}
    for category in CATEGORIES:
        ratings_by_pair = {
            pid: [vote.label(category) for vote in pair_votes] for pid, pair_votes in grouped.items()
        }
        report[category] = category_agreement(ratings_by_pair)
    return report


def krippendorff_alpha_ordinal(
    units: Sequence[Sequence[int]],
    rank_map: Mapping[int, int] | None = None,
) -> float:
    """Krippendorff's alpha with the ordinal difference function.

    `units` holds the raw severity ratings per unit (pair); values are mapped
    through the ordinal rank (-1 -> 3) before computing distances. Units with
    fewer than 2 ratings are ignored, as they contribute no pairable values.

    Builds the coincidence matrix o_ck where each ordered pair of ratings in
    a unit with m raters contributes 1/(m-1); marginals n_c = sum_k o_ck;
    ordinal distance d2_ck = (sum_{g=c..k} n_g - (n_c + n_k)/2)^2; then
    alpha = 1 - D_o/D_e with D_o = sum o_ck d2_ck and
    D_e = sum_c sum_k n_c n_k d2_ck / (n - 1).
    """
    if rank_map is None:
        mapped_units = [[ordinal_rank(v) for v in unit] for unit in units]
    else:
        mapped_units = [[rank_map[v] for v in unit] for unit in units]
    pairable = [unit for unit in mapped_units if len(unit) >= 2]
    if not pairable:
        raise ValueError("need at least one unit with 2 or more ratings")
    values = sorted({v for unit in pairable for v in unit})
    if len(values) < 2:
        raise DegenerateVarianceError()
    index = {v: i for i, v in enumerate(values)}
    size = len(values)

    coincidence = [[0.0] * size for _ in range(size)]
    for unit in pairable:
        m = len(unit)
        for i, a in enumerate(unit):
            for j, b in enumerate(unit):
                if i != j:
                    coincidence[index[a]][index[b]] += 1.0 / (m - 1)

    marginals = [sum(row) for row in coincidence]
    n_total = sum(marginals)

    def ordinal_distance_sq(c: int, k: int) -> float:
        lo, hi = min(c, k), max(c, k)
        between = sum(marginals[g] for g in range(lo, hi + 1))
        return (between - (marginals[c] + marginals[k]) / 2.0) ** 2

    observed = 0.0
    expected = 0.0
    for c in range(size):
        for k in range(size):
            d2 = ordinal_distance_sq(c, k)
            observed += coincidence[c][k] * d2
            expected += marginals[c] * marginals[k] * d2
    expected /= n_total - 1
    if expected == 0:
        raise DegenerateVarianceError()
    return 1.0 - observed / expected


def _average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties receiving the mean of their rank positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rank correlation: Pearson correlation of average ranks.

    Severity labels must be mapped through their ordinal rank before use.
    """
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise ValueError(f"need at least 3 observations, got {len(xs)}")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    rank_x = _average_ranks(xs)
    rank_y = _average_ranks(ys)
    n = len(xs)
    mean_x = sum(rank_x) / n
    mean_y = sum(rank_y) / n
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(rank_x, rank_y))
    var_x = sum((a - mean_x) ** 2 for a in rank_x)
    var_y = sum((b - mean_y) ** 2 for b in rank_y)
    rho = cov / math.sqrt(var_x * var_y)
    return max(-1.0, min(1.0, rho))


@dataclass
class DistributionReport:
    """Label distribution for one category over defined outcomes."""

    percentages: dict[int, float]
    n_defined: int
    n_undefined: int

    def to_record(self) -> dict:
        return {
            "percentages": {str(k): v for k, v in self.percentages.items()},
            "n_defined": self.n_defined,
            "n_undefined": self.n_undefined,
        }


def distribution_report(outcomes: Iterable[int | None]) -> DistributionReport:
    """Percentage of each severity among defined outcomes; undefined outcomes
    are excluded from the percentages and counted separately."""
    counts = Counter()
    n_undefined = 0
    for outcome in outcomes:
        if outcome is None:
            n_undefined += 1
        elif outcome in SEVERITY_VALUES:
            counts[outcome] += 1
        else:
            raise ValueError(f"not a severity value: {outcome!r}")
    n_defined = sum(counts.values())
    percentages = {
        value: (100.0 * counts[value] / n_defined) if n_defined else 0.0
        for value in SEVERITY_VALUES
    }
    return DistributionReport(percentages=percentages, n_defined=n_defined, n_undefined=n_undefined)


@dataclass
class StratumStat:
    """Mean and sample standard deviation of one label level's metric values.

    std is None for singleton groups (the n-1 denominator is undefined)."""

    mean: float
    std: float | None
    n: int

    def to_record(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}


def stratified_stat(groups: Mapping[int, Sequence[float]]) -> dict[int, StratumStat]:
    """Per-level mean and sample (n-1) standard deviation.

    Empty groups are reported as absent, mirroring blank table cells.
    """
    stats = {}
    for level, values in groups.items():
        if not values:
            continue
        n = len(values)
        mean = sum(values) / n
        if n > 1:
            std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
        else:
            std = None
        stats[level] = StratumStat(mean=mean, std=std, n=n)
    return stats
