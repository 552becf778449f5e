import math
import random

import pytest
from hypothesis import given, strategies as st

from conftest import make_vote
from simpfact.stats import (
    AggregatedLabel,
    DegenerateVarianceError,
    UndefinedCorrelationError,
    VoteCountError,
    aggregate_votes,
    agreement_report,
    category_agreement,
    distribution_report,
    krippendorff_alpha_ordinal,
    majority_label,
    spearman,
    stratified_stat,
)


def spearman_oracle(xs, ys):
    """Brute-force average ranks (O(n^2) counting) + Pearson formula."""
    def avg_ranks(values):
        ranks = []
        for v in values:
            less = sum(1 for u in values if u < v)
            equal = sum(1 for u in values if u == v)
            ranks.append(less + (equal + 1) / 2)
        return ranks

    rx, ry = avg_ranks(xs), avg_ranks(ys)
    n = len(xs)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


class TestMajorityLabel:
    def test_two_of_three(self):
        assert majority_label([1, 1, 2]) == 1

    def test_all_differ_undefined(self):
        assert majority_label([2, 1, 0]) is None

    def test_unanimous(self):
        assert majority_label([0, 0, 0]) == 0

    def test_gibberish_majority(self):
        assert majority_label([-1, -1, 2]) == -1

    def test_wrong_count(self):
        with pytest.raises(ValueError, match="3 votes"):
            majority_label([1, 1])

    def test_bad_value(self):
        with pytest.raises(ValueError):
            majority_label([1, 1, 5])

    @given(st.lists(st.sampled_from([0, 1, 2, -1]), min_size=3, max_size=3))
    def test_permutation_invariant(self, votes):
        expected = majority_label(votes)
        for permutation in ([votes[1], votes[2], votes[0]], votes[::-1]):
            assert majority_label(permutation) == expected


class TestAggregateVotes:
    def test_worked_example(self, worked_example_votes):
        labels = aggregate_votes(worked_example_votes)
        by_id = {l.pair_id: l for l in labels}
        assert by_id["p1"].insertion == 1
        assert by_id["p2"].deletion is None
        assert by_id["p3"].insertion == 0

    def test_missing_votes_lists_pair_ids(self):
        votes = [make_vote("p1", f"a{i}") for i in range(3)] + [make_vote("p2", "a0")]
        with pytest.raises(VoteCountError) as excinfo:
            aggregate_votes(votes)
        assert excinfo.value.offending == {"p2": 1}

    def test_four_votes_rejected(self):
        votes = [make_vote("p1", f"a{i}") for i in range(4)]
        with pytest.raises(VoteCountError):
            aggregate_votes(votes)


class TestCategoryAgreement:
    def test_all_unanimous(self):
        ratings = {f"p{i}": [1, 1, 1] for i in range(5)}
        report = category_agreement(ratings)
        assert report.pct_majority == 100.0
        assert report.pct_majority_nonzero == 100.0
        assert report.n_pairs == 5

    def test_zero_one_two_in_denominator_not_numerator(self):
        report = category_agreement({"p1": [0, 1, 2]})
        assert report.n_majority_nonzero == 1
        assert report.pct_majority_nonzero == 0.0
        assert report.pct_majority == 0.0

    def test_zero_one_one_in_both(self):
        report = category_agreement({"p1": [0, 1, 1]})
        assert report.n_majority_nonzero == 1
        assert report.pct_majority_nonzero == 100.0
        assert report.pct_majority == 100.0

    def test_majority_zero_not_in_nonzero_denominator(self):
        report = category_agreement({"p1": [0, 0, 1]})
        assert report.n_majority_nonzero == 0
        assert report.pct_majority_nonzero is None
        assert report.pct_majority == 100.0

    def test_full_report_shape(self, worked_example_votes):
        report = agreement_report(worked_example_votes)
        assert set(report) == {"insertion", "deletion", "substitution"}
        assert report["insertion"].pct_majority == pytest.approx(100.0)
        assert report["deletion"].pct_majority == pytest.approx(200 / 3)


class TestKrippendorffAlpha:
    def test_perfect_agreement_exactly_one(self):
        units = [[0, 0, 0], [1, 1, 1], [2, 2, 2], [-1, -1, -1]]
        assert krippendorff_alpha_ordinal(units) == 1.0

    def test_hand_computed_golden(self):
        # units {0,0},{0,1},{1,1}: coincidences o_00=2, o_01=o_10=1, o_11=2;
        # marginals n_0=n_1=3, n=6; d2_01=(6-3)^2=9;
        # D_o = 2*9/... = 18; D_e = (3*3*9 + 3*3*9)/5 = 32.4; alpha = 1-18/32.4
        expected = 1.0 - 18.0 / 32.4
        assert abs(krippendorff_alpha_ordinal([[0, 0], [0, 1], [1, 1]]) - expected) <= 1e-9
        assert expected == pytest.approx(4 / 9)

    def test_all_identical_degenerate(self):
        with pytest.raises(DegenerateVarianceError, match="no variance"):
            krippendorff_alpha_ordinal([[1, 1], [1, 1, 1]])

    def test_no_pairable_units(self):
        with pytest.raises(ValueError, match="2 or more"):
            krippendorff_alpha_ordinal([[1], [2]])

    def test_single_rating_units_ignored(self):
        with_singletons = [[0, 0], [0, 1], [1, 1], [2], [0]]
        assert krippendorff_alpha_ordinal(with_singletons) == pytest.approx(
            krippendorff_alpha_ordinal([[0, 0], [0, 1], [1, 1]])
        )

    def test_gibberish_ranks_above_two(self):
        # -1 maps to rank 3: disagreement {2,-1} is nearer than {0,-1}
        near = krippendorff_alpha_ordinal([[2, -1], [2, 2], [0, 0]])
        far = krippendorff_alpha_ordinal([[0, -1], [2, 2], [0, 0]])
        assert near > far

    def test_order_preserving_relabel_invariance(self):
        rng = random.Random(99)
        for _ in range(30):
            units = [
                [rng.choice([0, 1, 2, 3]) for _ in range(rng.randint(2, 4))] for _ in range(6)
            ]
            flat = {v for unit in units for v in unit}
            if len(flat) < 2:
                continue
            # shift by a constant: order and gaps between marginals preserved
            shifted = [[v + 5 for v in unit] for unit in units]
            identity = {v: v for v in range(9)}
            base = krippendorff_alpha_ordinal(units, rank_map=identity)
            moved = krippendorff_alpha_ordinal(shifted, rank_map={v + 5: v + 5 for v in range(9)})
            assert moved == pytest.approx(base, abs=1e-12)

    def test_alpha_at_most_one(self):
        rng = random.Random(123)
        for _ in range(100):
            units = [
                [rng.choice([0, 1, 2, -1]) for _ in range(3)] for _ in range(rng.randint(2, 8))
            ]
            try:
                assert krippendorff_alpha_ordinal(units) <= 1.0 + 1e-12
            except (DegenerateVarianceError, ValueError):
                pass


class TestSpearman:
    def test_increasing(self):
        assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0

    def test_decreasing(self):
        assert spearman([1, 2, 3, 4], [9, 7, 5, 1]) == -1.0

    def test_derived_tie_case(self):
        value = spearman([1, 2, 2, 4], [10, 20, 30, 30])
        assert value == spearman_oracle([1, 2, 2, 4], [10, 20, 30, 30])

    def test_oracle_500_cases(self):
        rng = random.Random(424242)
        for _ in range(500):
            n = rng.randint(3, 10)
            xs = [rng.randint(0, 4) for _ in range(n)]
            ys = [rng.randint(0, 4) for _ in range(n)]
            if len(set(xs)) == 1 or len(set(ys)) == 1:
                continue
            assert abs(spearman(xs, ys) - spearman_oracle(xs, ys)) <= 1e-12

    def test_constant_vector_undefined(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 3"):
            spearman([1, 2], [1, 2])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            spearman([1, 2, 3], [1, 2])

    def test_monotone_transform_invariance(self):
        rng = random.Random(31337)
        transforms = [lambda x: 3 * x + 7, lambda x: x**3, lambda x: math.exp(x / 4)]
        for _ in range(60):
            n = rng.randint(3, 10)
            xs = [rng.randint(-5, 5) for _ in range(n)]
            ys = [rng.randint(-5, 5) for _ in range(n)]
            if len(set(xs)) == 1 or len(set(ys)) == 1:
                continue
            base = spearman(xs, ys)
            for f in transforms:
                assert spearman([f(x) for x in xs], ys) == pytest.approx(base, abs=1e-12)

    def test_symmetry(self):
        rng = random.Random(8)
        for _ in range(50):
            n = rng.randint(3, 8)
            xs = [rng.random() for _ in range(n)]
            ys = [rng.randint(0, 3) for _ in range(n)]
            if len(set(ys)) == 1:
                continue
            assert spearman(xs, ys) == pytest.approx(spearman(ys, xs), abs=1e-12)


class TestDistributionReport:
    def test_all_zero(self):
        report = distribution_report([0, 0, 0, 0])
        assert report.percentages == {0: 100.0, 1: 0.0, 2: 0.0, -1: 0.0}
        assert report.n_defined == 4

    def test_undefined_excluded(self):
        report = distribution_report([1, 2, None])
        assert report.n_defined == 2
        assert report.n_undefined == 1
        assert report.percentages[1] == 50.0
        assert report.percentages[2] == 50.0

    def test_sums_to_100(self):
        rng = random.Random(6)
        for _ in range(50):
            outcomes = [rng.choice([0, 1, 2, -1, None]) for _ in range(rng.randint(1, 40))]
            report = distribution_report(outcomes)
            if report.n_defined:
                assert sum(report.percentages.values()) == pytest.approx(100.0, abs=0.1)
                assert all(v >= 0 for v in report.percentages.values())

    def test_record_keys_are_strings(self):
        record = distribution_report([0, -1]).to_record()
        assert set(record["percentages"]) == {"0", "1", "2", "-1"}


class TestStratifiedStat:
    def test_two_equal_values(self):
        stats = stratified_stat({0: [-50.0, -50.0]})
        assert stats[0].mean == -50.0
        assert stats[0].std == 0.0

    def test_singleton_std_absent(self):
        stats = stratified_stat({1: [7.5]})
        assert stats[1].mean == 7.5
        assert stats[1].std is None

    def test_five_value_two_pass_oracle(self):
        values = [2.0, 4.0, 4.0, 4.0, 5.0]
        mean = sum(values) / 5
        variance = sum((v - mean) ** 2 for v in values) / 4
        stats = stratified_stat({2: values})
        assert stats[2].mean == pytest.approx(mean)
        assert stats[2].std == pytest.approx(math.sqrt(variance))

    def test_empty_group_absent(self):
        stats = stratified_stat({0: [1.0], 1: []})
        assert 1 not in stats


class TestAggregatedLabelRecord:
    def test_undefined_serialized_as_string(self):
        label = AggregatedLabel(pair_id="p", insertion=None, deletion=2, substitution=-1)
        record = label.to_record()
        assert record["insertion"] == "undefined"
        assert record["deletion"] == 2
        assert record["substitution"] == -1
