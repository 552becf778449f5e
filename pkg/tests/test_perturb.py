import difflib
import json

import pytest

from simpfact.corpus import Origin, SentencePair, token_surfaces
from simpfact.perturb import (
    GENERATORS,
    PerturbedExample,
    assemble_synthetic_dataset,
    gen_mask_fill,
    gen_name_insertion,
    gen_number_alteration,
    gen_phrase_insertion,
    gen_statement_negation,
    generate_examples,
    load_name_lexicon,
)
from simpfact.providers import ProviderError, StubMaskFiller, TokenOverlapScorer


class ScriptedScorer:
    """Pair scorer with a fixed score per shortened text."""

    name = "scripted"

    def __init__(self, scores, default=0.5):
        self.scores = scores
        self.default = default

    def pair_score(self, original, shortened):
        return self.scores.get(shortened, self.default)


class RecordingFiller:
    name = "recording"

    def __init__(self):
        self.calls = []

    def fill(self, text, positions, rank):
        self.calls.append((text, tuple(positions), rank))
        return [f"fill{rank}x{p}" for p in positions]


class EchoFiller:
    """Returns the original tokens, so the filled text equals the source."""

    name = "echo"

    def fill(self, text, positions, rank):
        words = text.split()
        out = []
        for p in positions:
            word = words[p]
            start, end = 0, len(word)
            while start < end and not word[start].isalnum():
                start += 1
            while end > start and not word[end - 1].isalnum():
                end -= 1
            out.append(word[start:end])
        return out


def edited_regions(a: str, b: str) -> int:
    matcher = difflib.SequenceMatcher(None, a.split(), b.split(), autojunk=False)
    return sum(1 for op in matcher.get_opcodes() if op[0] != "equal")


class TestNameInsertion:
    def test_lexicon_name_sentence_initial(self):
        examples = gen_name_insertion("Maria left early.")
        assert len(examples) == 1
        ex = examples[0]
        assert ex.source_text == "They left early."
        assert ex.target_text == "Maria left early."
        assert ex.category == "insertion"
        assert ex.severity == 1

    def test_two_names_two_examples(self):
        examples = gen_name_insertion("Anna met Brian at noon.")
        assert len(examples) == 2
        sources = {ex.source_text for ex in examples}
        assert "They met Brian at noon." in sources
        assert "Anna met they at noon." in sources

    def test_no_names(self):
        assert gen_name_insertion("The cat sat on the mat.") == []

    def test_mid_sentence_capital_detected_without_lexicon(self):
        examples = gen_name_insertion("The witness saw Zorblatt yesterday.", lexicon=frozenset())
        assert len(examples) == 1
        assert examples[0].source_text == "The witness saw they yesterday."

    def test_pronoun_not_replaced(self):
        assert gen_name_insertion("Then I left early.") == []

    def test_repeated_name_skipped(self):
        # replacing one occurrence leaves the name present: no inserted token
        assert gen_name_insertion("Maria praised Maria.") == []

    def test_single_edited_region(self):
        for ex in gen_name_insertion("Elena and Marcus founded the cooperative."):
            assert edited_regions(ex.source_text, ex.target_text) == 1

    def test_lexicon_loaded(self):
        lexicon = load_name_lexicon()
        assert "Maria" in lexicon
        assert len(lexicon) > 100


class TestPhraseInsertion:
    def test_trailing_modifier_kept_level1(self):
        source = "The dog barked, loudly today."
        scorer = ScriptedScorer({"The dog barked,": 0.7})
        examples = gen_phrase_insertion(source, scorer)
        kept = [ex for ex in examples if ex.source_text == "The dog barked,"]
        assert len(kept) == 1
        assert kept[0].severity == 1
        assert kept[0].target_text == source

    def test_band_edges_inclusive(self):
        source = "one two three, four five six, seven eight nine."
        for score, expected in [(0.6, 1), (0.8, 1), (0.2, 2), (0.4, 2)]:
            scorer = ScriptedScorer({}, default=score)
            examples = gen_phrase_insertion(source, scorer)
            assert examples, f"score {score} should keep candidates"
            assert all(ex.severity == expected for ex in examples)

    def test_out_of_band_discarded(self):
        source = "one two three, four five six, seven eight nine."
        for score in (0.5, 0.19, 0.41, 0.59, 0.81, 0.0, 1.0):
            assert gen_phrase_insertion(source, ScriptedScorer({}, default=score)) == []

    def test_too_short_source(self):
        assert gen_phrase_insertion("Hello there", ScriptedScorer({}, default=0.7)) == []

    def test_parenthetical_candidate(self):
        source = "The fort (built in 1650) guards the bay from the north side."
        scorer = ScriptedScorer({"The fort guards the bay from the north side.": 0.7}, default=0.0)
        examples = gen_phrase_insertion(source, scorer)
        assert any(ex.source_text == "The fort guards the bay from the north side." for ex in examples)

    def test_provider_failure_wrapped(self):
        class Broken:
            name = "broken-scorer"

            def pair_score(self, a, b):
                raise TimeoutError("slow backend")

        with pytest.raises(ProviderError):
            gen_phrase_insertion("one two three four five six", Broken())

    def test_inserted_token_present(self):
        source = "The old mill, closed for decades, reopened last spring."
        examples = gen_phrase_insertion(source, TokenOverlapScorer())
        for ex in examples:
            added = set(token_surfaces(ex.target_text)) - set(token_surfaces(ex.source_text))
            assert added


class TestNumberAlteration:
    def test_single_literal(self):
        examples = gen_number_alteration("The shelter houses 100 cats.", seed=3)
        assert len(examples) == 1
        ex = examples[0]
        replacement = ex.provenance["replacement"]
        assert replacement != "100"
        assert len(replacement) == 3
        assert ex.target_text == f"The shelter houses {replacement} cats."
        assert ex.severity == 1 and ex.category == "substitution"

    def test_no_digits(self):
        assert gen_number_alteration("No digits here.", seed=0) == []

    def test_two_literals_two_examples(self):
        examples = gen_number_alteration("3 of 99", seed=1)
        assert len(examples) == 2
        assert examples[0].provenance["original"] == "3"
        assert examples[1].provenance["original"] == "99"
        # each example alters exactly one literal
        assert "99" in examples[0].target_text
        assert examples[1].target_text.startswith("3 ")

    def test_deterministic(self):
        a = [ex.to_record() for ex in gen_number_alteration("It costs 25 dollars, not 90.", seed=7)]
        b = [ex.to_record() for ex in gen_number_alteration("It costs 25 dollars, not 90.", seed=7)]
        assert a == b

    def test_same_digit_count_preserved(self):
        for seed in range(15):
            for ex in gen_number_alteration("Call 7 or 8800 now: 42.", seed=seed):
                assert len(ex.provenance["replacement"]) == len(ex.provenance["original"])
                assert ex.provenance["replacement"] != ex.provenance["original"]

    def test_single_edited_region(self):
        for ex in gen_number_alteration("Room 12 holds 60 chairs.", seed=2):
            assert edited_regions(ex.source_text, ex.target_text) == 1


class TestStatementNegation:
    def test_insert_not(self):
        examples = gen_statement_negation("She is tall.")
        assert [ex.target_text for ex in examples] == ["She is not tall."]

    def test_strip_contraction(self):
        examples = gen_statement_negation("They can't swim.")
        assert [ex.target_text for ex in examples] == ["They can swim."]

    def test_strip_separate_not(self):
        examples = gen_statement_negation("The committee did not reach a decision.")
        assert [ex.target_text for ex in examples] == ["The committee did reach a decision."]

    def test_no_auxiliary(self):
        assert gen_statement_negation("Open the door.") == []

    def test_case_preserved(self):
        examples = gen_statement_negation("Can't we go?")
        assert [ex.target_text for ex in examples] == ["Can we go?"]

    def test_cannot(self):
        examples = gen_statement_negation("The hospital cannot accept patients.")
        assert [ex.target_text for ex in examples] == ["The hospital can accept patients."]

    def test_one_example_per_auxiliary(self):
        examples = gen_statement_negation("She has said it and they will say it.")
        assert len(examples) == 2
        assert {ex.provenance["auxiliary"] for ex in examples} == {"has", "will"}

    def test_trailing_punct_on_aux(self):
        examples = gen_statement_negation("Yes, he did.")
        assert [ex.target_text for ex in examples] == ["Yes, he did not."]

    def test_single_edited_region(self):
        sentences = [
            "She is tall.",
            "They can't swim.",
            "The committee did not reach a decision.",
            "He would never have agreed, but she might.",
        ]
        for sentence in sentences:
            for ex in gen_statement_negation(sentence):
                assert edited_regions(ex.source_text, ex.target_text) == 1


class TestMaskFill:
    TEN_TOKENS = "one two three four five six seven eight nine ten"

    def test_level2_positions_every_fifth(self):
        filler = RecordingFiller()
        example = gen_mask_fill(self.TEN_TOKENS, filler, mode="level2", seed=0)
        assert filler.calls == [(self.TEN_TOKENS, (4, 9), 5)]
        assert example is not None
        assert example.severity == 2
        words = example.target_text.split()
        assert words[4] == "fill5x4" and words[9] == "fill5x9"

    def test_level1_masks_two_random_positions(self):
        filler = RecordingFiller()
        example = gen_mask_fill(self.TEN_TOKENS, filler, mode="level1", seed=11)
        assert example is not None
        assert example.severity == 1
        (_, positions, rank) = filler.calls[0]
        assert rank == 3
        assert len(positions) == 2

    def test_deterministic_with_stub(self):
        a = gen_mask_fill(self.TEN_TOKENS, StubMaskFiller(), mode="level1", seed=5)
        b = gen_mask_fill(self.TEN_TOKENS, StubMaskFiller(), mode="level1", seed=5)
        assert a.to_record() == b.to_record()

    def test_echo_fill_discarded(self):
        assert gen_mask_fill(self.TEN_TOKENS, EchoFiller(), mode="level2", seed=0) is None

    def test_too_short_returns_none(self):
        assert gen_mask_fill("word", RecordingFiller(), mode="level1", seed=0) is None
        assert gen_mask_fill("a b c", RecordingFiller(), mode="level2", seed=0) is None

    def test_punctuation_positions_skipped_by_default(self):
        text = "alpha beta gamma delta ; epsilon zeta eta theta iota"
        filler = RecordingFiller()
        gen_mask_fill(text, filler, mode="level2", seed=0)
        # 1-based position 5 is ";": excluded, only position 10 masked
        assert filler.calls == [(text, (9,), 5)]

    def test_punctuation_maskable_with_flag(self):
        text = "alpha beta gamma delta ; epsilon zeta eta theta iota"
        filler = RecordingFiller()
        gen_mask_fill(text, filler, mode="level2", seed=0, exclude_punct=False)
        assert filler.calls == [(text, (4, 9), 5)]

    def test_preserves_edge_punctuation(self):
        text = "one two three four five, six seven eight nine ten."
        filler = RecordingFiller()
        example = gen_mask_fill(text, filler, mode="level2", seed=0)
        words = example.target_text.split()
        assert words[4].endswith(",")
        assert words[9].endswith(".")


class TestGenerateExamples:
    def test_deterministic_over_corpus(self, sample_sentences):
        sources = [(f"s:{i}", s) for i, s in enumerate(sample_sentences[:30], start=1)]
        kwargs = dict(
            seed=99,
            similarity_provider=TokenOverlapScorer(),
            mask_provider=StubMaskFiller(),
        )
        run1 = [ex.to_record() for ex in generate_examples(sources, **kwargs)]
        run2 = [ex.to_record() for ex in generate_examples(sources, **kwargs)]
        assert json.dumps(run1) == json.dumps(run2)

    def test_severity_contracts(self, sample_sentences):
        sources = [(f"s:{i}", s) for i, s in enumerate(sample_sentences[:30], start=1)]
        examples = generate_examples(
            sources, seed=1, similarity_provider=TokenOverlapScorer(), mask_provider=StubMaskFiller()
        )
        assert examples
        for ex in examples:
            if ex.generator in ("name_insertion", "number_alteration", "statement_negation"):
                assert ex.severity == 1
            if ex.generator == "phrase_insertion":
                score = ex.provenance["score"]
                assert (0.6 <= score <= 0.8 and ex.severity == 1) or (
                    0.2 <= score <= 0.4 and ex.severity == 2
                )
            if ex.category == "insertion":
                added = set(token_surfaces(ex.target_text)) - set(token_surfaces(ex.source_text))
                assert added

    def test_unknown_generator_rejected(self):
        with pytest.raises(ValueError, match="unknown generators"):
            generate_examples([("a", "text")], seed=0, generators=["typo_injection"])

    def test_missing_provider_rejected(self):
        with pytest.raises(ValueError, match="similarity provider"):
            generate_examples([("a", "one two three four")], seed=0, generators=["phrase_insertion"])


def _mk_examples(category, severity, count, generator):
    return [
        PerturbedExample(
            source_text=f"src {generator} {i}",
            target_text=f"tgt {generator} {i}",
            category=category,
            severity=severity,
            generator=generator,
        )
        for i in range(count)
    ]


def _mk_pairs(count):
    return [
        SentencePair(
            id=f"c:{i}",
            complex_text=f"complex sentence {i}",
            simple_text=f"simple sentence {i}",
            origin=Origin("reference", "clean"),
        )
        for i in range(count)
    ]


class TestAssembly:
    def test_insertion_downsamples_level1(self):
        examples = _mk_examples("insertion", 1, 50, "name_insertion") + _mk_examples(
            "insertion", 2, 20, "phrase_insertion"
        )
        records, manifest = assemble_synthetic_dataset("insertion", examples, _mk_pairs(10), seed=0)
        assert manifest["level_counts"] == {"0": 10, "1": 20, "2": 20}
        assert manifest["total"] == 50

    def test_substitution_keeps_imbalance(self):
        examples = _mk_examples("substitution", 1, 40, "number_alteration") + _mk_examples(
            "substitution", 2, 10, "mask_fill"
        )
        records, manifest = assemble_synthetic_dataset("substitution", examples, _mk_pairs(5), seed=0)
        assert manifest["level_counts"] == {"0": 5, "1": 40, "2": 10}

    def test_empty_generator_output(self):
        records, manifest = assemble_synthetic_dataset("insertion", [], _mk_pairs(7), seed=0)
        assert manifest["level_counts"] == {"0": 7, "1": 0, "2": 0}
        assert all(record["severity"] == 0 for record in records)

    def test_deterministic(self):
        examples = _mk_examples("insertion", 1, 30, "name_insertion") + _mk_examples(
            "insertion", 2, 9, "phrase_insertion"
        )
        first = assemble_synthetic_dataset("insertion", examples, _mk_pairs(3), seed=42)
        second = assemble_synthetic_dataset("insertion", examples, _mk_pairs(3), seed=42)
        assert first == second

    def test_level_caps(self):
        examples = _mk_examples("substitution", 1, 30, "mask_fill")
        records, manifest = assemble_synthetic_dataset(
            "substitution", examples, [], seed=1, level_caps={1: 12}
        )
        assert manifest["level_counts"]["1"] == 12

    def test_manifest_generator_counts(self):
        examples = _mk_examples("substitution", 1, 4, "number_alteration") + _mk_examples(
            "substitution", 1, 2, "statement_negation"
        )
        _, manifest = assemble_synthetic_dataset("substitution", examples, _mk_pairs(2), seed=0)
        assert manifest["generator_counts"]["number_alteration"]["1"] == 4
        assert manifest["generator_counts"]["statement_negation"]["1"] == 2
        assert manifest["generator_counts"]["original"]["0"] == 2


class TestPerturbedExampleInvariants:
    def test_source_equals_target_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            PerturbedExample("same", "same", "insertion", 1, "name_insertion")

    def test_bad_severity(self):
        with pytest.raises(ValueError, match="severity"):
            PerturbedExample("a", "b", "insertion", 0, "name_insertion")

    def test_category_generator_mismatch(self):
        with pytest.raises(ValueError, match="emits"):
            PerturbedExample("a", "b", "substitution", 1, "name_insertion")
