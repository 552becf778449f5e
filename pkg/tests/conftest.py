import json
from pathlib import Path

import pytest

from simpfact.corpus import AnnotationVote, Origin, SentencePair

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "simpfact" / "data"


@pytest.fixture(scope="session")
def sample_sentences() -> list[str]:
    lines = (DATA_DIR / "sample_sentences.txt").read_text("utf-8").splitlines()
    return [line for line in lines if line.strip()]


@pytest.fixture(scope="session")
def gold_set_path() -> Path:
    return DATA_DIR / "gold_qualification.json"


@pytest.fixture
def make_pair():
    def build(pair_id="p1", complex_text="The old bridge was closed.", simple_text="The bridge closed.",
              kind="reference", name="test", split="unsplit"):
        return SentencePair(
            id=pair_id,
            complex_text=complex_text,
            simple_text=simple_text,
            origin=Origin(kind=kind, name=name),
            split=split,
        )

    return build


def make_vote(pair_id, annotator_id, insertion=0, deletion=0, substitution=0, ts=0.0):
    return AnnotationVote(
        pair_id=pair_id,
        annotator_id=annotator_id,
        insertion=insertion,
        deletion=deletion,
        substitution=substitution,
        submitted_at=ts,
    )


@pytest.fixture
def worked_example_votes():
    """Three pairs: insertion votes {1,1,2} / {2,1,0} / {0,0,0} with the
    deletion votes of the second pair also {2,1,0}."""
    votes = []
    for i, (ins, dele) in enumerate(
        [((1, 1, 2), (0, 0, 0)), ((0, 0, 0), (2, 1, 0)), ((0, 0, 0), (0, 0, 0))], start=1
    ):
        for j in range(3):
            votes.append(
                make_vote(f"p{i}", f"a{j}", insertion=ins[j], deletion=dele[j], ts=float(j))
            )
    return votes


def write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
