import json
import random
import threading
import urllib.request

import pytest

from service_workload import answers_from_gold, make_pairs, run_scripted_workload, truncate_log
from simpfact.service import (
    AnnotationService,
    BadAnswersError,
    DuplicateVoteError,
    InvalidLabelError,
    NotAssignedError,
    NotQualifiedError,
    UnknownAnnotatorError,
    export_bytes,
    export_payload,
    load_gold_set,
)
from simpfact.corpus import AnnotationVote
from simpfact.webapp import run_in_thread


@pytest.fixture
def gold(gold_set_path):
    return load_gold_set(gold_set_path)


@pytest.fixture
def service(tmp_path, gold):
    svc = AnnotationService(make_pairs(6), gold, data_dir=tmp_path / "data")
    yield svc
    svc.close()


def qualify(service, annotator_id, n_wrong=0):
    return service.register_and_qualify(annotator_id, answers_from_gold(service.gold_items, n_wrong))


class TestQualification:
    def test_perfect_score(self, service):
        outcome = qualify(service, "alice")
        assert outcome.score == 1.0
        assert outcome.qualified

    def test_22_of_30_fails(self, service):
        outcome = qualify(service, "bob", n_wrong=8)
        assert outcome.score == pytest.approx(22 / 30)
        assert not outcome.qualified

    def test_23_of_30_passes(self, service):
        outcome = qualify(service, "carol", n_wrong=7)
        assert outcome.score == pytest.approx(23 / 30)
        assert outcome.qualified

    def test_wrong_answer_count(self, service):
        with pytest.raises(BadAnswersError, match="expected 10"):
            service.register_and_qualify("dave", [{"insertion": 0, "deletion": 0, "substitution": 0}])

    def test_duplicate_registration_idempotent(self, service):
        first = qualify(service, "erin", n_wrong=8)
        again = service.register_and_qualify("erin", answers_from_gold(service.gold_items, 0))
        assert again.score == first.score
        assert not again.qualified

    def test_rescore_stored_answers_reproduces_outcome(self, service):
        qualify(service, "frank", n_wrong=7)
        stored = service.annotators["frank"]
        matches = sum(
            1
            for answer, item in zip(stored.answers, service.gold_items)
            for category in ("insertion", "deletion", "substitution")
            if answer[category] == item.gold[category]
        )
        assert matches / 30 == stored.score

    def test_gold_set_must_have_ten(self, tmp_path, gold):
        bad = {"pairs": [
            {"id": g.id, "complex_text": g.complex_text, "simple_text": g.simple_text, "gold": g.gold}
            for g in gold[:7]
        ]}
        path = tmp_path / "bad_gold.json"
        path.write_text(json.dumps(bad), encoding="utf-8")
        with pytest.raises(ValueError, match="exactly 10"):
            load_gold_set(path)


class TestTaskAssignment:
    def test_fresh_pool_serves_a_pair(self, service):
        qualify(service, "alice")
        pair = service.next_task("alice")
        assert pair is not None and pair.id.startswith("pool:")

    def test_unqualified_rejected(self, service):
        qualify(service, "bob", n_wrong=10)
        with pytest.raises(NotQualifiedError):
            service.next_task("bob")

    def test_unknown_annotator(self, service):
        with pytest.raises(UnknownAnnotatorError):
            service.next_task("ghost")

    def test_prefers_near_complete_pair(self, service):
        for name in ("a1", "a2", "a3"):
            qualify(service, name)
        labels = {"insertion": 0, "deletion": 0, "substitution": 0}
        first = service.next_task("a1")
        service.submit_vote("a1", first.id, labels)
        second = service.next_task("a2")
        assert second.id == first.id  # 1 vote beats 0 votes
        service.submit_vote("a2", second.id, labels)
        third = service.next_task("a3")
        assert third.id == first.id  # 2 votes beat everything

    def test_never_same_pair_twice(self, service):
        qualify(service, "alice")
        seen = set()
        labels = {"insertion": 0, "deletion": 0, "substitution": 0}
        while True:
            pair = service.next_task("alice")
            if pair is None:
                break
            assert pair.id not in seen
            seen.add(pair.id)
            service.submit_vote("alice", pair.id, labels)
        assert seen == {f"pool:{i}" for i in range(1, 7)}

    def test_pending_assignment_reserved(self, service):
        qualify(service, "alice")
        first = service.next_task("alice")
        again = service.next_task("alice")
        assert again.id == first.id

    def test_exhausted_returns_none(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(1), gold, data_dir=tmp_path / "one")
        qualify(svc, "alice")
        pair = svc.next_task("alice")
        svc.submit_vote("alice", pair.id, {"insertion": 0, "deletion": 0, "substitution": 0})
        assert svc.next_task("alice") is None
        svc.close()


class TestVoting:
    def test_third_vote_completes(self, service):
        labels = {"insertion": 1, "deletion": 0, "substitution": 0}
        for i, name in enumerate(("a1", "a2", "a3")):
            qualify(service, name)
            pair = service.next_task(name)
            ack = service.submit_vote(name, pair.id, labels)
        assert ack["complete"] is True

    def test_invalid_label_value(self, service):
        qualify(service, "alice")
        pair = service.next_task("alice")
        with pytest.raises(InvalidLabelError):
            service.submit_vote("alice", pair.id, {"insertion": 3, "deletion": 0, "substitution": 0})

    def test_unassigned_pair_rejected(self, service):
        qualify(service, "alice")
        service.next_task("alice")
        with pytest.raises(NotAssignedError):
            service.submit_vote("alice", "pool:6", {"insertion": 0, "deletion": 0, "substitution": 0})

    def test_duplicate_vote_rejected_state_unchanged(self, service):
        qualify(service, "alice")
        pair = service.next_task("alice")
        labels = {"insertion": 0, "deletion": 0, "substitution": 0}
        service.submit_vote("alice", pair.id, labels)
        before = service.state_fingerprint()
        with pytest.raises(DuplicateVoteError):
            service.submit_vote("alice", pair.id, labels)
        assert service.state_fingerprint() == before


class TestExport:
    def _vote_all(self, service, votes_by_pair):
        annotators = ("a1", "a2", "a3")
        for name in annotators:
            qualify(service, name)
        for name_index, name in enumerate(annotators):
            for _ in votes_by_pair:
                # next_task chooses the pair; vote with the labels scripted for it
                pair = service.next_task(name)
                scripted = votes_by_pair[pair.id][name_index]
                service.submit_vote(
                    name,
                    pair.id,
                    {"insertion": scripted[0], "deletion": scripted[1], "substitution": 0},
                )

    def test_worked_example_through_service(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(3), gold, data_dir=tmp_path / "we")
        votes_by_pair = {
            "pool:1": [(1, 0), (1, 0), (2, 0)],
            "pool:2": [(0, 2), (0, 1), (0, 0)],
            "pool:3": [(0, 0), (0, 0), (0, 0)],
        }
        self._vote_all(svc, votes_by_pair)
        payload = svc.export_results()
        by_id = {entry["pair_id"]: entry for entry in payload["aggregated"]}
        assert by_id["pool:1"]["insertion"] == 1
        assert by_id["pool:2"]["deletion"] == "undefined"
        assert by_id["pool:3"]["insertion"] == 0
        svc.close()

    def test_export_twice_identical_bytes(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(3), gold, data_dir=tmp_path / "twice")
        self._vote_all(
            svc,
            {
                "pool:1": [(1, 0), (1, 0), (2, 0)],
                "pool:2": [(0, 2), (0, 1), (0, 0)],
                "pool:3": [(0, 0), (0, 0), (0, 0)],
            },
        )
        first = export_bytes(svc.export_results())
        second = export_bytes(svc.export_results())
        assert first == second
        svc.close()

    def test_export_matches_offline_library(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(4), gold, data_dir=tmp_path / "off")
        run_scripted_workload(svc, seed=5, n_annotators=3)
        service_bytes = export_bytes(svc.export_results())
        offline_bytes = export_bytes(export_payload(svc.collected_votes(complete_only=True)))
        assert service_bytes == offline_bytes
        svc.close()

    def test_empty_export_valid(self, service):
        payload = service.export_results()
        assert payload == {"aggregated": [], "agreement": {}}

    def test_export_files_match_offline_recomputation(self, tmp_path, gold):
        import json as json_mod

        from simpfact.corpus import load_votes
        from simpfact.stats import agreement_report, aggregate_votes

        svc = AnnotationService(make_pairs(4), gold, data_dir=tmp_path / "files")
        run_scripted_workload(svc, seed=9, n_annotators=3)
        paths = svc.export_files(tmp_path / "export")
        svc.close()

        votes = load_votes(paths["votes"])
        offline_aggregated = b"".join(
            (json_mod.dumps(label.to_record(), ensure_ascii=False, sort_keys=True) + "\n").encode()
            for label in aggregate_votes(votes)
        )
        offline_agreement = export_bytes(
            {c: r.to_record() for c, r in agreement_report(votes).items()}
        )
        assert paths["aggregated"].read_bytes() == offline_aggregated
        assert paths["agreement"].read_bytes() == offline_agreement


class TestDurability:
    def test_crash_replay_reconstructs_state(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(8), gold, data_dir=tmp_path / "live", snapshot_every=None)
        fingerprints = run_scripted_workload(svc, seed=11, n_annotators=4)
        svc.close()
        rng = random.Random(0)
        kill_points = rng.sample(sorted(fingerprints), min(12, len(fingerprints)))
        for index, kill_seq in enumerate(kill_points):
            dst = tmp_path / f"replay{index}"
            truncate_log(tmp_path / "live", dst, kill_seq, torn_tail=b'{"seq": 99999, "ts"')
            restored = AnnotationService(make_pairs(8), gold, data_dir=dst, snapshot_every=None)
            assert restored.state_fingerprint() == fingerprints[kill_seq]
            restored.close()

    def test_snapshot_plus_tail_restore(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(6), gold, data_dir=tmp_path / "snap", snapshot_every=5)
        fingerprints = run_scripted_workload(svc, seed=3, n_annotators=3)
        live = svc.state_fingerprint()
        assert list((tmp_path / "snap").glob("snapshot-*.json"))
        svc.close()
        restored = AnnotationService(make_pairs(6), gold, data_dir=tmp_path / "snap", snapshot_every=5)
        assert restored.state_fingerprint() == live
        restored.close()

    def test_concurrent_annotators_never_exceed_three_votes(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(10), gold, data_dir=tmp_path / "conc", snapshot_every=None)
        names = [f"w{i}" for i in range(16)]
        for name in names:
            qualify(svc, name)

        errors = []

        def worker(name):
            rng = random.Random(hash(name) % 10000)
            try:
                while True:
                    pair = svc.next_task(name)
                    if pair is None:
                        return
                    svc.submit_vote(
                        name,
                        pair.id,
                        {
                            "insertion": rng.choice([0, 1, 2, -1]),
                            "deletion": rng.choice([0, 1, 2, -1]),
                            "substitution": rng.choice([0, 1, 2, -1]),
                        },
                    )
            except Exception as exc:  # noqa: BLE001 - fail the test with detail
                errors.append((name, exc))

        threads = [threading.Thread(target=worker, args=(name,)) for name in names]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert not errors
        for pair_state in svc.pairs.values():
            assert len(pair_state.votes) <= 3
            assert len(set(pair_state.votes)) == len(pair_state.votes)
            assert len(pair_state.assigned) <= 3
        assert all(ps.complete for ps in svc.pairs.values())
        svc.close()


def _http(method, url, payload=None):
    data = json.dumps(payload).encode("utf-8") if payload is not None else None
    request = urllib.request.Request(url, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(request) as response:
            body = response.read()
            return response.status, json.loads(body) if body else None
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


import urllib.error  # noqa: E402


class TestWireProtocol:
    @pytest.fixture
    def server(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(3), gold, data_dir=tmp_path / "http")
        server, base = run_in_thread(svc, port=0)
        yield svc, base
        server.shutdown()
        svc.close()

    def test_full_flow(self, server):
        svc, base = server
        answers = answers_from_gold(svc.gold_items)
        status, outcome = _http("POST", f"{base}/annotators", {"id": "web1", "answers": answers})
        assert status == 200 and outcome["qualified"] is True

        status, pair = _http("GET", f"{base}/tasks/next?annotator=web1")
        assert status == 200 and "complex_text" in pair

        status, ack = _http(
            "POST",
            f"{base}/votes",
            {"annotator": "web1", "pair_id": pair["id"], "insertion": 1, "deletion": 0, "substitution": 0},
        )
        assert status == 201

        status, progress = _http("GET", f"{base}/progress")
        assert status == 200 and progress["votes"] == 1

        status, export = _http("GET", f"{base}/export")
        assert status == 200 and export["aggregated"] == []

    def test_error_codes(self, server):
        svc, base = server
        status, body = _http("GET", f"{base}/tasks/next?annotator=nobody")
        assert status == 404 and body["error"] == "unknown_annotator"

        bad = answers_from_gold(svc.gold_items, n_wrong=10)
        _http("POST", f"{base}/annotators", {"id": "weak", "answers": bad})
        status, body = _http("GET", f"{base}/tasks/next?annotator=weak")
        assert status == 403 and body["error"] == "not_qualified"

        status, body = _http(
            "POST", f"{base}/votes",
            {"annotator": "weak", "pair_id": "pool:1", "insertion": 9, "deletion": 0, "substitution": 0},
        )
        assert status == 403

    def test_204_when_exhausted(self, tmp_path, gold):
        svc = AnnotationService(make_pairs(1), gold, data_dir=tmp_path / "empty1")
        server, base = run_in_thread(svc, port=0)
        answers = answers_from_gold(svc.gold_items)
        _http("POST", f"{base}/annotators", {"id": "solo", "answers": answers})
        status, pair = _http("GET", f"{base}/tasks/next?annotator=solo")
        _http("POST", f"{base}/votes",
              {"annotator": "solo", "pair_id": pair["id"], "insertion": 0, "deletion": 0, "substitution": 0})
        request = urllib.request.Request(f"{base}/tasks/next?annotator=solo")
        with urllib.request.urlopen(request) as response:
            assert response.status == 204
        server.shutdown()
        svc.close()

    def test_qualification_pairs_have_no_gold(self, server):
        svc, base = server
        status, body = _http("GET", f"{base}/qualification")
        assert status == 200
        assert len(body["pairs"]) == 10
        assert all("gold" not in item for item in body["pairs"])
