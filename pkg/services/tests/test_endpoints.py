import json

import pytest
from fastapi.testclient import TestClient

from model_services import DeterministicBackend, JudgeOutputUnparseable, ServiceConfig, create_app


class TestHealth:
    def test_reports_ok_and_dim(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "dim": 256}

    def test_dim_follows_config(self):
        client = TestClient(create_app(ServiceConfig(embedding_dim=64)))
        assert client.get("/health").json()["dim"] == 64


class TestEmbed:
    def test_two_texts_two_vectors_same_dim(self, client):
        response = client.post("/embed", json={"model": "hash-sum-v1", "texts": ["a cat", "a dog"]})
        assert response.status_code == 200
        payload = response.json()
        assert payload["dim"] == 256
        assert len(payload["vectors"]) == 2
        assert all(len(v) == payload["dim"] for v in payload["vectors"])

    def test_identical_texts_identical_vectors(self, client):
        payload = client.post(
            "/embed", json={"model": "hash-sum-v1", "texts": ["same words", "same words"]}
        ).json()
        assert payload["vectors"][0] == payload["vectors"][1]

    def test_self_cosine_is_one(self, client):
        payload = client.post("/embed", json={"model": "hash-sum-v1", "texts": ["any text here"]}).json()
        v = payload["vectors"][0]
        dot = sum(x * x for x in v)
        assert dot == pytest.approx(1.0, abs=1e-9)

    def test_malformed_body_is_400(self, client):
        assert client.post("/embed", json={"texts": ["x"]}).status_code == 400
        assert client.post("/embed", json={"model": "m"}).status_code == 400
        assert client.post("/embed", json={"model": "m", "texts": []}).status_code == 400
        assert client.post(
            "/embed", content=b"not json", headers={"content-type": "application/json"}
        ).status_code == 400

    def test_unknown_model_is_400(self, client):
        response = client.post("/embed", json={"model": "other-model", "texts": ["x"]})
        assert response.status_code == 400


class TestInvert:
    def test_round_trip_produces_text(self, client):
        vector = client.post(
            "/embed", json={"model": "hash-sum-v1", "texts": ["the boy rode his bike"]}
        ).json()["vectors"][0]
        response = client.post("/invert", json={"vector": vector, "steps": 10, "beam_width": 4})
        assert response.status_code == 200
        assert response.json()["text"]

    def test_minimal_decode_params_still_give_text(self, client):
        vector = client.post(
            "/embed", json={"model": "hash-sum-v1", "texts": ["a quiet field"]}
        ).json()["vectors"][0]
        response = client.post("/invert", json={"vector": vector, "steps": 1, "beam_width": 1})
        assert response.status_code == 200
        assert response.json()["text"]

    def test_wrong_vector_length_is_400(self, client):
        response = client.post("/invert", json={"vector": [1.0, 2.0], "steps": 10, "beam_width": 4})
        assert response.status_code == 400

    def test_bad_decode_params_are_400(self, client):
        response = client.post("/invert", json={"vector": [0.0] * 256, "steps": 0, "beam_width": 4})
        assert response.status_code == 400

    def test_deterministic(self, client):
        vector = client.post(
            "/embed", json={"model": "hash-sum-v1", "texts": ["the garden fence"]}
        ).json()["vectors"][0]
        body = {"vector": vector, "steps": 10, "beam_width": 4}
        first = client.post("/invert", json=body).json()
        second = client.post("/invert", json=body).json()
        assert first == second


class TestJudge:
    def test_identical_events_similar(self, client):
        response = client.post(
            "/judge",
            json={
                "event_a": "Timmy got in the tub.",
                "event_b": "Timmy got in the tub.",
                "question": "is event B a subset of event A",
            },
        )
        assert response.status_code == 200
        payload = response.json()
        assert payload["is_similar"] is True
        assert isinstance(payload["reasoning"], str)

    def test_disjoint_events_not_similar(self, client):
        response = client.post(
            "/judge",
            json={
                "event_a": "A rocket launched from the desert pad.",
                "event_b": "The chef tasted the warm soup.",
                "question": "does a similar event to event B take place in event A",
            },
        )
        assert response.json()["is_similar"] is False

    def test_missing_fields_are_400(self, client):
        assert client.post("/judge", json={"event_a": "x", "event_b": "y"}).status_code == 400

    def test_unparseable_judge_output_reasks_then_422(self):
        class FlakyJudgeBackend(DeterministicBackend):
            def __init__(self, fail_times):
                super().__init__()
                self.fail_times = fail_times
                self.asks = 0

            def judge(self, event_a, event_b, question, prompt):
                self.asks += 1
                if self.asks <= self.fail_times:
                    raise JudgeOutputUnparseable("gibberish from model")
                return super().judge(event_a, event_b, question, prompt)

        body = {"event_a": "a", "event_b": "a", "question": "is event B a subset of event A"}

        recovers = FlakyJudgeBackend(fail_times=1)
        client = TestClient(create_app(ServiceConfig(), backend=recovers))
        assert client.post("/judge", json=body).status_code == 200
        assert recovers.asks == 2

        hopeless = FlakyJudgeBackend(fail_times=10)
        client = TestClient(create_app(ServiceConfig(), backend=hopeless))
        assert client.post("/judge", json=body).status_code == 422


class TestTransform:
    def test_anonymize(self, client):
        response = client.post("/transform", json={"op": "anonymize", "text": "Mary went home"})
        assert response.json()["result"] == "a girl went home"

    def test_summarize_splits_sentences(self, client):
        response = client.post(
            "/transform", json={"op": "summarize", "text": "One thing. Another thing. A third."}
        )
        assert response.json()["result"] == ["One thing.", "Another thing.", "A third."]

    def test_augment(self, client):
        response = client.post("/transform", json={"op": "augment", "text": "a boy rode his bike"})
        assert response.json()["result"] == ["a boy was outside."]

    def test_unknown_op_is_400(self, client):
        assert client.post("/transform", json={"op": "translate", "text": "x"}).status_code == 400


class TestCassetteMode:
    def test_replays_recorded_pairs_and_404s_unknown(self, tmp_path):
        cassette = tmp_path / "traffic.jsonl"
        request = {"model": "hash-sum-v1", "texts": ["hello"]}
        entry = {"endpoint": "/embed", "request": request, "response": {"dim": 2, "vectors": [[0.0, 1.0]]}}
        cassette.write_text(json.dumps(entry) + "\n")

        client = TestClient(
            create_app(ServiceConfig(backend="cassette", cassette_path=str(cassette)))
        )
        hit = client.post("/embed", json=request)
        assert hit.status_code == 200
        assert hit.json() == {"dim": 2, "vectors": [[0.0, 1.0]]}
        miss = client.post("/embed", json={"model": "hash-sum-v1", "texts": ["other"]})
        assert miss.status_code == 404

    def test_missing_cassette_file_gives_503(self, tmp_path):
        client = TestClient(
            create_app(ServiceConfig(backend="cassette", cassette_path=str(tmp_path / "absent.jsonl")))
        )
        assert client.post("/embed", json={"model": "m", "texts": ["x"]}).status_code == 503
        assert client.get("/health").status_code == 200  # health still answers


class TestRecording:
    def test_recorded_traffic_replays_identically(self, tmp_path):
        record = tmp_path / "recorded.jsonl"
        recording_client = TestClient(create_app(ServiceConfig(record_path=str(record))))
        request = {"model": "hash-sum-v1", "texts": ["record me", "me too"]}
        original = recording_client.post("/embed", json=request).json()

        replay_client = TestClient(
            create_app(ServiceConfig(backend="cassette", cassette_path=str(record)))
        )
        replayed = replay_client.post("/embed", json=request).json()
        assert replayed == original


class TestAuth:
    def test_token_required_when_configured(self):
        client = TestClient(create_app(ServiceConfig(bearer_token="sesame")))
        body = {"model": "hash-sum-v1", "texts": ["x"]}
        assert client.post("/embed", json=body).status_code == 401
        ok = client.post("/embed", json=body, headers={"Authorization": "Bearer sesame"})
        assert ok.status_code == 200
