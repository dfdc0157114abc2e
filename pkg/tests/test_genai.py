from __future__ import annotations

import json
import random
import string

import pytest

from flipfeed.genai import (
    GenerationError,
    ModelEndpointConfig,
    batch_generate,
    extract_feedback_text,
    generate_feedback,
    instance_strategy,
    load_endpoint_configs,
    write_manifest,
)
from flipfeed.pipeline import scenario_for, wrap_feedback


def make_endpoint(base_url, **overrides):
    settings = dict(
        name="mock-model",
        base_url=base_url,
        model_id="mock-1",
        kind="base",
        max_retries=2,
    )
    settings.update(overrides)
    return ModelEndpointConfig(**settings)


def ok_responder(content):
    return lambda prompt, headers: (200, content)


class TestEndpointConfig:
    def test_round_trip_and_defaults(self):
        config = ModelEndpointConfig.from_dict(
            {"name": "m", "base_url": "http://x/v1", "model_id": "m-1"}
        )
        assert config.kind == "base"
        assert config.strategies() == ("basic", "engineered")
        assert config.max_retries == 2

    def test_finetuned_strategies(self):
        config = make_endpoint("http://x/v1", kind="finetuned")
        assert config.strategies() == ("basic",)
        assert instance_strategy(config, "basic") == "finetuned-basic"

    def test_validation(self):
        with pytest.raises(ValueError):
            make_endpoint("http://x/v1", kind="distilled")
        with pytest.raises(ValueError):
            make_endpoint("http://x/v1", temperature=-1)
        with pytest.raises(ValueError):
            make_endpoint("http://x/v1", max_retries=-1)

    def test_api_key_resolved_from_env(self, monkeypatch):
        config = make_endpoint("http://x/v1", api_key_env="TEST_MODEL_KEY")
        monkeypatch.delenv("TEST_MODEL_KEY", raising=False)
        assert config.api_key() is None
        monkeypatch.setenv("TEST_MODEL_KEY", "sk-test-123")
        assert config.api_key() == "sk-test-123"

    def test_load_configs_from_file(self, tmp_path):
        path = tmp_path / "endpoints.json"
        path.write_text(
            json.dumps(
                [
                    {"name": "a", "base_url": "http://a/v1", "model_id": "a-1"},
                    {
                        "name": "b",
                        "base_url": "http://b/v1",
                        "model_id": "b-1",
                        "kind": "finetuned",
                    },
                ]
            )
        )
        configs = load_endpoint_configs(str(path))
        assert [c.name for c in configs] == ["a", "b"]
        path.write_text(json.dumps({"name": "not-a-list"}))
        with pytest.raises(ValueError):
            load_endpoint_configs(str(path))


class TestExtraction:
    def test_finetuned_unwraps_tokens(self):
        raw = "noise <feedback>The loop skips index zero.</feedback> trailing"
        text, degraded = extract_feedback_text(raw, "finetuned", "basic")
        assert text == "The loop skips index zero."
        assert not degraded

    def test_finetuned_without_tokens_degrades(self):
        text, degraded = extract_feedback_text("  bare answer  ", "finetuned", "basic")
        assert text == "bare answer"
        assert degraded

    def test_finetuned_unwrap_round_trips_arbitrary_text(self):
        rng = random.Random(5)
        alphabet = string.ascii_letters + " \n."
        for _ in range(100):
            original = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 80)))
            text, degraded = extract_feedback_text(
                wrap_feedback(original), "finetuned", "basic"
            )
            assert (text, degraded) == (original, False)

    def test_engineered_takes_answer_after_marker(self):
        raw = "1. The bug is on line 5 where i is added.\n2. Check your loop condition."
        text, degraded = extract_feedback_text(raw, "base", "engineered")
        assert text == "Check your loop condition."
        assert not degraded

    def test_engineered_uses_last_marker(self):
        raw = "2. first\nmore\n2. second hint"
        text, _ = extract_feedback_text(raw, "base", "engineered")
        assert text == "second hint"

    def test_engineered_marker_must_start_a_line(self):
        raw = "The answer 2. looks wrong somehow"
        text, degraded = extract_feedback_text(raw, "base", "engineered")
        assert degraded
        assert text == raw

    def test_basic_returns_trimmed_raw(self):
        text, degraded = extract_feedback_text("  whole answer \n", "base", "basic")
        assert (text, degraded) == ("whole answer", False)


class TestGenerateFeedback:
    def test_success_and_request_shape(self, fixture_pack, chat_server, monkeypatch):
        monkeypatch.setenv("MOCK_KEY", "sk-mock-456")
        server = chat_server(ok_responder("Solid start. Check the loop."))
        endpoint = make_endpoint(server.base_url, api_key_env="MOCK_KEY")
        scenario = scenario_for(fixture_pack, "sum-positive-adds-index")
        generated = generate_feedback(
            endpoint, scenario, "basic", problem_id="sum-positive",
            buggy_program_id="sum-positive-adds-index",
        )
        assert generated.feedback_text == "Solid start. Check the loop."
        assert not generated.degraded
        assert generated.latency_ms >= 0
        request = server.requests[0]
        assert request["model"] == "mock-1"
        assert request["authorization"] == "Bearer sk-mock-456"
        assert request["path"] == "/v1/chat/completions"
        assert "Buggy program:" in request["prompt"]

    def test_no_auth_header_without_key(self, fixture_pack, chat_server):
        server = chat_server(ok_responder("fine"))
        endpoint = make_endpoint(server.base_url)
        generate_feedback(endpoint, scenario_for(fixture_pack, "sum-positive-adds-index"), "basic")
        assert server.requests[0]["authorization"] is None

    def test_finetuned_endpoint_gets_finetune_prompt(self, fixture_pack, chat_server):
        server = chat_server(ok_responder("<feedback>hint</feedback>"))
        endpoint = make_endpoint(server.base_url, kind="finetuned")
        generated = generate_feedback(
            endpoint, scenario_for(fixture_pack, "sum-positive-adds-index"), "basic"
        )
        assert generated.feedback_text == "hint"
        assert "start token <feedback>" in server.requests[0]["prompt"]

    def test_incompatible_strategy_rejected_before_any_request(
        self, fixture_pack, chat_server
    ):
        server = chat_server(ok_responder("unused"))
        endpoint = make_endpoint(server.base_url, kind="finetuned")
        with pytest.raises(GenerationError, match="not compatible"):
            generate_feedback(
                endpoint,
                scenario_for(fixture_pack, "sum-positive-adds-index"),
                "engineered",
            )
        assert server.requests == []

    def test_retries_transient_500_then_succeeds(self, fixture_pack, chat_server):
        calls = []

        def flaky(prompt, headers):
            calls.append(1)
            return (500, "oops") if len(calls) < 3 else (200, "recovered")

        server = chat_server(flaky)
        endpoint = make_endpoint(server.base_url, max_retries=2)
        sleeps = []
        generated = generate_feedback(
            endpoint,
            scenario_for(fixture_pack, "sum-positive-adds-index"),
            "basic",
            backoff_base_s=0.01,
            sleep=sleeps.append,
        )
        assert generated.feedback_text == "recovered"
        assert len(calls) == 3
        assert sleeps == [0.01, 0.02]  # exponential backoff

    def test_exhausted_retries_raise(self, fixture_pack, chat_server):
        server = chat_server(lambda p, h: (503, "down"))
        endpoint = make_endpoint(server.base_url, max_retries=1)
        with pytest.raises(GenerationError, match="after 2 attempts") as exc_info:
            generate_feedback(
                endpoint,
                scenario_for(fixture_pack, "sum-positive-adds-index"),
                "basic",
                backoff_base_s=0,
                sleep=lambda s: None,
            )
        assert exc_info.value.attempts == 2

    def test_non_retryable_status_fails_immediately(self, fixture_pack, chat_server):
        server = chat_server(lambda p, h: (401, "denied"))
        endpoint = make_endpoint(server.base_url, max_retries=3)
        with pytest.raises(GenerationError, match="status 401"):
            generate_feedback(
                endpoint, scenario_for(fixture_pack, "sum-positive-adds-index"), "basic"
            )
        assert len(server.requests) == 1

    def test_malformed_body_is_terminal(self, fixture_pack, chat_server):
        server = chat_server(lambda p, h: (200, None))  # {} body
        endpoint = make_endpoint(server.base_url)
        with pytest.raises(GenerationError, match="malformed"):
            generate_feedback(
                endpoint, scenario_for(fixture_pack, "sum-positive-adds-index"), "basic"
            )

    def test_empty_completion_is_terminal(self, fixture_pack, chat_server):
        server = chat_server(ok_responder("   "))
        endpoint = make_endpoint(server.base_url)
        with pytest.raises(GenerationError, match="empty completion"):
            generate_feedback(
                endpoint, scenario_for(fixture_pack, "sum-positive-adds-index"), "basic"
            )

    def test_connection_failure_retries_then_raises(self, fixture_pack):
        endpoint = make_endpoint("http://127.0.0.1:9", max_retries=1, timeout_ms=500)
        with pytest.raises(GenerationError, match="transport error"):
            generate_feedback(
                endpoint,
                scenario_for(fixture_pack, "sum-positive-adds-index"),
                "basic",
                backoff_base_s=0,
                sleep=lambda s: None,
            )


class TestBatchGenerate:
    def test_dry_run_plans_every_cell(self, fixture_pack):
        endpoint = make_endpoint("http://unused.invalid/v1")
        results, manifest = batch_generate(
            [endpoint], fixture_pack, ["basic", "engineered"], dry_run=True
        )
        assert results == []
        assert len(manifest) == 60
        assert {m["status"] for m in manifest} == {"planned"}
        per_strategy = {}
        for m in manifest:
            per_strategy.setdefault(m["strategy"], []).append(m)
        assert set(per_strategy) == {"basic", "engineered"}
        assert all(len(v) == 30 for v in per_strategy.values())

    def test_generates_and_persists_instances(self, fixture_pack, chat_server, store):
        server = chat_server(ok_responder("Look at the accumulator line."))
        endpoint = make_endpoint(server.base_url)
        results, manifest = batch_generate(
            [endpoint], fixture_pack, ["basic"], store=store, concurrency=8
        )
        assert len(results) == 30
        assert all(m["status"] == "ok" for m in manifest)
        assert len(store.feedback_instances()) == 30
        inst = store.get_feedback("gen-mock-model-basic-sum-positive-adds-index")
        assert inst is not None
        assert inst.source == "model"
        assert inst.model_name == "mock-model"
        assert inst.strategy == "basic"

    def test_incompatible_cells_marked_not_run(self, fixture_pack, chat_server):
        server = chat_server(ok_responder("<feedback>short hint</feedback>"))
        endpoint = make_endpoint(server.base_url, kind="finetuned", name="ft-model")
        results, manifest = batch_generate(
            [endpoint], fixture_pack, ["basic", "engineered"]
        )
        statuses = {}
        for m in manifest:
            statuses[m["status"]] = statuses.get(m["status"], 0) + 1
        assert statuses == {"ok": 30, "incompatible": 30}
        assert len(results) == 30
        assert {r.strategy for r in results} == {"finetuned-basic"}

    def test_rerun_skips_existing_cells(self, fixture_pack, chat_server, store):
        server = chat_server(ok_responder("note"))
        endpoint = make_endpoint(server.base_url)
        batch_generate([endpoint], fixture_pack, ["basic"], store=store)
        first_count = len(server.requests)
        assert first_count == 30
        results, manifest = batch_generate(
            [endpoint], fixture_pack, ["basic"], store=store, rerun=True
        )
        assert results == []
        assert {m["status"] for m in manifest} == {"skipped"}
        assert len(server.requests) == first_count  # no new calls

    def test_partial_failure_isolated_to_cell(self, fixture_pack, chat_server, store):
        marker = "sum -= values[i]"  # unique to one buggy program

        def responder(prompt, headers):
            if marker in prompt:
                return (500, "forced failure")
            return (200, "fine")

        server = chat_server(responder)
        endpoint = make_endpoint(server.base_url, max_retries=1)
        results, manifest = batch_generate(
            [endpoint], fixture_pack, ["basic"], store=store, backoff_base_s=0.001
        )
        assert len(results) == 29
        by_status = {}
        for m in manifest:
            by_status.setdefault(m["status"], []).append(m)
        assert len(by_status["ok"]) == 29
        assert len(by_status["error"]) == 1
        failed = by_status["error"][0]
        assert failed["buggy_program_id"] == "sum-positive-subtracts"
        assert "attempts" in failed["error"]

    def test_no_secrets_in_manifest_or_store(
        self, fixture_pack, chat_server, store, tmp_path, monkeypatch
    ):
        secret = "sk-super-secret-789"
        monkeypatch.setenv("MOCK_KEY", secret)
        server = chat_server(ok_responder("ok text"))
        endpoint = make_endpoint(server.base_url, api_key_env="MOCK_KEY")
        _, manifest = batch_generate([endpoint], fixture_pack, ["basic"], store=store)
        manifest_path = tmp_path / "manifest.jsonl"
        write_manifest(manifest, str(manifest_path))
        assert secret not in manifest_path.read_text()
        assert secret not in pathlib_read(store.path)
        # the key was actually used
        assert server.requests[0]["authorization"] == f"Bearer {secret}"


def pathlib_read(path) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()
