"""Chat-completion client that turns pack scenarios into model feedback.

Endpoints are described by config records; API keys are referenced by
environment-variable name and are never stored, logged, or written to
manifests. Responses are normalized into FeedbackInstance records with
source="model".
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Sequence

import httpx

from .models import FeedbackInstance, ProblemPack
from .pipeline import END_TOKEN, START_TOKEN, Scenario, render_prompt, scenario_for

ENDPOINT_KINDS = ("base", "finetuned")
RETRYABLE_STATUS = (408, 429, 500, 502, 503, 504)

# finetuned endpoints are trained on the finetune prompt; the engineered
# instruction block would be out-of-distribution for them
BASE_STRATEGIES = ("basic", "engineered")
FINETUNED_STRATEGIES = ("basic",)

_MARKER_RE = re.compile(r"^2\.\s*", re.MULTILINE)


class GenerationError(Exception):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class ModelEndpointConfig:
    name: str
    base_url: str
    model_id: str
    kind: str = "base"
    api_key_env: str | None = None
    temperature: float = 0.0
    max_tokens: int = 512
    timeout_ms: int = 30000
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.kind not in ENDPOINT_KINDS:
            raise ValueError(f"unknown endpoint kind {self.kind!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def strategies(self) -> tuple[str, ...]:
        return FINETUNED_STRATEGIES if self.kind == "finetuned" else BASE_STRATEGIES

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) if self.api_key_env else None

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelEndpointConfig":
        return cls(
            name=d["name"],
            base_url=d["base_url"],
            model_id=d["model_id"],
            kind=d.get("kind", "base"),
            api_key_env=d.get("api_key_env"),
            temperature=d.get("temperature", 0.0),
            max_tokens=d.get("max_tokens", 512),
            timeout_ms=d.get("timeout_ms", 30000),
            max_retries=d.get("max_retries", 2),
        )


def load_endpoint_configs(path: str) -> list[ModelEndpointConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON list of endpoint configs")
    return [ModelEndpointConfig.from_dict(d) for d in data]


@dataclass(frozen=True)
class GeneratedFeedback:
    endpoint: str
    strategy: str
    problem_id: str
    buggy_program_id: str
    raw_response: str
    feedback_text: str
    degraded: bool
    latency_ms: float


class Extraction(NamedTuple):
    text: str
    degraded: bool


def extract_feedback_text(raw: str, kind: str, strategy: str) -> Extraction:
    """Pull the evaluated feedback out of a raw completion. Total.

    finetuned: text strictly between the first start token and the last end
    token (untrimmed, so wrapping round-trips byte-exactly). engineered on
    base models: the answer to instruction 2, after the last line-start "2."
    marker. Fallbacks return the whole trimmed raw, flagged as degraded.
    """
    if kind == "finetuned":
        start = raw.find(START_TOKEN)
        end = raw.rfind(END_TOKEN)
        if start != -1 and end != -1 and start + len(START_TOKEN) <= end:
            return Extraction(raw[start + len(START_TOKEN) : end], False)
        return Extraction(raw.strip(), True)
    if strategy == "engineered":
        matches = list(_MARKER_RE.finditer(raw))
        if matches:
            return Extraction(raw[matches[-1].end() :].strip(), False)
        return Extraction(raw.strip(), True)
    return Extraction(raw.strip(), False)


def _prompt_strategy(endpoint: ModelEndpointConfig, strategy: str) -> str:
    return "finetune" if endpoint.kind == "finetuned" else strategy


def generate_feedback(
    endpoint: ModelEndpointConfig,
    scenario: Scenario,
    strategy: str,
    *,
    problem_id: str = "",
    buggy_program_id: str = "",
    client: httpx.Client | None = None,
    backoff_base_s: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> GeneratedFeedback:
    """One chat-completion request with retry/backoff on transient failures."""
    if strategy not in endpoint.strategies():
        raise GenerationError(
            f"strategy {strategy!r} is not compatible with {endpoint.kind} "
            f"endpoint {endpoint.name!r}"
        )
    prompt = render_prompt(_prompt_strategy(endpoint, strategy), scenario)
    body = {
        "model": endpoint.model_id,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
        "max_tokens": endpoint.max_tokens,
    }
    headers = {}
    key = endpoint.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=endpoint.timeout_ms / 1000.0)
    try:
        attempts = endpoint.max_retries + 1
        last_error = "request not attempted"
        start = time.monotonic()
        for attempt in range(attempts):
            if attempt:
                sleep(backoff_base_s * (2 ** (attempt - 1)))
            try:
                response = client.post(
                    endpoint.base_url.rstrip("/") + "/chat/completions",
                    json=body,
                    headers=headers,
                    timeout=endpoint.timeout_ms / 1000.0,
                )
            except httpx.HTTPError as exc:
                last_error = f"transport error: {type(exc).__name__}"
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = f"retryable status {response.status_code}"
                continue
            if response.status_code != 200:
                raise GenerationError(
                    f"endpoint {endpoint.name!r} returned status "
                    f"{response.status_code}",
                    attempts=attempt + 1,
                )
            raw = _completion_text(endpoint.name, response)
            if not raw.strip():
                raise GenerationError(
                    f"endpoint {endpoint.name!r} returned an empty completion",
                    attempts=attempt + 1,
                )
            latency_ms = (time.monotonic() - start) * 1000.0
            text, degraded = extract_feedback_text(raw, endpoint.kind, strategy)
            return GeneratedFeedback(
                endpoint=endpoint.name,
                strategy=strategy,
                problem_id=problem_id,
                buggy_program_id=buggy_program_id,
                raw_response=raw,
                feedback_text=text,
                degraded=degraded,
                latency_ms=latency_ms,
            )
        raise GenerationError(
            f"endpoint {endpoint.name!r} failed after {attempts} attempts: {last_error}",
            attempts=attempts,
        )
    finally:
        if own_client:
            client.close()


def _completion_text(name: str, response: httpx.Response) -> str:
    try:
        data = response.json()
        return data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise GenerationError(f"endpoint {name!r} returned a malformed response body")


def instance_strategy(endpoint: ModelEndpointConfig, strategy: str) -> str:
    """Strategy label stored on generated instances."""
    return "finetuned-basic" if endpoint.kind == "finetuned" else strategy


def _cell_id(endpoint_name: str, label: str, program_id: str) -> str:
    return f"gen-{endpoint_name}-{label}-{program_id}"


def batch_generate(
    endpoints: Sequence[ModelEndpointConfig],
    pack: ProblemPack,
    strategies: Sequence[str],
    *,
    store=None,
    concurrency: int = 4,
    dry_run: bool = False,
    rerun: bool = False,
    backoff_base_s: float = 0.5,
) -> tuple[list[FeedbackInstance], list[dict[str, Any]]]:
    """Generate feedback for every endpoint x strategy x program cell.

    Individual failures don't stop the run; the manifest records one entry
    per cell with its outcome. With ``rerun`` cells whose instance already
    exists in the store are skipped. The manifest never contains secrets.
    """
    programs = [
        prog
        for problem in pack.ordered_problems()
        for prog in sorted(pack.programs_for(problem.id), key=lambda p: p.id)
    ]
    cells = []
    for endpoint in endpoints:
        for strategy in strategies:
            for program in programs:
                cells.append((endpoint, strategy, program))

    manifest: list[dict[str, Any]] = []
    results: list[FeedbackInstance] = []

    def entry(endpoint, strategy, program, status, **extra) -> dict[str, Any]:
        label = instance_strategy(endpoint, strategy)
        return {
            "cell": _cell_id(endpoint.name, label, program.id),
            "endpoint": endpoint.name,
            "strategy": label,
            "problem_id": program.problem_id,
            "buggy_program_id": program.id,
            "status": status,
            **extra,
        }

    def run_cell(cell) -> tuple[dict[str, Any], FeedbackInstance | None]:
        endpoint, strategy, program = cell
        if strategy not in endpoint.strategies():
            return entry(endpoint, strategy, program, "incompatible"), None
        label = instance_strategy(endpoint, strategy)
        feedback_id = _cell_id(endpoint.name, label, program.id)
        if rerun and store is not None and store.get_feedback(feedback_id) is not None:
            return entry(endpoint, strategy, program, "skipped"), None
        if dry_run:
            return entry(endpoint, strategy, program, "planned"), None
        try:
            generated = generate_feedback(
                endpoint,
                scenario_for(pack, program.id),
                strategy,
                problem_id=program.problem_id,
                buggy_program_id=program.id,
                client=client,
                backoff_base_s=backoff_base_s,
            )
        except GenerationError as exc:
            return entry(endpoint, strategy, program, "error", error=str(exc)), None
        instance = FeedbackInstance(
            id=feedback_id,
            problem_id=program.problem_id,
            buggy_program_id=program.id,
            source="model",
            text=generated.feedback_text,
            model_name=endpoint.name,
            strategy=label,
        )
        return (
            entry(
                endpoint,
                strategy,
                program,
                "ok",
                latency_ms=generated.latency_ms,
                degraded=generated.degraded,
            ),
            instance,
        )

    with httpx.Client() as client:
        with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
            outcomes = list(pool.map(run_cell, cells))
    for cell_entry, instance in outcomes:
        manifest.append(cell_entry)
        if instance is not None:
            results.append(instance)
            if store is not None:
                store.put_feedback(instance)
    return results, manifest


def write_manifest(entries: Sequence[dict[str, Any]], path: str) -> None:
    from .pipeline import _atomic_write

    payload = b"".join(
        json.dumps(e, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"
        for e in entries
    )
    _atomic_write(path, payload)
