"""Corpus filtering, prompt rendering, and fine-tuning dataset export.

Prompt templates live under ``templates/`` and are the source of truth:
rendering substitutes scenario slots into the template file bytes, nothing
more. Completions wrap the feedback text in start/end tokens so the
trained model's output can be unwrapped byte-exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable, Sequence

from .metrics import count_words
from .models import FeedbackInstance, ProblemPack, TestCase

START_TOKEN = "<feedback>"
END_TOKEN = "</feedback>"

PROMPT_STRATEGIES = ("basic", "engineered", "finetune")

DEFAULT_MIN_WORDS = 5
DEFAULT_MAX_WORDS = 200


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class Scenario:
    """The four prompt slots describing one buggy program."""

    problem_description: str
    failing_test_case: str
    buggy_program: str
    fixed_program: str

    def __post_init__(self) -> None:
        for name in (
            "problem_description",
            "failing_test_case",
            "buggy_program",
            "fixed_program",
        ):
            if not getattr(self, name).strip():
                raise PipelineError(f"scenario slot {name} is empty")


@dataclass(frozen=True)
class FineTuneRecord:
    """One prompt/completion training pair."""

    prompt: str
    completion: str
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        c = self.completion
        if not (c.startswith(START_TOKEN) and c.endswith(END_TOKEN)):
            raise PipelineError("completion must be wrapped in start/end tokens")
        if c.count(START_TOKEN) != 1 or c.count(END_TOKEN) != 1:
            raise PipelineError("completion must contain each token exactly once")
        n = self.meta.get("num_words")
        if n is None or not (DEFAULT_MIN_WORDS <= n <= DEFAULT_MAX_WORDS):
            raise PipelineError(
                f"meta.num_words must be within [{DEFAULT_MIN_WORDS}, "
                f"{DEFAULT_MAX_WORDS}], got {n!r}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {"prompt": self.prompt, "completion": self.completion, "meta": self.meta}


def render_failing_test_case(test: TestCase, buggy_output: str) -> str:
    return (
        f"Input: {test.input}\n"
        f"Buggy output: {buggy_output}\n"
        f"Expected output: {test.expected_output}"
    )


def scenario_for(pack: ProblemPack, program_id: str) -> Scenario:
    """Resolve the prompt slots for a pack program."""
    try:
        program = pack.program(program_id)
    except KeyError:
        raise PipelineError(f"unknown program {program_id!r} in pack {pack.id!r}")
    problem = pack.problem(program.problem_id)
    buggy_output = pack.reference_buggy_outputs.get(program_id)
    if buggy_output is None:
        raise PipelineError(f"pack {pack.id!r} has no reference output for {program_id!r}")
    return Scenario(
        problem_description=problem.description.strip(),
        failing_test_case=render_failing_test_case(program.reference_test, buggy_output),
        buggy_program=program.buggy_source.strip(),
        fixed_program=program.fixed_source.strip(),
    )


def load_template(strategy: str) -> str:
    if strategy not in PROMPT_STRATEGIES:
        raise PipelineError(f"unknown prompt strategy {strategy!r}")
    ref = resources.files("flipfeed") / "templates" / f"prompt_{strategy}.txt"
    return ref.read_text(encoding="utf-8")


def render_prompt(strategy: str, scenario: Scenario) -> str:
    template = load_template(strategy)
    return template.format(
        problem_description=scenario.problem_description,
        failing_test_case=scenario.failing_test_case,
        buggy_program=scenario.buggy_program,
        fixed_program=scenario.fixed_program,
    )


def filter_by_length(
    instances: Iterable[FeedbackInstance],
    min_words: int = DEFAULT_MIN_WORDS,
    max_words: int = DEFAULT_MAX_WORDS,
) -> list[FeedbackInstance]:
    """Keep instances whose word count is within the inclusive bounds."""
    if min_words > max_words:
        raise PipelineError(f"min_words {min_words} exceeds max_words {max_words}")
    return [i for i in instances if min_words <= count_words(i.text) <= max_words]


def wrap_feedback(text: str) -> str:
    return START_TOKEN + text + END_TOKEN


def unwrap_feedback(completion: str) -> str:
    start = completion.index(START_TOKEN) + len(START_TOKEN)
    end = completion.rindex(END_TOKEN)
    return completion[start:end]


def build_finetune_dataset(
    instances: Sequence[FeedbackInstance], pack: ProblemPack
) -> list[FineTuneRecord]:
    """One training record per (already length-filtered) instance."""
    ordinal = {p.id: p.ordinal for p in pack.problems}
    missing = sorted({i.problem_id for i in instances} - set(ordinal))
    if missing:
        raise PipelineError(f"instances reference unknown problems: {missing}")
    ordered = sorted(
        instances, key=lambda i: (ordinal[i.problem_id], i.buggy_program_id, i.id)
    )
    records = []
    for inst in ordered:
        scenario = scenario_for(pack, inst.buggy_program_id)
        records.append(
            FineTuneRecord(
                prompt=render_prompt("finetune", scenario),
                completion=wrap_feedback(inst.text),
                meta={
                    "problem_id": inst.problem_id,
                    "buggy_program_id": inst.buggy_program_id,
                    "understanding": inst.understanding,
                    "num_words": count_words(inst.text),
                },
            )
        )
    return records


def export_records(
    records: Sequence[FineTuneRecord],
    path: str,
    *,
    pack_id: str,
    min_words: int = DEFAULT_MIN_WORDS,
    max_words: int = DEFAULT_MAX_WORDS,
) -> dict[str, Any]:
    """Write records as JSON lines plus a sidecar manifest; atomic via rename."""
    payload = b"".join(
        json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")
        + b"\n"
        for r in records
    )
    digest = hashlib.sha256(payload).hexdigest()
    counts: dict[str, int] = {}
    for record in records:
        problem_id = record.meta["problem_id"]
        counts[problem_id] = counts.get(problem_id, 0) + 1
    manifest = {
        "path": os.path.abspath(path),
        "count": len(records),
        "counts_per_problem": dict(sorted(counts.items())),
        "min_words": min_words,
        "max_words": max_words,
        "pack_id": pack_id,
        "sha256": digest,
    }
    _atomic_write(path, payload)
    manifest_bytes = json.dumps(manifest, sort_keys=True, indent=2).encode("utf-8") + b"\n"
    _atomic_write(path + ".manifest.json", manifest_bytes)
    return manifest


def _atomic_write(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".export-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
