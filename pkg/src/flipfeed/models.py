"""Shared domain types for the feedback-collection platform.

All types are immutable values after construction; mutation happens only
through the persistence layer. Each type knows how to serialize itself to a
plain dict (``to_dict``) and back (``from_dict``) so the store can keep
canonical JSON payloads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, asdict
from typing import Any

SLUG_RE = re.compile(r"^[a-z0-9]([a-z0-9-]{0,62}[a-z0-9])?$")

TASK_STATES = ("presented", "prefeedback_done", "fixed_shown", "feedback_submitted")
FEEDBACK_SOURCES = ("student", "model")
STRATEGIES = ("basic", "engineered", "finetuned-basic")


class DomainError(Exception):
    """Base class for domain validation failures."""


def validate_slug(value: str, what: str) -> str:
    if not SLUG_RE.match(value):
        raise DomainError(f"{what} {value!r} is not a valid slug ([a-z0-9-], 1-64 chars)")
    return value


@dataclass(frozen=True)
class TestCase:
    """Input plus the normalized output of the fixed program on that input."""

    input: str
    expected_output: str

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TestCase":
        return cls(input=d["input"], expected_output=d["expected_output"])


@dataclass(frozen=True)
class Problem:
    id: str
    title: str
    description: str
    ordinal: int

    def __post_init__(self) -> None:
        validate_slug(self.id, "problem id")
        if self.ordinal < 1:
            raise DomainError(f"problem {self.id}: ordinal must be >= 1, got {self.ordinal}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Problem":
        return cls(id=d["id"], title=d["title"], description=d["description"], ordinal=int(d["ordinal"]))


@dataclass(frozen=True)
class BuggyProgram:
    """One task scenario: buggy source, its expert fix, and a witness test.

    Compile/divergence invariants are checked at pack ingest, not here, since
    they require the execution harness.
    """

    id: str
    problem_id: str
    buggy_source: str
    fixed_source: str
    reference_test: TestCase

    def __post_init__(self) -> None:
        validate_slug(self.id, "program id")
        validate_slug(self.problem_id, "problem id")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "problem_id": self.problem_id,
            "buggy_source": self.buggy_source,
            "fixed_source": self.fixed_source,
            "reference_test": self.reference_test.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BuggyProgram":
        return cls(
            id=d["id"],
            problem_id=d["problem_id"],
            buggy_source=d["buggy_source"],
            fixed_source=d["fixed_source"],
            reference_test=TestCase.from_dict(d["reference_test"]),
        )


@dataclass(frozen=True)
class PrefeedbackSubmission:
    """A student's claimed failing test case: input plus both claimed outputs."""

    input: str
    claimed_buggy_output: str
    claimed_correct_output: str

    def __post_init__(self) -> None:
        for name in ("input", "claimed_buggy_output", "claimed_correct_output"):
            if not getattr(self, name).strip():
                raise DomainError(f"prefeedback submission: {name} must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PrefeedbackSubmission":
        return cls(
            input=d["input"],
            claimed_buggy_output=d["claimed_buggy_output"],
            claimed_correct_output=d["claimed_correct_output"],
        )


@dataclass(frozen=True)
class SessionTask:
    """Per-task state within a session."""

    problem_id: str
    buggy_program_id: str
    state: str = "presented"
    understanding: int | None = None

    def __post_init__(self) -> None:
        if self.state not in TASK_STATES:
            raise DomainError(f"unknown task state {self.state!r}")
        if self.understanding not in (None, 0, 1):
            raise DomainError(f"understanding must be 0/1, got {self.understanding!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SessionTask":
        return cls(
            problem_id=d["problem_id"],
            buggy_program_id=d["buggy_program_id"],
            state=d["state"],
            understanding=d["understanding"],
        )


@dataclass(frozen=True)
class Session:
    """One student's pass through the task queue, in fixed problem order.

    ``cursor`` indexes the current task; it equals len(tasks) once the
    session is complete. State transitions are monotone per task:
    presented -> prefeedback_done -> fixed_shown -> feedback_submitted.
    """

    id: str
    student_id: str
    pack_id: str
    tasks: tuple[SessionTask, ...]
    cursor: int = 0

    @property
    def complete(self) -> bool:
        return self.cursor >= len(self.tasks)

    def current_task(self) -> SessionTask:
        if self.complete:
            raise DomainError(f"session {self.id} is complete")
        return self.tasks[self.cursor]

    def with_task(self, index: int, task: SessionTask, advance: bool = False) -> "Session":
        tasks = self.tasks[:index] + (task,) + self.tasks[index + 1 :]
        cursor = self.cursor + 1 if advance else self.cursor
        return Session(
            id=self.id,
            student_id=self.student_id,
            pack_id=self.pack_id,
            tasks=tasks,
            cursor=cursor,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "student_id": self.student_id,
            "pack_id": self.pack_id,
            "tasks": [t.to_dict() for t in self.tasks],
            "cursor": self.cursor,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Session":
        return cls(
            id=d["id"],
            student_id=d["student_id"],
            pack_id=d["pack_id"],
            tasks=tuple(SessionTask.from_dict(t) for t in d["tasks"]),
            cursor=int(d["cursor"]),
        )


@dataclass(frozen=True)
class PrefeedbackRecord:
    """A graded pre-feedback submission, kept for later analysis."""

    session_id: str
    problem_id: str
    buggy_program_id: str
    submission: PrefeedbackSubmission
    actual_buggy_output: str
    actual_fixed_output: str
    understanding: int
    reasons: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "problem_id": self.problem_id,
            "buggy_program_id": self.buggy_program_id,
            "submission": self.submission.to_dict(),
            "actual_buggy_output": self.actual_buggy_output,
            "actual_fixed_output": self.actual_fixed_output,
            "understanding": self.understanding,
            "reasons": list(self.reasons),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PrefeedbackRecord":
        return cls(
            session_id=d["session_id"],
            problem_id=d["problem_id"],
            buggy_program_id=d["buggy_program_id"],
            submission=PrefeedbackSubmission.from_dict(d["submission"]),
            actual_buggy_output=d["actual_buggy_output"],
            actual_fixed_output=d["actual_fixed_output"],
            understanding=int(d["understanding"]),
            reasons=tuple(d["reasons"]),
        )


@dataclass(frozen=True)
class FeedbackInstance:
    """One piece of feedback text with provenance."""

    id: str
    problem_id: str
    buggy_program_id: str
    source: str
    text: str
    session_id: str | None = None
    model_name: str | None = None
    strategy: str | None = None
    understanding: int | None = None

    def __post_init__(self) -> None:
        if self.source not in FEEDBACK_SOURCES:
            raise DomainError(f"unknown feedback source {self.source!r}")
        if self.source == "student" and not self.session_id:
            raise DomainError("student feedback requires a session_id")
        if self.source == "model" and not (self.model_name and self.strategy):
            raise DomainError("model feedback requires model_name and strategy")
        if self.strategy is not None and self.strategy not in STRATEGIES:
            raise DomainError(f"unknown strategy {self.strategy!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FeedbackInstance":
        return cls(
            id=d["id"],
            problem_id=d["problem_id"],
            buggy_program_id=d["buggy_program_id"],
            source=d["source"],
            text=d["text"],
            session_id=d.get("session_id"),
            model_name=d.get("model_name"),
            strategy=d.get("strategy"),
            understanding=d.get("understanding"),
        )


@dataclass(frozen=True)
class RubricAnnotation:
    """Per-instance rubric attribute vector plus automated counts."""

    feedback_id: str
    annotator_id: str
    correct: int
    gives_fix: int
    mentions_variables: int
    mentions_lines: int
    num_words: int
    num_sentences: int

    def __post_init__(self) -> None:
        for name in ("correct", "gives_fix", "mentions_variables", "mentions_lines"):
            if getattr(self, name) not in (0, 1):
                raise DomainError(f"annotation attribute {name} must be 0 or 1")
        if self.num_words < 0 or self.num_sentences < 0:
            raise DomainError("automated counts must be non-negative")

    @property
    def id(self) -> str:
        return f"{self.feedback_id}:{self.annotator_id}"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RubricAnnotation":
        return cls(
            feedback_id=d["feedback_id"],
            annotator_id=d["annotator_id"],
            correct=int(d["correct"]),
            gives_fix=int(d["gives_fix"]),
            mentions_variables=int(d["mentions_variables"]),
            mentions_lines=int(d["mentions_lines"]),
            num_words=int(d["num_words"]),
            num_sentences=int(d["num_sentences"]),
        )


@dataclass(frozen=True)
class AggregateRow:
    """One row of the summary report.

    Percentages are in [0, 100]. Means are None when the group is empty.
    Values are unrounded; display rounding happens at render time.
    """

    label: str
    sample_size: int
    correct_pct: float | None
    mean_words: float | None
    mean_sentences: float | None
    gives_fix_pct: float | None
    mentions_variables_pct: float | None
    mentions_lines_pct: float | None
    tier: int = 0  # grouping hierarchy level, controls report ordering

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AggregateRow":
        return cls(**d)


@dataclass(frozen=True)
class ProblemPack:
    """An ingested, fully validated problem pack.

    ``reference_buggy_outputs`` maps program id to the normalized output the
    buggy program produced on its reference test during ingest validation; it
    is the "buggy output" slot of rendered failing test cases.
    """

    id: str
    problems: tuple[Problem, ...]
    programs: tuple[BuggyProgram, ...]
    reference_buggy_outputs: dict[str, str] = field(default_factory=dict)

    def problem(self, problem_id: str) -> Problem:
        for p in self.problems:
            if p.id == problem_id:
                return p
        raise KeyError(problem_id)

    def program(self, program_id: str) -> BuggyProgram:
        for prog in self.programs:
            if prog.id == program_id:
                return prog
        raise KeyError(program_id)

    def programs_for(self, problem_id: str) -> list[BuggyProgram]:
        return [p for p in self.programs if p.problem_id == problem_id]

    def ordered_problems(self) -> list[Problem]:
        return sorted(self.problems, key=lambda p: p.ordinal)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "problems": [p.to_dict() for p in self.problems],
            "programs": [p.to_dict() for p in self.programs],
            "reference_buggy_outputs": dict(self.reference_buggy_outputs),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ProblemPack":
        return cls(
            id=d["id"],
            problems=tuple(Problem.from_dict(p) for p in d["problems"]),
            programs=tuple(BuggyProgram.from_dict(p) for p in d["programs"]),
            reference_buggy_outputs=dict(d["reference_buggy_outputs"]),
        )
