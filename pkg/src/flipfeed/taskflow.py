"""Session state machine for the feedback-writing flow.

Each student works through one task per problem, in ascending ordinal
order: see the scenario, submit a failing test case (graded into the
understanding flag), get the fixed program revealed, write feedback.
Transitions are monotone and enforced here; persistence goes through a
pluggable store so HTTP and direct callers produce identical state.
"""

from __future__ import annotations

import hashlib
import random
import threading
from dataclasses import dataclass
from typing import Any, Protocol

from .harness import Harness
from .models import (
    FeedbackInstance,
    PrefeedbackRecord,
    PrefeedbackSubmission,
    ProblemPack,
    Session,
    SessionTask,
)

INSTRUCTION_TEXT = (
    "Imagine you are a tutor. A student in the course is asking for your "
    "help. Here is the problem description and the student's buggy C "
    "program. You should provide feedback so that the student can "
    "understand the issues in their buggy program and fix it. Provide "
    "your feedback in the textbox below."
)


class FlowError(Exception):
    """Base for task-flow violations; ``code`` keys the service error body."""

    code = "flow_error"


class OutOfOrderError(FlowError):
    code = "out_of_order"


class SessionCompleteError(FlowError):
    code = "session_complete"


class EmptyFeedbackError(FlowError):
    code = "empty_feedback"


class UnknownSessionError(FlowError):
    code = "unknown_session"


class FlowStore(Protocol):
    """Durability required by the flow; implemented by store.Store."""

    def get_session(self, session_id: str) -> Session | None: ...

    def session_for_student(self, student_id: str) -> Session | None: ...

    def put_session(self, session: Session) -> None: ...

    def put_feedback_with_session(
        self, instance: FeedbackInstance, session: Session
    ) -> None: ...

    def put_prefeedback(self, record: PrefeedbackRecord, session: Session) -> None: ...


@dataclass(frozen=True)
class TaskView:
    """What the student sees for the current task."""

    session_id: str
    index: int
    total: int
    state: str
    problem_id: str
    buggy_program_id: str
    title: str
    description: str
    buggy_source: str
    instruction: str
    understanding: int | None
    fixed_source: str | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "index": self.index,
            "total": self.total,
            "state": self.state,
            "problem_id": self.problem_id,
            "buggy_program_id": self.buggy_program_id,
            "title": self.title,
            "description": self.description,
            "buggy_source": self.buggy_source,
            "instruction": self.instruction,
            "understanding": self.understanding,
            "fixed_source": self.fixed_source,
        }


def assign_program(pack: ProblemPack, student_id: str, problem_id: str) -> str:
    """Uniform-random program choice, seeded per (student, problem)."""
    programs = sorted(p.id for p in pack.programs_for(problem_id))
    seed = hashlib.sha256(f"{student_id}:{problem_id}".encode("utf-8")).hexdigest()
    rng = random.Random(int(seed, 16))
    return programs[rng.randrange(len(programs))]


class TaskFlow:
    """Drives sessions over one ingested pack; calls per session linearize."""

    def __init__(self, pack: ProblemPack, harness: Harness, store: FlowStore):
        self.pack = pack
        self.harness = harness
        self.store = store
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- operations ------------------------------------------------------

    def start_session(self, student_id: str) -> Session:
        """Create (or return the existing) session for a student."""
        if not student_id.strip():
            raise FlowError("student_id must be non-empty")
        session_id = f"s-{student_id}"
        with self._lock(session_id):
            existing = self.store.session_for_student(student_id)
            if existing is not None:
                return existing
            tasks = tuple(
                SessionTask(
                    problem_id=problem.id,
                    buggy_program_id=assign_program(self.pack, student_id, problem.id),
                )
                for problem in self.pack.ordered_problems()
            )
            session = Session(
                id=session_id, student_id=student_id, pack_id=self.pack.id, tasks=tasks
            )
            self.store.put_session(session)
            return session

    def _load(self, session_id: str) -> Session:
        session = self.store.get_session(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return session

    def get_current_task(self, session_id: str) -> TaskView:
        session = self._load(session_id)
        if session.complete:
            raise SessionCompleteError(f"session {session_id} is complete")
        task = session.current_task()
        problem = self.pack.problem(task.problem_id)
        program = self.pack.program(task.buggy_program_id)
        revealed = task.state in ("fixed_shown", "feedback_submitted")
        return TaskView(
            session_id=session.id,
            index=session.cursor,
            total=len(session.tasks),
            state=task.state,
            problem_id=problem.id,
            buggy_program_id=program.id,
            title=problem.title,
            description=problem.description,
            buggy_source=program.buggy_source,
            instruction=INSTRUCTION_TEXT,
            understanding=task.understanding,
            fixed_source=program.fixed_source if revealed else None,
        )

    def submit_prefeedback(
        self, session_id: str, submission: PrefeedbackSubmission
    ) -> tuple[int, tuple[str, ...], str]:
        """Grade the claimed failing test case; reveal the fixed program.

        Returns (understanding, reasons, fixed_source). One attempt per
        task: the state moves presented -> fixed_shown and never back.
        """
        with self._lock(session_id):
            session = self._load(session_id)
            if session.complete:
                raise SessionCompleteError(f"session {session_id} is complete")
            task = session.current_task()
            if task.state != "presented":
                raise OutOfOrderError(
                    f"prefeedback already submitted (state {task.state})"
                )
            program = self.pack.program(task.buggy_program_id)
            outcome = self.harness.validate_prefeedback(program, submission)
            updated = SessionTask(
                problem_id=task.problem_id,
                buggy_program_id=task.buggy_program_id,
                state="fixed_shown",
                understanding=outcome.understanding,
            )
            session = session.with_task(session.cursor, updated)
            record = PrefeedbackRecord(
                session_id=session.id,
                problem_id=task.problem_id,
                buggy_program_id=task.buggy_program_id,
                submission=submission,
                actual_buggy_output=outcome.actual_buggy_output,
                actual_fixed_output=outcome.actual_fixed_output,
                understanding=outcome.understanding,
                reasons=outcome.reasons,
            )
            self.store.put_prefeedback(record, session)
            return outcome.understanding, outcome.reasons, program.fixed_source

    def submit_feedback(self, session_id: str, text: str) -> FeedbackInstance:
        """Store the written feedback and advance to the next task."""
        if not text.strip():
            raise EmptyFeedbackError("feedback text is empty after trimming")
        with self._lock(session_id):
            session = self._load(session_id)
            if session.complete:
                raise SessionCompleteError(f"session {session_id} is complete")
            task = session.current_task()
            if task.state != "fixed_shown":
                raise OutOfOrderError(
                    f"feedback requires the fixed program shown first (state {task.state})"
                )
            instance = FeedbackInstance(
                id=f"{session.id}-t{session.cursor + 1}",
                problem_id=task.problem_id,
                buggy_program_id=task.buggy_program_id,
                source="student",
                text=text,
                session_id=session.id,
                understanding=task.understanding,
            )
            updated = SessionTask(
                problem_id=task.problem_id,
                buggy_program_id=task.buggy_program_id,
                state="feedback_submitted",
                understanding=task.understanding,
            )
            session = session.with_task(session.cursor, updated, advance=True)
            self.store.put_feedback_with_session(instance, session)
            return instance
