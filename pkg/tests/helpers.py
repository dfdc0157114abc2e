"""Shared test utilities: brute-force oracles, fakes, and a mock chat server.

The oracles here are intentionally independent implementations (character
scans, contingency tables) used to cross-check the library's metric code.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable

from flipfeed.harness import UnderstandingOutcome
from flipfeed.models import (
    FeedbackInstance,
    PrefeedbackRecord,
    RubricAnnotation,
    Session,
)

# -- brute-force oracles -------------------------------------------------


def oracle_count_words(text: str) -> int:
    count = 0
    in_word = False
    for ch in text:
        if ch.isspace():
            in_word = False
        else:
            if not in_word:
                count += 1
            in_word = True
    return count


def oracle_count_sentences(text: str) -> int:
    terminators = {".", "!", "?", "\n"}
    count = 0
    has_word = False
    for ch in text:
        if ch in terminators:
            if has_word:
                count += 1
            has_word = False
        elif not ch.isspace():
            has_word = True
    if has_word:
        count += 1
    return count


def oracle_kappa(a: list[int], b: list[int]) -> float:
    n = len(a)
    table = {(x, y): 0 for x in (0, 1) for y in (0, 1)}
    for x, y in zip(a, b):
        table[(x, y)] += 1
    p_o = (table[(0, 0)] + table[(1, 1)]) / n
    pa1 = (table[(1, 0)] + table[(1, 1)]) / n
    pb1 = (table[(0, 1)] + table[(1, 1)]) / n
    p_e = pa1 * pb1 + (1 - pa1) * (1 - pb1)
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


# -- tiny compilable pack ---------------------------------------------------

ECHO_PLUS_ONE_FIXED = """#include <stdio.h>

int main(void) {
    int x;
    if (scanf("%d", &x) == 1) {
        printf("%d\\n", x + 1);
    }
    return 0;
}
"""

ECHO_PLUS_TWO_BUGGY = """#include <stdio.h>

int main(void) {
    int x;
    if (scanf("%d", &x) == 1) {
        printf("%d\\n", x + 2);
    }
    return 0;
}
"""

DOUBLE_FIXED = """#include <stdio.h>

int main(void) {
    int x;
    if (scanf("%d", &x) == 1) {
        printf("%d\\n", 2 * x);
    }
    return 0;
}
"""

TRIPLE_BUGGY = """#include <stdio.h>

int main(void) {
    int x;
    if (scanf("%d", &x) == 1) {
        printf("%d\\n", 3 * x);
    }
    return 0;
}
"""


def tiny_pack_data(pack_id: str = "tiny") -> dict[str, Any]:
    """A 1-problem, 2-program pack that compiles in well under a second."""
    return {
        "pack": {
            "id": pack_id,
            "problems": [
                {
                    "id": "add-one",
                    "title": "Add One",
                    "ordinal": 1,
                    "description": "Read an integer and print it plus one.",
                    "buggy_programs": [
                        {
                            "id": "add-one-plus-two",
                            "buggy_source": ECHO_PLUS_TWO_BUGGY,
                            "fixed_source": ECHO_PLUS_ONE_FIXED,
                            "reference_test": {"input": "4", "expected_output": "5"},
                        },
                        {
                            "id": "add-one-triple",
                            "buggy_source": TRIPLE_BUGGY,
                            "fixed_source": ECHO_PLUS_ONE_FIXED,
                            "reference_test": {"input": "4", "expected_output": "5"},
                        },
                    ],
                }
            ],
        }
    }


# -- fakes -------------------------------------------------------------


class MemoryStore:
    """In-memory FlowStore for fast state-machine tests."""

    def __init__(self) -> None:
        self.sessions: dict[str, Session] = {}
        self.by_student: dict[str, str] = {}
        self.prefeedback: list[PrefeedbackRecord] = []
        self.feedback: dict[str, FeedbackInstance] = {}
        self.annotations: dict[str, RubricAnnotation] = {}

    def get_session(self, session_id: str) -> Session | None:
        return self.sessions.get(session_id)

    def session_for_student(self, student_id: str) -> Session | None:
        session_id = self.by_student.get(student_id)
        return self.sessions.get(session_id) if session_id else None

    def put_session(self, session: Session) -> None:
        self.sessions[session.id] = session
        self.by_student[session.student_id] = session.id

    def put_prefeedback(self, record: PrefeedbackRecord, session: Session) -> None:
        self.prefeedback.append(record)
        self.put_session(session)

    def put_feedback_with_session(
        self, instance: FeedbackInstance, session: Session
    ) -> None:
        self.feedback[instance.id] = instance
        self.put_session(session)


class FakeHarness:
    """Canned validate_prefeedback: understanding=1 iff claims are B and F."""

    def validate_prefeedback(self, program, submission) -> UnderstandingOutcome:
        ok = (
            submission.claimed_buggy_output == "B"
            and submission.claimed_correct_output == "F"
        )
        return UnderstandingOutcome(
            understanding=1 if ok else 0,
            actual_buggy_output="B",
            actual_fixed_output="F",
            reasons=() if ok else ("buggy_mismatch",),
        )


# -- instance/annotation builders ---------------------------------------


def student_instance(
    instance_id: str,
    problem_id: str = "p-one",
    program_id: str = "p-one-b1",
    text: str = "The loop index is wrong. Fix the accumulator line.",
    understanding: int | None = 1,
) -> FeedbackInstance:
    return FeedbackInstance(
        id=instance_id,
        problem_id=problem_id,
        buggy_program_id=program_id,
        source="student",
        text=text,
        session_id=f"s-{instance_id}",
        understanding=understanding,
    )


def model_instance(
    instance_id: str,
    model_name: str = "mock-model",
    strategy: str = "basic",
    problem_id: str = "p-one",
    program_id: str = "p-one-b1",
    text: str = "Check the accumulator variable inside the loop.",
) -> FeedbackInstance:
    return FeedbackInstance(
        id=instance_id,
        problem_id=problem_id,
        buggy_program_id=program_id,
        source="model",
        text=text,
        model_name=model_name,
        strategy=strategy,
    )


def annotation(
    feedback_id: str,
    annotator_id: str = "expert-a",
    correct: int = 1,
    gives_fix: int = 0,
    mentions_variables: int = 0,
    mentions_lines: int = 0,
    num_words: int = 10,
    num_sentences: int = 2,
) -> RubricAnnotation:
    return RubricAnnotation(
        feedback_id=feedback_id,
        annotator_id=annotator_id,
        correct=correct,
        gives_fix=gives_fix,
        mentions_variables=mentions_variables,
        mentions_lines=mentions_lines,
        num_words=num_words,
        num_sentences=num_sentences,
    )


# -- mock chat-completion endpoint ------------------------------------------

Responder = Callable[[str, dict[str, str]], tuple[int, str | None]]


class MockChatServer:
    """Local chat-completions endpoint with a scriptable responder.

    responder(prompt, headers) -> (status, content); content None sends a
    malformed body. Every request is recorded for assertions.
    """

    def __init__(self, responder: Responder):
        self.requests: list[dict[str, Any]] = []
        self._requests_lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:
                length = int(self.headers.get("content-length", "0"))
                body = json.loads(self.rfile.read(length))
                prompt = body["messages"][0]["content"]
                with outer._requests_lock:
                    outer.requests.append(
                        {
                            "prompt": prompt,
                            "model": body.get("model"),
                            "authorization": self.headers.get("Authorization"),
                            "path": self.path,
                        }
                    )
                status, content = responder(prompt, dict(self.headers))
                if content is None:
                    payload = b"{}"
                else:
                    payload = json.dumps(
                        {"choices": [{"message": {"role": "assistant", "content": content}}]}
                    ).encode("utf-8")
                self.send_response(status)
                self.send_header("content-type", "application/json")
                self.send_header("content-length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args) -> None:
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "MockChatServer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
