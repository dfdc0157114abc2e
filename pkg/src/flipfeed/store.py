"""Durable single-file store: an append-only JSONL journal.

Every line is ``{"kind": ..., "data": {...}}``. State is rebuilt by
replaying the journal on open; for keyed kinds the last line wins, so
updates are plain appends. Multi-record operations are written as one
buffered write followed by fsync, and a torn final line (crash mid-write)
is dropped on the next open. Writers serialize on a lock; readers get
snapshots taken under the same lock.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Any, Iterator

from .models import (
    FeedbackInstance,
    PrefeedbackRecord,
    ProblemPack,
    RubricAnnotation,
    Session,
)

KINDS = ("pack", "session", "prefeedback", "feedback", "annotation")


class StoreCorruptError(Exception):
    """A journal line before the last is unreadable."""


def _encode(kind: str, data: dict[str, Any]) -> bytes:
    line = json.dumps({"kind": kind, "data": data}, sort_keys=True, separators=(",", ":"))
    return line.encode("utf-8") + b"\n"


class Store:
    def __init__(self, path: str):
        self.path = path
        self._lock = threading.RLock()
        self._packs: dict[str, ProblemPack] = {}
        self._active_pack_id: str | None = None
        self._sessions: dict[str, Session] = {}
        self._by_student: dict[str, str] = {}
        self._prefeedback: dict[tuple[str, str], PrefeedbackRecord] = {}
        self._feedback: dict[str, FeedbackInstance] = {}
        self._annotations: dict[str, RubricAnnotation] = {}
        self._replay()
        self._fh = open(self.path, "ab")

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- journal ---------------------------------------------------------

    def _replay(self) -> None:
        if not os.path.exists(self.path):
            open(self.path, "ab").close()
            return
        with open(self.path, "rb") as fh:
            raw = fh.read()
        good = len(raw)
        lines = raw.split(b"\n")
        # a trailing newline yields one empty tail entry; anything else on
        # the tail is a torn write from a crash and gets truncated away
        records = []
        for i, line in enumerate(lines):
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    good = len(raw) - len(line)
                    break
                raise StoreCorruptError(f"{self.path}: unreadable line {i + 1}")
        if good != len(raw):
            with open(self.path, "ab") as fh:
                fh.truncate(good)
        for record in records:
            self._apply(record["kind"], record["data"])

    def _apply(self, kind: str, data: dict[str, Any]) -> None:
        if kind == "pack":
            pack = ProblemPack.from_dict(data)
            self._packs[pack.id] = pack
            self._active_pack_id = pack.id
        elif kind == "session":
            session = Session.from_dict(data)
            self._sessions[session.id] = session
            self._by_student[session.student_id] = session.id
        elif kind == "prefeedback":
            record = PrefeedbackRecord.from_dict(data)
            self._prefeedback[(record.session_id, record.problem_id)] = record
        elif kind == "feedback":
            instance = FeedbackInstance.from_dict(data)
            self._feedback[instance.id] = instance
        elif kind == "annotation":
            annotation = RubricAnnotation.from_dict(data)
            self._annotations[annotation.id] = annotation
        else:
            raise StoreCorruptError(f"unknown journal kind {kind!r}")

    def _append(self, *entries: tuple[str, dict[str, Any]]) -> None:
        payload = b"".join(_encode(kind, data) for kind, data in entries)
        self._fh.write(payload)
        self._fh.flush()
        os.fsync(self._fh.fileno())
        for kind, data in entries:
            self._apply(kind, data)

    # -- packs -------------------------------------------------------------

    def put_pack(self, pack: ProblemPack) -> None:
        with self._lock:
            self._append(("pack", pack.to_dict()))

    def get_pack(self, pack_id: str) -> ProblemPack | None:
        with self._lock:
            return self._packs.get(pack_id)

    def active_pack(self) -> ProblemPack | None:
        with self._lock:
            if self._active_pack_id is None:
                return None
            return self._packs[self._active_pack_id]

    # -- sessions (FlowStore interface) -------------------------------------

    def get_session(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def session_for_student(self, student_id: str) -> Session | None:
        with self._lock:
            session_id = self._by_student.get(student_id)
            return self._sessions.get(session_id) if session_id else None

    def put_session(self, session: Session) -> None:
        with self._lock:
            self._append(("session", session.to_dict()))

    def put_prefeedback(self, record: PrefeedbackRecord, session: Session) -> None:
        with self._lock:
            self._append(
                ("prefeedback", record.to_dict()), ("session", session.to_dict())
            )

    def put_feedback_with_session(
        self, instance: FeedbackInstance, session: Session
    ) -> None:
        with self._lock:
            self._append(
                ("feedback", instance.to_dict()), ("session", session.to_dict())
            )

    # -- feedback and annotations -------------------------------------------

    def put_feedback(self, instance: FeedbackInstance) -> None:
        with self._lock:
            self._append(("feedback", instance.to_dict()))

    def get_feedback(self, feedback_id: str) -> FeedbackInstance | None:
        with self._lock:
            return self._feedback.get(feedback_id)

    def feedback_instances(self) -> list[FeedbackInstance]:
        with self._lock:
            return list(self._feedback.values())

    def put_annotation(self, annotation: RubricAnnotation) -> None:
        with self._lock:
            self._append(("annotation", annotation.to_dict()))

    def get_annotation(self, annotation_id: str) -> RubricAnnotation | None:
        with self._lock:
            return self._annotations.get(annotation_id)

    def annotations(self) -> list[RubricAnnotation]:
        with self._lock:
            return list(self._annotations.values())

    def prefeedback_records(self) -> list[PrefeedbackRecord]:
        with self._lock:
            return list(self._prefeedback.values())

    def sessions(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())

    def journal_lines(self) -> Iterator[dict[str, Any]]:
        """Raw journal records, for diagnostics and equivalence tests."""
        with open(self.path, "rb") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)
