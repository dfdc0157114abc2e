"""Two-annotator rubric workflow: queue building and annotation recording."""

from __future__ import annotations

import hashlib
import random
from typing import Any

from .metrics import count_sentences, count_words
from .models import FeedbackInstance, RubricAnnotation
from .store import Store

DEFAULT_PER_PROBLEM = 100

FLAG_NAMES = ("correct", "gives_fix", "mentions_variables", "mentions_lines")


class UnknownFeedbackError(Exception):
    pass


def record_annotation(
    store: Store, feedback_id: str, annotator_id: str, flags: dict[str, Any]
) -> RubricAnnotation:
    """Store one annotator's rubric flags; lengths are auto-computed.

    Re-submission overwrites the visible annotation; the journal keeps
    every revision in order as the audit trail.
    """
    instance = store.get_feedback(feedback_id)
    if instance is None:
        raise UnknownFeedbackError(f"no feedback instance {feedback_id!r}")
    unknown = sorted(set(flags) - set(FLAG_NAMES))
    if unknown:
        raise ValueError(f"unknown rubric flags: {unknown}")
    missing = sorted(set(FLAG_NAMES) - set(flags))
    if missing:
        raise ValueError(f"missing rubric flags: {missing}")
    annotation = RubricAnnotation(
        feedback_id=feedback_id,
        annotator_id=annotator_id,
        correct=flags["correct"],
        gives_fix=flags["gives_fix"],
        mentions_variables=flags["mentions_variables"],
        mentions_lines=flags["mentions_lines"],
        num_words=count_words(instance.text),
        num_sentences=count_sentences(instance.text),
    )
    store.put_annotation(annotation)
    return annotation


def _stratified_sample(instances: list[FeedbackInstance], per_problem: int) -> list[FeedbackInstance]:
    """Deterministic per-problem sample, independent of annotator progress.

    Seeding by problem id (not annotator) gives every annotator the same
    sample, so two-annotator overlap is guaranteed by construction.
    """
    by_problem: dict[str, list[FeedbackInstance]] = {}
    for inst in instances:
        by_problem.setdefault(inst.problem_id, []).append(inst)
    sample: list[FeedbackInstance] = []
    for problem_id in sorted(by_problem):
        group = sorted(by_problem[problem_id], key=lambda i: i.id)
        seed = hashlib.sha256(f"queue:{problem_id}".encode("utf-8")).hexdigest()
        random.Random(int(seed, 16)).shuffle(group)
        sample.extend(group[:per_problem])
    return sample


def annotation_queue(
    store: Store,
    annotator_id: str,
    per_problem: int = DEFAULT_PER_PROBLEM,
    source: str | None = None,
) -> list[FeedbackInstance]:
    """Instances the annotator still has to label, at most n per problem."""
    if per_problem < 1:
        raise ValueError("per_problem must be >= 1")
    instances = store.feedback_instances()
    if source is not None:
        instances = [i for i in instances if i.source == source]
    done = {
        a.feedback_id for a in store.annotations() if a.annotator_id == annotator_id
    }
    return [i for i in _stratified_sample(instances, per_problem) if i.id not in done]
