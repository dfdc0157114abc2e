"""Deterministic demo data: fixture pack plus a small synthetic corpus.

The corpus has 10 student feedback instances with word counts
{1, 4, 5, 50, 100, 150, 200, 201, 250, 295}, so exactly 5 survive the
default 5-200 word export filter. Two annotators label every instance
with fixed flags, making kappa and report output reproducible.
"""

from __future__ import annotations

from importlib import resources
from typing import Any

import yaml

from .annotations import record_annotation
from .harness import Harness
from .models import FeedbackInstance, ProblemPack
from .packs import ingest_pack
from .store import Store

DEMO_WORD_COUNTS = (1, 4, 5, 50, 100, 150, 200, 201, 250, 295)

_VOCAB = (
    "the", "loop", "adds", "index", "values", "sum",
    "check", "bounds", "fix", "condition",
)

# (correct, gives_fix, mentions_variables, mentions_lines) per instance
_FLAGS_A = (
    (1, 1, 1, 0), (0, 0, 1, 0), (1, 1, 0, 1), (1, 0, 1, 1), (0, 1, 0, 0),
    (1, 1, 1, 1), (0, 0, 0, 0), (1, 0, 0, 1), (1, 1, 1, 0), (0, 1, 1, 0),
)


def default_pack_data() -> dict[str, Any]:
    ref = resources.files("flipfeed") / "data" / "default_pack.yaml"
    return yaml.safe_load(ref.read_text(encoding="utf-8"))


def load_default_pack(harness: Harness) -> ProblemPack:
    return ingest_pack(default_pack_data(), harness)


def make_text(n_words: int) -> str:
    """Deterministic prose with exactly n_words whitespace-separated words."""
    parts = []
    for i in range(1, n_words + 1):
        word = _VOCAB[(i - 1) % len(_VOCAB)]
        if i % 10 == 0 or i == n_words:
            word += "."
        parts.append(word)
    return " ".join(parts)


def seed_demo(store: Store, harness: Harness) -> dict[str, Any]:
    """Load the fixture pack and write the synthetic corpus + annotations."""
    pack = store.active_pack()
    if pack is None:
        pack = load_default_pack(harness)
        store.put_pack(pack)
    problems = pack.ordered_problems()
    instances = []
    for index, n_words in enumerate(DEMO_WORD_COUNTS):
        problem = problems[index % len(problems)]
        programs = sorted(pack.programs_for(problem.id), key=lambda p: p.id)
        program = programs[index % len(programs)]
        instance = FeedbackInstance(
            id=f"demo-f-{index + 1:02d}",
            problem_id=problem.id,
            buggy_program_id=program.id,
            source="student",
            text=make_text(n_words),
            session_id=f"s-demo-{index + 1:02d}",
            understanding=(index + 1) % 2,
        )
        store.put_feedback(instance)
        instances.append(instance)
    annotation_count = 0
    for index, instance in enumerate(instances):
        flags_a = _FLAGS_A[index]
        # annotator B disagrees on one attribute for every third instance
        flags_b = list(flags_a)
        if index % 3 == 2:
            flags_b[index % 4] = 1 - flags_b[index % 4]
        for annotator, flags in (("expert-a", flags_a), ("expert-b", tuple(flags_b))):
            record_annotation(
                store,
                instance.id,
                annotator,
                {
                    "correct": flags[0],
                    "gives_fix": flags[1],
                    "mentions_variables": flags[2],
                    "mentions_lines": flags[3],
                },
            )
            annotation_count += 1
    return {
        "pack_id": pack.id,
        "problems": len(pack.problems),
        "programs": len(pack.programs),
        "instances": len(instances),
        "annotations": annotation_count,
    }
