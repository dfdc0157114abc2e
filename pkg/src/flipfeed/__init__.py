"""Learnersourcing toolkit for student-written programming feedback.

Students work through buggy C programs (explain the bug with a failing
test case, see the fix, write tutor-style feedback); the collected corpus
is annotated under a rubric, compared across groups, and exported for
model fine-tuning and evaluation.
"""

from .harness import Harness, HarnessConfig, RunResult, normalize_output
from .metrics import (
    AgreementReport,
    aggregate,
    cohens_kappa,
    count_sentences,
    count_words,
    kappa_band,
    multi_attribute_kappa,
)
from .models import (
    AggregateRow,
    BuggyProgram,
    DomainError,
    FeedbackInstance,
    PrefeedbackSubmission,
    Problem,
    ProblemPack,
    RubricAnnotation,
    Session,
    SessionTask,
    TestCase,
)
from .packs import PackFormatError, PackIngestError, ingest_pack, ingest_pack_file
from .pipeline import (
    FineTuneRecord,
    Scenario,
    build_finetune_dataset,
    export_records,
    filter_by_length,
    render_prompt,
)
from .store import Store
from .taskflow import TaskFlow, TaskView

__version__ = "0.1.0"

__all__ = [
    "AggregateRow",
    "AgreementReport",
    "BuggyProgram",
    "DomainError",
    "FeedbackInstance",
    "FineTuneRecord",
    "Harness",
    "HarnessConfig",
    "PackFormatError",
    "PackIngestError",
    "PrefeedbackSubmission",
    "Problem",
    "ProblemPack",
    "RubricAnnotation",
    "RunResult",
    "Scenario",
    "Session",
    "SessionTask",
    "Store",
    "TaskFlow",
    "TaskView",
    "TestCase",
    "aggregate",
    "build_finetune_dataset",
    "cohens_kappa",
    "count_sentences",
    "count_words",
    "export_records",
    "filter_by_length",
    "ingest_pack",
    "ingest_pack_file",
    "kappa_band",
    "multi_attribute_kappa",
    "normalize_output",
    "render_prompt",
    "__version__",
]
