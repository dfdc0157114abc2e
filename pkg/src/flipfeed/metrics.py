"""Automated rubric metrics, inter-rater agreement, and aggregation.

Everything in this module is a pure function over values; annotation
persistence lives in :mod:`flipfeed.annotations`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .models import AggregateRow, FeedbackInstance, RubricAnnotation

SENTENCE_TERMINATORS = frozenset(".!?\n")

# Fixed attribute order used when pooling the rubric into one label sequence.
RUBRIC_ATTRIBUTES = ("correct", "gives_fix", "mentions_variables", "mentions_lines")

KAPPA_BANDS = (
    (0.00, "slight"),
    (0.21, "fair"),
    (0.41, "moderate"),
    (0.61, "substantial"),
    (0.81, "almost perfect"),
)


def count_words(text: str) -> int:
    """Number of whitespace-separated words (maximal non-whitespace runs)."""
    return len(text.split())


def count_sentences(text: str) -> int:
    """Number of sentences, split on end-of-sentence punctuation or newlines.

    A maximal run of ``. ! ?`` or newline characters is one boundary;
    segments without any word do not count as sentences.
    """
    count = 0
    segment_has_word = False
    in_terminator_run = False
    for ch in text:
        if ch in SENTENCE_TERMINATORS:
            if not in_terminator_run and segment_has_word:
                count += 1
            in_terminator_run = True
            segment_has_word = False
        else:
            in_terminator_run = False
            if not ch.isspace():
                segment_has_word = True
    if segment_has_word:
        count += 1
    return count


def kappa_band(kappa: float) -> str:
    """Qualitative agreement band for a kappa value."""
    if kappa < 0:
        return "poor"
    band = KAPPA_BANDS[0][1]
    for threshold, name in KAPPA_BANDS:
        if kappa >= threshold:
            band = name
    return band


@dataclass(frozen=True)
class AgreementReport:
    """Cohen's kappa between two annotators, with its ingredients."""

    attributes: tuple[str, ...]
    n_items: int
    observed_agreement: float
    chance_agreement: float
    kappa: float
    band: str
    per_attribute: dict[str, "AgreementReport"] | None = None


def cohens_kappa(labels_a: Sequence[int], labels_b: Sequence[int],
                 attributes: tuple[str, ...] = ("pooled",)) -> AgreementReport:
    """Chance-corrected agreement between two binary label sequences.

    kappa = (p_o - p_e) / (1 - p_e), with kappa = 1 when both annotators
    agree perfectly and chance agreement is also perfect.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError(f"label sequences differ in length: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise ValueError("cannot compute agreement on empty label sequences")
    agree = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    p_o = agree / n
    freq_a = Counter(labels_a)
    freq_b = Counter(labels_b)
    p_e = sum((freq_a[c] / n) * (freq_b[c] / n) for c in (0, 1))
    if p_e >= 1.0:
        # only possible when both sequences are the same constant
        kappa = 1.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementReport(
        attributes=attributes,
        n_items=n,
        observed_agreement=p_o,
        chance_agreement=p_e,
        kappa=kappa,
        band=kappa_band(kappa),
    )


def multi_attribute_kappa(
    annotations_a: Iterable[RubricAnnotation],
    annotations_b: Iterable[RubricAnnotation],
) -> AgreementReport:
    """Pooled kappa over all four rubric attributes, plus per-attribute kappas.

    Both annotators must cover exactly the same item set. Labels are pooled
    item-major in the fixed attribute order.
    """
    by_item_a = {ann.feedback_id: ann for ann in annotations_a}
    by_item_b = {ann.feedback_id: ann for ann in annotations_b}
    if set(by_item_a) != set(by_item_b):
        diff = sorted(set(by_item_a) ^ set(by_item_b))
        raise ValueError(f"annotator item sets differ; symmetric difference: {diff}")
    items = sorted(by_item_a)
    pooled_a: list[int] = []
    pooled_b: list[int] = []
    for item in items:
        for attr in RUBRIC_ATTRIBUTES:
            pooled_a.append(getattr(by_item_a[item], attr))
            pooled_b.append(getattr(by_item_b[item], attr))
    pooled = cohens_kappa(pooled_a, pooled_b, attributes=RUBRIC_ATTRIBUTES)
    per_attribute = {}
    for attr in RUBRIC_ATTRIBUTES:
        seq_a = [getattr(by_item_a[item], attr) for item in items]
        seq_b = [getattr(by_item_b[item], attr) for item in items]
        per_attribute[attr] = cohens_kappa(seq_a, seq_b, attributes=(attr,))
    return AgreementReport(
        attributes=pooled.attributes,
        n_items=len(items),
        observed_agreement=pooled.observed_agreement,
        chance_agreement=pooled.chance_agreement,
        kappa=pooled.kappa,
        band=pooled.band,
        per_attribute=per_attribute,
    )


def _mean(values: list[float]) -> float | None:
    if not values:
        return None
    return sum(values) / len(values)


def _row(label: str, annotations: list[RubricAnnotation], tier: int) -> AggregateRow:
    n = len(annotations)

    def pct(attr: str) -> float | None:
        if n == 0:
            return None
        return 100.0 * sum(getattr(a, attr) for a in annotations) / n

    return AggregateRow(
        label=label,
        sample_size=n,
        correct_pct=pct("correct"),
        mean_words=_mean([float(a.num_words) for a in annotations]),
        mean_sentences=_mean([float(a.num_sentences) for a in annotations]),
        gives_fix_pct=pct("gives_fix"),
        mentions_variables_pct=pct("mentions_variables"),
        mentions_lines_pct=pct("mentions_lines"),
        tier=tier,
    )


def _matching(
    instances: dict[str, FeedbackInstance],
    annotations: Iterable[RubricAnnotation],
    problem_id: str | None,
    understanding: int | None,
    source: str | None = None,
    strategy: str | None = None,
    model_name: str | None = None,
) -> list[RubricAnnotation]:
    out = []
    for ann in annotations:
        inst = instances.get(ann.feedback_id)
        if inst is None:
            raise ValueError(f"annotation references unknown feedback instance {ann.feedback_id!r}")
        if problem_id is not None and inst.problem_id != problem_id:
            continue
        # understanding filters apply only to student instances
        if understanding is not None and (inst.source != "student" or inst.understanding != understanding):
            continue
        if source is not None and inst.source != source:
            continue
        if strategy is not None and inst.strategy != strategy:
            continue
        if model_name is not None and inst.model_name != model_name:
            continue
        out.append(ann)
    return out


def aggregate_by_problem_understanding(
    instances: Iterable[FeedbackInstance],
    annotations: Iterable[RubricAnnotation],
    with_understanding: bool = True,
) -> list[AggregateRow]:
    """Student-corpus summary broken down by problem and understanding flag.

    Each annotation counts as one observation, so doubly annotated instances
    contribute twice. Rows come in hierarchy tiers: the all-data row first,
    then per-problem rows, then understanding splits, then the full grid.
    """
    inst_map = {i.id: i for i in instances}
    anns = []
    for a in annotations:
        inst = inst_map.get(a.feedback_id)
        if inst is None:
            raise ValueError(f"annotation references unknown feedback instance {a.feedback_id!r}")
        if inst.source == "student":
            anns.append(a)
    problem_ids = sorted({inst_map[a.feedback_id].problem_id for a in anns})
    rows = [_row("All problems:Understanding=Any", anns, tier=0)]
    for pid in problem_ids:
        rows.append(_row(
            f"Problem {pid}:Understanding=Any",
            _matching(inst_map, anns, pid, None), tier=1,
        ))
    if with_understanding:
        for flag in (1, 0):
            rows.append(_row(
                f"All problems:Understanding={flag}",
                _matching(inst_map, anns, None, flag), tier=2,
            ))
        for pid in problem_ids:
            for flag in (1, 0):
                rows.append(_row(
                    f"Problem {pid}:Understanding={flag}",
                    _matching(inst_map, anns, pid, flag), tier=3,
                ))
    return rows


def aggregate_by_source(
    instances: Iterable[FeedbackInstance],
    annotations: Iterable[RubricAnnotation],
) -> list[AggregateRow]:
    """Summary comparing the student corpus against each model/strategy cell."""
    inst_map = {i.id: i for i in instances}
    anns = list(annotations)
    rows = [_row("Human students", _matching(inst_map, anns, None, None, source="student"), tier=0)]
    model_cells = set()
    for a in anns:
        inst = inst_map.get(a.feedback_id)
        if inst is None:
            raise ValueError(f"annotation references unknown feedback instance {a.feedback_id!r}")
        if inst.source == "model":
            model_cells.add((inst.model_name, inst.strategy))
    cells = sorted(model_cells)
    for model_name, strategy in cells:
        rows.append(_row(
            f"{model_name}:{strategy}",
            _matching(inst_map, anns, None, None, source="model",
                      strategy=strategy, model_name=model_name),
            tier=1,
        ))
    return rows


def aggregate(
    instances: Iterable[FeedbackInstance],
    annotations: Iterable[RubricAnnotation],
    group_by: str,
) -> list[AggregateRow]:
    """Dispatch on the grouping spec: "problem", "problem,understanding" or "source"."""
    keys = {k.strip() for k in group_by.split(",") if k.strip()}
    if keys == {"problem", "understanding"}:
        return aggregate_by_problem_understanding(instances, annotations)
    if keys == {"problem"}:
        return aggregate_by_problem_understanding(instances, annotations, with_understanding=False)
    if keys == {"source"}:
        return aggregate_by_source(instances, annotations)
    raise ValueError(f"unsupported group_by {group_by!r}; use problem[,understanding] or source")
