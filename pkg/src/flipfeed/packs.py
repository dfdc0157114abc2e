"""Problem-pack loading, validation, and harness-verified ingest.

A pack is a YAML document:

    pack:
      id: optional-slug          # defaults to "pack"
      problems:
        - id: sum-positive
          title: Sum of positive values
          ordinal: 1
          description: ...
          buggy_programs:
            - id: sum-positive-b1
              buggy_source: |
                ...
              fixed_source: |
                ...
              reference_test:
                input: "10 20 30"
                expected_output: "60"

Ingest is all-or-nothing: every program must compile, the fixed version
must produce the reference expected output, and the buggy version must
diverge from it on the reference input. All failures are reported at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .harness import CompileError, Harness, normalize_output
from .models import BuggyProgram, Problem, ProblemPack, TestCase, validate_slug


class PackFormatError(Exception):
    """The document does not match the pack schema."""


class PackIngestError(Exception):
    """One or more programs failed compile/run verification."""

    def __init__(self, errors: list[str]):
        super().__init__(
            f"pack rejected: {len(errors)} problem(s) found\n" + "\n".join(errors)
        )
        self.errors = list(errors)


@dataclass(frozen=True)
class ParsedPack:
    id: str
    problems: tuple[Problem, ...]
    programs: tuple[BuggyProgram, ...]


def _require(mapping: dict, key: str, kind: type, where: str):
    if not isinstance(mapping, dict):
        raise PackFormatError(f"{where}: expected a mapping")
    if key not in mapping:
        raise PackFormatError(f"{where}: missing required key {key!r}")
    value = mapping[key]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise PackFormatError(f"{where}.{key}: expected an integer")
    elif not isinstance(value, kind):
        raise PackFormatError(f"{where}.{key}: expected {kind.__name__}")
    return value


def parse_pack(data: object) -> ParsedPack:
    """Validate the raw YAML structure and build domain objects."""
    if not isinstance(data, dict) or "pack" not in data:
        raise PackFormatError("top level: expected a mapping with a 'pack' key")
    pack = data["pack"]
    if not isinstance(pack, dict):
        raise PackFormatError("pack: expected a mapping")
    pack_id = pack.get("id", "pack")
    if not isinstance(pack_id, str):
        raise PackFormatError("pack.id: expected a string")
    validate_slug(pack_id, "pack.id")
    raw_problems = _require(pack, "problems", list, "pack")
    if not raw_problems:
        raise PackFormatError("pack.problems: must not be empty")

    problems: list[Problem] = []
    programs: list[BuggyProgram] = []
    for pi, raw in enumerate(raw_problems):
        where = f"pack.problems[{pi}]"
        try:
            problem = Problem(
                id=_require(raw, "id", str, where),
                title=_require(raw, "title", str, where),
                ordinal=_require(raw, "ordinal", int, where),
                description=_require(raw, "description", str, where),
            )
        except ValueError as exc:
            raise PackFormatError(f"{where}: {exc}") from exc
        problems.append(problem)
        raw_programs = _require(raw, "buggy_programs", list, where)
        if not raw_programs:
            raise PackFormatError(f"{where}.buggy_programs: must not be empty")
        for bi, raw_prog in enumerate(raw_programs):
            pwhere = f"{where}.buggy_programs[{bi}]"
            raw_test = _require(raw_prog, "reference_test", dict, pwhere)
            try:
                test = TestCase(
                    input=_require(raw_test, "input", str, f"{pwhere}.reference_test"),
                    expected_output=_require(
                        raw_test, "expected_output", str, f"{pwhere}.reference_test"
                    ),
                )
                program = BuggyProgram(
                    id=_require(raw_prog, "id", str, pwhere),
                    problem_id=problem.id,
                    buggy_source=_require(raw_prog, "buggy_source", str, pwhere),
                    fixed_source=_require(raw_prog, "fixed_source", str, pwhere),
                    reference_test=test,
                )
            except ValueError as exc:
                raise PackFormatError(f"{pwhere}: {exc}") from exc
            programs.append(program)

    _check_unique("problem id", [p.id for p in problems])
    _check_unique("problem ordinal", [p.ordinal for p in problems])
    _check_unique("program id", [p.id for p in programs])
    return ParsedPack(id=pack_id, problems=tuple(problems), programs=tuple(programs))


def _check_unique(label: str, values: list) -> None:
    seen = set()
    for value in values:
        if value in seen:
            raise PackFormatError(f"duplicate {label}: {value!r}")
        seen.add(value)


def load_pack_data(path: str) -> object:
    with open(path, "r", encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def ingest_pack(data: object, harness: Harness) -> ProblemPack:
    """Parse, compile, and behavior-check a pack; reject atomically."""
    parsed = parse_pack(data)
    errors: list[str] = []
    reference_outputs: dict[str, str] = {}
    for program in parsed.programs:
        label = f"program {program.id!r}"
        try:
            buggy_artifact = harness.compile(program.buggy_source)
        except CompileError as exc:
            errors.append(f"{label}: buggy source does not compile: {exc.diagnostics.strip()}")
            continue
        try:
            fixed_artifact = harness.compile(program.fixed_source)
        except CompileError as exc:
            errors.append(f"{label}: fixed source does not compile: {exc.diagnostics.strip()}")
            continue
        test = program.reference_test
        buggy_run = harness.execute(buggy_artifact, test.input)
        fixed_run = harness.execute(fixed_artifact, test.input)
        if buggy_run.timed_out or buggy_run.exit_status != 0:
            errors.append(
                f"{label}: buggy run failed on reference input "
                f"(exit {buggy_run.exit_status}, timed_out={buggy_run.timed_out})"
            )
            continue
        if fixed_run.timed_out or fixed_run.exit_status != 0:
            errors.append(
                f"{label}: fixed run failed on reference input "
                f"(exit {fixed_run.exit_status}, timed_out={fixed_run.timed_out})"
            )
            continue
        expected = normalize_output(test.expected_output)
        actual_fixed = normalize_output(fixed_run.stdout)
        actual_buggy = normalize_output(buggy_run.stdout)
        if actual_fixed != expected:
            errors.append(
                f"{label}: fixed output {actual_fixed!r} does not match "
                f"expected {expected!r} on reference input"
            )
        if actual_buggy == expected:
            errors.append(
                f"{label}: buggy output matches the expected output on the "
                f"reference input; no observable bug"
            )
        reference_outputs[program.id] = actual_buggy
    if errors:
        raise PackIngestError(errors)
    return ProblemPack(
        id=parsed.id,
        problems=parsed.problems,
        programs=parsed.programs,
        reference_buggy_outputs=reference_outputs,
    )


def ingest_pack_file(path: str, harness: Harness) -> ProblemPack:
    return ingest_pack(load_pack_data(path), harness)


def serialize_pack(pack: ProblemPack) -> dict:
    """Inverse of parse: a plain dict matching the pack schema."""
    problems = []
    for problem in pack.ordered_problems():
        programs = [
            {
                "id": prog.id,
                "buggy_source": prog.buggy_source,
                "fixed_source": prog.fixed_source,
                "reference_test": {
                    "input": prog.reference_test.input,
                    "expected_output": prog.reference_test.expected_output,
                },
            }
            for prog in pack.programs_for(problem.id)
        ]
        problems.append(
            {
                "id": problem.id,
                "title": problem.title,
                "ordinal": problem.ordinal,
                "description": problem.description,
                "buggy_programs": programs,
            }
        )
    return {"pack": {"id": pack.id, "problems": problems}}
