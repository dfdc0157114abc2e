"""Compile-and-run harness for the pack's C programs.

Jobs run on a bounded worker pool; every run gets its own temp workdir,
stdin from a file (closed after the input), a wall-clock timeout, and an
output cap. OS-level sandboxing is pluggable via ``HarnessConfig.sandbox``
and defaults to none: only expert-authored pack code is ever compiled here,
students submit test cases, not programs.
"""

from __future__ import annotations

import hashlib
import os
import shlex
import shutil
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .models import BuggyProgram, PrefeedbackSubmission

COMPILE_TIMEOUT_S = 30.0

REASON_BUGGY_MISMATCH = "buggy_mismatch"
REASON_FIXED_MISMATCH = "fixed_mismatch"
REASON_NO_DIVERGENCE = "no_divergence"
REASON_RUN_ERROR = "run_error"


class CompilerNotFoundError(Exception):
    """The configured compiler binary is missing (configuration error)."""


class CompileError(Exception):
    """The source failed to compile; carries the compiler diagnostics."""

    def __init__(self, message: str, diagnostics: str):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class ExecLimits:
    wall_ms: int = 5000
    max_output_bytes: int = 65536

    def __post_init__(self) -> None:
        if self.wall_ms <= 0 or self.max_output_bytes <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class HarnessConfig:
    # {src} and {out} are substituted with the source and binary paths
    compiler_template: str = "gcc -std=c11 -O1 -Wall {src} -o {out}"
    wall_ms: int = 5000
    max_output_bytes: int = 65536
    workers: int = 0  # 0 = CPU count
    workdir_root: str | None = None
    # wraps the argv of executed programs, e.g. with an isolation launcher
    sandbox: Callable[[list[str]], list[str]] | None = None

    def limits(self) -> ExecLimits:
        return ExecLimits(wall_ms=self.wall_ms, max_output_bytes=self.max_output_bytes)


@dataclass(frozen=True)
class Artifact:
    """Handle to a compiled binary, valid for the harness lifetime."""

    path: str
    source_digest: str


@dataclass(frozen=True)
class RunResult:
    stdout: str
    stderr: str
    exit_status: int
    timed_out: bool
    truncated: bool
    duration_ms: float


@dataclass(frozen=True)
class UnderstandingOutcome:
    understanding: int
    actual_buggy_output: str
    actual_fixed_output: str
    reasons: tuple[str, ...] = field(default=())


def normalize_output(raw: str) -> str:
    """Whitespace-insensitive canonical form of program output.

    Line endings are unified, runs of spaces/tabs collapse to one space,
    per-line leading/trailing whitespace is stripped, and leading/trailing
    blank lines are dropped. Idempotent.
    """
    unified = raw.replace("\r\n", "\n").replace("\r", "\n")
    lines = [" ".join(line.split()) for line in unified.split("\n")]
    start = 0
    end = len(lines)
    while start < end and not lines[start]:
        start += 1
    while end > start and not lines[end - 1]:
        end -= 1
    return "\n".join(lines[start:end])


def _read_capped(path: str, cap: int) -> tuple[str, bool]:
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        data = fh.read(cap)
    return data.decode("utf-8", errors="replace"), size > cap


class Harness:
    """Bounded-concurrency compile/execute service with an artifact cache."""

    def __init__(self, config: HarnessConfig | None = None):
        self.config = config or HarnessConfig()
        workers = self.config.workers or os.cpu_count() or 1
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="harness")
        self._root = tempfile.mkdtemp(prefix="flipfeed-harness-", dir=self.config.workdir_root)
        self._artifacts: dict[str, Artifact] = {}

    def close(self) -> None:
        self._pool.shutdown(wait=True)
        shutil.rmtree(self._root, ignore_errors=True)

    def __enter__(self) -> "Harness":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- compilation ---------------------------------------------------

    def compile(self, source: str) -> Artifact:
        """Compile C source to a binary, reusing cached artifacts by digest."""
        digest = hashlib.sha256(source.encode("utf-8")).hexdigest()
        cached = self._artifacts.get(digest)
        if cached is not None:
            return cached
        artifact = self._pool.submit(self._compile_job, source, digest).result()
        self._artifacts[digest] = artifact
        return artifact

    def _compile_job(self, source: str, digest: str) -> Artifact:
        workdir = os.path.join(self._root, f"build-{digest[:16]}")
        os.makedirs(workdir, exist_ok=True)
        src_path = os.path.join(workdir, "program.c")
        out_path = os.path.join(workdir, "program")
        with open(src_path, "w", encoding="utf-8") as fh:
            fh.write(source)
        argv = [
            part.format(src=src_path, out=out_path)
            for part in shlex.split(self.config.compiler_template)
        ]
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=COMPILE_TIMEOUT_S
            )
        except FileNotFoundError as exc:
            raise CompilerNotFoundError(f"compiler not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise CompileError("compilation timed out", str(exc)) from exc
        if proc.returncode != 0:
            raise CompileError(
                f"compilation failed (exit {proc.returncode})",
                proc.stderr or proc.stdout,
            )
        return Artifact(path=out_path, source_digest=digest)

    # -- execution -----------------------------------------------------

    def execute(self, artifact: Artifact, stdin_input: str,
                limits: ExecLimits | None = None) -> RunResult:
        """Run a compiled binary on the given stdin under resource limits."""
        limits = limits or self.config.limits()
        return self._pool.submit(self._execute_job, artifact, stdin_input, limits).result()

    def _execute_job(self, artifact: Artifact, stdin_input: str, limits: ExecLimits) -> RunResult:
        workdir = tempfile.mkdtemp(prefix="run-", dir=self._root)
        try:
            in_path = os.path.join(workdir, "stdin.txt")
            out_path = os.path.join(workdir, "stdout.txt")
            err_path = os.path.join(workdir, "stderr.txt")
            with open(in_path, "w", encoding="utf-8") as fh:
                fh.write(stdin_input)
            argv = [artifact.path]
            if self.config.sandbox is not None:
                argv = self.config.sandbox(argv)
            timed_out = False
            start = time.monotonic()
            with open(in_path, "rb") as stdin_fh, \
                 open(out_path, "wb") as stdout_fh, \
                 open(err_path, "wb") as stderr_fh:
                proc = subprocess.Popen(
                    argv,
                    stdin=stdin_fh,
                    stdout=stdout_fh,
                    stderr=stderr_fh,
                    cwd=workdir,
                    start_new_session=True,
                )
                try:
                    proc.wait(timeout=limits.wall_ms / 1000.0)
                except subprocess.TimeoutExpired:
                    timed_out = True
                    try:
                        os.killpg(proc.pid, signal.SIGKILL)
                    except ProcessLookupError:
                        pass
                    proc.wait()
            duration_ms = (time.monotonic() - start) * 1000.0
            stdout, out_trunc = _read_capped(out_path, limits.max_output_bytes)
            stderr, err_trunc = _read_capped(err_path, limits.max_output_bytes)
            return RunResult(
                stdout=stdout,
                stderr=stderr,
                exit_status=proc.returncode,
                timed_out=timed_out,
                truncated=out_trunc or err_trunc,
                duration_ms=duration_ms,
            )
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    # -- understanding classification -----------------------------------

    def validate_prefeedback(self, buggy: BuggyProgram,
                             submission: PrefeedbackSubmission) -> UnderstandingOutcome:
        """Check a claimed failing test case against both program versions.

        Understanding = 1 iff, after normalization, the claimed buggy output
        matches the real buggy run, the claimed correct output matches the
        real fixed run, and the two real runs actually diverge. Timeouts or
        signal deaths of either binary classify as run_error.
        """
        buggy_artifact = self.compile(buggy.buggy_source)
        fixed_artifact = self.compile(buggy.fixed_source)
        buggy_run = self.execute(buggy_artifact, submission.input)
        fixed_run = self.execute(fixed_artifact, submission.input)

        actual_buggy = normalize_output(buggy_run.stdout)
        actual_fixed = normalize_output(fixed_run.stdout)
        reasons: list[str] = []
        if _run_failed(buggy_run) or _run_failed(fixed_run):
            reasons.append(REASON_RUN_ERROR)
        if actual_buggy != normalize_output(submission.claimed_buggy_output):
            reasons.append(REASON_BUGGY_MISMATCH)
        if actual_fixed != normalize_output(submission.claimed_correct_output):
            reasons.append(REASON_FIXED_MISMATCH)
        if actual_buggy == actual_fixed:
            reasons.append(REASON_NO_DIVERGENCE)
        return UnderstandingOutcome(
            understanding=1 if not reasons else 0,
            actual_buggy_output=actual_buggy,
            actual_fixed_output=actual_fixed,
            reasons=tuple(reasons),
        )


def _run_failed(result: RunResult) -> bool:
    return result.timed_out or result.exit_status < 0
