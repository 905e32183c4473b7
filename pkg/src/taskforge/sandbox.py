"""Controller for executing untrusted synthesized programs.

The supervisor owns static guards, resource limits, and the determinism
double-run. Actual execution is delegated to an executor: HarnessExecutor
spawns one single-use runner process per job and speaks the line-JSON wire
protocol; InProcessExecutor satisfies the same contract in-process for
deterministic test pipelines (no resource enforcement, trusted fixtures only).
"""

from __future__ import annotations

import ast
import json
import os
import re
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Protocol

DEFAULT_DENY_MODULES = (
    "random", "secrets", "datetime", "time", "os", "sys", "socket",
    "subprocess", "threading", "multiprocessing",
)
IO_CALLABLES = ("open", "print", "input")


class ExecStatus(str, Enum):
    OK = "ok"
    SYNTAX_ERROR = "syntax_error"
    RUNTIME_ERROR = "runtime_error"
    TIMEOUT = "timeout"
    NONDETERMINISTIC = "nondeterministic"
    GUARD_VIOLATION = "guard_violation"
    PROTOCOL_ERROR = "protocol_error"


@dataclass(frozen=True)
class ExecLimits:
    wall_time: float = 10.0
    memory: int = 512 * 1024 * 1024
    output_cap: int = 64 * 1024

    def __post_init__(self):
        if self.wall_time <= 0 or self.memory <= 0 or self.output_cap <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class ExecJob:
    program: str
    input: str
    job_id: str = "job"
    mode: str = "call"  # "call" | "echo_args"


@dataclass(frozen=True)
class ExecResult:
    status: ExecStatus
    output: Optional[str] = None
    diagnostic: str = ""
    duration: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is ExecStatus.OK

    def to_dict(self) -> dict:
        return {"status": self.status.value, "output": self.output,
                "diagnostic": self.diagnostic, "duration": self.duration}

    @classmethod
    def from_dict(cls, data: dict) -> "ExecResult":
        return cls(ExecStatus(data["status"]), data.get("output"),
                   data.get("diagnostic", ""), data.get("duration", 0.0))


# --- canonical value form -----------------------------------------------------
# Mirrors the runner's canonicalization exactly: repr-form with set elements
# ordered by their canonical repr, so set-valued returns stay deterministic.

def canonical_repr(value) -> str:
    if isinstance(value, tuple):
        inner = ", ".join(canonical_repr(v) for v in value)
        return f"({inner},)" if len(value) == 1 else f"({inner})"
    if isinstance(value, list):
        return "[" + ", ".join(canonical_repr(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{canonical_repr(k)}: {canonical_repr(v)}"
                          for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, frozenset):
        if not value:
            return "frozenset()"
        return "frozenset({" + ", ".join(sorted(canonical_repr(v) for v in value)) + "})"
    if isinstance(value, set):
        if not value:
            return "set()"
        return "{" + ", ".join(sorted(canonical_repr(v) for v in value)) + "}"
    return repr(value)


class InputEvalError(Exception):
    """The argument literal could not be evaluated as restricted literals."""


def parse_call_args(text: str) -> tuple:
    """Evaluate a comma-separated argument literal into an args tuple.

    Restricted to literal displays (strings, numbers, tuples, lists, dicts,
    sets, booleans, None) plus numeric negation; names, calls, and any other
    expression are rejected so input text can never execute code.
    """
    if not text.strip():
        raise InputEvalError("empty input")
    try:
        tree = ast.parse(f"__args__({text}\n)", mode="eval")
    except SyntaxError as exc:
        raise InputEvalError(f"unparseable input: {exc.msg}") from exc
    call = tree.body
    if (not isinstance(call, ast.Call) or call.keywords
            or not isinstance(call.func, ast.Name) or call.func.id != "__args__"):
        raise InputEvalError("input must be positional literal arguments")
    args = []
    for node in call.args:
        if isinstance(node, ast.Starred):
            raise InputEvalError("starred arguments not allowed")
        try:
            args.append(ast.literal_eval(node))
        except (ValueError, TypeError, SyntaxError, MemoryError) as exc:
            raise InputEvalError(f"not a literal: {exc}") from exc
    if not args:
        raise InputEvalError("no arguments")
    return tuple(args)


def echo_canonical(text: str) -> str:
    """Canonical form of an argument literal; used to normalize answers."""
    args = parse_call_args(text)
    return canonical_repr(args[0]) if len(args) == 1 else canonical_repr(args)


# --- static guard -------------------------------------------------------------

_IMPORT_RE = re.compile(r"^\s*(?:import|from)\s+([A-Za-z_][\w.]*)", re.MULTILINE)


def _imported_roots(program: str) -> set[str]:
    roots: set[str] = set()
    try:
        tree = ast.parse(program)
    except SyntaxError:
        for m in _IMPORT_RE.finditer(program):
            roots.add(m.group(1).split(".")[0])
        return roots
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                roots.add(alias.name.split(".")[0])
        elif isinstance(node, ast.ImportFrom) and node.module:
            roots.add(node.module.split(".")[0])
    return roots


def _io_calls(program: str) -> set[str]:
    found: set[str] = set()
    try:
        tree = ast.parse(program)
    except SyntaxError:
        for name in IO_CALLABLES:
            if re.search(rf"\b{name}\s*\(", program):
                found.add(name)
        return found
    for node in ast.walk(tree):
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            if node.func.id in IO_CALLABLES:
                found.add(node.func.id)
    return found


def static_guard(program: str, banned_keywords: tuple[str, ...] = (),
                 deny_modules: tuple[str, ...] = DEFAULT_DENY_MODULES) -> list[str]:
    """Report banned keywords (anywhere, comments included), forbidden imports,
    and file/console I/O calls. Violations are data, not exceptions."""
    violations: list[str] = []
    lowered = program.lower()
    for word in banned_keywords:
        if word and word.lower() in lowered:
            violations.append(f"banned keyword: {word}")
    for root in sorted(_imported_roots(program)):
        if root in deny_modules:
            violations.append(f"forbidden module: {root}")
    for name in sorted(_io_calls(program)):
        violations.append(f"forbidden call: {name}")
    return violations


# --- executors ----------------------------------------------------------------

class Executor(Protocol):
    def run(self, job: ExecJob, limits: ExecLimits) -> ExecResult: ...


class InProcessExecutor:
    """Executes jobs in this interpreter; contract-compatible test stub.

    No wall-time or memory enforcement: only for trusted fixture programs.
    """

    def run(self, job: ExecJob, limits: ExecLimits) -> ExecResult:
        start = time.perf_counter()
        if job.mode == "echo_args":
            try:
                output = echo_canonical(job.input)
            except InputEvalError as exc:
                return ExecResult(ExecStatus.RUNTIME_ERROR,
                                  diagnostic=f"input-eval: {exc}",
                                  duration=time.perf_counter() - start)
            return ExecResult(ExecStatus.OK, output=output,
                              duration=time.perf_counter() - start)
        try:
            code = compile(job.program, "<task>", "exec")
        except SyntaxError as exc:
            return ExecResult(ExecStatus.SYNTAX_ERROR, diagnostic=str(exc),
                              duration=time.perf_counter() - start)
        namespace: dict = {}
        try:
            exec(code, namespace)  # noqa: S102 - trusted fixture programs only
        except BaseException as exc:
            return ExecResult(ExecStatus.RUNTIME_ERROR,
                              diagnostic=f"{type(exc).__name__}: {exc}",
                              duration=time.perf_counter() - start)
        entry = namespace.get("f")
        if not callable(entry):
            return ExecResult(ExecStatus.RUNTIME_ERROR,
                              diagnostic="no callable entry function f",
                              duration=time.perf_counter() - start)
        try:
            args = parse_call_args(job.input)
        except InputEvalError as exc:
            return ExecResult(ExecStatus.RUNTIME_ERROR,
                              diagnostic=f"input-eval: {exc}",
                              duration=time.perf_counter() - start)
        try:
            value = entry(*args)
        except BaseException as exc:
            return ExecResult(ExecStatus.RUNTIME_ERROR,
                              diagnostic=f"{type(exc).__name__}: {exc}",
                              duration=time.perf_counter() - start)
        output = canonical_repr(value)
        duration = time.perf_counter() - start
        if len(output.encode("utf-8")) > limits.output_cap:
            return ExecResult(ExecStatus.RUNTIME_ERROR,
                              diagnostic="output exceeds cap", duration=duration)
        return ExecResult(ExecStatus.OK, output=output, duration=duration)


def _posix_rlimit_hook(memory: int):
    def hook():
        try:
            import resource

            resource.setrlimit(resource.RLIMIT_AS, (memory, memory))
        except Exception:
            pass  # platform without RLIMIT_AS; wall-time still applies
    return hook


class HarnessExecutor:
    """Spawns one single-use runner process per job over the wire protocol.

    One JSON request line goes to the child's stdin; one JSON response line
    comes back on stdout. The child is killed at the wall-time limit.
    PYTHONHASHSEED stays randomized so hash-order leaks surface as
    nondeterminism in the double run.
    """

    def __init__(self, command: list[str], env: Optional[dict] = None):
        self.command = list(command)
        base = dict(env) if env is not None else dict(os.environ)
        base["PYTHONHASHSEED"] = "random"
        self.env = base

    def run(self, job: ExecJob, limits: ExecLimits) -> ExecResult:
        request_line = json.dumps({
            "job_id": job.job_id, "program": job.program,
            "input": job.input, "mode": job.mode,
        }) + "\n"
        start = time.perf_counter()
        try:
            proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.PIPE, text=True, env=self.env,
                preexec_fn=_posix_rlimit_hook(limits.memory) if sys.platform != "win32" else None,
            )
        except OSError as exc:
            return ExecResult(ExecStatus.PROTOCOL_ERROR,
                              diagnostic=f"spawn failed: {exc}")
        try:
            stdout, stderr = proc.communicate(request_line, timeout=limits.wall_time)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            return ExecResult(ExecStatus.TIMEOUT,
                              diagnostic=f"killed at {limits.wall_time}s wall time",
                              duration=time.perf_counter() - start)
        duration = time.perf_counter() - start
        lines = [ln for ln in stdout.splitlines() if ln.strip()]
        if not lines:
            detail = stderr.strip()[: limits.output_cap]
            return ExecResult(ExecStatus.PROTOCOL_ERROR,
                              diagnostic=f"no result line (exit {proc.returncode}): {detail}",
                              duration=duration)
        try:
            payload = json.loads(lines[-1])
            status = ExecStatus(payload["status"])
            if payload.get("job_id") != job.job_id:
                raise ValueError("job_id mismatch")
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            return ExecResult(ExecStatus.PROTOCOL_ERROR,
                              diagnostic=f"unparseable result line: {exc}",
                              duration=duration)
        output = payload.get("output")
        error = (payload.get("error") or "")[: limits.output_cap]
        if status is ExecStatus.OK:
            if output is None:
                return ExecResult(ExecStatus.PROTOCOL_ERROR,
                                  diagnostic="ok result without output",
                                  duration=duration)
            if len(output.encode("utf-8")) > limits.output_cap:
                return ExecResult(ExecStatus.RUNTIME_ERROR,
                                  diagnostic="output exceeds cap", duration=duration)
            return ExecResult(ExecStatus.OK, output=output, duration=duration)
        return ExecResult(status, diagnostic=error, duration=duration)


class SandboxSupervisor:
    """Guards, executes, and determinism-checks task programs."""

    def __init__(self, executor: Executor, limits: ExecLimits = ExecLimits(),
                 banned_keywords: tuple[str, ...] = (),
                 deny_modules: tuple[str, ...] = DEFAULT_DENY_MODULES,
                 pool_size: int = 4):
        self.executor = executor
        self.limits = limits
        self.banned_keywords = tuple(banned_keywords)
        self.deny_modules = tuple(deny_modules)
        self._slots = threading.BoundedSemaphore(pool_size)
        self._job_counter = 0
        self._counter_lock = threading.Lock()

    def _next_job_id(self) -> str:
        with self._counter_lock:
            self._job_counter += 1
            return f"job-{self._job_counter}"

    def guard(self, program: str) -> list[str]:
        return static_guard(program, self.banned_keywords, self.deny_modules)

    def execute(self, program: str, input_text: str, mode: str = "call") -> ExecResult:
        job = ExecJob(program=program, input=input_text,
                      job_id=self._next_job_id(), mode=mode)
        with self._slots:
            return self.executor.run(job, self.limits)

    def execute_checked(self, program: str, input_text: str) -> ExecResult:
        """Run twice in fresh contexts; equal ok outputs or a failure verdict."""
        first = self.execute(program, input_text)
        if not first.ok:
            return first
        second = self.execute(program, input_text)
        if not second.ok:
            return second
        if first.output != second.output:
            return ExecResult(
                ExecStatus.NONDETERMINISTIC,
                diagnostic=(f"outputs differ across runs: "
                            f"{first.output[:200]!r} vs {second.output[:200]!r}"),
                duration=first.duration + second.duration)
        return first

    def echo(self, literal_text: str) -> ExecResult:
        """Canonicalize a value literal through the executor's echo mode."""
        return self.execute("", literal_text, mode="echo_args")
