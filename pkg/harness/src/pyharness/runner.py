"""Single-use runner: one JSON job line in, one JSON result line out.

Reads exactly one request from stdin ({"job_id", "program", "input", "mode"}),
evaluates the argument literal, loads the program, calls its entry function f,
canonicalizes the return value, and writes exactly one response line
({"job_id", "status", "output", "error"}) to stdout. Exit code 0 whenever a
response was delivered; nonzero only for runner-internal failure.

Kept standalone on purpose: stdlib only, no package imports, runnable both as
`python runner.py` and via the console script. Wall-time and memory limits are
the parent's responsibility; this process does one job and exits.

The argument literal is evaluated as restricted literal displays only
(strings, numbers, tuples, lists, dicts, sets, booleans, None, numeric
negation). It can never call into the program or reach builtins, so a
malicious "input" is inert. Canonical form is the value's repr with set
elements ordered by their canonical repr; anything hash-order can still leak
into ordered containers, which the parent catches by running twice.
"""

from __future__ import annotations

import ast
import io
import json
import sys

STATUS_OK = "ok"
STATUS_SYNTAX = "syntax_error"
STATUS_RUNTIME = "runtime_error"

_ERROR_EXCERPT = 4096


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
    pass


def parse_call_args(text: str) -> tuple:
    """Comma-separated argument literal -> args tuple; literals only."""
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


def _result(job_id, status, output=None, error="") -> dict:
    return {"job_id": job_id, "status": status, "output": output,
            "error": error[:_ERROR_EXCERPT]}


def handle_job(job: dict) -> dict:
    job_id = job.get("job_id")
    program = job.get("program", "")
    input_text = job.get("input", "")
    mode = job.get("mode", "call")

    if mode == "echo_args":
        try:
            args = parse_call_args(input_text)
        except InputEvalError as exc:
            return _result(job_id, STATUS_RUNTIME, error=f"input-eval: {exc}")
        output = canonical_repr(args[0]) if len(args) == 1 else canonical_repr(args)
        return _result(job_id, STATUS_OK, output=output)
    if mode != "call":
        return _result(job_id, STATUS_RUNTIME, error=f"unknown mode: {mode!r}")

    try:
        code = compile(program, "<task>", "exec")
    except SyntaxError as exc:
        return _result(job_id, STATUS_SYNTAX, error=f"{exc.msg} (line {exc.lineno})")
    except (ValueError, MemoryError) as exc:
        return _result(job_id, STATUS_SYNTAX, error=str(exc))

    try:
        args = parse_call_args(input_text)
    except InputEvalError as exc:
        return _result(job_id, STATUS_RUNTIME, error=f"input-eval: {exc}")

    # Everything a task program writes must stay out of the wire channel.
    real_stdout, real_stderr, real_stdin = sys.stdout, sys.stderr, sys.stdin
    sys.stdout = io.StringIO()
    sys.stderr = io.StringIO()
    sys.stdin = io.StringIO()
    try:
        namespace: dict = {}
        try:
            exec(code, namespace)
        except BaseException as exc:  # noqa: BLE001 - report, never crash
            return _result(job_id, STATUS_RUNTIME,
                           error=f"{type(exc).__name__}: {exc}")
        entry = namespace.get("f")
        if not callable(entry):
            return _result(job_id, STATUS_RUNTIME,
                           error="no callable entry function f")
        try:
            value = entry(*args)
        except BaseException as exc:  # noqa: BLE001
            return _result(job_id, STATUS_RUNTIME,
                           error=f"{type(exc).__name__}: {exc}")
        try:
            output = canonical_repr(value)
        except BaseException as exc:  # noqa: BLE001 - hostile __repr__
            return _result(job_id, STATUS_RUNTIME,
                           error=f"unrepresentable value: {type(exc).__name__}")
        return _result(job_id, STATUS_OK, output=output)
    finally:
        sys.stdout, sys.stderr, sys.stdin = real_stdout, real_stderr, real_stdin


def main() -> int:
    line = sys.stdin.readline()
    if not line.strip():
        return 2
    try:
        job = json.loads(line)
    except json.JSONDecodeError:
        return 2
    if not isinstance(job, dict):
        return 2
    response = handle_job(job)
    sys.stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
