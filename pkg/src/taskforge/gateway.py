"""Prompt rendering and transport for the proposer, solver, and judge endpoints.

Templates ship as text assets with {curly} placeholders; each template declares
its binding set below and render() substitutes exactly those names, so literal
braces elsewhere in a prompt (JSON schemas, example dicts) pass through intact.

Transports are pluggable: a live chat-completion endpoint, a directory-backed
fixture for deterministic replay, or any callable for scripted tests.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

ROLE_PROPOSER = "proposer"
ROLE_SOLVER = "solver"
ROLE_JUDGE = "judge"
ROLES = (ROLE_PROPOSER, ROLE_SOLVER, ROLE_JUDGE)

TEMPLATE_BINDINGS: dict[str, frozenset[str]] = {
    "skill_attribute": frozenset({"problem", "code_solution"}),
    "cluster_skill": frozenset({"skill_list"}),
    "cluster_attribute": frozenset({"attribute_list"}),
    "skill_reflection": frozenset({"skill_list", "code_snippet"}),
    "abduction_seed": frozenset({"failure_info", "skill_str", "banned_keywords",
                                 "remove_input_from_snippet_prompt",
                                 "remove_after_return_prompt"}),
    "abduction_mutation": frozenset({"code", "input", "skill", "complexity_attributes"}),
    "abduction_crossover": frozenset({"skill_pool", "target_skill",
                                      "existing_combinations", "banned_keywords",
                                      "remove_input_from_snippet_prompt",
                                      "remove_after_return_prompt"}),
    "abduction_predictor": frozenset({"snippet", "output"}),
    "deduction_seed": frozenset({"failure_info", "skill_str", "banned_keywords",
                                 "remove_input_from_snippet_prompt",
                                 "remove_after_return_prompt"}),
    "deduction_mutation": frozenset({"code", "input", "skill", "complexity_attributes",
                                     "remove_input_from_snippet_prompt",
                                     "remove_after_return_prompt"}),
    "deduction_crossover": frozenset({"skill_pool", "target_skill",
                                      "existing_combinations", "banned_keywords",
                                      "remove_input_from_snippet_prompt",
                                      "remove_after_return_prompt"}),
    "deduction_predictor": frozenset({"snippet", "input_args"}),
    "induction_task": frozenset({"num_inputs", "code"}),
    "induction_hint": frozenset({"problem", "code"}),
    "induction_predictor": frozenset({"input_output_pairs", "problem"}),
    "judge_synergy": frozenset({"task", "skills", "skill_descriptions"}),
    "judge_solver_alignment": frozenset({"code", "skills", "skill_descriptions"}),
}

TEMPLATE_IDS = tuple(TEMPLATE_BINDINGS)


class GatewayError(Exception):
    """Base class for gateway failures."""


class UnboundPlaceholder(GatewayError):
    def __init__(self, template_id: str, name: str):
        super().__init__(f"template {template_id!r} missing binding {name!r}")
        self.template_id = template_id
        self.name = name


class TransportExhausted(GatewayError):
    """All retries for a transient transport failure were consumed."""


class EndpointRejected(GatewayError):
    """The endpoint returned a non-retryable failure."""


class TransientTransportError(Exception):
    """Raised by transports for failures worth retrying."""


class FatalTransportError(Exception):
    """Raised by transports for failures that must not be retried."""


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    top_p: float = 0.99
    n_samples: int = 1
    max_output_tokens: int = 8096

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class ChatRequest:
    template_id: str
    bindings: dict
    sampling: SamplingParams = SamplingParams()
    role: str = ROLE_PROPOSER
    stage: Optional[str] = None

    def stage_label(self) -> str:
        return self.stage or self.template_id


@dataclass(frozen=True)
class ChatResponse:
    texts: tuple[str, ...]
    prompt_tokens: int = 0
    completion_tokens: int = 0


def load_templates(directory: Optional[Path] = None) -> dict[str, str]:
    """Load the template catalog from a directory (default: packaged assets)."""
    templates: dict[str, str] = {}
    if directory is None:
        root = resources.files("taskforge") / "templates"
        for template_id in TEMPLATE_BINDINGS:
            templates[template_id] = (root / f"{template_id}.txt").read_text(encoding="utf-8")
    else:
        for template_id in TEMPLATE_BINDINGS:
            path = Path(directory) / f"{template_id}.txt"
            if not path.exists():
                raise GatewayError(f"template file missing: {path}")
            templates[template_id] = path.read_text(encoding="utf-8")
    return templates


def render(templates: dict[str, str], template_id: str, bindings: dict) -> str:
    """Substitute every declared placeholder; byte-exact otherwise."""
    if template_id not in TEMPLATE_BINDINGS:
        raise GatewayError(f"unknown template {template_id!r}")
    body = templates[template_id]
    declared = TEMPLATE_BINDINGS[template_id]
    for name in sorted(declared):
        if name not in bindings:
            raise UnboundPlaceholder(template_id, name)
    pattern = re.compile("|".join(r"\{" + re.escape(n) + r"\}" for n in sorted(declared)))
    rendered = pattern.sub(lambda m: str(bindings[m.group(0)[1:-1]]), body)
    return rendered


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


# --- usage accounting --------------------------------------------------------

@dataclass
class UsageEntry:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost: float = 0.0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass
class UsageReport:
    by_role: dict[str, UsageEntry] = field(default_factory=dict)
    by_stage: dict[tuple[str, str], UsageEntry] = field(default_factory=dict)
    total: UsageEntry = field(default_factory=UsageEntry)

    def to_dict(self) -> dict:
        return {
            "total": vars(self.total).copy(),
            "by_role": {r: vars(e).copy() for r, e in sorted(self.by_role.items())},
            "by_stage": {f"{r}/{s}": vars(e).copy()
                         for (r, s), e in sorted(self.by_stage.items())},
        }


class UsageLedger:
    """Cumulative token/cost accounting per role and pipeline stage."""

    def __init__(self, prices_per_1k: Optional[dict[str, float]] = None):
        self._lock = threading.Lock()
        self._entries: dict[tuple[str, str], UsageEntry] = {}
        self._prices = prices_per_1k or {}

    def record(self, role: str, stage: str, prompt_tokens: int,
               completion_tokens: int) -> None:
        if prompt_tokens < 0 or completion_tokens < 0:
            raise ValueError("token counts must be non-negative")
        price = self._prices.get(role, 0.0)
        cost = (prompt_tokens + completion_tokens) / 1000.0 * price
        with self._lock:
            entry = self._entries.setdefault((role, stage), UsageEntry())
            entry.calls += 1
            entry.prompt_tokens += prompt_tokens
            entry.completion_tokens += completion_tokens
            entry.cost += cost

    def snapshot(self) -> UsageReport:
        report = UsageReport()
        with self._lock:
            items = [(k, UsageEntry(**vars(v))) for k, v in self._entries.items()]
        for (role, stage), entry in items:
            report.by_stage[(role, stage)] = entry
            role_entry = report.by_role.setdefault(role, UsageEntry())
            for attr in ("calls", "prompt_tokens", "completion_tokens", "cost"):
                setattr(role_entry, attr, getattr(role_entry, attr) + getattr(entry, attr))
                setattr(report.total, attr, getattr(report.total, attr) + getattr(entry, attr))
        return report


class RateLimiter:
    """Token bucket; qps=None disables limiting."""

    def __init__(self, qps: Optional[float] = None, clock=time.monotonic,
                 sleep=time.sleep):
        self.qps = qps
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self) -> None:
        if not self.qps:
            return
        interval = 1.0 / self.qps
        with self._lock:
            now = self._clock()
            wait = max(0.0, self._next_free - now)
            self._next_free = max(now, self._next_free) + interval
        if wait > 0:
            self._sleep(wait)


# --- transports ---------------------------------------------------------------

class ScriptedTransport:
    """Wraps a callable (request, prompt, sample_index) -> text; zero usage."""

    def __init__(self, fn: Callable[[ChatRequest, str, int], str]):
        self._fn = fn

    def send(self, prompt: str, request: ChatRequest) -> ChatResponse:
        texts = tuple(self._fn(request, prompt, i)
                      for i in range(request.sampling.n_samples))
        return ChatResponse(texts, 0, 0)


class FixtureTransport:
    """Replays completions recorded under <dir>/<template_id>/<hash>.<i>.txt."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    def path_for(self, request: ChatRequest, prompt: str, index: int) -> Path:
        return self.directory / request.template_id / f"{prompt_hash(prompt)}.{index}.txt"

    def send(self, prompt: str, request: ChatRequest) -> ChatResponse:
        texts = []
        for i in range(request.sampling.n_samples):
            path = self.path_for(request, prompt, i)
            if not path.exists():
                raise FatalTransportError(f"no fixture recorded at {path}")
            texts.append(path.read_text(encoding="utf-8"))
        return ChatResponse(tuple(texts), 0, 0)

    def record(self, request: ChatRequest, prompt: str, index: int, text: str) -> None:
        path = self.path_for(request, prompt, index)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


_RETRYABLE_HTTP = {408, 409, 425, 429, 500, 502, 503, 504}


class HttpTransport:
    """Chat-completion transport over the standard JSON wire format.

    Endpoint and credential come from the environment: TASKFORGE_API_BASE,
    TASKFORGE_API_KEY, and TASKFORGE_<ROLE>_MODEL (role-specific overrides via
    TASKFORGE_<ROLE>_API_BASE / _API_KEY).
    """

    def __init__(self, role: str, timeout: float = 120.0, opener=None):
        prefix = f"TASKFORGE_{role.upper()}"
        self.base_url = os.environ.get(f"{prefix}_API_BASE",
                                       os.environ.get("TASKFORGE_API_BASE", ""))
        self.api_key = os.environ.get(f"{prefix}_API_KEY",
                                      os.environ.get("TASKFORGE_API_KEY", ""))
        self.model = os.environ.get(f"{prefix}_MODEL",
                                    os.environ.get("TASKFORGE_MODEL", ""))
        self.timeout = timeout
        self._opener = opener or urllib.request.urlopen
        if not self.base_url:
            raise FatalTransportError(
                f"no endpoint configured for role {role!r} (set TASKFORGE_API_BASE)")

    def send(self, prompt: str, request: ChatRequest) -> ChatResponse:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
            "n": request.sampling.n_samples,
            "max_tokens": request.sampling.max_output_tokens,
        }
        req = urllib.request.Request(
            self.base_url.rstrip("/") + "/chat/completions",
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json",
                     **({"Authorization": f"Bearer {self.api_key}"} if self.api_key else {})},
            method="POST",
        )
        try:
            with self._opener(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in _RETRYABLE_HTTP:
                raise TransientTransportError(f"HTTP {exc.code}") from exc
            raise FatalTransportError(f"HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
            raise TransientTransportError(str(exc)) from exc
        try:
            texts = tuple(choice["message"]["content"] for choice in body["choices"])
            usage = body.get("usage", {})
        except (KeyError, TypeError) as exc:
            raise TransientTransportError(f"malformed response: {exc}") from exc
        return ChatResponse(texts, usage.get("prompt_tokens", 0),
                            usage.get("completion_tokens", 0))


class Gateway:
    """Renders templates, executes requests with retry, and accounts usage."""

    def __init__(self, transports: dict[str, object],
                 templates: Optional[dict[str, str]] = None,
                 retry_budget: int = 3, backoff_base: float = 0.5,
                 prices_per_1k: Optional[dict[str, float]] = None,
                 qps: Optional[float] = None, sleep=time.sleep):
        self.templates = templates if templates is not None else load_templates()
        self.transports = transports
        self.retry_budget = retry_budget
        self.backoff_base = backoff_base
        self.ledger = UsageLedger(prices_per_1k)
        self._limiters = {role: RateLimiter(qps, sleep=sleep) for role in ROLES}
        self._sleep = sleep

    def render(self, template_id: str, bindings: dict) -> str:
        return render(self.templates, template_id, bindings)

    def complete(self, request: ChatRequest) -> ChatResponse:
        transport = self.transports.get(request.role)
        if transport is None:
            raise EndpointRejected(f"no transport configured for role {request.role!r}")
        prompt = self.render(request.template_id, request.bindings)
        self._limiters.setdefault(request.role, RateLimiter(None)).acquire()
        attempt = 0
        while True:
            try:
                response = transport.send(prompt, request)
                break
            except TransientTransportError as exc:
                attempt += 1
                if attempt >= self.retry_budget:
                    raise TransportExhausted(
                        f"{request.template_id}: {exc} after {attempt} attempts") from exc
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            except FatalTransportError as exc:
                raise EndpointRejected(str(exc)) from exc
        if len(response.texts) != request.sampling.n_samples:
            raise EndpointRejected(
                f"endpoint returned {len(response.texts)} samples, "
                f"expected {request.sampling.n_samples}")
        self.ledger.record(request.role, request.stage_label(),
                           response.prompt_tokens, response.completion_tokens)
        return response

    def usage_report(self) -> UsageReport:
        return self.ledger.snapshot()
