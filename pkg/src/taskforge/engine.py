"""The evolutionary synthesis loop: seed, mutate, cross over, induce.

Work is organized into slots (one per skill, parent, or source task). Each
slot runs to a terminal outcome and emits journal events; the store is the
single serialization point, so an interrupted run resumes by replaying the
journal and re-running only unfinished slots. Slot iteration order is fixed,
which keeps fixture-backed runs byte-deterministic end to end.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional

from taskforge import codec
from taskforge.fitness import (
    FitnessChecker,
    FitnessReport,
    STAGE_EXEC,
    STAGE_LEARN,
    check_learn,
)
from taskforge.gateway import ChatRequest, Gateway, ROLE_PROPOSER, SamplingParams
from taskforge.model import (
    Bank,
    BankEntry,
    CrossoverOrigin,
    InducedOrigin,
    InductionSpec,
    MutationOrigin,
    SeedOrigin,
    SkillLabels,
    Task,
    TaskMode,
    combination_key,
    make_task,
    task_to_dict,
    validate_task,
)
from taskforge.sandbox import ExecLimits, SandboxSupervisor
from taskforge.store import (
    EVENT_ACCEPTED,
    EVENT_BANKS,
    EVENT_COMPLETED,
    EVENT_EXHAUSTED,
    EVENT_PROPOSED,
    EVENT_REJECTED,
    REASON_NOVELTY,
    CurriculumStore,
    bank_to_payload,
)

SEED_TEMPLATES = {TaskMode.DEDUCTION: "deduction_seed",
                  TaskMode.ABDUCTION: "abduction_seed"}
MUTATION_TEMPLATES = {TaskMode.DEDUCTION: "deduction_mutation",
                      TaskMode.ABDUCTION: "abduction_mutation"}
CROSSOVER_TEMPLATES = {TaskMode.DEDUCTION: "deduction_crossover",
                       TaskMode.ABDUCTION: "abduction_crossover"}


class EngineError(Exception):
    pass


class EmptyCorpus(EngineError):
    """No seed corpus was given and default banks are disabled."""


@dataclass(frozen=True)
class RunConfig:
    modes: tuple[TaskMode, ...] = (TaskMode.DEDUCTION, TaskMode.ABDUCTION)
    variants_per_parent: int = 10
    max_variants: int = 32
    solver_k: int = 10
    retry_budget: int = 3
    induction_num_inputs: int = 10
    visible_count: int = 6
    crossover_attempts_per_skill: int = 5
    audit_retries: int = 3
    proposer_sampling: SamplingParams = SamplingParams(temperature=1.0, top_p=0.99)
    solver_sampling: SamplingParams = SamplingParams(temperature=1.0, top_p=0.99)
    limits: ExecLimits = ExecLimits()
    banned_keywords: tuple[str, ...] = ()
    require_full_combination: bool = True
    induction_source_cap: Optional[int] = None
    parallelism: int = 1
    failure_excerpt_len: int = 300
    failure_max_reasons: int = 3
    use_default_banks: bool = True

    def __post_init__(self):
        if self.variants_per_parent < 1:
            raise ValueError("variants_per_parent must be >= 1")
        if not (2 <= self.visible_count < self.induction_num_inputs):
            raise ValueError("need 2 <= visible_count < induction_num_inputs")
        if min(self.retry_budget, self.crossover_attempts_per_skill,
               self.audit_retries, self.solver_k, self.parallelism) < 1:
            raise ValueError("budgets must be >= 1")


class FailureInfo:
    """Accumulated rejection reasons for one proposal slot, excerpt-bounded."""

    def __init__(self, excerpt_len: int = 300, max_reasons: int = 3):
        self.excerpt_len = excerpt_len
        self.max_reasons = max_reasons
        self.reasons: list[str] = []

    def add(self, reason: str) -> None:
        self.reasons.append(reason[: self.excerpt_len])
        if len(self.reasons) > self.max_reasons:
            self.reasons = self.reasons[-self.max_reasons :]

    def render(self) -> str:
        if not self.reasons:
            return "None"
        return "\n".join(f"{i}. {r}" for i, r in enumerate(self.reasons, start=1))

    def __bool__(self) -> bool:
        return bool(self.reasons)


Event = tuple[str, dict]


def load_default_banks() -> tuple[Bank, Bank]:
    data = resources.files("taskforge") / "data"
    skills = Bank.from_tsv((data / "skills.tsv").read_text(encoding="utf-8"))
    attributes = Bank.from_tsv((data / "attributes.tsv").read_text(encoding="utf-8"))
    return skills, attributes


def read_corpus(path: Path) -> list[dict]:
    """Seed corpus records: one JSON object per line with problem/solution."""
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if "problem" not in record or "solution" not in record:
            raise EngineError("corpus records need 'problem' and 'solution' fields")
        records.append(record)
    return records


class EvolutionEngine:
    def __init__(self, gateway: Gateway, supervisor: SandboxSupervisor,
                 store: CurriculumStore, config: RunConfig = RunConfig()):
        self.gateway = gateway
        self.supervisor = supervisor
        self.store = store
        self.config = config
        self._checker: Optional[FitnessChecker] = None

    # -- banks -------------------------------------------------------------------

    @property
    def skill_bank(self) -> Bank:
        bank = self.store.state.skill_bank
        if bank is None:
            raise EngineError("banks not available; run extract first")
        return bank

    @property
    def attribute_bank(self) -> Bank:
        bank = self.store.state.attribute_bank
        if bank is None:
            raise EngineError("banks not available; run extract first")
        return bank

    def checker(self) -> FitnessChecker:
        if self._checker is None:
            self._checker = FitnessChecker(
                self.gateway, self.supervisor, self.skill_bank,
                solver_k=self.config.solver_k,
                solver_sampling=self.config.solver_sampling,
                audit_retries=self.config.audit_retries,
                require_full_combination=self.config.require_full_combination)
        return self._checker

    def ensure_banks(self, corpus: Optional[list[dict]] = None) -> tuple[Bank, Bank]:
        if self.store.state.is_done("banks"):
            return self.skill_bank, self.attribute_bank
        skills, attributes = self.extract_banks(corpus)
        self.store.append(EVENT_BANKS, {
            "skills": bank_to_payload(skills),
            "attributes": bank_to_payload(attributes),
        })
        return skills, attributes

    def extract_banks(self, corpus: Optional[list[dict]]) -> tuple[Bank, Bank]:
        """Per-record extraction then one clustering pass per axis; defaults
        ship for corpus-less runs."""
        if not corpus:
            if not self.config.use_default_banks:
                raise EmptyCorpus("no corpus records and default banks disabled")
            return load_default_banks()
        skill_map: dict[str, str] = {}
        attr_map: dict[str, str] = {}
        for record in corpus:
            response = self.gateway.complete(ChatRequest(
                template_id="skill_attribute",
                bindings={"problem": record["problem"],
                          "code_solution": record["solution"]},
                sampling=self.config.proposer_sampling,
                role=ROLE_PROPOSER, stage="extract"))
            try:
                extraction = codec.parse_bank_extraction(response.texts[0])
            except codec.CodecError:
                continue
            for name, desc in extraction.skills.items():
                skill_map.setdefault(name, desc)
            for name, desc in extraction.attributes.items():
                attr_map.setdefault(name, desc)
        if not skill_map:
            raise EngineError("extraction produced no skills")
        skills = self._cluster_skills(skill_map)
        attributes = self._cluster_attributes(attr_map)
        return skills, attributes

    def _cluster_skills(self, skill_map: dict[str, str]) -> Bank:
        listing = "\n".join(f"{n}: {d}" for n, d in sorted(skill_map.items()))
        response = self.gateway.complete(ChatRequest(
            template_id="cluster_skill", bindings={"skill_list": listing},
            sampling=self.config.proposer_sampling,
            role=ROLE_PROPOSER, stage="extract"))
        try:
            triples = codec.parse_skill_clusters(response.texts[0])
            return Bank(BankEntry(name, desc, category)
                        for category, name, desc in triples)
        except codec.CodecError:
            return Bank(BankEntry(n, d) for n, d in sorted(skill_map.items()))

    def _cluster_attributes(self, attr_map: dict[str, str]) -> Bank:
        listing = "\n".join(f"{n}: {d}" for n, d in sorted(attr_map.items()))
        response = self.gateway.complete(ChatRequest(
            template_id="cluster_attribute", bindings={"attribute_list": listing},
            sampling=self.config.proposer_sampling,
            role=ROLE_PROPOSER, stage="extract"))
        try:
            clustered = codec.parse_attribute_clusters(response.texts[0])
            return Bank(BankEntry(n, d) for n, d in sorted(clustered.items()))
        except codec.CodecError:
            return Bank(BankEntry(n, d) for n, d in sorted(attr_map.items()))

    # -- shared slot helpers -------------------------------------------------------

    def _banned_binding(self) -> str:
        return ", ".join(self.config.banned_keywords) or "None"

    def _ledger_keys(self, task: Task) -> list[list[str]]:
        if isinstance(task.provenance, InducedOrigin):
            return []
        return [[task.skills.main, combination_key(task.skills.all_names())]]

    def _accept_events(self, slot: str, task: Task,
                       extra_keys: Iterable[tuple[str, str]] = ()) -> list[Event]:
        keys = self._ledger_keys(task)
        for target, key in extra_keys:
            pair = [target, key]
            if pair not in keys:
                keys.append(pair)
        return [(EVENT_ACCEPTED, {"slot": slot, "task": task_to_dict(task),
                                  "ledger_keys": keys})]

    def _parse_seed_response(self, text: str) -> tuple[str, str]:
        code_blocks = codec.extract_fenced(text, "python")
        if not code_blocks:
            raise codec.SchemaViolation("no python block in response")
        program = codec.strip_after_return(code_blocks[-1])
        input_blocks = codec.extract_fenced(text, "input")
        if not input_blocks:
            raise codec.SchemaViolation("no input block in response")
        input_text = input_blocks[-1]
        problems = codec.validate_input_literal(input_text)
        if problems:
            raise codec.SchemaViolation(f"bad input literal: {problems[0]}")
        return program, input_text

    # -- seeding ---------------------------------------------------------------------

    def _seed_slot(self, mode: TaskMode, entry: BankEntry) -> list[Event]:
        slot = f"seed:{mode.value}:{entry.name}"
        events: list[Event] = []
        failure = FailureInfo(self.config.failure_excerpt_len,
                              self.config.failure_max_reasons)
        for attempt in range(1, self.config.retry_budget + 1):
            events.append((EVENT_PROPOSED, {"slot": slot, "attempt": attempt}))
            response = self.gateway.complete(ChatRequest(
                template_id=SEED_TEMPLATES[mode],
                bindings={
                    "failure_info": failure.render(),
                    "skill_str": f"{entry.name}: {entry.description}",
                    "banned_keywords": self._banned_binding(),
                    "remove_input_from_snippet_prompt": "",
                    "remove_after_return_prompt": "",
                },
                sampling=self.config.proposer_sampling,
                role=ROLE_PROPOSER, stage="seed"))
            try:
                program, input_text = self._parse_seed_response(response.texts[0])
            except codec.CodecError as exc:
                reason = f"ParseError: {exc}"
                events.append((EVENT_REJECTED, {"slot": slot, "reason": reason}))
                failure.add(reason)
                continue
            task = make_task(mode, program, SkillLabels(entry.name),
                             SeedOrigin(entry.name), input_text=input_text)
            violations = validate_task(task, self.skill_bank, self.attribute_bank)
            if violations:
                reason = f"InvalidTask: {'; '.join(violations)}"
                events.append((EVENT_REJECTED, {"slot": slot, "reason": reason,
                                                "task_id": task.id}))
                failure.add(reason)
                continue
            final, report = self.checker().evaluate(task)
            if report.overall:
                events.extend(self._accept_events(slot, final))
                events.append((EVENT_COMPLETED, {"slot": slot, "accepted": 1}))
                return events
            reason = "; ".join(report.reasons) or "fitness failed"
            events.append((EVENT_REJECTED, {"slot": slot, "reason": reason,
                                            "task_id": task.id}))
            failure.add(reason)
        events.append((EVENT_EXHAUSTED, {"slot": slot, "reason": "SkillExhausted"}))
        return events

    def seed_tasks(self, mode: TaskMode) -> list[Task]:
        """One accepted seed per skill, retried with failure context."""
        slots = [(f"seed:{mode.value}:{entry.name}",
                  lambda e=entry: self._seed_slot(mode, e))
                 for entry in self.skill_bank]
        self._run_slots(slots)
        return [t for t in self.store.state.tasks()
                if t.mode is mode and isinstance(t.provenance, SeedOrigin)]

    def seed_skill(self, mode: TaskMode, skill_name: str) -> Optional[Task]:
        entry = self.skill_bank.get(skill_name)
        if entry is None:
            raise EngineError(f"skill {skill_name!r} not in bank")
        self._run_slots([(f"seed:{mode.value}:{skill_name}",
                          lambda: self._seed_slot(mode, entry))])
        for task in self.store.state.tasks():
            if (task.mode is mode and isinstance(task.provenance, SeedOrigin)
                    and task.provenance.target_skill == skill_name):
                return task
        return None

    # -- attribute mutation -------------------------------------------------------------

    def _mutate_slot(self, parent: Task) -> list[Event]:
        slot = f"mutate:{parent.mode.value}:{parent.id}"
        events: list[Event] = []
        target = parent.skills.main
        entry = self.skill_bank.get(target)
        skill_text = f"{target}: {entry.description}" if entry else target
        known_attrs = set(self.attribute_bank.names())
        batch = None
        for attempt in range(1, self.config.retry_budget + 1):
            response = self.gateway.complete(ChatRequest(
                template_id=MUTATION_TEMPLATES[parent.mode],
                bindings={
                    "code": parent.program,
                    "input": parent.input,
                    "skill": skill_text,
                    "complexity_attributes": self.attribute_bank.listing(),
                    "remove_input_from_snippet_prompt": "",
                    "remove_after_return_prompt": "",
                },
                sampling=self.config.proposer_sampling,
                role=ROLE_PROPOSER, stage="mutation"))
            try:
                batch = codec.parse_variant_batch(
                    response.texts[0], known_attributes=known_attrs,
                    max_variants=self.config.max_variants)
                break
            except codec.NoJsonObject as exc:
                events.append((EVENT_PROPOSED, {"slot": slot, "attempt": attempt}))
                events.append((EVENT_REJECTED, {"slot": slot,
                                                "reason": f"ParseError: {exc}"}))
        if batch is None:
            events.append((EVENT_EXHAUSTED, {"slot": slot, "reason": "CohortEmpty"}))
            return events
        for key, reason in batch.drops:
            events.append((EVENT_PROPOSED, {"slot": slot, "variant": key}))
            events.append((EVENT_REJECTED, {"slot": slot,
                                            "reason": f"ParseError: {reason}",
                                            "variant": key}))
        accepted = 0
        seen_ids = set(self.store.state.accepted)
        for index, variant in enumerate(batch.variants, start=1):
            events.append((EVENT_PROPOSED, {"slot": slot, "variant": index}))
            task = make_task(
                parent.mode, variant.code, SkillLabels(target),
                MutationOrigin(parent.id, variant.attributes, variant.description),
                input_text=variant.input)
            if task.id in seen_ids:
                events.append((EVENT_REJECTED, {"slot": slot, "reason": "Duplicate",
                                                "task_id": task.id}))
                continue
            seen_ids.add(task.id)
            violations = validate_task(task, self.skill_bank, self.attribute_bank)
            if violations:
                events.append((EVENT_REJECTED, {
                    "slot": slot, "reason": f"InvalidTask: {'; '.join(violations)}",
                    "task_id": task.id}))
                continue
            final, report = self.checker().evaluate(task)
            if report.overall:
                events.extend(self._accept_events(slot, final))
                accepted += 1
            else:
                events.append((EVENT_REJECTED, {
                    "slot": slot, "reason": "; ".join(report.reasons) or "fitness failed",
                    "task_id": task.id}))
        if accepted:
            events.append((EVENT_COMPLETED, {"slot": slot, "accepted": accepted}))
        else:
            events.append((EVENT_EXHAUSTED, {"slot": slot, "reason": "CohortEmpty"}))
        return events

    def mutate_cohort(self, parent: Task) -> list[Task]:
        slot = f"mutate:{parent.mode.value}:{parent.id}"
        self._run_slots([(slot, lambda: self._mutate_slot(parent))])
        return [t for t in self.store.state.tasks()
                if isinstance(t.provenance, MutationOrigin)
                and t.provenance.parent_id == parent.id]

    # -- skill crossover -----------------------------------------------------------------

    def _crossover_slot(self, mode: TaskMode, entry: BankEntry) -> list[Event]:
        slot = f"cross:{mode.value}:{entry.name}"
        events: list[Event] = []
        target = entry.name
        failure = FailureInfo(self.config.failure_excerpt_len,
                              self.config.failure_max_reasons)
        realized = set(self.store.state.combo_ledger.realized(target))
        for attempt in range(1, self.config.crossover_attempts_per_skill + 1):
            existing = "\n".join(sorted(realized)) or "None yet."
            if failure:
                existing += "\n\nPrevious failure information:\n" + failure.render()
            events.append((EVENT_PROPOSED, {"slot": slot, "attempt": attempt}))
            response = self.gateway.complete(ChatRequest(
                template_id=CROSSOVER_TEMPLATES[mode],
                bindings={
                    "skill_pool": self.skill_bank.listing(),
                    "target_skill": f"{target}: {entry.description}",
                    "existing_combinations": existing,
                    "banned_keywords": self._banned_binding(),
                    "remove_input_from_snippet_prompt": "",
                    "remove_after_return_prompt": "",
                },
                sampling=self.config.proposer_sampling,
                role=ROLE_PROPOSER, stage="crossover"))
            try:
                candidate = codec.parse_crossover(response.texts[0])
            except codec.CodecError as exc:
                reason = f"ParseError: {exc}"
                events.append((EVENT_REJECTED, {"slot": slot, "reason": reason}))
                failure.add(reason)
                continue
            if target not in candidate.skills:
                reason = f"TargetMissing: combination lacks {target!r}"
                events.append((EVENT_REJECTED, {"slot": slot, "reason": reason}))
                failure.add(reason)
                continue
            declared_key = combination_key(candidate.skills)
            if declared_key in realized:
                events.append((EVENT_REJECTED, {"slot": slot,
                                                "reason": REASON_NOVELTY,
                                                "key": declared_key}))
                failure.add(f"combination {declared_key} already realized")
                continue
            ordered = (target, *(s for s in candidate.skills if s != target))
            task = make_task(
                mode, candidate.code, SkillLabels(target, ordered[1:]),
                CrossoverOrigin(target, ordered, candidate.justification),
                input_text=candidate.input)
            violations = validate_task(task, self.skill_bank, self.attribute_bank)
            if violations:
                reason = f"InvalidTask: {'; '.join(violations)}"
                events.append((EVENT_REJECTED, {"slot": slot, "reason": reason,
                                                "task_id": task.id}))
                failure.add(reason)
                continue
            final, report = self.checker().evaluate(task)
            if not report.overall:
                reason = "; ".join(report.reasons) or "fitness failed"
                events.append((EVENT_REJECTED, {"slot": slot, "reason": reason,
                                                "task_id": task.id}))
                failure.add(reason)
                continue
            realized_key = combination_key(final.skills.all_names())
            if realized_key in realized:
                events.append((EVENT_REJECTED, {"slot": slot,
                                                "reason": REASON_NOVELTY,
                                                "key": realized_key}))
                failure.add(f"audited combination {realized_key} already realized")
                continue
            events.extend(self._accept_events(
                slot, final, extra_keys=[(target, declared_key)]))
            events.append((EVENT_COMPLETED, {"slot": slot, "accepted": 1}))
            return events
        events.append((EVENT_EXHAUSTED, {"slot": slot,
                                         "reason": "CrossoverExhausted"}))
        return events

    def crossover(self, mode: TaskMode, skill_name: str) -> Optional[Task]:
        entry = self.skill_bank.get(skill_name)
        if entry is None:
            raise EngineError(f"skill {skill_name!r} not in bank")
        slot = f"cross:{mode.value}:{skill_name}"
        self._run_slots([(slot, lambda: self._crossover_slot(mode, entry))])
        for task in reversed(self.store.state.tasks()):
            if (task.mode is mode and isinstance(task.provenance, CrossoverOrigin)
                    and task.provenance.target_skill == skill_name):
                return task
        return None

    # -- induction ---------------------------------------------------------------------------

    def inject_hints(self, task: Task) -> tuple[Optional[Task], int]:
        """Attach 3-4 progressive hints; returns (task-with-hints | None, count)."""
        response = self.gateway.complete(ChatRequest(
            template_id="induction_hint",
            bindings={"problem": task.induction.problem, "code": task.program},
            sampling=self.config.proposer_sampling,
            role=ROLE_PROPOSER, stage="hint"))
        hints = codec.extract_fenced(response.texts[0], "hint")[:4]
        if not hints:
            return None, 0
        spec = replace(task.induction, hints=tuple(hints))
        return task.with_induction(spec), len(hints)

    def _induce_slot(self, source: Task) -> list[Event]:
        slot = f"induce:{source.id}"
        events: list[Event] = []
        events.append((EVENT_PROPOSED, {"slot": slot}))

        def reject(reason: str, **extra) -> list[Event]:
            events.append((EVENT_REJECTED, {"slot": slot, "reason": reason, **extra}))
            events.append((EVENT_EXHAUSTED, {"slot": slot, "reason": reason}))
            return events

        response = self.gateway.complete(ChatRequest(
            template_id="induction_task",
            bindings={"num_inputs": str(self.config.induction_num_inputs),
                      "code": source.program},
            sampling=self.config.proposer_sampling,
            role=ROLE_PROPOSER, stage="induction"))
        text = response.texts[0]
        problems = (codec.extract_fenced(text, "problem")
                    or codec.extract_fenced(text, "message"))
        if not problems:
            return reject("NoProblemStatement")
        problem = problems[-1]
        inputs = codec.extract_fenced(text, "input")
        if len(inputs) <= self.config.visible_count:
            return reject(f"InsufficientInputs: {len(inputs)}")
        pairs: list[tuple[str, str]] = []
        for index, inp in enumerate(inputs):
            result = self.supervisor.execute_checked(source.program, inp)
            if not result.ok:
                return reject(f"InputsUnexecutable: input {index} "
                              f"{result.status.value}: {result.diagnostic[:120]}")
            pairs.append((inp, result.output))
        induction = InductionSpec(
            problem=problem, pairs=tuple(pairs),
            visible_count=self.config.visible_count)
        task = make_task(TaskMode.INDUCTION, source.program, source.skills,
                         InducedOrigin(source.id), induction=induction)
        violations = validate_task(task, self.skill_bank, self.attribute_bank)
        if violations:
            return reject(f"InvalidTask: {'; '.join(violations)}")

        checker = self.checker()
        report = FitnessReport(k=self.config.solver_k)
        report.stage_reached = STAGE_EXEC
        ok, exec_result = checker.check_exec(task)
        report.v_exec = ok
        report.exec_result = exec_result
        if not ok:
            return reject(f"InputsUnexecutable: {exec_result.diagnostic[:200]}")
        report.v_skill = True  # ground-truth program audited at source acceptance
        report.stage_reached = STAGE_LEARN
        rate = checker.estimate_pass_rate(task)
        notes = []
        if rate == 0.0:
            hinted, count = self.inject_hints(task)
            if hinted is None:
                return reject("StillOpaque: no hints parsed")
            if count < 3:
                notes.append(f"hint_shortfall:{count}")
            task = hinted
            rate = checker.estimate_pass_rate(task)
            if rate == 0.0:
                return reject("StillOpaque: pass rate 0 after hints")
        report.pass_rate = rate
        report.v_learn = check_learn(rate)
        if not report.v_learn:
            return reject(f"NotLearnable: pass rate {rate}")
        final = task.with_fitness(report)
        events.extend(self._accept_events(slot, final))
        payload: dict = {"slot": slot, "accepted": 1}
        if notes:
            payload["notes"] = notes
        events.append((EVENT_COMPLETED, payload))
        return events

    def build_induction(self, source: Task) -> Optional[Task]:
        slot = f"induce:{source.id}"
        self._run_slots([(slot, lambda: self._induce_slot(source))])
        for task in reversed(self.store.state.tasks()):
            if (isinstance(task.provenance, InducedOrigin)
                    and task.provenance.source_id == source.id):
                return task
        return None

    # -- orchestration ---------------------------------------------------------------------------

    def _run_slots(self, slots: list[tuple[str, Callable[[], list[Event]]]]) -> None:
        """Run slot functions, journaling their events in slot order.

        Slots never touch the store themselves, so parallel execution keeps
        the journal deterministic: events are committed in list order.
        """
        pending = [(slot, fn) for slot, fn in slots
                   if not self.store.state.is_done(slot)]
        if not pending:
            return
        if self.config.parallelism <= 1:
            for _, fn in pending:
                self._commit(fn())
            return
        with ThreadPoolExecutor(max_workers=self.config.parallelism) as pool:
            futures = [pool.submit(fn) for _, fn in pending]
            for future in futures:
                self._commit(future.result())

    def _commit(self, events: list[Event]) -> None:
        for event, payload in events:
            self.store.append(event, payload)

    def run_iteration(self, corpus: Optional[list[dict]] = None) -> list[Task]:
        """Execute the full loop: banks, then per-mode seeding, mutation, and
        crossover, then induction over every accepted task."""
        self.ensure_banks(corpus)
        for mode in self.config.modes:
            self._run_slots([
                (f"seed:{mode.value}:{entry.name}",
                 lambda e=entry, m=mode: self._seed_slot(m, e))
                for entry in self.skill_bank])
            parents = [t for t in self.store.state.tasks()
                       if t.mode is mode and isinstance(t.provenance, SeedOrigin)]
            self._run_slots([
                (f"mutate:{mode.value}:{parent.id}",
                 lambda p=parent: self._mutate_slot(p))
                for parent in parents])
            self._run_slots([
                (f"cross:{mode.value}:{entry.name}",
                 lambda e=entry, m=mode: self._crossover_slot(m, e))
                for entry in self.skill_bank])
        sources = [t for t in self.store.state.tasks()
                   if t.mode in (TaskMode.DEDUCTION, TaskMode.ABDUCTION)]
        if self.config.induction_source_cap is not None:
            sources = sources[: self.config.induction_source_cap]
        self._run_slots([
            (f"induce:{source.id}", lambda s=source: self._induce_slot(s))
            for source in sources])
        return self.store.state.tasks()
