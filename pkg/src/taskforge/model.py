"""Domain types for the task manifold: skills, attributes, tasks, lineage.

Every other module builds on the types and normalization rules defined here.
Tasks are immutable after construction; enrichment (execution output, fitness)
happens by replacing the task with an updated copy.
"""

from __future__ import annotations

import ast
import hashlib
import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional

NAME_RE = re.compile(r"^[a-z][a-z0-9]*(_[a-z0-9]+)*$")

_WORD_BREAK_RE = re.compile(r"[\s\-]+")


class ModelError(Exception):
    """Base class for domain-model failures."""


class NormalizationFailed(ModelError):
    """A raw name could not be normalized into a valid identifier."""

    def __init__(self, raw: str, normalized: str):
        super().__init__(f"cannot normalize {raw!r} (got {normalized!r})")
        self.raw = raw
        self.normalized = normalized


class EmptyCombination(ModelError):
    """A combination key was requested for an empty skill set."""


def canonical_skill_name(raw: str) -> str:
    """Normalize a proposer-emitted name to lower_snake_case.

    Lower-cases, collapses whitespace/hyphen runs to single underscores, and
    validates against the identifier pattern. Raises NormalizationFailed when
    the result is not a valid name (e.g. starts with a digit).
    """
    text = raw.strip().lower()
    text = _WORD_BREAK_RE.sub("_", text)
    text = re.sub(r"_+", "_", text).strip("_")
    if not NAME_RE.match(text):
        raise NormalizationFailed(raw, text)
    return text


def combination_key(skills: Iterable[str]) -> str:
    """Canonical key for a skill set: sorted names joined with '+'."""
    names = sorted(set(skills))
    if not names:
        raise EmptyCombination("combination key needs at least one skill")
    return "+".join(names)


class TaskMode(str, Enum):
    DEDUCTION = "deduction"
    ABDUCTION = "abduction"
    INDUCTION = "induction"


@dataclass(frozen=True)
class BankEntry:
    name: str
    description: str
    category: str = ""


class Bank:
    """Ordered name -> entry map for one abstraction axis (skills or attributes)."""

    def __init__(self, entries: Iterable[BankEntry] = ()):
        self._entries: dict[str, BankEntry] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: BankEntry) -> None:
        if not NAME_RE.match(entry.name):
            raise NormalizationFailed(entry.name, entry.name)
        if not entry.description.strip():
            raise ModelError(f"bank entry {entry.name!r} has empty description")
        if entry.name in self._entries:
            raise ModelError(f"duplicate bank entry {entry.name!r}")
        self._entries[entry.name] = entry

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries.values())

    def get(self, name: str) -> Optional[BankEntry]:
        return self._entries.get(name)

    def names(self) -> list[str]:
        return list(self._entries)

    def listing(self) -> str:
        """Render the bank as 'name: description' lines for prompt bindings."""
        return "\n".join(f"{e.name}: {e.description}" for e in self)

    @classmethod
    def from_tsv(cls, text: str) -> "Bank":
        """Parse a bank from 'name<TAB>description<TAB>category' lines."""
        bank = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ModelError(f"malformed bank line: {line!r}")
            category = parts[2] if len(parts) > 2 else ""
            bank.add(BankEntry(parts[0], parts[1], category))
        return bank

    def to_tsv(self) -> str:
        return "\n".join(f"{e.name}\t{e.description}\t{e.category}" for e in self) + "\n"


@dataclass(frozen=True)
class SkillLabels:
    """Audited skill labels: exactly one core skill plus supporting ones."""

    main: str
    others: tuple[str, ...] = ()

    def all_names(self) -> frozenset[str]:
        return frozenset((self.main, *self.others))


@dataclass(frozen=True)
class SeedOrigin:
    target_skill: str


@dataclass(frozen=True)
class MutationOrigin:
    parent_id: str
    applied_attributes: tuple[str, ...]
    description: str = ""


@dataclass(frozen=True)
class CrossoverOrigin:
    target_skill: str
    combination: tuple[str, ...]
    justification: str = ""


@dataclass(frozen=True)
class InducedOrigin:
    source_id: str


Provenance = SeedOrigin | MutationOrigin | CrossoverOrigin | InducedOrigin


@dataclass(frozen=True)
class InductionSpec:
    """Problem statement plus verified I/O pairs, split visible/hidden."""

    problem: str
    pairs: tuple[tuple[str, str], ...]
    visible_count: int
    hints: tuple[str, ...] = ()

    def visible(self) -> tuple[tuple[str, str], ...]:
        return self.pairs[: self.visible_count]

    def hidden(self) -> tuple[tuple[str, str], ...]:
        return self.pairs[self.visible_count :]


@dataclass(frozen=True)
class Task:
    """One reasoning item: program, observables, labels, lineage, fitness."""

    id: str
    mode: TaskMode
    program: str
    skills: SkillLabels
    provenance: Provenance
    input: Optional[str] = None
    output: Optional[str] = None
    induction: Optional[InductionSpec] = None
    fitness: Optional["object"] = None  # FitnessReport; typed loosely to avoid a cycle

    def with_output(self, output: str) -> "Task":
        return replace(self, output=output)

    def with_skills(self, skills: SkillLabels) -> "Task":
        return replace(self, skills=skills)

    def with_fitness(self, report: object) -> "Task":
        return replace(self, fitness=report)

    def with_induction(self, spec: InductionSpec) -> "Task":
        return replace(self, induction=spec)


def task_id(mode: TaskMode, program: str, input_text: Optional[str],
            extra: Optional[str] = None) -> str:
    """Content-addressed id so retried identical proposals dedupe."""
    payload = json.dumps([mode.value, program, input_text, extra], ensure_ascii=False)
    return "t_" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def make_task(mode: TaskMode, program: str, skills: SkillLabels,
              provenance: Provenance, input_text: Optional[str] = None,
              induction: Optional[InductionSpec] = None) -> Task:
    extra = None
    if induction is not None:
        extra = json.dumps([induction.problem, [p[0] for p in induction.pairs]],
                           ensure_ascii=False)
    return Task(
        id=task_id(mode, program, input_text, extra),
        mode=mode,
        program=program,
        skills=skills,
        provenance=provenance,
        input=input_text,
        induction=induction,
    )


def scan_delimiters(text: str) -> list[str]:
    """Check bracket balance and quote pairing without evaluating anything."""
    violations: list[str] = []
    pairs = {")": "(", "]": "[", "}": "{"}
    stack: list[str] = []
    quote: Optional[str] = None
    escaped = False
    for ch in text:
        if quote is not None:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
            continue
        if ch in ("'", '"'):
            quote = ch
        elif ch in "([{":
            stack.append(ch)
        elif ch in ")]}":
            if not stack or stack[-1] != pairs[ch]:
                violations.append(f"unbalanced bracket {ch!r}")
                return violations
            stack.pop()
    if quote is not None:
        violations.append(f"unterminated quote {quote}")
    if stack:
        violations.append(f"unclosed bracket {stack[-1]!r}")
    return violations


def _entry_function(tree: ast.Module) -> Optional[ast.FunctionDef]:
    for node in tree.body:
        if isinstance(node, ast.FunctionDef) and node.name == "f":
            return node
    return None


def program_violations(source: str) -> list[str]:
    """Structural checks on a task program. Syntax authority stays with the executor."""
    violations: list[str] = []
    if not source.strip():
        return ["program: empty"]
    if not re.search(r"^def\s+f\s*\(", source, re.MULTILINE):
        return ["program: no top-level entry function f"]
    try:
        tree = ast.parse(source)
    except SyntaxError:
        return violations  # executability is judged by v_exec, not here
    entries = [n for n in tree.body if isinstance(n, ast.FunctionDef) and n.name == "f"]
    if not entries:
        violations.append("program: no top-level entry function f")
        return violations
    if len(entries) > 1:
        violations.append("program: multiple top-level definitions of f")
    entry = entries[0]
    arg_count = (len(entry.args.posonlyargs) + len(entry.args.args)
                 + (1 if entry.args.vararg else 0) + len(entry.args.kwonlyargs))
    if arg_count == 0:
        violations.append("program: f declares no parameters")
    if not any(isinstance(n, ast.Return) for n in ast.walk(entry)):
        violations.append("program: f has no return statement")
    if tree.body and tree.body[-1] is not entries[-1]:
        violations.append("program: trailing statements after f (not truncated)")
    return violations


def input_violations(text: Optional[str]) -> list[str]:
    if text is None or not text.strip():
        return ["input: empty"]
    return [f"input: {v}" for v in scan_delimiters(text)]


def validate_task(task: Task, skill_bank: Optional[Bank] = None,
                  attribute_bank: Optional[Bank] = None) -> list[str]:
    """Return all invariant violations; an empty list means the task is well formed."""
    violations: list[str] = []
    violations.extend(program_violations(task.program))

    if task.mode in (TaskMode.DEDUCTION, TaskMode.ABDUCTION):
        violations.extend(input_violations(task.input))
        if task.induction is not None:
            violations.append("induction: only valid for induction mode")
    else:
        spec = task.induction
        if spec is None:
            violations.append("induction: required for induction mode")
        else:
            if len(spec.pairs) < 2:
                violations.append("induction: needs at least two pairs")
            if not (2 <= spec.visible_count < len(spec.pairs)):
                violations.append("visible_count: must leave hidden pairs")
            if not spec.problem.strip():
                violations.append("induction: empty problem statement")
        if task.input is not None:
            violations.append("input: not used in induction mode")

    if task.skills.main in task.skills.others:
        violations.append("skills: main repeated in others")
    for name in (task.skills.main, *task.skills.others):
        if not NAME_RE.match(name):
            violations.append(f"skills: invalid name {name!r}")
        elif skill_bank is not None and name not in skill_bank:
            violations.append(f"skills: {name!r} not in bank")

    prov = task.provenance
    if isinstance(prov, MutationOrigin):
        if not prov.applied_attributes:
            violations.append("provenance: mutation with no applied attributes")
        if attribute_bank is not None:
            for attr in prov.applied_attributes:
                if attr not in attribute_bank:
                    violations.append(f"provenance: unknown attribute {attr!r}")
    elif isinstance(prov, CrossoverOrigin):
        if len(prov.combination) < 2:
            violations.append("provenance: crossover needs at least two skills")
        if prov.target_skill not in prov.combination:
            violations.append("provenance: crossover combination missing target")
    return violations


class ComboLedger:
    """Realized skill combinations per target skill; grows monotonically."""

    def __init__(self):
        self._combos: dict[str, set[str]] = {}

    def realized(self, target: str) -> frozenset[str]:
        return frozenset(self._combos.get(target, ()))

    def insert(self, target: str, key: str) -> None:
        self._combos.setdefault(target, set()).add(key)

    def __contains__(self, item: tuple[str, str]) -> bool:
        target, key = item
        return key in self._combos.get(target, ())

    def targets(self) -> list[str]:
        return sorted(self._combos)

    def as_dict(self) -> dict[str, list[str]]:
        return {t: sorted(keys) for t, keys in sorted(self._combos.items())}


# --- serialization for journaling/export -----------------------------------

_PROVENANCE_KINDS = {
    SeedOrigin: "seed",
    MutationOrigin: "mutation",
    CrossoverOrigin: "crossover",
    InducedOrigin: "induced",
}


def provenance_to_dict(prov: Provenance) -> dict:
    kind = _PROVENANCE_KINDS[type(prov)]
    if isinstance(prov, SeedOrigin):
        return {"kind": kind, "target_skill": prov.target_skill}
    if isinstance(prov, MutationOrigin):
        return {"kind": kind, "parent_id": prov.parent_id,
                "applied_attributes": list(prov.applied_attributes),
                "description": prov.description}
    if isinstance(prov, CrossoverOrigin):
        return {"kind": kind, "target_skill": prov.target_skill,
                "combination": list(prov.combination),
                "justification": prov.justification}
    return {"kind": kind, "source_id": prov.source_id}


def provenance_from_dict(data: dict) -> Provenance:
    kind = data["kind"]
    if kind == "seed":
        return SeedOrigin(data["target_skill"])
    if kind == "mutation":
        return MutationOrigin(data["parent_id"],
                              tuple(data["applied_attributes"]),
                              data.get("description", ""))
    if kind == "crossover":
        return CrossoverOrigin(data["target_skill"], tuple(data["combination"]),
                               data.get("justification", ""))
    if kind == "induced":
        return InducedOrigin(data["source_id"])
    raise ModelError(f"unknown provenance kind {kind!r}")


def task_to_dict(task: Task) -> dict:
    data = {
        "id": task.id,
        "mode": task.mode.value,
        "program": task.program,
        "input": task.input,
        "output": task.output,
        "skills": {"main": task.skills.main, "others": list(task.skills.others)},
        "provenance": provenance_to_dict(task.provenance),
    }
    if task.induction is not None:
        data["induction"] = {
            "problem": task.induction.problem,
            "pairs": [list(p) for p in task.induction.pairs],
            "visible_count": task.induction.visible_count,
            "hints": list(task.induction.hints),
        }
    if task.fitness is not None and hasattr(task.fitness, "to_dict"):
        data["fitness"] = task.fitness.to_dict()
    return data


def task_from_dict(data: dict) -> Task:
    from taskforge.fitness import FitnessReport  # local import to avoid a cycle

    induction = None
    if data.get("induction"):
        raw = data["induction"]
        induction = InductionSpec(
            problem=raw["problem"],
            pairs=tuple((p[0], p[1]) for p in raw["pairs"]),
            visible_count=raw["visible_count"],
            hints=tuple(raw.get("hints", ())),
        )
    fitness = None
    if data.get("fitness"):
        fitness = FitnessReport.from_dict(data["fitness"])
    return Task(
        id=data["id"],
        mode=TaskMode(data["mode"]),
        program=data["program"],
        input=data.get("input"),
        output=data.get("output"),
        skills=SkillLabels(data["skills"]["main"], tuple(data["skills"]["others"])),
        provenance=provenance_from_dict(data["provenance"]),
        induction=induction,
        fitness=fitness,
    )
