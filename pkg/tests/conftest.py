"""Shared fixtures: scripted transports and a tiny bank for pipeline tests.

The scripted proposer fabricates deterministic single-int-arg programs and
remembers which skills it claimed for each, so skill audits replay exactly.
The scripted solver computes true answers in-process and solves a controlled
fraction of its samples, which pins pass rates wherever a test needs them.
"""

from __future__ import annotations

import json
import zlib

import pytest

from taskforge.engine import RunConfig
from taskforge.gateway import Gateway, ROLE_JUDGE, ROLE_PROPOSER, ROLE_SOLVER, ScriptedTransport
from taskforge.model import Bank, BankEntry
from taskforge.sandbox import ExecLimits, InProcessExecutor, SandboxSupervisor, canonical_repr, parse_call_args
from taskforge.store import CurriculumStore

WRONG_OUTPUT = "-424242"
WRONG_INPUT = "999999"
WRONG_PROGRAM = "def f(a):\n    return -987654"


def tiny_skill_bank() -> Bank:
    return Bank([
        BankEntry("binary_search", "Locate a target in a sorted array.", "searching"),
        BankEntry("prefix_sum", "Cumulative sums for range queries.", "arrays"),
        BankEntry("two_pointers", "Paired indices over a sequence.", "arrays"),
    ])


def tiny_attribute_bank() -> Bank:
    return Bank([
        BankEntry("input_size_n", "Primary input scale."),
        BankEntry("value_range", "Domain size of values."),
        BankEntry("recursion_depth", "Maximum recursion depth."),
    ])


def run_program(program: str, input_text: str) -> str:
    """Fixture-side oracle: execute a trusted program and canonicalize."""
    namespace: dict = {}
    exec(program, namespace)
    return canonical_repr(namespace["f"](*parse_call_args(input_text)))


class ScriptedProposer:
    """Deterministic stand-in for the proposer endpoint."""

    def __init__(self, skill_bank: Bank, attribute_bank: Bank):
        self.skill_bank = skill_bank
        self.attribute_bank = attribute_bank
        self.claimed_skills: dict[str, list[str]] = {}
        self.seed_inputs: dict[str, str] = {}
        self.problem_programs: dict[str, str] = {}

    # deterministic program shapes, all single int argument and injective
    def seed_program(self, skill: str) -> tuple[str, str]:
        names = self.skill_bank.names()
        k = names.index(skill) if skill in names else len(skill)
        program = (f"def f(a):\n"
                   f"    total = a\n"
                   f"    for step in range(1, {k + 3}):\n"
                   f"        total = total * 31 + step\n"
                   f"    return total")
        return program, str(k + 2)

    def variant_program(self, parent_code: str, index: int) -> tuple[str, str]:
        salt = (zlib.crc32(parent_code.encode()) % 97) + index
        program = (f"def f(a):\n"
                   f"    acc = a + {index}\n"
                   f"    for step in range({salt % 5 + 2}):\n"
                   f"        acc = acc * 7 + {salt}\n"
                   f"    return acc")
        return program, str(index + 1)

    def crossover_program(self, target: str, partner: str) -> tuple[str, str]:
        salt = (len(target) * 13 + len(partner) * 7) % 89
        program = (f"def f(a):\n"
                   f"    left = a * 5 + {salt}\n"
                   f"    right = left * 3 + {salt + 1}\n"
                   f"    return right")
        return program, str(salt % 7 + 1)

    def register(self, program: str, skills: list[str], seed_input: str) -> None:
        self.claimed_skills[program] = skills
        self.seed_inputs[program] = seed_input

    def __call__(self, request, prompt: str, index: int) -> str:
        tid = request.template_id
        bindings = request.bindings
        if tid in ("deduction_seed", "abduction_seed"):
            skill = bindings["skill_str"].split(":")[0]
            program, inp = self.seed_program(skill)
            self.register(program, [skill], inp)
            return (f"Here is my plan.\n```python\n{program}\n```\n"
                    f"```input\n{inp}\n```")
        if tid == "skill_reflection":
            skills = self.claimed_skills.get(bindings["code_snippet"])
            if skills is None:
                skills = [self.skill_bank.names()[0]]
            return json.dumps({"main_skill": skills[0], "other_skills": skills[1:]})
        if tid in ("deduction_mutation", "abduction_mutation"):
            return self._mutation_batch(bindings)
        if tid in ("deduction_crossover", "abduction_crossover"):
            return self._crossover_response(bindings)
        if tid == "induction_task":
            return self._induction_response(bindings)
        if tid == "induction_hint":
            return ("```hint\nThink about the aggregate you must maintain.\n```\n"
                    "```hint\nOne pass over the data suffices.\n```\n"
                    "```hint\nTrack the running value through each step.\n```")
        raise AssertionError(f"scripted proposer got unexpected template {tid}")

    def _mutation_batch(self, bindings) -> str:
        skill = bindings["skill"].split(":")[0]
        parent_code = bindings["code"]
        attr_names = self.attribute_bank.names()
        batch = {}
        for i in range(1, 11):
            program, inp = self.variant_program(parent_code, i)
            self.register(program, [skill], inp)
            attrs = [attr_names[(i + j) % len(attr_names)] for j in range(i % 3 + 1)]
            batch[f"variant_{i}"] = {
                "complexity_attributes": sorted(set(attrs)),
                "description": f"scales dimension {i}",
                "code": f"```python\n{program}\n```",
                "input": f"```input\n{inp}\n```",
            }
        return "Sure, here are the variants.\n" + json.dumps(batch)

    def _crossover_response(self, bindings) -> str:
        target = bindings["target_skill"].split(":")[0]
        used_partners = set()
        for line in bindings["existing_combinations"].splitlines():
            if "+" in line:
                used_partners.update(line.strip().split("+"))
        partner = next((name for name in self.skill_bank.names()
                        if name != target and name not in used_partners), None)
        if partner is None:
            partner = next(name for name in self.skill_bank.names() if name != target)
        program, inp = self.crossover_program(target, partner)
        self.register(program, [target, partner], inp)
        return json.dumps({
            "skill_combination": [target, partner],
            "crossover_justification": "the partner feeds the target's invariant",
            "code": f"```python\n{program}\n```",
            "input": f"```input\n{inp}\n```",
        })

    def _induction_response(self, bindings) -> str:
        code = bindings["code"]
        n = int(bindings["num_inputs"])
        problem = f"Describe the numeric pipeline tagged {zlib.crc32(code.encode()) % 10**8}."
        self.problem_programs[problem] = code
        blocks = "\n".join(f"```input\n{j}\n```" for j in range(n))
        return f"```problem\n{problem}\n```\n{blocks}"


class ScriptedSolver:
    """Solves a controlled fraction of its k samples for any task."""

    def __init__(self, proposer: ScriptedProposer, k: int,
                 solve_probability: float = 0.5):
        self.proposer = proposer
        self.k = k
        self.solve_probability = solve_probability
        self.program_probabilities: dict[str, float] = {}
        self.calls = 0

    def probability_for(self, request) -> float:
        snippet = request.bindings.get("snippet")
        if snippet in self.program_probabilities:
            return self.program_probabilities[snippet]
        problem = request.bindings.get("problem", "")
        base = problem.split("\n\nHints:")[0]
        program = self.proposer.problem_programs.get(base)
        if program in self.program_probabilities:
            return self.program_probabilities[program]
        return self.solve_probability

    def _solved(self, request, index: int) -> bool:
        return index < round(self.probability_for(request) * self.k)

    def __call__(self, request, prompt: str, index: int) -> str:
        self.calls += 1
        tid = request.template_id
        bindings = request.bindings
        solved = self._solved(request, index)
        if tid == "deduction_predictor":
            if not solved:
                return f"```output\n{WRONG_OUTPUT}\n```"
            answer = run_program(bindings["snippet"], bindings["input_args"])
            return f"Let me trace it.\n```output\n{answer}\n```"
        if tid == "abduction_predictor":
            if not solved:
                return f"```input\n{WRONG_INPUT}\n```"
            answer = self.proposer.seed_inputs[bindings["snippet"]]
            return f"```input\n{answer}\n```"
        if tid == "induction_predictor":
            base = bindings["problem"].split("\n\nHints:")[0]
            program = self.proposer.problem_programs[base]
            if not solved:
                return f"```python\n{WRONG_PROGRAM}\n```"
            return f"```python\n{program}\n```"
        raise AssertionError(f"scripted solver got unexpected template {tid}")


def make_gateway(proposer, solver, judge=None) -> Gateway:
    transports = {ROLE_PROPOSER: ScriptedTransport(proposer),
                  ROLE_SOLVER: ScriptedTransport(solver)}
    if judge is not None:
        transports[ROLE_JUDGE] = ScriptedTransport(judge)
    return Gateway(transports, sleep=lambda _: None)


@pytest.fixture
def banks():
    return tiny_skill_bank(), tiny_attribute_bank()


@pytest.fixture
def supervisor():
    return SandboxSupervisor(InProcessExecutor(), limits=ExecLimits())


@pytest.fixture
def fixture_world(tmp_path, banks):
    """Proposer, solver, gateway, supervisor, store, config: ready to engine."""
    skill_bank, attribute_bank = banks
    config = RunConfig(solver_k=10, retry_budget=3,
                       induction_num_inputs=10, visible_count=6)
    proposer = ScriptedProposer(skill_bank, attribute_bank)
    solver = ScriptedSolver(proposer, k=config.solver_k)
    gateway = make_gateway(proposer, solver)
    supervisor = SandboxSupervisor(InProcessExecutor(), limits=config.limits)
    store = CurriculumStore(tmp_path / "store")
    return {
        "skill_bank": skill_bank, "attribute_bank": attribute_bank,
        "config": config, "proposer": proposer, "solver": solver,
        "gateway": gateway, "supervisor": supervisor, "store": store,
    }
