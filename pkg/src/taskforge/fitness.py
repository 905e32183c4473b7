"""The multi-objective acceptance gate and per-mode solver graders.

A task passes when all three hierarchical checks hold: the program executes
deterministically (and induction pairs are faithful), the skill audit detects
the target skill, and the solver's pass rate over k attempts falls strictly
inside (0, 1). Later checks never run once an earlier one fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from taskforge import codec
from taskforge.gateway import (
    ChatRequest,
    Gateway,
    ROLE_JUDGE,
    ROLE_PROPOSER,
    ROLE_SOLVER,
    SamplingParams,
)
from taskforge.model import (
    Bank,
    CrossoverOrigin,
    SkillLabels,
    Task,
    TaskMode,
)
from taskforge.sandbox import ExecResult, ExecStatus, SandboxSupervisor

STAGE_NONE = "none"
STAGE_EXEC = "exec"
STAGE_SKILL = "skill"
STAGE_LEARN = "learn"

PREDICTOR_TEMPLATES = {
    TaskMode.DEDUCTION: "deduction_predictor",
    TaskMode.ABDUCTION: "abduction_predictor",
    TaskMode.INDUCTION: "induction_predictor",
}


class FitnessError(Exception):
    """Base class for fitness-stage failures."""


class AuditUnparseable(FitnessError):
    """The skill audit response stayed unparseable after the retry budget."""


class Unparseable(FitnessError):
    """A judge response was not a single Yes/No after one retry."""


@dataclass
class FitnessReport:
    v_exec: Optional[bool] = None
    v_skill: Optional[bool] = None
    v_learn: Optional[bool] = None
    pass_rate: Optional[float] = None
    k: Optional[int] = None
    exec_result: Optional[ExecResult] = None
    audit: Optional[codec.SkillAudit] = None
    stage_reached: str = STAGE_NONE
    reasons: list[str] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return bool(self.v_exec and self.v_skill and self.v_learn)

    def to_dict(self) -> dict:
        return {
            "v_exec": self.v_exec, "v_skill": self.v_skill, "v_learn": self.v_learn,
            "pass_rate": self.pass_rate, "k": self.k,
            "exec_result": self.exec_result.to_dict() if self.exec_result else None,
            "audit": ({"main": self.audit.main, "others": list(self.audit.others)}
                      if self.audit else None),
            "stage_reached": self.stage_reached,
            "reasons": list(self.reasons),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitnessReport":
        audit = None
        if data.get("audit"):
            audit = codec.SkillAudit(data["audit"]["main"],
                                     tuple(data["audit"]["others"]))
        exec_result = None
        if data.get("exec_result"):
            exec_result = ExecResult.from_dict(data["exec_result"])
        return cls(
            v_exec=data.get("v_exec"), v_skill=data.get("v_skill"),
            v_learn=data.get("v_learn"), pass_rate=data.get("pass_rate"),
            k=data.get("k"), exec_result=exec_result, audit=audit,
            stage_reached=data.get("stage_reached", STAGE_NONE),
            reasons=list(data.get("reasons", ())),
        )


def check_learn(pass_rate: float) -> bool:
    """Strict open-interval learnability: boundary rates 0 and 1 never pass."""
    if not 0.0 <= pass_rate <= 1.0:
        raise ValueError(f"pass rate out of range: {pass_rate}")
    return 0.0 < pass_rate < 1.0


def format_pairs(pairs) -> str:
    return "\n".join(f"{inp} -> {out}" for inp, out in pairs)


def solver_problem_text(task: Task) -> str:
    """Problem statement shown to the solver, with any hints appended."""
    spec = task.induction
    text = spec.problem
    if spec.hints:
        lines = [f"{i}. {h}" for i, h in enumerate(spec.hints, start=1)]
        text = text + "\n\nHints:\n" + "\n".join(lines)
    return text


def solver_bindings(task: Task) -> dict:
    if task.mode is TaskMode.DEDUCTION:
        return {"snippet": task.program, "input_args": task.input}
    if task.mode is TaskMode.ABDUCTION:
        return {"snippet": task.program, "output": task.output}
    return {"input_output_pairs": format_pairs(task.induction.visible()),
            "problem": solver_problem_text(task)}


def render_solver_prompt(gateway: Gateway, task: Task) -> str:
    """The exact text the solver sees; export reuses this for prompt parity."""
    return gateway.render(PREDICTOR_TEMPLATES[task.mode], solver_bindings(task))


class FitnessChecker:
    def __init__(self, gateway: Gateway, supervisor: SandboxSupervisor,
                 skill_bank: Bank, solver_k: int = 10,
                 solver_sampling: Optional[SamplingParams] = None,
                 audit_retries: int = 3, require_full_combination: bool = True):
        self.gateway = gateway
        self.supervisor = supervisor
        self.skill_bank = skill_bank
        self.solver_k = solver_k
        self.solver_sampling = solver_sampling or SamplingParams(
            temperature=1.0, top_p=0.99)
        self.audit_retries = audit_retries
        self.require_full_combination = require_full_combination

    # -- stage 1: executability ------------------------------------------------

    def check_exec(self, task: Task) -> tuple[bool, ExecResult]:
        if task.mode is TaskMode.INDUCTION:
            return self._check_induction_faithful(task)
        violations = self.supervisor.guard(task.program)
        if violations:
            return False, ExecResult(ExecStatus.GUARD_VIOLATION,
                                     diagnostic="; ".join(violations))
        result = self.supervisor.execute_checked(task.program, task.input)
        return result.ok, result

    def _check_induction_faithful(self, task: Task) -> tuple[bool, ExecResult]:
        total = 0.0
        for index, (inp, recorded) in enumerate(task.induction.pairs):
            result = self.supervisor.execute_checked(task.program, inp)
            total += result.duration
            if not result.ok:
                return False, ExecResult(
                    result.status,
                    diagnostic=f"pair {index}: {result.diagnostic}",
                    duration=total)
            if result.output != recorded:
                return False, ExecResult(
                    ExecStatus.RUNTIME_ERROR,
                    diagnostic=(f"pair {index}: recorded output {recorded!r} "
                                f"but execution produced {result.output!r}"),
                    duration=total)
        return True, ExecResult(ExecStatus.OK, output=task.induction.pairs[-1][1],
                                duration=total)

    # -- stage 2: skill alignment ----------------------------------------------

    def check_skill(self, task: Task) -> tuple[bool, Optional[codec.SkillAudit], str]:
        prompt_bindings = {"skill_list": self.skill_bank.listing(),
                           "code_snippet": task.program}
        audit = None
        last_error = ""
        for _ in range(self.audit_retries):
            response = self.gateway.complete(ChatRequest(
                template_id="skill_reflection", bindings=prompt_bindings,
                role=ROLE_PROPOSER, stage="skill_audit"))
            try:
                audit = codec.parse_skill_audit(
                    response.texts[0], known_skills=set(self.skill_bank.names()))
                break
            except codec.CodecError as exc:
                last_error = str(exc)
        if audit is None:
            return False, None, f"audit unparseable: {last_error}"
        detected = audit.all_names()
        target = task.skills.main
        if target not in detected:
            return False, audit, f"target skill {target!r} not detected"
        if (self.require_full_combination
                and isinstance(task.provenance, CrossoverOrigin)):
            missing = [s for s in task.provenance.combination if s not in detected]
            if missing:
                return False, audit, f"combination members not detected: {missing}"
        return True, audit, ""

    # -- stage 3: learnability ---------------------------------------------------

    def grade(self, task: Task, solver_answer: str) -> tuple[bool, str]:
        """Binary solved verdict for one solver response."""
        if task.mode is TaskMode.DEDUCTION:
            blocks = codec.extract_fenced(solver_answer, "output")
            if not blocks:
                return False, "no answer block"
            echo = self.supervisor.echo(blocks[-1])
            if not echo.ok:
                return False, f"answer not a literal: {echo.diagnostic}"
            return echo.output == task.output, ""
        if task.mode is TaskMode.ABDUCTION:
            blocks = codec.extract_fenced(solver_answer, "input")
            if not blocks:
                return False, "no answer block"
            result = self.supervisor.execute(task.program, blocks[-1])
            if not result.ok:
                return False, f"predicted input failed: {result.status.value}"
            return result.output == task.output, ""
        return self._grade_induction(task, solver_answer)

    def _grade_induction(self, task: Task, solver_answer: str) -> tuple[bool, str]:
        blocks = codec.extract_fenced(solver_answer, "python")
        if not blocks:
            return False, "no answer block"
        try:
            candidate = codec.strip_after_return(blocks[-1])
        except codec.NoEntryFunction:
            return False, "candidate has no entry function f"
        if self.supervisor.guard(candidate):
            return False, "candidate violates static guard"
        for inp, expected in task.induction.hidden():
            result = self.supervisor.execute(candidate, inp)
            if not result.ok or result.output != expected:
                return False, f"candidate failed hidden pair {inp!r}"
        return True, ""

    def estimate_pass_rate(self, task: Task) -> float:
        sampling = SamplingParams(
            temperature=self.solver_sampling.temperature,
            top_p=self.solver_sampling.top_p,
            n_samples=self.solver_k,
            max_output_tokens=self.solver_sampling.max_output_tokens)
        response = self.gateway.complete(ChatRequest(
            template_id=PREDICTOR_TEMPLATES[task.mode],
            bindings=solver_bindings(task), sampling=sampling,
            role=ROLE_SOLVER, stage="learnability"))
        solved = sum(1 for text in response.texts if self.grade(task, text)[0])
        return solved / self.solver_k

    # -- the composite gate ------------------------------------------------------

    def evaluate(self, task: Task) -> tuple[Task, FitnessReport]:
        """Run exec -> skill -> learn with short-circuiting.

        Returns the finalized task copy (canonical output, audited skill
        labels, attached report) alongside the report itself.
        """
        report = FitnessReport(k=self.solver_k)

        report.stage_reached = STAGE_EXEC
        ok, exec_result = self.check_exec(task)
        report.v_exec = ok
        report.exec_result = exec_result
        if not ok:
            report.reasons.append(f"exec: {exec_result.status.value}: "
                                  f"{exec_result.diagnostic}")
            return task.with_fitness(report), report
        if task.mode is not TaskMode.INDUCTION:
            task = task.with_output(exec_result.output)

        report.stage_reached = STAGE_SKILL
        if task.mode is TaskMode.INDUCTION:
            # The ground-truth program was audited when its source task was
            # accepted; induction re-verification is execution-side only.
            report.v_skill = True
        else:
            ok, audit, reason = self.check_skill(task)
            report.v_skill = ok
            report.audit = audit
            if not ok:
                report.reasons.append(f"skill: {reason}")
                return task.with_fitness(report), report
            others = tuple(s for s in sorted(audit.all_names() - {task.skills.main}))
            task = task.with_skills(SkillLabels(task.skills.main, others))

        report.stage_reached = STAGE_LEARN
        rate = self.estimate_pass_rate(task)
        report.pass_rate = rate
        report.v_learn = check_learn(rate)
        if not report.v_learn:
            report.reasons.append(f"learn: pass rate {rate} outside (0, 1)")
        return task.with_fitness(report), report

    # -- auxiliary judge audits ----------------------------------------------------

    def judge_yes_no(self, template_id: str, bindings: dict) -> bool:
        if template_id not in ("judge_synergy", "judge_solver_alignment"):
            raise ValueError(f"not a judge template: {template_id!r}")
        for _ in range(2):
            response = self.gateway.complete(ChatRequest(
                template_id=template_id, bindings=bindings,
                role=ROLE_JUDGE, stage="judge"))
            word = response.texts[0].strip().strip(".!,:;\"'").lower()
            if word == "yes":
                return True
            if word == "no":
                return False
        raise Unparseable(f"judge reply was not yes/no for {template_id}")
