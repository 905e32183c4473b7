"""Append-only journaled persistence, diversity/difficulty metrics, export.

The journal is a single line-JSON file with dense sequence numbers and
per-record checksums; replaying any prefix reconstructs a valid engine state,
which is what makes interrupted runs resumable. All metrics are pure functions
of the journal.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from taskforge.model import (
    Bank,
    BankEntry,
    ComboLedger,
    MutationOrigin,
    SeedOrigin,
    Task,
    TaskMode,
    task_from_dict,
    task_to_dict,
)

EVENT_BANKS = "banks"
EVENT_PROPOSED = "proposed"
EVENT_ACCEPTED = "accepted"
EVENT_REJECTED = "rejected"
EVENT_EXHAUSTED = "exhausted"
EVENT_COMPLETED = "completed"

EVENTS = (EVENT_BANKS, EVENT_PROPOSED, EVENT_ACCEPTED, EVENT_REJECTED,
          EVENT_EXHAUSTED, EVENT_COMPLETED)

REASON_NOVELTY = "NoveltyViolated"


class StoreError(Exception):
    pass


class JournalCorrupt(StoreError):
    pass


class EmptyStore(StoreError):
    pass


class NoMultiSkillTasks(StoreError):
    pass


class MissingPartition(StoreError):
    pass


def _checksum(seq: int, ts: float, event: str, payload: dict) -> str:
    blob = json.dumps([seq, ts, event, payload], sort_keys=True,
                      ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class JournalRecord:
    seq: int
    ts: float
    event: str
    payload: dict

    def to_line(self) -> str:
        return json.dumps({
            "seq": self.seq, "ts": self.ts, "event": self.event,
            "payload": self.payload,
            "check": _checksum(self.seq, self.ts, self.event, self.payload),
        }, ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_line(cls, line: str) -> "JournalRecord":
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise JournalCorrupt(f"unparseable journal line: {exc}") from exc
        record = cls(data["seq"], data["ts"], data["event"], data["payload"])
        if data.get("check") != _checksum(record.seq, record.ts, record.event,
                                          record.payload):
            raise JournalCorrupt(f"checksum mismatch at seq {record.seq}")
        if record.event not in EVENTS:
            raise JournalCorrupt(f"unknown event {record.event!r} at seq {record.seq}")
        return record


class Journal:
    """Single-writer append-only record log with crash-safe appends."""

    def __init__(self, path: Path, on_append: Optional[Callable] = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._next_seq = 0
        self._on_append = on_append
        if self.path.exists():
            for record in self.iter_records():
                self._next_seq = record.seq + 1

    def append(self, event: str, payload: dict) -> JournalRecord:
        record = JournalRecord(self._next_seq, time.time(), event, payload)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(record.to_line() + "\n")
            fh.flush()
        self._next_seq += 1
        if self._on_append is not None:
            self._on_append(record)
        return record

    def iter_records(self) -> Iterable[JournalRecord]:
        if not self.path.exists():
            return
        expected = 0
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = JournalRecord.from_line(line)
                if record.seq != expected:
                    raise JournalCorrupt(
                        f"sequence gap: expected {expected}, found {record.seq}")
                expected += 1
                yield record


@dataclass
class EngineState:
    """Everything replay reconstructs: accepted set, ledger, slot outcomes."""

    skill_bank: Optional[Bank] = None
    attribute_bank: Optional[Bank] = None
    accepted: dict[str, Task] = field(default_factory=dict)
    accepted_order: list[str] = field(default_factory=list)
    done_slots: dict[str, str] = field(default_factory=dict)
    combo_ledger: ComboLedger = field(default_factory=ComboLedger)
    proposed_count: int = 0
    accepted_count: int = 0
    rejected_count: int = 0
    exhausted_count: int = 0

    def apply(self, record: JournalRecord) -> None:
        event, payload = record.event, record.payload
        if event == EVENT_BANKS:
            self.skill_bank = _bank_from_payload(payload["skills"])
            self.attribute_bank = _bank_from_payload(payload["attributes"])
            self.done_slots["banks"] = "completed"
        elif event == EVENT_PROPOSED:
            self.proposed_count += 1
        elif event == EVENT_ACCEPTED:
            self.accepted_count += 1
            task = task_from_dict(payload["task"])
            if task.id not in self.accepted:
                self.accepted[task.id] = task
                self.accepted_order.append(task.id)
            for target, key in payload.get("ledger_keys", ()):
                self.combo_ledger.insert(target, key)
        elif event == EVENT_REJECTED:
            self.rejected_count += 1
        elif event == EVENT_EXHAUSTED:
            self.exhausted_count += 1
            self.done_slots[payload["slot"]] = f"exhausted:{payload.get('reason', '')}"
        elif event == EVENT_COMPLETED:
            self.done_slots[payload["slot"]] = "completed"

    def tasks(self) -> list[Task]:
        return [self.accepted[tid] for tid in self.accepted_order]

    def is_done(self, slot: str) -> bool:
        return slot in self.done_slots


def _bank_from_payload(entries: list) -> Bank:
    return Bank(BankEntry(e["name"], e["description"], e.get("category", ""))
                for e in entries)


def bank_to_payload(bank: Bank) -> list:
    return [{"name": e.name, "description": e.description, "category": e.category}
            for e in bank]


def replay(journal: Journal) -> EngineState:
    state = EngineState()
    for record in journal.iter_records():
        state.apply(record)
    return state


class CurriculumStore:
    """Journal plus a live state kept in lockstep through the same fold."""

    def __init__(self, directory: Path, on_append: Optional[Callable] = None):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.journal = Journal(self.directory / "journal.ndjson", on_append=on_append)
        self.state = replay(self.journal)

    def append(self, event: str, payload: dict) -> JournalRecord:
        record = self.journal.append(event, payload)
        self.state.apply(record)
        return record

    # -- metrics ---------------------------------------------------------------

    def skill_frequency_cdf(self, support: Optional[list[str]] = None
                            ) -> tuple[list[float], float]:
        """Descending-frequency CDF over main skills and its normalized L1
        distance to the uniform CDF on the same support."""
        tasks = self.state.tasks()
        if not tasks:
            raise EmptyStore("no accepted tasks")
        counts: dict[str, int] = {}
        for task in tasks:
            counts[task.skills.main] = counts.get(task.skills.main, 0) + 1
        if support is None:
            support_counts = sorted(counts.values(), reverse=True)
        else:
            support_counts = sorted((counts.get(name, 0) for name in support),
                                    reverse=True)
        total = sum(support_counts)
        if total == 0:
            raise EmptyStore("support has no accepted tasks")
        m = len(support_counts)
        cdf: list[float] = []
        acc = 0
        for count in support_counts:
            acc += count
            cdf.append(acc / total)
        uniform = [(i + 1) / m for i in range(m)]
        distance = sum(abs(c - u) for c, u in zip(cdf, uniform)) / m
        return cdf, distance

    def unique_combination_ratio(self) -> float:
        """Distinct combination keys over accepted multi-skill tasks."""
        keys = []
        for task in self.state.tasks():
            names = task.skills.all_names()
            if len(names) >= 2:
                keys.append("+".join(sorted(names)))
        if not keys:
            raise NoMultiSkillTasks("no accepted task carries multiple skills")
        return len(set(keys)) / len(keys)

    def discard_rate(self) -> float:
        if self.state.proposed_count == 0:
            return 0.0
        return self.state.rejected_count / self.state.proposed_count

    def difficulty_shift(self) -> tuple[float, float]:
        """Mean recorded pass rate of seeds vs attribute-mutated tasks."""
        seed_rates: list[float] = []
        mutated_rates: list[float] = []
        for task in self.state.tasks():
            if task.mode is TaskMode.INDUCTION or task.fitness is None:
                continue
            rate = task.fitness.pass_rate
            if rate is None:
                continue
            if isinstance(task.provenance, SeedOrigin):
                seed_rates.append(rate)
            elif isinstance(task.provenance, MutationOrigin):
                mutated_rates.append(rate)
        if not seed_rates or not mutated_rates:
            raise MissingPartition("need both seed and mutated tasks with pass rates")
        return (sum(seed_rates) / len(seed_rates),
                sum(mutated_rates) / len(mutated_rates))

    def metrics(self, support: Optional[list[str]] = None) -> dict:
        report: dict = {
            "accepted": self.state.accepted_count,
            "proposed": self.state.proposed_count,
            "rejected": self.state.rejected_count,
            "discard_rate": self.discard_rate(),
        }
        try:
            cdf, distance = self.skill_frequency_cdf(support)
            report["skill_cdf"] = cdf
            report["skill_uniform_distance"] = distance
        except EmptyStore:
            report["skill_cdf"] = None
            report["skill_uniform_distance"] = None
        try:
            report["unique_combination_ratio"] = self.unique_combination_ratio()
        except NoMultiSkillTasks:
            report["unique_combination_ratio"] = None
        try:
            seed_mean, mutated_mean = self.difficulty_shift()
            report["difficulty_shift"] = {"seed_mean": seed_mean,
                                          "mutated_mean": mutated_mean}
        except MissingPartition:
            report["difficulty_shift"] = None
        return report

    # -- export ------------------------------------------------------------------

    def export_dataset(self, destination: Path, gateway,
                       dedupe_against: Optional[set[str]] = None) -> Path:
        """One line-JSON record per accepted task; byte-deterministic."""
        from taskforge.fitness import render_solver_prompt

        destination = Path(destination)
        destination.parent.mkdir(parents=True, exist_ok=True)
        seen = set(dedupe_against or ())
        lines = []
        for task in self.state.tasks():
            if task.id in seen:
                continue
            seen.add(task.id)
            record = {
                "id": task.id,
                "mode": task.mode.value,
                "solver_prompt": render_solver_prompt(gateway, task),
                "grading": _grading_payload(task),
                "skills": {"main": task.skills.main,
                           "others": list(task.skills.others)},
                "provenance": task_to_dict(task)["provenance"],
                "pass_rate": task.fitness.pass_rate if task.fitness else None,
            }
            lines.append(json.dumps(record, ensure_ascii=False, sort_keys=True))
        destination.write_text("\n".join(lines) + ("\n" if lines else ""),
                               encoding="utf-8")
        return destination


def _grading_payload(task: Task) -> dict:
    if task.mode is TaskMode.DEDUCTION:
        return {"output": task.output}
    if task.mode is TaskMode.ABDUCTION:
        return {"program": task.program, "output": task.output}
    return {"hidden_pairs": [list(p) for p in task.induction.hidden()]}
