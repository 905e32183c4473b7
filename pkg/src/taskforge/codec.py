"""Parsers for every structured proposer/solver response format.

All parsers tolerate surrounding prose (models violate "output ONLY the JSON"
often) and fail only with the declared error types; malformed pieces inside a
batch are dropped with a recorded reason instead of aborting the batch.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from taskforge.model import (
    NormalizationFailed,
    canonical_skill_name,
    scan_delimiters,
)

FENCE_TAGS = ("python", "input", "output", "problem", "hint", "message")


class CodecError(Exception):
    """Base class for response-decoding failures."""


class NoEntryFunction(CodecError):
    """The program text contains no top-level `def f(`."""


class NoJsonObject(CodecError):
    """No parseable JSON object/array was found in the response."""


class SchemaViolation(CodecError):
    """A JSON payload was found but does not match the expected schema."""


class UnknownSkill(CodecError):
    """An audited skill name does not resolve in the active bank."""

    def __init__(self, name: str):
        super().__init__(f"skill {name!r} not in the active bank")
        self.name = name


@dataclass(frozen=True)
class MutationVariant:
    attributes: tuple[str, ...]
    description: str
    code: str
    input: str


@dataclass(frozen=True)
class CrossoverCandidate:
    skills: tuple[str, ...]
    justification: str
    code: str
    input: str


@dataclass(frozen=True)
class SkillAudit:
    main: str
    others: tuple[str, ...] = ()

    def all_names(self) -> frozenset[str]:
        return frozenset((self.main, *self.others))


@dataclass(frozen=True)
class BankExtraction:
    skills: dict[str, str]
    attributes: dict[str, str]


@dataclass
class VariantBatch:
    variants: list[MutationVariant] = field(default_factory=list)
    drops: list[tuple[str, str]] = field(default_factory=list)


# --- fenced blocks -----------------------------------------------------------

def _fence_pattern(tag: Optional[str]) -> re.Pattern:
    label = re.escape(tag) if tag else ""
    return re.compile(r"```" + label + r"[ \t]*\r?\n(.*?)```", re.DOTALL)


def _trim(body: str) -> str:
    return body.strip("\r\n")


def extract_fenced(text: str, tag: str) -> list[str]:
    """Return the bodies of all ```tag fences, in document order.

    Unlabeled fences never match a labeled tag; absent fences yield an
    empty list rather than an error.
    """
    if tag not in FENCE_TAGS:
        raise ValueError(f"unsupported fence tag {tag!r}")
    return [_trim(m.group(1)) for m in _fence_pattern(tag).finditer(text)]


def extract_unlabeled(text: str) -> list[str]:
    """Bodies of bare ``` fences (no language label)."""
    return [_trim(m.group(1)) for m in _fence_pattern(None).finditer(text)]


def unwrap_field(value: str, tag: str) -> str:
    """Unwrap a JSON field that may carry its payload inside a fence.

    Accepts the labeled fence, a bare fence, or raw text. Both ```input and
    bare ``` appear for inputs across the prompt catalog, so field unwrapping
    is deliberately lenient while extract_fenced stays strict.
    """
    labeled = extract_fenced(value, tag) if tag in FENCE_TAGS else []
    if labeled:
        return labeled[0]
    bare = extract_unlabeled(value)
    if bare:
        return bare[0]
    return value.strip()


# --- program truncation ------------------------------------------------------

_DEF_F_RE = re.compile(r"^def\s+f\s*\(", re.MULTILINE)


def strip_after_return(program: str) -> str:
    """Cut the program after the final return inside f's body.

    Imports and class definitions above f are retained; trailing driver code
    (prints, test calls) is removed. Uses the AST when the source parses and
    falls back to a textual scan otherwise.
    """
    if not _DEF_F_RE.search(program):
        raise NoEntryFunction("no top-level entry function f")
    lines = program.splitlines()
    cut = _ast_cut_line(program)
    if cut is None:
        cut = _textual_cut_line(lines)
    if cut is None:
        return program
    return "\n".join(lines[:cut])


def _ast_cut_line(program: str) -> Optional[int]:
    try:
        tree = ast.parse(program)
    except SyntaxError:
        return None
    entry = None
    for node in tree.body:
        if isinstance(node, ast.FunctionDef) and node.name == "f":
            entry = node
            break
    if entry is None:
        return None
    returns = [n for n in ast.walk(entry) if isinstance(n, ast.Return)]
    if not returns:
        return None
    return max(n.end_lineno or n.lineno for n in returns)


def _textual_cut_line(lines: list[str]) -> Optional[int]:
    def_idx = None
    for i, line in enumerate(lines):
        if re.match(r"def\s+f\s*\(", line):
            def_idx = i
            break
    if def_idx is None:
        return None
    last_return = None
    for i in range(def_idx + 1, len(lines)):
        line = lines[i]
        if line.strip() and not line[0] in (" ", "\t"):
            break  # first statement back at top level ends f's body
        if re.match(r"\s+return(\b|$)", line):
            last_return = i
    if last_return is None:
        return None
    return last_return + 1


# --- JSON extraction ---------------------------------------------------------

_MAX_JSON_CANDIDATES = 50


def _balanced_spans(text: str, open_ch: str, close_ch: str):
    """Yield balanced open_ch..close_ch spans, one per opening position.

    String-aware so braces inside JSON strings do not count. Yields the span
    starting at each opener so a failed outer candidate still lets the caller
    reach a valid nested payload; attempts are capped to bound worst-case cost.
    """
    n = len(text)
    i = text.find(open_ch)
    attempts = 0
    while 0 <= i < n and attempts < _MAX_JSON_CANDIDATES:
        attempts += 1
        depth = 0
        quote_open = False
        escaped = False
        end = None
        for j in range(i, n):
            ch = text[j]
            if quote_open:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    quote_open = False
                continue
            if ch == '"':
                quote_open = True
            elif ch == open_ch:
                depth += 1
            elif ch == close_ch:
                depth -= 1
                if depth == 0:
                    end = j
                    break
        if end is not None:
            yield text[i : end + 1]
        i = text.find(open_ch, i + 1)


def extract_json_payload(text: str, kind: str = "object"):
    """Find and parse the outermost JSON object (or array) in free text."""
    open_ch, close_ch = ("{", "}") if kind == "object" else ("[", "]")
    for span in _balanced_spans(text, open_ch, close_ch):
        try:
            return json.loads(span)
        except json.JSONDecodeError:
            continue
    raise NoJsonObject(f"no parseable JSON {kind} in response")


# --- batch / single-object parsers -------------------------------------------

_VARIANT_KEY_RE = re.compile(r"^variant_(\d+)$")


def parse_variant_batch(text: str, known_attributes: Optional[set[str]] = None,
                        max_variants: int = 32) -> VariantBatch:
    """Parse a mutation response into variants, dropping locally invalid ones."""
    payload = extract_json_payload(text)
    if not isinstance(payload, dict):
        raise NoJsonObject("mutation response is not a JSON object")
    keyed: list[tuple[int, str]] = []
    for key in payload:
        m = _VARIANT_KEY_RE.match(key)
        if m:
            keyed.append((int(m.group(1)), key))
    keyed.sort()
    batch = VariantBatch()
    for _, key in keyed[:max_variants]:
        entry = payload[key]
        try:
            batch.variants.append(_parse_variant(entry, known_attributes))
        except (SchemaViolation, NoEntryFunction, NormalizationFailed) as exc:
            batch.drops.append((key, str(exc)))
    return batch


def _parse_variant(entry, known_attributes: Optional[set[str]]) -> MutationVariant:
    if not isinstance(entry, dict):
        raise SchemaViolation("variant is not an object")
    raw_attrs = entry.get("complexity_attributes")
    if not isinstance(raw_attrs, list) or not raw_attrs:
        raise SchemaViolation("missing complexity_attributes")
    attrs: list[str] = []
    for raw in raw_attrs:
        if not isinstance(raw, str):
            continue
        try:
            name = canonical_skill_name(raw)
        except NormalizationFailed:
            continue
        if known_attributes is not None and name not in known_attributes:
            continue
        if name not in attrs:
            attrs.append(name)
    if not attrs:
        raise SchemaViolation("no known complexity attribute survives")
    for fld in ("code", "input"):
        if not isinstance(entry.get(fld), str) or not entry[fld].strip():
            raise SchemaViolation(f"missing {fld}")
    code = strip_after_return(unwrap_field(entry["code"], "python"))
    input_text = unwrap_field(entry["input"], "input")
    problems = validate_input_literal(input_text)
    if problems:
        raise SchemaViolation(f"bad input literal: {problems[0]}")
    description = entry.get("description", "")
    if not isinstance(description, str):
        description = ""
    return MutationVariant(tuple(attrs), description, code, input_text)


def parse_crossover(text: str) -> CrossoverCandidate:
    """Parse a crossover response; the justification field name varies."""
    payload = extract_json_payload(text)
    if not isinstance(payload, dict):
        raise NoJsonObject("crossover response is not a JSON object")
    combo = payload.get("skill_combination")
    if not isinstance(combo, list):
        raise SchemaViolation("missing skill_combination")
    skills: list[str] = []
    for raw in combo:
        if not isinstance(raw, str):
            raise SchemaViolation("skill_combination entries must be strings")
        try:
            name = canonical_skill_name(raw)
        except NormalizationFailed as exc:
            raise SchemaViolation(str(exc)) from exc
        if name not in skills:
            skills.append(name)
    if len(skills) < 2:
        raise SchemaViolation("crossover needs at least two distinct skills")
    justification = payload.get("crossover_justification",
                                payload.get("crossover_description", ""))
    if not isinstance(justification, str):
        justification = ""
    for fld in ("code", "input"):
        if not isinstance(payload.get(fld), str) or not payload[fld].strip():
            raise SchemaViolation(f"missing {fld}")
    code = strip_after_return(unwrap_field(payload["code"], "python"))
    input_text = unwrap_field(payload["input"], "input")
    problems = validate_input_literal(input_text)
    if problems:
        raise SchemaViolation(f"bad input literal: {problems[0]}")
    return CrossoverCandidate(tuple(skills), justification, code, input_text)


def parse_skill_audit(text: str, known_skills: Optional[set[str]] = None) -> SkillAudit:
    payload = extract_json_payload(text)
    if not isinstance(payload, dict):
        raise NoJsonObject("audit response is not a JSON object")
    raw_main = payload.get("main_skill")
    if not isinstance(raw_main, str) or not raw_main.strip():
        raise SchemaViolation("missing main_skill")
    try:
        main = canonical_skill_name(raw_main)
    except NormalizationFailed as exc:
        raise SchemaViolation(str(exc)) from exc
    raw_others = payload.get("other_skills", [])
    if not isinstance(raw_others, list):
        raise SchemaViolation("other_skills must be a list")
    others: list[str] = []
    for raw in raw_others:
        if not isinstance(raw, str):
            raise SchemaViolation("other_skills entries must be strings")
        try:
            name = canonical_skill_name(raw)
        except NormalizationFailed as exc:
            raise SchemaViolation(str(exc)) from exc
        if name != main and name not in others:
            others.append(name)
    if known_skills is not None:
        for name in (main, *others):
            if name not in known_skills:
                raise UnknownSkill(name)
    return SkillAudit(main, tuple(others))


def parse_bank_extraction(text: str) -> BankExtraction:
    payload = extract_json_payload(text)
    if not isinstance(payload, dict):
        raise NoJsonObject("extraction response is not a JSON object")
    maps: dict[str, dict[str, str]] = {}
    for key in ("skills", "attributes"):
        raw = payload.get(key)
        if not isinstance(raw, dict):
            raise SchemaViolation(f"missing {key} map")
        cleaned: dict[str, str] = {}
        for raw_name, desc in raw.items():
            if not isinstance(raw_name, str) or not isinstance(desc, str):
                continue
            if not desc.strip():
                continue
            try:
                name = canonical_skill_name(raw_name)
            except NormalizationFailed:
                continue
            cleaned.setdefault(name, desc.strip())
        maps[key] = cleaned
    return BankExtraction(maps["skills"], maps["attributes"])


def parse_skill_clusters(text: str) -> list[tuple[str, str, str]]:
    """Parse the clustering response: (category, skill, description) triples."""
    payload = extract_json_payload(text, kind="array")
    if not isinstance(payload, list):
        raise NoJsonObject("cluster response is not a JSON array")
    out: list[tuple[str, str, str]] = []
    seen: set[str] = set()
    for group in payload:
        if not isinstance(group, dict):
            continue
        raw_cat = group.get("category", "")
        members = group.get("members", [])
        if not isinstance(members, list):
            continue
        try:
            category = canonical_skill_name(raw_cat) if isinstance(raw_cat, str) and raw_cat.strip() else ""
        except NormalizationFailed:
            category = ""
        for member in members:
            if not isinstance(member, dict):
                continue
            raw_name = member.get("skill")
            desc = member.get("description", "")
            if not isinstance(raw_name, str) or not isinstance(desc, str) or not desc.strip():
                continue
            try:
                name = canonical_skill_name(raw_name)
            except NormalizationFailed:
                continue
            if name in seen:
                continue
            seen.add(name)
            out.append((category, name, desc.strip()))
    if not out:
        raise SchemaViolation("cluster response has no valid members")
    return out


def parse_attribute_clusters(text: str) -> dict[str, str]:
    """Parse the attribute clustering response: merged name -> description map."""
    try:
        payload = extract_json_payload(text, kind="array")
    except NoJsonObject:
        payload = [extract_json_payload(text, kind="object")]
    merged: dict[str, str] = {}
    for obj in payload if isinstance(payload, list) else [payload]:
        if not isinstance(obj, dict):
            continue
        for raw_name, desc in obj.items():
            if not isinstance(raw_name, str) or not isinstance(desc, str) or not desc.strip():
                continue
            try:
                name = canonical_skill_name(raw_name)
            except NormalizationFailed:
                continue
            merged.setdefault(name, desc.strip())
    if not merged:
        raise SchemaViolation("attribute cluster response has no valid entries")
    return merged


def validate_input_literal(text: str) -> list[str]:
    """Structural pre-check of an argument literal; evaluation stays with the harness."""
    if not text or not text.strip():
        return ["empty"]
    return scan_delimiters(text)
