"""Builds the codec golden corpus: 200+ cases with hand-derived expectations.

Every expected outcome follows from how the case text was constructed, never
from running the parser, so the corpus stays an independent oracle. Run once
and commit the JSON; the test replays it.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

CASES: list[dict] = []


def case(op: str, args: dict, expect: dict) -> None:
    CASES.append({"op": op, "args": args, "expect": expect})


def fenced(tag: str, body: str) -> str:
    return f"```{tag}\n{body}\n```"


# --- extract_fenced: valid ----------------------------------------------------

BODIES = {
    "input": ["'a', 3", "'John', {'age': 20, 'city': 'New York'}", "1, 2, 3",
              "[1, [2, [3]]], 'x'", "-42", "{'k': (1, 2)}, 'v'", "0", "'', ''"],
    "python": ["def f(a):\n    return a", "def f(a, b):\n    return a - b",
               "import math\ndef f(x):\n    return x", "def f(s):\n    return s[::-1]"],
    "output": ["3", "'text'", "{'age': 20}", "(1, 2)", "[['a']]"],
    "problem": ["You are given an array of meeting times.",
                "A courier sorts parcels by weight."],
    "hint": ["Think about a running total.", "Use a stack.",
             "The answer is monotone in the input."],
    "message": ["Deduce the rule from the pairs."],
}

for tag, bodies in BODIES.items():
    for body in bodies:
        case("extract_fenced",
             {"text": f"Some prose first.\n{fenced(tag, body)}\ntrailing words.",
              "tag": tag},
             {"kind": "bodies", "values": [body]})

# multiple fences in document order
for tag in ("input", "hint", "python"):
    first, second = BODIES[tag][0], BODIES[tag][1]
    text = f"{fenced(tag, first)}\nbetween\n{fenced(tag, second)}"
    case("extract_fenced", {"text": text, "tag": tag},
         {"kind": "bodies", "values": [first, second]})

# labeled tags never match other labels or bare fences
case("extract_fenced", {"text": fenced("python", "def f(a):\n    return a"),
                        "tag": "input"}, {"kind": "bodies", "values": []})
case("extract_fenced", {"text": "```\n1, 2\n```", "tag": "input"},
     {"kind": "bodies", "values": []})
case("extract_fenced", {"text": "```inputs\n1\n```", "tag": "input"},
     {"kind": "bodies", "values": []})

# truncated fences never yield bodies
for tag in ("input", "python", "output"):
    case("extract_fenced", {"text": f"```{tag}\nhalf a body", "tag": tag},
         {"kind": "bodies", "values": []})
case("extract_fenced", {"text": "no fences at all", "tag": "hint"},
     {"kind": "bodies", "values": []})
case("extract_fenced", {"text": "", "tag": "problem"},
     {"kind": "bodies", "values": []})

# a fence marker inside a body closes the fence early; only newlines are
# trimmed from the captured text, spaces stay
tricky = "line with ``` inside"
case("extract_fenced", {"text": fenced("problem", tricky), "tag": "problem"},
     {"kind": "bodies", "values": [tricky.split("```")[0]]})

# cross-tag isolation: a fence labeled X never answers a query for Y
TAGS = ("python", "input", "output", "problem", "hint", "message")
for fence_tag, query_tag in [("python", "output"), ("output", "python"),
                             ("input", "output"), ("output", "input"),
                             ("problem", "message"), ("message", "problem"),
                             ("hint", "problem"), ("python", "hint"),
                             ("input", "message"), ("message", "input")]:
    case("extract_fenced",
         {"text": fenced(fence_tag, "body text"), "tag": query_tag},
         {"kind": "bodies", "values": []})

# a labeled fence flanked by bare fences still resolves precisely
flanked = "```\nnoise\n```\n" + fenced("output", "42") + "\n```\nmore noise\n```"
case("extract_fenced", {"text": flanked, "tag": "output"},
     {"kind": "bodies", "values": ["42"]})
# windows line endings
case("extract_fenced", {"text": "```input\r\n1, 2\r\n```", "tag": "input"},
     {"kind": "bodies", "values": ["1, 2"]})

# --- strip_after_return ---------------------------------------------------------

CLEAN_PROGRAMS = [
    "def f(a):\n    return a",
    "def f(a, b):\n    total = a\n    total += b\n    return total",
    "import math\n\ndef f(x):\n    return math.floor(x)",
    "class Node:\n    pass\n\ndef f(a):\n    n = Node()\n    n.v = a\n    return n.v",
    "def f(a):\n    if a > 0:\n        return a\n    return -a",
    "def f(s):\n    def inner(x):\n        return x * 2\n    return inner(len(s))",
]
TRAILERS = ["\nprint(f(1))", "\nresult = f(2)\nassert result", "\nf(3)",
            "\n# driver\nf(0)\nf(1)"]

for program in CLEAN_PROGRAMS:
    case("strip_after_return", {"program": program},
         {"kind": "value", "value": program})
    for trailer in TRAILERS:
        case("strip_after_return", {"program": program + trailer},
             {"kind": "value", "value": program})

case("strip_after_return", {"program": "def g(a):\n    return a"},
     {"kind": "error", "error": "NoEntryFunction"})
case("strip_after_return", {"program": "x = 1\ny = 2"},
     {"kind": "error", "error": "NoEntryFunction"})
case("strip_after_return", {"program": ""},
     {"kind": "error", "error": "NoEntryFunction"})
# no return: cut undefined, text preserved
case("strip_after_return", {"program": "def f(a):\n    pass"},
     {"kind": "value", "value": "def f(a):\n    pass"})
# broken syntax after the function: textual cut still lands on the return
case("strip_after_return",
     {"program": "def f(a):\n    return a\n!!! not python ((("},
     {"kind": "value", "value": "def f(a):\n    return a"})

# --- parse_variant_batch ---------------------------------------------------------


def variant(i: int, code_body: str = None, input_body: str = None,
            attrs=None, drop_field: str = None) -> dict:
    entry = {
        "complexity_attributes": attrs or ["input_size_n"],
        "description": f"variant {i} raises the scale",
        "code": "```python\n" + (code_body or f"def f(a):\n    return a + {i}") + "\n```",
        "input": "```input\n" + (input_body or str(i)) + "\n```",
    }
    if drop_field:
        del entry[drop_field]
    return entry


def batch_text(entries: dict, prose: str = "") -> str:
    return prose + json.dumps(entries)


full = {f"variant_{i}": variant(i) for i in range(1, 11)}
case("parse_variant_batch", {"text": batch_text(full)},
     {"kind": "batch", "count": 10, "drops": 0})
case("parse_variant_batch",
     {"text": batch_text(full, "Here is the JSON you asked for:\n")},
     {"kind": "batch", "count": 10, "drops": 0})

for missing in ("input", "code", "complexity_attributes", "description"):
    entries = {f"variant_{i}": variant(i) for i in range(1, 11)}
    entries["variant_2"] = variant(2, drop_field=missing)
    expected = {"kind": "batch",
                "count": 10 if missing == "description" else 9,
                "drops": 0 if missing == "description" else 1}
    case("parse_variant_batch", {"text": batch_text(entries)}, expected)

entries = {f"variant_{i}": variant(i) for i in range(1, 6)}
entries["variant_3"] = variant(3, code_body="def g(a):\n    return a")
case("parse_variant_batch", {"text": batch_text(entries)},
     {"kind": "batch", "count": 4, "drops": 1})

entries = {f"variant_{i}": variant(i) for i in range(1, 6)}
entries["variant_4"] = variant(4, input_body="[1, 2")
case("parse_variant_batch", {"text": batch_text(entries)},
     {"kind": "batch", "count": 4, "drops": 1})

# bare input fences are accepted for the input field
entries = {"variant_1": variant(1)}
entries["variant_1"]["input"] = "```\n9\n```"
case("parse_variant_batch", {"text": batch_text(entries)},
     {"kind": "batch", "count": 1, "drops": 0})

# trailing driver code inside variant code gets truncated
entries = {"variant_1": variant(1, code_body="def f(a):\n    return a\nprint(f(1))")}
case("parse_variant_batch", {"text": batch_text(entries)},
     {"kind": "batch", "count": 1, "drops": 0,
      "first_code": "def f(a):\n    return a"})

for text in ("no json here, sorry", "variant_1: looks like yaml", ""):
    case("parse_variant_batch", {"text": text},
         {"kind": "error", "error": "NoJsonObject"})
# truncated JSON never balances
case("parse_variant_batch", {"text": batch_text(full)[:120]},
     {"kind": "error", "error": "NoJsonObject"})

# --- parse_crossover ----------------------------------------------------------------

XO = {
    "skill_combination": ["dijkstra", "prefix_sum"],
    "crossover_justification": "prefix sums weight the relaxation order",
    "code": "```python\ndef f(a):\n    return a * 2\n```",
    "input": "```input\n5\n```",
}
case("parse_crossover", {"text": json.dumps(XO)},
     {"kind": "crossover", "skills": ["dijkstra", "prefix_sum"]})
case("parse_crossover", {"text": "Of course!\n" + json.dumps(XO) + "\nDone."},
     {"kind": "crossover", "skills": ["dijkstra", "prefix_sum"]})

alias = dict(XO)
alias["crossover_description"] = alias.pop("crossover_justification")
case("parse_crossover", {"text": json.dumps(alias)},
     {"kind": "crossover", "skills": ["dijkstra", "prefix_sum"]})

mixed_names = dict(XO, skill_combination=["Dijkstra", "Prefix Sum", "two-pointers"])
case("parse_crossover", {"text": json.dumps(mixed_names)},
     {"kind": "crossover", "skills": ["dijkstra", "prefix_sum", "two_pointers"]})

case("parse_crossover",
     {"text": json.dumps(dict(XO, skill_combination=["dijkstra"]))},
     {"kind": "error", "error": "SchemaViolation"})
case("parse_crossover",
     {"text": json.dumps(dict(XO, skill_combination=["dijkstra", "dijkstra"]))},
     {"kind": "error", "error": "SchemaViolation"})
for missing in ("code", "input", "skill_combination"):
    broken = {k: v for k, v in XO.items() if k != missing}
    case("parse_crossover", {"text": json.dumps(broken)},
         {"kind": "error", "error": "SchemaViolation"})
case("parse_crossover", {"text": "no object"},
     {"kind": "error", "error": "NoJsonObject"})
case("parse_crossover",
     {"text": json.dumps(dict(XO, code="```python\ndef g(a):\n    return a\n```"))},
     {"kind": "error", "error": "NoEntryFunction"})

# --- parse_skill_audit -----------------------------------------------------------------

AUDITS = [
    ({"main_skill": "binary_search", "other_skills": ["sorting"]},
     {"kind": "audit", "main": "binary_search", "others": ["sorting"]}),
    ({"main_skill": "bfs", "other_skills": []},
     {"kind": "audit", "main": "bfs", "others": []}),
    ({"main_skill": "Two Pointers", "other_skills": ["Sliding Window"]},
     {"kind": "audit", "main": "two_pointers", "others": ["sliding_window"]}),
    ({"main_skill": "bfs", "other_skills": ["bfs", "dfs"]},
     {"kind": "audit", "main": "bfs", "others": ["dfs"]}),
    ({"main_skill": "bfs"},
     {"kind": "audit", "main": "bfs", "others": []}),
]
for payload, expect in AUDITS:
    case("parse_skill_audit", {"text": json.dumps(payload)}, expect)
    case("parse_skill_audit",
         {"text": "After inspecting the code:\n" + json.dumps(payload)}, expect)

case("parse_skill_audit", {"text": '{"other_skills": ["bfs"]}'},
     {"kind": "error", "error": "SchemaViolation"})
case("parse_skill_audit", {"text": '{"main_skill": "", "other_skills": []}'},
     {"kind": "error", "error": "SchemaViolation"})
case("parse_skill_audit", {"text": '{"main_skill": "3sum", "other_skills": []}'},
     {"kind": "error", "error": "SchemaViolation"})
case("parse_skill_audit", {"text": "the main skill is bfs"},
     {"kind": "error", "error": "NoJsonObject"})

# --- parse_bank_extraction -----------------------------------------------------------------

case("parse_bank_extraction",
     {"text": json.dumps({"skills": {"a_star": "guided search", "bfs": "queue",
                                     "dfs": "stack"},
                          "attributes": {"input_size_n": "scale",
                                         "value_range": "domain"}})},
     {"kind": "banks", "skills": 3, "attributes": 2})
case("parse_bank_extraction",
     {"text": json.dumps({"skills": {"Binary Search": "halving"},
                          "attributes": {"Grid Dimensions": "rows x cols"}})},
     {"kind": "banks", "skills": 1, "attributes": 1})
case("parse_bank_extraction",
     {"text": json.dumps({"skills": {"9lives": "bad", "bfs": "queue"},
                          "attributes": {"n": "size"}})},
     {"kind": "banks", "skills": 1, "attributes": 1})
case("parse_bank_extraction",
     {"text": json.dumps({"skills": {"bfs": "queue"}})},
     {"kind": "error", "error": "SchemaViolation"})
case("parse_bank_extraction",
     {"text": json.dumps({"skills": "bfs", "attributes": {}})},
     {"kind": "error", "error": "SchemaViolation"})
case("parse_bank_extraction", {"text": "plain prose"},
     {"kind": "error", "error": "NoJsonObject"})

# --- validate_input_literal ------------------------------------------------------------------

VALID_LITERALS = ["'John', {'age': 20}", "3", "-7, 2.5", "[1, 2, 3]",
                  "'a(b[c{', 1", "(), [], {}", "'it''s', 2", "True, False, None",
                  "{'nested': {'deep': [1, (2, 3)]}}", '"double", \'single\'',
                  "0.0001", "'escaped \\' quote'"]
INVALID_LITERALS = ["[1, 2", "{'a': 1", "'unterminated", "((1, 2)", "", "   ",
                    "1)", "]", "{{}", "\"open", "[}", "'a', [1, {']"]
for literal in VALID_LITERALS:
    case("validate_input_literal", {"text": literal}, {"kind": "ok"})
for literal in INVALID_LITERALS:
    case("validate_input_literal", {"text": literal}, {"kind": "invalid"})

# --- seeded fuzz: every parser terminates without undeclared errors ---------------------------

rng = random.Random(20260808)
ALPHABET = "{}[]()\"'`,:\\ \n\tabcdef0123456789_variant_skill```python```input"
for _ in range(30):
    text = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 300)))
    case("fuzz_all_parsers", {"text": text}, {"kind": "no_crash"})
for base in (json.dumps(full), json.dumps(XO),
             json.dumps(AUDITS[0][0]), batch_text(full, "prose ")):
    for _ in range(4):
        cut = rng.randint(1, len(base) - 1)
        mutated = base[:cut] + rng.choice("}]\"x{[") + base[cut + 1 :]
        case("fuzz_all_parsers", {"text": mutated}, {"kind": "no_crash"})
    case("fuzz_all_parsers", {"text": base[: rng.randint(1, len(base) - 1)]},
         {"kind": "no_crash"})


def main() -> None:
    out = Path(__file__).parent / "codec_golden.json"
    out.write_text(json.dumps(CASES, indent=1, ensure_ascii=False) + "\n",
                   encoding="utf-8")
    print(f"{len(CASES)} cases -> {out}")


if __name__ == "__main__":
    main()
