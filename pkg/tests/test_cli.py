import json

import pytest

from taskforge.cli import EXIT_FATAL, EXIT_OK, main
from taskforge.engine import load_default_banks
from taskforge.fitness import FitnessReport
from taskforge.gateway import (
    ChatRequest,
    FixtureTransport,
    SamplingParams,
    load_templates,
    render,
)
from taskforge.model import SeedOrigin, SkillLabels, TaskMode, make_task, task_to_dict
from taskforge.store import CurriculumStore


def seeded_store(tmp_path):
    store = CurriculumStore(tmp_path / "store")
    for i, skill in enumerate(("binary_search", "prefix_sum")):
        task = make_task(TaskMode.DEDUCTION, "def f(a):\n    return a + 1",
                         SkillLabels(skill), SeedOrigin(skill),
                         input_text=str(i))
        report = FitnessReport(v_exec=True, v_skill=True, v_learn=True,
                               pass_rate=0.4, k=10, stage_reached="learn")
        task = task.with_output(str(i + 1)).with_fitness(report)
        store.append("proposed", {"slot": f"s{i}"})
        store.append("accepted", {"slot": f"s{i}", "task": task_to_dict(task),
                                  "ledger_keys": []})
    return store


class TestCli:
    def test_extract_defaults_without_network(self, tmp_path, capsys):
        code = main(["--store", str(tmp_path / "store"),
                     "--transport", "fixture",
                     "--fixture-dir", str(tmp_path / "fixtures"),
                     "extract"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "skill bank: 56 entries" in out
        assert "attribute bank: 27 entries" in out

    def test_metrics_on_existing_store(self, tmp_path, capsys):
        seeded_store(tmp_path)
        code = main(["--store", str(tmp_path / "store"), "metrics"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["accepted"] == 2
        assert payload["discard_rate"] == 0.0
        assert payload["skill_cdf"] == [0.5, 1.0]

    def test_export_writes_dataset(self, tmp_path, capsys):
        seeded_store(tmp_path)
        dest = tmp_path / "dataset.jsonl"
        code = main(["--store", str(tmp_path / "store"),
                     "--transport", "fixture",
                     "--fixture-dir", str(tmp_path / "fixtures"),
                     "export", "--dest", str(dest)])
        assert code == EXIT_OK
        lines = dest.read_text().splitlines()
        assert len(lines) == 2
        record = json.loads(lines[0])
        assert set(record) == {"id", "mode", "solver_prompt", "grading",
                               "skills", "provenance", "pass_rate"}

    def test_missing_fixture_dir_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["--store", str(tmp_path / "store"),
                  "--transport", "fixture", "run"])

    def test_fixture_seed_without_recordings_is_fatal(self, tmp_path):
        main(["--store", str(tmp_path / "store"), "--transport", "fixture",
              "--fixture-dir", str(tmp_path / "fixtures"), "extract"])
        code = main(["--store", str(tmp_path / "store"), "--transport", "fixture",
                     "--fixture-dir", str(tmp_path / "fixtures"),
                     "seed", "--mode", "deduction", "--skill", "binary_search"])
        assert code == EXIT_FATAL

    def test_config_file_overrides(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "run": {"solver_k": 4, "visible_count": 3,
                    "induction_num_inputs": 6},
            "limits": {"wall_time": 5.0},
        }))
        code = main(["--store", str(tmp_path / "store"),
                     "--config", str(config),
                     "--transport", "fixture",
                     "--fixture-dir", str(tmp_path / "fixtures"),
                     "extract"])
        assert code == EXIT_OK

    def test_unknown_skill_exits_nonzero(self, tmp_path):
        main(["--store", str(tmp_path / "store"), "--transport", "fixture",
              "--fixture-dir", str(tmp_path / "fixtures"), "extract"])
        with pytest.raises(SystemExit):
            main(["--store", str(tmp_path / "store"), "--transport", "fixture",
                  "--fixture-dir", str(tmp_path / "fixtures"),
                  "seed", "--mode", "deduction", "--skill", "not_a_skill"])


class TestFixtureDirEndToEnd:
    """Recorded-fixture CLI path: real FixtureTransport, real runner process."""

    PROGRAM = "def f(a):\n    total = a\n    for step in range(1, 4):\n        total = total * 31 + step\n    return total"
    INPUT = "5"

    def _record(self, fixture_dir, templates, role, template_id, bindings,
                texts):
        transport = FixtureTransport(fixture_dir / role)
        prompt = render(templates, template_id, bindings)
        request = ChatRequest(template_id=template_id, bindings=bindings,
                              sampling=SamplingParams(n_samples=len(texts)),
                              role=role)
        for index, text in enumerate(texts):
            transport.record(request, prompt, index, text)

    def test_seed_one_skill_through_cli(self, tmp_path):
        pytest.importorskip("pyharness")
        templates = load_templates()
        skills, _ = load_default_banks()
        entry = skills.get("binary_search")
        fixture_dir = tmp_path / "fixtures"

        self._record(fixture_dir, templates, "proposer", "deduction_seed", {
            "failure_info": "None",
            "skill_str": f"{entry.name}: {entry.description}",
            "banned_keywords": "None",
            "remove_input_from_snippet_prompt": "",
            "remove_after_return_prompt": "",
        }, [f"```python\n{self.PROGRAM}\n```\n```input\n{self.INPUT}\n```"])
        self._record(fixture_dir, templates, "proposer", "skill_reflection", {
            "skill_list": skills.listing(),
            "code_snippet": self.PROGRAM,
        }, [json.dumps({"main_skill": "binary_search", "other_skills": []})])

        namespace: dict = {}
        exec(self.PROGRAM, namespace)
        answer = repr(namespace["f"](int(self.INPUT)))
        replies = [f"```output\n{answer}\n```" if i < 4 else "```output\n0\n```"
                   for i in range(10)]
        self._record(fixture_dir, templates, "solver", "deduction_predictor", {
            "snippet": self.PROGRAM, "input_args": self.INPUT,
        }, replies)

        store_dir = tmp_path / "store"
        base = ["--store", str(store_dir), "--transport", "fixture",
                "--fixture-dir", str(fixture_dir)]
        assert main([*base, "extract"]) == EXIT_OK
        assert main([*base, "seed", "--mode", "deduction",
                     "--skill", "binary_search"]) == EXIT_OK
        state = CurriculumStore(store_dir).state
        assert state.accepted_count == 1
        task = state.tasks()[0]
        assert task.fitness.pass_rate == 0.4
        assert task.output == answer

        # verify re-renders the same prompts, so the recordings replay
        assert main([*base, "verify", "--task", task.id]) == EXIT_OK
        dest = tmp_path / "out.jsonl"
        assert main([*base, "export", "--dest", str(dest)]) == EXIT_OK
        record = json.loads(dest.read_text().splitlines()[0])
        assert record["grading"] == {"output": answer}
