"""Run log writing, reading, lineage verification and report rendering."""

import json
import os

import pytest

import PromptEvo as pe
from PromptEvo.errors import BackendError, ConfigInvalid, CorruptLog, LineageMismatch
from PromptEvo.report import format_score, render_report, replay, table_lines
from PromptEvo.run_log import RUN_LOG_NAME, RunLog, header_record

ASSETS_DIR = os.path.join(os.path.dirname(__file__), "..", "assets")
STAGED_TOYWORLD = os.path.join(ASSETS_DIR, "staged_toyworld.json")

SEED = "Write text <em>"
HEADER = {"prompt": {"placeholder": "<em>"}, "run": {"report": "table"}}


@pytest.fixture(scope="module")
def backends():
    return pe.BackendSuite.from_world(pe.ToyWorld.load(STAGED_TOYWORLD))


@pytest.fixture
def log_path(tmp_path, backends):
    path = tmp_path / RUN_LOG_NAME
    with RunLog(path) as log:
        log.append(header_record(HEADER))
        pe.optimize(SEED, backends, pe.OptimizerConfig(max_iterations=3), log)
    return path


def read_records(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f]


def write_records(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")


# ---------------------------------------------------------------------------
# Reading and verification
# ---------------------------------------------------------------------------
class TestReadRunLog:
    def test_streamed_file_matches_memory(self, tmp_path, backends):
        path = tmp_path / RUN_LOG_NAME
        with RunLog(path) as log:
            log.append(header_record(HEADER))
            pe.optimize(SEED, backends, pe.OptimizerConfig(max_iterations=1), log)
        assert path.read_text(encoding="utf-8") == log.dumps()

    def test_round_trip(self, log_path):
        log = pe.read_run_log(log_path)
        assert log.header["config"] == HEADER
        assert log.final["iteration"] == 3
        assert [r["type"] for r in log.records][:2] == ["header", "seed"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            pe.read_run_log(tmp_path / "absent.jsonl")

    def test_undecodable_line(self, log_path):
        with open(log_path, "a", encoding="utf-8") as f:
            f.write("{not json\n")
        with pytest.raises(CorruptLog):
            pe.read_run_log(log_path)

    def test_schema_violation(self, log_path):
        records = read_records(log_path)
        del records[1]["prompt_id"]
        write_records(log_path, records)
        with pytest.raises(CorruptLog, match="Record 2"):
            pe.read_run_log(log_path)

    def test_header_must_come_first(self, log_path):
        records = read_records(log_path)
        write_records(log_path, records[1:] + records[:1])
        with pytest.raises(CorruptLog, match="header"):
            pe.read_run_log(log_path)

    def test_final_required(self, log_path):
        write_records(log_path, read_records(log_path)[:-1])
        with pytest.raises(CorruptLog, match="final"):
            pe.read_run_log(log_path)


class TestVerifyLineage:
    def test_intact_log(self, log_path):
        prompts = pe.verify_lineage(pe.read_run_log(log_path))
        assert "dull calm bright Write text <em>" in {p.text for p in prompts.values()}

    def test_tampered_child_text(self, log_path):
        records = read_records(log_path)
        child = next(r for r in records if r["type"] == "child")
        child["prompt_text"] = "Something else entirely <em>"
        write_records(log_path, records)
        with pytest.raises(LineageMismatch):
            pe.verify_lineage(pe.read_run_log(log_path))

    def test_tampered_descriptor(self, log_path):
        records = read_records(log_path)
        child = next(
            r for r in records if r["type"] == "child" and r["lineage"]["op"] == "Removal"
        )
        child["lineage"]["position"] = 0 if child["lineage"]["position"] else 1
        write_records(log_path, records)
        with pytest.raises(LineageMismatch):
            pe.verify_lineage(pe.read_run_log(log_path))

    def test_incumbent_outside_children(self, log_path):
        records = read_records(log_path)
        incumbent = next(r for r in records if r["type"] == "incumbent")
        incumbent["prompt_id"] = "000000000000"
        write_records(log_path, records)
        with pytest.raises(LineageMismatch):
            pe.verify_lineage(pe.read_run_log(log_path))

    def test_final_outside_pool(self, log_path):
        records = read_records(log_path)
        records[-1]["prompt_id"] = "000000000000"
        write_records(log_path, records)
        with pytest.raises(LineageMismatch, match="pool"):
            pe.verify_lineage(pe.read_run_log(log_path))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
class TestReport:
    def test_format_score(self):
        assert format_score(0.4857) == "0.49"
        assert format_score(0.9, disqualified=True) == "DQ"

    def test_table_lines(self):
        rows = [["[bold]x[/bold] <em>", "0.25"], ["a <em>", "DQ"]]
        lines = table_lines(["Prompt", "F1"], rows)
        assert lines == [
            "Prompt" + " " * 13 + " | F1",
            "-" * 20 + "+" + "-" * 5,
            "[bold]x[/bold] <em> | 0.25",
            "a <em>" + " " * 13 + " | DQ",
        ]

    def test_table(self, log_path):
        report = render_report(pe.read_run_log(log_path))
        lines = report.splitlines()
        header = [cell.strip() for cell in lines[0].split(" | ")]
        assert header == ["Iteration", "Operation", "Prompt", "F1"]
        assert set(lines[1]) <= {"-", "+"}
        assert lines[2].split(" | ")[:2] == ["0        ", "---      "]
        assert "bright Write text <em>" in lines[3]
        assert lines[3].endswith("0.49")
        assert lines[5].endswith("1.00")
        assert lines[-1] == "Selected: iteration 3: dull calm bright Write text <em> (F1 1.00)"

    def test_json(self, log_path):
        report = json.loads(render_report(pe.read_run_log(log_path), "json"))
        assert [row["iteration"] for row in report["iterations"]] == [0, 1, 2, 3]
        assert report["final"]["prompt"] == "dull calm bright Write text <em>"

    def test_replay_matches_original_report(self, tmp_path, backends):
        path = tmp_path / RUN_LOG_NAME
        with RunLog(path) as log:
            log.append(header_record(HEADER))
            pe.optimize(SEED, backends, pe.OptimizerConfig(max_iterations=2), log)
        _, replayed = replay(path)
        assert replayed == render_report(log)
        assert "Selected: iteration 1: bright Write text <em> (F1 0.49)" in replayed

    def test_carry_over_is_marked(self, tmp_path):
        class Down:
            def generate_texts(self, conditional_prompt, params, seed=None):
                raise BackendError("down")

        world = pe.ToyWorld.load(STAGED_TOYWORLD)
        path = tmp_path / RUN_LOG_NAME
        with RunLog(path) as log:
            log.append(header_record(HEADER))
            backends = pe.BackendSuite(world, Down(), world)
            pe.optimize(SEED, backends, pe.OptimizerConfig(max_iterations=1), log)
        _, report = replay(path)
        assert " | carry" in report
        assert "Warning: " in report
        assert "(F1 DQ)" in report
