"""Human-readable summaries of runs and prompt evaluations.

The optimization report is rendered from RunLog records alone, so a stored
log re-renders to the same bytes without any backend.
"""

from io import StringIO

from rich import box
from rich.console import Console
from rich.table import Table
from rich.text import Text

from .json_writer import JSONWriter
from .prompt_core import Operation
from .run_log import read_run_log, verify_lineage

REPORT_FORMATS = ("table", "json")
REPORT_NAMES = {"table": "report.txt", "json": "report.json"}
# Wide enough that no cell is ever wrapped or cropped.
TABLE_WIDTH = 10_000


def format_score(value, disqualified=False):
    if disqualified:
        return "DQ"
    return f"{value:.2f}"


def table_lines(header, rows):
    """Plain-text table lines: cells split by " | ", the header ruled by "-+-"."""
    table = Table(box=box.ASCII, show_edge=False, pad_edge=False)
    for name in header:
        table.add_column(Text(name), no_wrap=True)
    for row in rows:
        table.add_row(*(Text(str(cell)) for cell in row))

    buffer = StringIO()
    Console(file=buffer, width=TABLE_WIDTH, color_system=None).print(table)
    return [line.rstrip() for line in buffer.getvalue().splitlines()]


def iteration_rows(log):
    seed = log.of_type("seed")[0]
    rows = [
        {
            "iteration": 0,
            "operation": None,
            "prompt": seed["prompt_text"],
            "macro_f1": seed["macro_f1"],
            "disqualified": seed["disqualified"],
            "carried_over": False,
        }
    ]
    for r in log.of_type("incumbent"):
        rows.append(
            {
                "iteration": r["iteration"],
                "operation": r["operation"],
                "prompt": r["prompt_text"],
                "macro_f1": r["macro_f1"],
                "disqualified": r["disqualified"],
                "carried_over": r["carried_over"],
            }
        )
    return rows


def _operation_cell(row):
    if row["carried_over"]:
        return "carry"
    if row["operation"] is None:
        return "---"
    return Operation(row["operation"]).short


def render_report(log, fmt="table"):
    rows = iteration_rows(log)
    final = log.final
    if fmt == "json":
        return (
            JSONWriter.dumps(
                {
                    "iterations": rows,
                    "final": {
                        "iteration": final["iteration"],
                        "prompt": final["prompt_text"],
                        "macro_f1": final["macro_f1"],
                        "disqualified": final["disqualified"],
                        "warnings": final["warnings"],
                    },
                }
            )
            + "\n"
        )
    if fmt != "table":
        raise ValueError(f"Unknown report format {fmt!r}")

    lines = table_lines(
        ["Iteration", "Operation", "Prompt", "F1"],
        [
            [
                str(row["iteration"]),
                _operation_cell(row),
                row["prompt"],
                format_score(row["macro_f1"], row["disqualified"]),
            ]
            for row in rows
        ],
    )
    lines.append("")
    lines.append(
        f"Selected: iteration {final['iteration']}: {final['prompt_text']} "
        f"(F1 {format_score(final['macro_f1'], final['disqualified'])})"
    )
    for warning in final["warnings"]:
        lines.append(f"Warning: {warning}")
    return "\n".join(lines) + "\n"


def render_evaluation(
    candidates, label_set, eval_candidates=None, fmt="table", show_texts=False
):
    """One row per evaluated prompt, with an optional second-classifier column.

    ``show_texts`` appends, per prompt, the generated texts with their BLEU,
    whether they survived the paraphrase filter and the classifier verdict.
    The JSON form always carries them.
    """
    if fmt == "json":
        entries = []
        for i, c in enumerate(candidates):
            entry = {
                "prompt": c.prompt.text,
                "macro_f1": c.score.macro_f1,
                "per_label_f1": c.score.per_label_f1,
                "disqualified": c.disqualified,
                "n_texts_scored": c.score.n_texts_scored,
                "n_texts_filtered": c.score.n_texts_filtered,
                "warnings": list(c.warnings),
                "conditions": [condition.to_dict() for condition in c.conditions],
            }
            if eval_candidates is not None:
                entry["eval_macro_f1"] = eval_candidates[i].score.macro_f1
                entry["eval_per_label_f1"] = eval_candidates[i].score.per_label_f1
            entries.append(entry)
        return JSONWriter.dumps({"prompts": entries}) + "\n"

    header = ["Prompt", "F1"]
    if eval_candidates is not None:
        header.append("Eval F1")
    header += list(label_set)
    rows = []
    for i, c in enumerate(candidates):
        row = [c.prompt.text, format_score(c.score.macro_f1, c.disqualified)]
        if eval_candidates is not None:
            e = eval_candidates[i]
            row.append(format_score(e.score.macro_f1, e.disqualified))
        row += [
            "-" if c.disqualified else f"{c.score.per_label_f1.get(label, 0.0):.2f}"
            for label in label_set
        ]
        rows.append(row)
    lines = table_lines(header, rows)
    if show_texts:
        for c in candidates:
            lines += ["", f"Texts: {c.prompt.text}"] + table_lines(
                ["Label", "Text", "BLEU", "Kept", "Verdict"], text_rows(c)
            )
    return "\n".join(lines) + "\n"


def text_rows(candidate):
    rows = []
    for condition in candidate.conditions:
        verdicts = condition.verdicts or (None,) * len(condition.texts)
        for text, bleu, kept, verdict in zip(
            condition.texts, condition.bleu, condition.kept, verdicts
        ):
            rows.append(
                [
                    condition.label,
                    text,
                    "-" if bleu is None else f"{bleu:.2f}",
                    "yes" if kept else "no",
                    verdict or "-",
                ]
            )
    return rows


def replay(path, fmt=None):
    """Verify a stored run log and re-render its report, by default in the
    format the run itself used."""
    log = read_run_log(path)
    verify_lineage(log)
    fmt = fmt or log.header["config"].get("run", {}).get("report", "table")
    return log, render_report(log, fmt)
