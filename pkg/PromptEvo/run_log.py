"""Line-delimited JSON run logs: record builders, a streaming writer, a reader
and the lineage integrity check used by replay."""

import json
import logging
from pathlib import Path

from . import schemas
from .errors import ConfigInvalid, CorruptLog, LineageMismatch
from .json_loader import JSONLoader
from .json_validator import JSONValidator
from .json_writer import JSONWriter
from .prompt_core import DEFAULT_PLACEHOLDER, Lineage, apply_descriptor, tokenize_prompt

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
RUN_LOG_NAME = "run_log.jsonl"


def header_record(config):
    return {"type": "header", "config": config, "format": FORMAT_VERSION}


def seed_record(candidate):
    return {"type": "seed", **candidate.to_fields()}


def child_record(iteration, candidate):
    return {"type": "child", "iteration": iteration, **candidate.to_fields()}


def incumbent_record(record):
    incumbent = record.incumbent
    lineage = incumbent.prompt.lineage
    operation = None
    if not record.carried_over and lineage is not None:
        operation = lineage.descriptor.op.value
    return {
        "type": "incumbent",
        "iteration": record.iteration,
        "parent_id": record.parent.prompt.id,
        "prompt_id": incumbent.prompt.id,
        "prompt_text": incumbent.prompt.text,
        "operation": operation,
        "macro_f1": incumbent.score.macro_f1,
        "disqualified": incumbent.disqualified,
        "carried_over": record.carried_over,
        "warnings": list(record.warnings),
    }


def final_record(entry, warnings=()):
    candidate = entry.candidate
    return {
        "type": "final",
        "iteration": entry.iteration,
        "prompt_id": candidate.prompt.id,
        "prompt_text": candidate.prompt.text,
        "macro_f1": candidate.score.macro_f1,
        "disqualified": candidate.disqualified,
        "warnings": list(warnings),
    }


class RunLog:
    """Records of one run, kept in memory and optionally streamed to a file."""

    def __init__(self, path=None):
        self.records = []
        self.path = Path(path) if path is not None else None
        self._file = None

    def __enter__(self):
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, "w", encoding="utf-8")
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None

    def append(self, record):
        self.records.append(record)
        if self._file is not None:
            JSONWriter.append_line(record, self._file)

    def of_type(self, record_type):
        return [r for r in self.records if r["type"] == record_type]

    @property
    def header(self):
        headers = self.of_type("header")
        return headers[0] if headers else None

    @property
    def final(self):
        finals = self.of_type("final")
        return finals[-1] if finals else None

    def dumps(self):
        return "".join(JSONWriter.dumps_line(r) + "\n" for r in self.records)


def read_run_log(path):
    """Load and schema-check every record of a run log."""
    try:
        lines = JSONLoader.load_lines(path)
    except FileNotFoundError as e:
        raise ConfigInvalid(str(e)) from e
    except json.JSONDecodeError as e:
        raise CorruptLog(f"{path}: undecodable line: {e}") from e

    log = RunLog()
    for n, record in enumerate(lines, start=1):
        JSONValidator.validate(
            record, schemas.RUNLOG_RECORD_SCHEMA, error_cls=CorruptLog, what=f"Record {n}"
        )
        log.append(record)

    if not log.records or log.records[0]["type"] != "header":
        raise CorruptLog(f"{path}: the first record must be the header")
    if len(log.of_type("seed")) != 1:
        raise CorruptLog(f"{path}: expected exactly one seed record")
    if log.final is None:
        raise CorruptLog(f"{path}: no final record")
    return log


def verify_lineage(log):
    """Replay every recorded operation from the seed and check each result.

    Children must rebuild byte-for-byte from their parent, every incumbent must
    be a child of its iteration (or its carried-over parent) and the final
    selection must be a pool member.
    """
    placeholder = (
        log.header["config"].get("prompt", {}).get("placeholder", DEFAULT_PLACEHOLDER)
    )
    seed = log.of_type("seed")[0]
    seed_prompt = tokenize_prompt(seed["prompt_text"], placeholder)
    if seed_prompt.id != seed["prompt_id"]:
        raise LineageMismatch(f"Seed id {seed['prompt_id']} does not match its text")

    prompts = {seed_prompt.id: seed_prompt}
    children_by_iteration = {}
    incumbent_id = seed_prompt.id
    pool_ids = {seed_prompt.id}

    for record in log.records:
        kind = record["type"]
        if kind == "child":
            lineage = record["lineage"]
            if lineage is None or lineage["parent_id"] not in prompts:
                raise LineageMismatch(
                    f"Child {record['prompt_id']} has no known parent"
                )
            if lineage["parent_id"] != incumbent_id:
                raise LineageMismatch(
                    f"Child {record['prompt_id']} in iteration {record['iteration']} "
                    f"does not descend from incumbent {incumbent_id}"
                )
            parent = prompts[lineage["parent_id"]]
            try:
                rebuilt = apply_descriptor(parent, Lineage.from_dict(lineage).descriptor)
            except (ConfigInvalid, ValueError) as e:
                raise LineageMismatch(
                    f"Child {record['prompt_id']} does not replay: {e}"
                ) from e
            if rebuilt.text != record["prompt_text"] or rebuilt.id != record["prompt_id"]:
                raise LineageMismatch(
                    f"Child {record['prompt_id']} replays to {rebuilt.text!r}, "
                    f"logged as {record['prompt_text']!r}"
                )
            prompts[rebuilt.id] = rebuilt
            children_by_iteration.setdefault(record["iteration"], set()).add(rebuilt.id)

        elif kind == "incumbent":
            if record["parent_id"] != incumbent_id:
                raise LineageMismatch(
                    f"Iteration {record['iteration']} starts from {record['parent_id']}, "
                    f"expected {incumbent_id}"
                )
            children = children_by_iteration.get(record["iteration"], set())
            if record["carried_over"]:
                ok = record["prompt_id"] == record["parent_id"]
            else:
                ok = record["prompt_id"] in children
            if not ok:
                raise LineageMismatch(
                    f"Incumbent {record['prompt_id']} of iteration {record['iteration']} "
                    "is not one of its children"
                )
            incumbent_id = record["prompt_id"]
            pool_ids.add(incumbent_id)

        elif kind == "final":
            if record["prompt_id"] not in pool_ids:
                raise LineageMismatch(f"Final prompt {record['prompt_id']} is not in the pool")

    logger.debug("Verified lineage of %d prompts", len(prompts))
    return prompts
