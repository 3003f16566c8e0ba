import argparse
import logging
import sys
from pathlib import Path

from .backend_api import BackendSuite, ClassifierClient
from .config import RunConfig
from .errors import ConfigInvalid, PromptEvoError
from .json_writer import JSONWriter
from .optimizer import evaluate_prompt, optimize, rescore
from .prompt_core import ALL_OPERATIONS, tokenize_prompt
from .report import REPORT_FORMATS, REPORT_NAMES, render_evaluation, render_report, replay
from .run_log import RUN_LOG_NAME, RunLog, header_record
from .sim_world import ToyWorld

logger = logging.getLogger("PromptEvo")


def _csv(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def flag_overrides(args):
    """Map parsed flags onto config sections; unset flags stay None."""

    def get(name):
        return getattr(args, name, None)

    return {
        "prompt": {"seed_prompt": get("seed"), "placeholder": get("placeholder")},
        "metrics": {"threshold": get("bleu_threshold"), "max_ngram_order": get("bleu_order")},
        "backend": {"eval_clf_url": get("eval_clf_url")},
        "optimizer": {
            "iterations": get("iterations"),
            "labels": get("labels"),
            "filter_mode": get("filter_mode"),
            "operations": get("operations"),
            "workers": get("workers"),
        },
        "run": {
            "out": get("out"),
            "rng_seed": get("rng_seed"),
            "report": get("report"),
            "sim": get("sim"),
        },
    }


def build_backends(config):
    """Toy world backends for --sim, HTTP clients otherwise; both probed."""
    backend_config = config.backend_config()
    sim = config["run"]["sim"]
    if sim:
        world = ToyWorld.load(sim, mask_sentinel=backend_config.mask_sentinel)
        unknown = sorted(set(config.label_set) - set(world.labels))
        if unknown:
            raise ConfigInvalid(f"Labels {unknown} are not defined by the toy world {sim}")
        backends = BackendSuite.from_world(world, backend_config, config.label_set)
        if backend_config.eval_clf_url:
            backends.eval_classifier = ClassifierClient(
                backend_config.eval_clf_url, config.label_set, backend_config
            )
    else:
        backends = BackendSuite.from_config(backend_config, config.label_set)
    backends.probe()
    return backends


def _print_config(config):
    print("Resolved configuration:")
    print(JSONWriter.dumps(config.to_dict()))


def _print_progress(record):
    incumbent = record.incumbent
    if record.carried_over:
        step = "carried over"
    else:
        step = incumbent.prompt.lineage.descriptor.describe()
    score = "DQ" if incumbent.disqualified else f"{incumbent.score.macro_f1:.2f}"
    print(f"Iteration {record.iteration}: {step} -> {incumbent.prompt.text} (F1 {score})")


def cmd_optimize(args):
    config = RunConfig.resolve(args.config, flags=flag_overrides(args))
    _print_config(config)
    cfg = config.optimizer_config()
    seed = tokenize_prompt(config.seed_prompt, cfg.placeholder)
    backends = build_backends(config)

    out = Path(config["run"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    with RunLog(out / RUN_LOG_NAME) as run_log:
        run_log.append(header_record(config.to_dict()))
        result = optimize(seed, backends, cfg, run_log, progress=_print_progress)

    fmt = config["run"]["report"]
    report = render_report(run_log, fmt)
    report_path = out / REPORT_NAMES[fmt]
    report_path.write_text(report, encoding="utf-8")
    print(report, end="")
    logger.info("Final prompt %r written to %s", result.final_prompt.text, report_path)
    return 0


def cmd_evaluate(args):
    config = RunConfig.resolve(args.config, flags=flag_overrides(args))
    _print_config(config)
    cfg = config.optimizer_config()
    prompts = [tokenize_prompt(p, cfg.placeholder) for p in args.prompt or [config.seed_prompt]]
    backends = build_backends(config)

    candidates = [evaluate_prompt(p, backends, cfg) for p in prompts]
    eval_candidates = None
    if backends.eval_classifier is not None:
        eval_candidates = [rescore(c, backends.eval_classifier, cfg) for c in candidates]
    for c in candidates:
        for warning in c.warnings:
            print(f"Warning: {c.prompt.text}: {warning}")
    print(
        render_evaluation(
            candidates,
            cfg.label_set,
            eval_candidates,
            config["run"]["report"],
            show_texts=args.show_texts,
        ),
        end="",
    )
    return 0


def cmd_replay(args):
    _, report = replay(args.run_log, args.report)
    print(report, end="")
    return 0


def _add_run_flags(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", help="Seed prompt containing the condition placeholder")
    parser.add_argument("--placeholder", help="Condition placeholder sentinel (default <em>)")
    parser.add_argument("-n", "--iterations", type=int, help="Number of iterations")
    parser.add_argument("--labels", type=_csv, help="Comma-separated condition labels")
    parser.add_argument("--bleu-threshold", type=float, help="Paraphrase BLEU threshold")
    parser.add_argument("--bleu-order", type=int, help="Maximum BLEU n-gram order")
    parser.add_argument(
        "--filter-mode", choices=["PerText", "PromptAverage", "Both"], help="Paraphrase rule"
    )
    parser.add_argument(
        "--operations",
        type=_csv,
        help=f"Comma-separated subset of {','.join(op.value for op in ALL_OPERATIONS)}",
    )
    parser.add_argument("--workers", type=int, help="Concurrent child evaluations")
    parser.add_argument("--sim", help="Toy world fixture replacing all backends")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--rng-seed", type=int, help="Seed sent with every generate call")
    parser.add_argument("--report", choices=REPORT_FORMATS, help="Report format")
    parser.add_argument("--eval-clf-url", help="Independent classifier for evaluation")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def input_parser():
    parser = argparse.ArgumentParser(
        prog="promptevo", description="Evolutionary prompt optimization"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="Search for a better prompt")
    _add_run_flags(p_opt)
    p_opt.set_defaults(func=cmd_optimize)

    p_eval = sub.add_parser("evaluate", help="Score prompts without searching")
    _add_run_flags(p_eval)
    p_eval.add_argument(
        "--prompt", action="append", help="Prompt to evaluate (repeatable; default the seed)"
    )
    p_eval.add_argument(
        "--show-texts", action="store_true", help="List the generated texts of every prompt"
    )
    p_eval.set_defaults(func=cmd_evaluate)

    p_replay = sub.add_parser("replay", help="Verify a run log and re-render its report")
    p_replay.add_argument("run_log", help="Path to run_log.jsonl")
    p_replay.add_argument("--report", choices=REPORT_FORMATS, help="Report format")
    p_replay.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    args = input_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PromptEvoError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:  # noqa: BLE001
        logger.debug("Unhandled error", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
