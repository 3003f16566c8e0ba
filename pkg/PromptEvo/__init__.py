from .prompt_core import (
    Operation,
    OperationDescriptor,
    Prompt,
    apply_addition,
    apply_removal,
    apply_replacement,
    expand_children,
    render,
    tokenize_prompt,
)
from .metrics import BleuConfig, bleu_sentence, macro_f1, per_label_f1, tally
from .backend_api import BackendConfig, BackendSuite, GenerationParams
from .sim_world import ToyWorld, brute_force_best
from .optimizer import (
    FilterMode,
    OptimizerConfig,
    evaluate_prompt,
    optimize,
    run_iteration,
    select_one_best,
)
from .run_log import RunLog, read_run_log, verify_lineage
from .config import RunConfig
from .json_loader import JSONLoader
from .json_validator import JSONValidator
from .json_writer import JSONWriter
