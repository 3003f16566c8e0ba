"""Run configuration: built-in defaults, overridden by a JSON config file, then
by environment variables, then by command-line flags."""

import copy
import logging
import os
from dataclasses import dataclass, field

from . import schemas
from .backend_api import (
    ENV_BEARER_TOKEN,
    ENV_CLF_URL,
    ENV_EVAL_CLF_URL,
    ENV_GEN_URL,
    ENV_MASK_URL,
    BackendConfig,
    GenerationParams,
)
from .errors import ConfigInvalid
from .json_loader import JSONLoader
from .json_validator import JSONValidator
from .metrics import BleuConfig
from .optimizer import ISEAR_LABELS, OptimizerConfig
from .prompt_core import ALL_OPERATIONS, DEFAULT_MASK, DEFAULT_PLACEHOLDER

logger = logging.getLogger(__name__)

DEFAULTS = {
    "prompt": {
        "seed_prompt": "Write a text that expresses <em>",
        "placeholder": DEFAULT_PLACEHOLDER,
        "mask_sentinel": DEFAULT_MASK,
        "context_label": None,
    },
    "metrics": {"max_ngram_order": 4, "smoothing_epsilon": 1e-9, "threshold": 0.2},
    "generation": {
        "num_return": 3,
        "beam_size": 30,
        "temperature": 0.7,
        "top_p": 0.7,
        "no_repeat_ngram": 2,
    },
    "backend": {
        "gen_url": None,
        "mask_url": None,
        "clf_url": None,
        "eval_clf_url": None,
        "timeout": 30.0,
        "retries": 3,
        "backoff": 0.5,
        "concurrency": 4,
        "bearer_token": None,
        "top_k": 5,
    },
    "optimizer": {
        "iterations": 10,
        "labels": list(ISEAR_LABELS),
        "filter_mode": "Both",
        "operations": [op.value for op in ALL_OPERATIONS],
        "workers": 4,
    },
    "run": {"out": "out", "rng_seed": 0, "report": "table", "sim": None},
}

ENV_KEYS = {
    ENV_GEN_URL: ("backend", "gen_url"),
    ENV_MASK_URL: ("backend", "mask_url"),
    ENV_CLF_URL: ("backend", "clf_url"),
    ENV_EVAL_CLF_URL: ("backend", "eval_clf_url"),
    ENV_BEARER_TOKEN: ("backend", "bearer_token"),
}


def merge(base, overrides):
    """Section-wise merge; ``None`` in ``overrides`` leaves ``base`` alone."""
    merged = copy.deepcopy(base)
    for section, values in overrides.items():
        for key, value in values.items():
            if value is not None:
                merged.setdefault(section, {})[key] = value
    return merged


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    overrides = {}
    for name, (section, key) in ENV_KEYS.items():
        if environ.get(name):
            overrides.setdefault(section, {})[key] = environ[name]
    return overrides


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def resolve(cls, config_path=None, environ=None, flags=None):
        data = copy.deepcopy(DEFAULTS)
        if config_path:
            file_data = JSONLoader.load(config_path)
            JSONValidator.validate(file_data, schemas.CONFIG_SCHEMA, what="Config file")
            data = merge(data, file_data)
            logger.debug("Loaded config file %s", config_path)
        data = merge(data, env_overrides(environ))
        data = merge(data, flags or {})
        JSONValidator.validate(data, schemas.CONFIG_SCHEMA, what="Resolved config")
        config = cls(data)
        # Fail on bad values before any backend is contacted.
        config.optimizer_config()
        return config

    def __getitem__(self, section):
        return self.data[section]

    @property
    def seed_prompt(self):
        return self.data["prompt"]["seed_prompt"]

    @property
    def label_set(self):
        return tuple(self.data["optimizer"]["labels"])

    def bleu_config(self):
        try:
            return BleuConfig(**self.data["metrics"])
        except ValueError as e:
            raise ConfigInvalid(f"metrics: {e}") from e

    def generation_params(self):
        return GenerationParams(**self.data["generation"]).validate()

    def backend_config(self):
        backend = dict(self.data["backend"])
        backend.pop("top_k")
        return BackendConfig(mask_sentinel=self.data["prompt"]["mask_sentinel"], **backend)

    def optimizer_config(self):
        prompt = self.data["prompt"]
        optimizer = self.data["optimizer"]
        return OptimizerConfig(
            max_iterations=optimizer["iterations"],
            label_set=tuple(optimizer["labels"]),
            bleu_cfg=self.bleu_config(),
            generation_params=self.generation_params(),
            text_filter_mode=optimizer["filter_mode"],
            operations=tuple(optimizer["operations"]),
            placeholder=prompt["placeholder"],
            mask_sentinel=prompt["mask_sentinel"],
            context_label=prompt["context_label"],
            top_k=self.data["backend"]["top_k"],
            rng_seed=self.data["run"]["rng_seed"],
            max_workers=optimizer["workers"],
        )

    def to_dict(self):
        """The resolved values, with the bearer token redacted."""
        data = copy.deepcopy(self.data)
        if data["backend"].get("bearer_token"):
            data["backend"]["bearer_token"] = "***"
        return data
