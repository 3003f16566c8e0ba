"""JSON schemas for configuration files, toy-world fixtures, wire payloads and
RunLog records."""

_NUMBER = {"type": "number"}
_STRING_LIST = {"type": "array", "items": {"type": "string"}}
_NULLABLE_STRING = {"type": ["string", "null"]}


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "prompt": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed_prompt": {"type": "string"},
                "placeholder": {"type": "string", "minLength": 1},
                "mask_sentinel": {"type": "string", "minLength": 1},
                "context_label": _NULLABLE_STRING,
            },
        },
        "metrics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_ngram_order": {"type": "integer", "minimum": 1},
                "smoothing_epsilon": {"type": "number", "exclusiveMinimum": 0},
                "threshold": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "generation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "num_return": {"type": "integer", "minimum": 1},
                "beam_size": {"type": "integer", "minimum": 1},
                "temperature": {"type": "number", "exclusiveMinimum": 0},
                "top_p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "no_repeat_ngram": {"type": "integer", "minimum": 0},
            },
        },
        "backend": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gen_url": _NULLABLE_STRING,
                "mask_url": _NULLABLE_STRING,
                "clf_url": _NULLABLE_STRING,
                "eval_clf_url": _NULLABLE_STRING,
                "timeout": {"type": "number", "exclusiveMinimum": 0},
                "retries": {"type": "integer", "minimum": 0},
                "backoff": {"type": "number", "minimum": 0},
                "concurrency": {"type": "integer", "minimum": 1},
                "bearer_token": _NULLABLE_STRING,
                "top_k": {"type": "integer", "minimum": 1},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": {"type": "integer", "minimum": 1},
                "labels": {**_STRING_LIST, "minItems": 1},
                "filter_mode": {"enum": ["PerText", "PromptAverage", "Both"]},
                "operations": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"enum": ["Addition", "Replacement", "Removal"]},
                },
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "out": {"type": "string"},
                "rng_seed": {"type": "integer"},
                "report": {"enum": ["table", "json"]},
                "sim": _NULLABLE_STRING,
            },
        },
    },
}


TOYWORLD_SCHEMA = {
    "type": "object",
    "required": ["labels", "lexicon", "templates", "keywords", "confusion_label"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "labels": {**_STRING_LIST, "minItems": 1},
        "lexicon": {
            "type": "object",
            "required": ["entries"],
            "additionalProperties": False,
            "properties": {
                "entries": {
                    "type": "object",
                    "minProperties": 1,
                    "additionalProperties": _NUMBER,
                },
                "overrides": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["left", "right", "tokens"],
                        "additionalProperties": False,
                        "properties": {
                            "left": {"type": "string"},
                            "right": {"type": "string"},
                            "tokens": {**_STRING_LIST, "minItems": 1},
                        },
                    },
                },
            },
        },
        "triggers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tokens", "templates"],
                "additionalProperties": False,
                "properties": {
                    "tokens": {**_STRING_LIST, "minItems": 1},
                    "templates": {
                        "type": "object",
                        "additionalProperties": {**_STRING_LIST, "minItems": 1},
                    },
                },
            },
        },
        "templates": {
            "type": "object",
            "additionalProperties": {**_STRING_LIST, "minItems": 1},
        },
        "keywords": {"type": "object", "additionalProperties": {"type": "string"}},
        "confusion_label": {"type": "string"},
        "fallback_label": {"type": "string"},
        "noise_seed": {"type": "integer"},
        "noise_rate": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    },
}


# ---------------------------------------------------------------------------
# Wire protocol
# ---------------------------------------------------------------------------
FILL_MASK_REQUEST = {
    "type": "object",
    "required": ["text", "mask_sentinel", "top_k"],
    "properties": {
        "text": {"type": "string"},
        "mask_sentinel": {"type": "string", "minLength": 1},
        "top_k": {"type": "integer", "minimum": 1},
    },
}

FILL_MASK_RESPONSE = {
    "type": "object",
    "required": ["proposals"],
    "properties": {
        "proposals": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["token", "score"],
                "properties": {
                    "token": {"type": "string", "minLength": 1},
                    "score": _NUMBER,
                },
            },
        }
    },
}

GENERATE_REQUEST = {
    "type": "object",
    "required": [
        "prompt",
        "num_return",
        "beam_size",
        "temperature",
        "top_p",
        "no_repeat_ngram",
    ],
    "properties": {
        "prompt": {"type": "string", "minLength": 1},
        "num_return": {"type": "integer", "minimum": 1},
        "beam_size": {"type": "integer", "minimum": 1},
        "temperature": {"type": "number", "exclusiveMinimum": 0},
        "top_p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "no_repeat_ngram": {"type": "integer", "minimum": 0},
        "seed": {"type": ["integer", "null"]},
    },
}

GENERATE_RESPONSE = {
    "type": "object",
    "required": ["texts"],
    "properties": {"texts": _STRING_LIST},
}

CLASSIFY_REQUEST = {
    "type": "object",
    "required": ["texts", "label_set"],
    "properties": {
        "texts": {**_STRING_LIST, "minItems": 1},
        "label_set": {**_STRING_LIST, "minItems": 1},
    },
}

CLASSIFY_RESPONSE = {
    "type": "object",
    "required": ["labels"],
    "properties": {"labels": _STRING_LIST},
}


# ---------------------------------------------------------------------------
# RunLog records
# ---------------------------------------------------------------------------
_LINEAGE = {
    "type": ["object", "null"],
    "required": ["parent_id", "op", "position", "token"],
    "properties": {
        "parent_id": {"type": "string"},
        "op": {"enum": ["Addition", "Replacement", "Removal"]},
        "position": {"type": "integer", "minimum": 0},
        "token": _NULLABLE_STRING,
        "alternates": _STRING_LIST,
    },
}

_CANDIDATE_FIELDS = {
    "prompt_id": {"type": "string"},
    "prompt_text": {"type": "string"},
    "lineage": _LINEAGE,
    "per_condition": {
        "type": "array",
        "items": {
            "type": "object",
            "required": ["label", "conditional_prompt", "texts", "bleu", "kept", "verdict"],
            "properties": {
                "label": {"type": "string"},
                "conditional_prompt": {"type": "string"},
                "texts": _STRING_LIST,
                "bleu": {"type": "array", "items": {"type": ["number", "null"]}},
                "kept": {"type": "array", "items": {"type": "boolean"}},
                "verdict": {"type": "array", "items": _NULLABLE_STRING},
            },
        },
    },
    "macro_f1": _NUMBER,
    "per_label_f1": {"type": "object", "additionalProperties": _NUMBER},
    "n_texts_scored": {"type": "integer"},
    "n_texts_filtered": {"type": "integer"},
    "mean_bleu": {"type": ["number", "null"]},
    "disqualified": {"type": "boolean"},
    "warnings": _STRING_LIST,
}

RUNLOG_RECORD_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "oneOf": [
        {
            "properties": {
                "type": {"const": "header"},
                "config": {"type": "object"},
                "format": {"type": "integer"},
            },
            "required": ["config", "format"],
        },
        {
            "properties": {"type": {"const": "seed"}, **_CANDIDATE_FIELDS},
            "required": ["prompt_id", "prompt_text", "macro_f1", "disqualified"],
        },
        {
            "properties": {
                "type": {"const": "child"},
                "iteration": {"type": "integer", "minimum": 1},
                **_CANDIDATE_FIELDS,
            },
            "required": [
                "iteration",
                "prompt_id",
                "prompt_text",
                "lineage",
                "macro_f1",
                "disqualified",
            ],
        },
        {
            "properties": {
                "type": {"const": "incumbent"},
                "iteration": {"type": "integer", "minimum": 1},
                "parent_id": {"type": "string"},
                "prompt_id": {"type": "string"},
                "prompt_text": {"type": "string"},
                "operation": _NULLABLE_STRING,
                "macro_f1": _NUMBER,
                "disqualified": {"type": "boolean"},
                "carried_over": {"type": "boolean"},
                "warnings": _STRING_LIST,
            },
            "required": [
                "iteration",
                "parent_id",
                "prompt_id",
                "prompt_text",
                "macro_f1",
                "disqualified",
                "carried_over",
            ],
        },
        {
            "properties": {
                "type": {"const": "final"},
                "iteration": {"type": "integer", "minimum": 0},
                "prompt_id": {"type": "string"},
                "prompt_text": {"type": "string"},
                "macro_f1": _NUMBER,
                "disqualified": {"type": "boolean"},
                "warnings": _STRING_LIST,
            },
            "required": ["iteration", "prompt_id", "prompt_text", "macro_f1", "disqualified"],
        },
    ],
}
