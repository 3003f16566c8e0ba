"""Pluggable model backends and their JSON-over-HTTP wire protocol.

Three POST endpoints make up the protocol::

    /v1/fill_mask  {text, mask_sentinel, top_k}              -> {proposals: [{token, score}]}
    /v1/generate   {prompt, num_return, beam_size, temperature,
                    top_p, no_repeat_ngram, seed?}           -> {texts: [...]}
    /v1/classify   {texts, label_set}                        -> {labels: [...]}

Error replies are 4xx bodies ``{"error": <name>, "detail": <text>}``.
"""

import logging
import threading
from dataclasses import asdict, dataclass
from typing import Optional

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from . import schemas
from .errors import (
    BackendUnreachable,
    EmptyGeneration,
    InvalidGenerationParams,
    MalformedResponse,
    UnknownLabelFromServer,
    parse_error,
)
from .json_validator import JSONValidator

logger = logging.getLogger(__name__)

ENV_GEN_URL = "PROMPTEVO_GEN_URL"
ENV_MASK_URL = "PROMPTEVO_MASK_URL"
ENV_CLF_URL = "PROMPTEVO_CLF_URL"
ENV_EVAL_CLF_URL = "PROMPTEVO_EVAL_CLF_URL"
ENV_BEARER_TOKEN = "PROMPTEVO_BEARER_TOKEN"

FILL_MASK_PATH = "/v1/fill_mask"
GENERATE_PATH = "/v1/generate"
CLASSIFY_PATH = "/v1/classify"


@dataclass(frozen=True)
class TokenProposal:
    token: str
    score: float


@dataclass(frozen=True)
class GenerationParams:
    num_return: int = 3
    beam_size: int = 30
    temperature: float = 0.7
    top_p: float = 0.7
    no_repeat_ngram: int = 2

    def validate(self):
        problems = []
        if self.num_return < 1:
            problems.append("num_return must be >= 1")
        if self.num_return > self.beam_size:
            problems.append(
                f"num_return ({self.num_return}) exceeds beam_size ({self.beam_size})"
            )
        if not self.temperature > 0:
            problems.append("temperature must be > 0")
        if not 0 < self.top_p <= 1:
            problems.append("top_p must lie in (0, 1]")
        if self.no_repeat_ngram < 0:
            problems.append("no_repeat_ngram must be >= 0")
        if problems:
            raise InvalidGenerationParams("; ".join(problems))
        return self

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ClassifierVerdict:
    text: str
    label: str


@dataclass(frozen=True)
class BackendConfig:
    gen_url: Optional[str] = None
    mask_url: Optional[str] = None
    clf_url: Optional[str] = None
    eval_clf_url: Optional[str] = None
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    concurrency: int = 4
    bearer_token: Optional[str] = None
    mask_sentinel: str = "<mask>"


class WireClient:
    """JSON POST client with retries, backoff and a bound on in-flight calls."""

    def __init__(self, base_url, config=BackendConfig(), session=None):
        if not base_url:
            raise BackendUnreachable(f"No base URL configured for {type(self).__name__}")
        self.base_url = base_url.rstrip("/")
        self.config = config
        self.session = session or self._create_session()
        self._slots = threading.BoundedSemaphore(config.concurrency)

    def _create_session(self):
        session = requests.Session()
        retry_strategy = Retry(
            total=self.config.retries,
            connect=self.config.retries,
            read=self.config.retries,
            status=self.config.retries,
            backoff_factor=self.config.backoff,
            status_forcelist=[429, 500, 502, 503, 504],
            allowed_methods=frozenset({"GET", "POST"}),
            raise_on_status=True,
        )
        adapter = HTTPAdapter(max_retries=retry_strategy)
        session.mount("https://", adapter)
        session.mount("http://", adapter)
        if self.config.bearer_token:
            session.headers["Authorization"] = f"Bearer {self.config.bearer_token}"
        return session

    def probe(self):
        """Fail fast with BackendUnreachable if nothing answers at base_url."""
        try:
            self.session.get(self.base_url, timeout=self.config.timeout)
        except requests.exceptions.RequestException as e:
            raise BackendUnreachable(f"{self.base_url} is unreachable: {e}") from e

    def post(self, path, payload, response_schema):
        url = f"{self.base_url}{path}"
        with self._slots:
            try:
                resp = self.session.post(url, json=payload, timeout=self.config.timeout)
            except (
                requests.exceptions.ConnectionError,
                requests.exceptions.Timeout,
                requests.exceptions.RetryError,
            ) as e:
                logger.warning("Retries exhausted for %s: %s", url, e)
                raise BackendUnreachable(f"{url}: {e}") from e

        try:
            body = resp.json()
        except ValueError:
            body = None

        if resp.status_code >= 400:
            raise parse_error(resp.status_code, body)
        if body is None:
            raise MalformedResponse(f"{url} returned a non-JSON body")
        return JSONValidator.validate(
            body, response_schema, error_cls=MalformedResponse, what=f"Reply from {url}"
        )


class MaskFillClient(WireClient):
    def propose_tokens(self, masked_text, top_k):
        payload = {
            "text": masked_text,
            "mask_sentinel": self.config.mask_sentinel,
            "top_k": int(top_k),
        }
        body = self.post(FILL_MASK_PATH, payload, schemas.FILL_MASK_RESPONSE)
        proposals = [TokenProposal(p["token"], float(p["score"])) for p in body["proposals"]]
        if len(proposals) > top_k:
            raise MalformedResponse(f"{len(proposals)} proposals for top_k={top_k}")
        scores = [p.score for p in proposals]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise MalformedResponse("Proposal scores are not sorted descending")
        return proposals


class GeneratorClient(WireClient):
    def generate_texts(self, conditional_prompt, params=GenerationParams(), seed=None):
        params.validate()
        if not conditional_prompt.strip():
            raise ValueError("Conditional prompt is empty")
        payload = {"prompt": conditional_prompt, **params.to_dict()}
        if seed is not None:
            payload["seed"] = int(seed)
        body = self.post(GENERATE_PATH, payload, schemas.GENERATE_RESPONSE)
        texts = list(body["texts"])
        if not texts:
            raise EmptyGeneration(f"No text generated for {conditional_prompt!r}")
        if len(texts) > params.num_return:
            raise MalformedResponse(
                f"{len(texts)} texts returned for num_return={params.num_return}"
            )
        return texts


class ClassifierClient(WireClient):
    def __init__(self, base_url, label_set, config=BackendConfig(), session=None):
        super().__init__(base_url, config, session)
        self.label_set = tuple(label_set)

    def classify_texts(self, texts):
        texts = list(texts)
        if not texts:
            raise ValueError("Nothing to classify")
        payload = {"texts": texts, "label_set": list(self.label_set)}
        body = self.post(CLASSIFY_PATH, payload, schemas.CLASSIFY_RESPONSE)
        labels = body["labels"]
        if len(labels) != len(texts):
            raise MalformedResponse(f"{len(labels)} labels for {len(texts)} texts")
        unknown = [label for label in labels if label not in self.label_set]
        if unknown:
            raise UnknownLabelFromServer(f"Server returned unknown labels {unknown}")
        return [ClassifierVerdict(t, label) for t, label in zip(texts, labels)]


class BackendSuite:
    """The token proposer, text generator and condition classifier of one run.

    Backends are duck-typed: the proposer has ``propose_tokens(masked_text,
    top_k)``, the generator ``generate_texts(conditional_prompt, params, seed)``
    and each classifier ``classify_texts(texts)`` returning one
    ``ClassifierVerdict`` per text. ``eval_classifier`` is only used to score
    final evaluations independently.
    """

    def __init__(
        self, proposer, generator, classifier, config=BackendConfig(), eval_classifier=None
    ):
        self.proposer = proposer
        self.generator = generator
        self.classifier = classifier
        self.config = config
        self.eval_classifier = eval_classifier

    @classmethod
    def from_config(cls, config, label_set):
        missing = [
            name
            for name, url in (
                (ENV_MASK_URL, config.mask_url),
                (ENV_GEN_URL, config.gen_url),
                (ENV_CLF_URL, config.clf_url),
            )
            if not url
        ]
        if missing:
            raise BackendUnreachable(
                f"No backend URL for {', '.join(missing)} (set it or use --sim)"
            )
        eval_classifier = None
        if config.eval_clf_url:
            eval_classifier = ClassifierClient(config.eval_clf_url, label_set, config)
        return cls(
            proposer=MaskFillClient(config.mask_url, config),
            generator=GeneratorClient(config.gen_url, config),
            classifier=ClassifierClient(config.clf_url, label_set, config),
            config=config,
            eval_classifier=eval_classifier,
        )

    @classmethod
    def from_world(cls, world, config=BackendConfig(), label_set=None):
        """All three backends served in-process by one simulated world.

        With a ``label_set`` the classifier only answers labels of that set.
        """
        classifier = world if label_set is None else world.bound_to(label_set)
        return cls(proposer=world, generator=world, classifier=classifier, config=config)

    def probe(self):
        for backend in (self.proposer, self.generator, self.classifier, self.eval_classifier):
            if isinstance(backend, WireClient):
                backend.probe()
