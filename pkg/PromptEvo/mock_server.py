"""A loopback HTTP server that speaks the backend wire protocol on behalf of a
toy world, with optional fault injection for client tests."""

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, FrozenSet

import numpy as np

from . import schemas
from .backend_api import CLASSIFY_PATH, FILL_MASK_PATH, GENERATE_PATH, GenerationParams
from .errors import InvalidGenerationParams
from .json_validator import JSONValidator

logger = logging.getLogger(__name__)

ENDPOINTS = (FILL_MASK_PATH, GENERATE_PATH, CLASSIFY_PATH)

_REQUEST_SCHEMAS = {
    FILL_MASK_PATH: schemas.FILL_MASK_REQUEST,
    GENERATE_PATH: schemas.GENERATE_REQUEST,
    CLASSIFY_PATH: schemas.CLASSIFY_REQUEST,
}


class _BadRequest(Exception):
    def __init__(self, status, name, detail):
        super().__init__(detail)
        self.status = status
        self.name = name
        self.detail = detail


@dataclass(frozen=True)
class FaultPlan:
    # Endpoints answering 200 with a non-JSON body.
    malformed: FrozenSet[str] = frozenset()
    # Endpoint -> number of initial calls answered with 503.
    fail_first: Dict[str, int] = field(default_factory=dict)
    # Upper bound of the random per-request delay in seconds.
    max_delay: float = 0.0
    delay_seed: int = 0


class MockBackendServer:
    """Serves /v1/fill_mask, /v1/generate and /v1/classify from a ToyWorld.

    Use as a context manager; ``url`` is valid once started.
    """

    def __init__(self, world, host="127.0.0.1", port=0, faults=FaultPlan(), bearer_token=None):
        self.world = world
        self.faults = faults
        self.bearer_token = bearer_token
        self.calls = {path: 0 for path in ENDPOINTS}
        self._lock = threading.Lock()
        self._rng = np.random.default_rng(faults.delay_seed)
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.mock = self
        self._thread = None

    @property
    def url(self):
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        logger.info("Mock backend listening on %s", self.url)
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _next_call(self, path):
        with self._lock:
            self.calls[path] += 1
            delay = self._rng.random() * self.faults.max_delay
            return self.calls[path], delay

    def handle(self, path, headers, raw_body):
        """Return (status, body) where body is a dict or a raw string."""
        if path not in _REQUEST_SCHEMAS:
            return 404, {"error": "NotFound", "detail": path}
        if self.bearer_token and headers.get("Authorization") != f"Bearer {self.bearer_token}":
            return 401, {"error": "Unauthorized", "detail": "bad or missing bearer token"}

        n, delay = self._next_call(path)
        if delay:
            time.sleep(delay)
        if n <= self.faults.fail_first.get(path, 0):
            return 503, {"error": "Unavailable", "detail": f"injected failure {n}"}
        if path in self.faults.malformed:
            return 200, "<html>not json</html>"

        try:
            try:
                payload = json.loads(raw_body or b"")
            except ValueError as e:
                raise _BadRequest(400, "BadRequest", f"body is not JSON: {e}") from e
            JSONValidator.validate(
                payload, _REQUEST_SCHEMAS[path], error_cls=ValueError, what="Request"
            )
            return 200, self._dispatch(path, payload)
        except _BadRequest as e:
            return e.status, {"error": e.name, "detail": e.detail}
        except ValueError as e:
            return 400, {"error": "BadRequest", "detail": str(e)}

    def _dispatch(self, path, payload):
        if path == FILL_MASK_PATH:
            sentinel = payload["mask_sentinel"]
            if payload["text"].split().count(sentinel) != 1:
                raise _BadRequest(
                    422, "NoMaskInRequest", f"expected exactly one {sentinel!r} in the text"
                )
            proposals = self.world.toy_propose(payload["text"], payload["top_k"], sentinel)
            return {"proposals": [{"token": p.token, "score": p.score} for p in proposals]}

        if path == GENERATE_PATH:
            fields = {k: payload[k] for k in GenerationParams.__dataclass_fields__}
            try:
                params = GenerationParams(**fields).validate()
            except InvalidGenerationParams as e:
                raise _BadRequest(400, "InvalidGenerationParams", str(e)) from e
            texts = self.world.toy_generate(payload["prompt"], params, payload.get("seed"))
            return {"texts": texts}

        verdicts = self.world.toy_classify(payload["texts"], payload["label_set"])
        return {"labels": [v.label for v in verdicts]}


class _Handler(BaseHTTPRequestHandler):
    def _reply(self, status, body):
        if isinstance(body, str):
            data, content_type = body.encode("utf-8"), "text/html"
        else:
            data, content_type = json.dumps(body).encode("utf-8"), "application/json"
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._reply(200, {"status": "ok", "endpoints": list(ENDPOINTS)})

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        status, body = self.server.mock.handle(self.path, self.headers, raw)
        self._reply(status, body)

    def log_message(self, format, *args):
        logger.debug("%s - %s", self.address_string(), format % args)
