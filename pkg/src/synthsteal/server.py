"""HTTP/JSON front end exposing a :class:`~synthsteal.target.Target`.

Endpoints::

    GET  /v1/meta      {"classes": C, "dim": d, "mode": "confidence" | "label"}
    GET  /v1/stats     {"queries": n}
    POST /v1/query     {"inputs": [[...], ...], "kind": "confidence" | "label"}
                       -> {"outputs": [[...], ...]} or {"labels": [...]}
    POST /v1/generate  {"class": c, "count": n} -> {"samples": [[...], ...]}

``kind`` defaults to the server's mode. A label-mode server answers
confidence requests with 403.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .exceptions import CapabilityError, SynthStealError
from .target import CONFIDENCE, LABEL, Target

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024 * 1024


class _BadRequest(Exception):
    pass


class TargetServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, target: Target, generator=None):
        super().__init__(address, _Handler)
        self.target = target
        self.generator = generator

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


class _Handler(BaseHTTPRequestHandler):
    server: TargetServer

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status, doc):
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _body(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length <= 0 or length > MAX_BODY:
            raise _BadRequest("missing or oversized request body")
        try:
            doc = json.loads(self.rfile.read(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise _BadRequest(f"body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise _BadRequest("body must be a JSON object")
        return doc

    def do_GET(self):
        t = self.server.target
        if self.path == "/v1/meta":
            self._send(200, t.meta())
        elif self.path == "/v1/stats":
            self._send(200, {"queries": t.query_count})
        else:
            self._send(404, {"error": f"no route {self.path}"})

    def do_POST(self):
        try:
            doc = self._body()
            if self.path == "/v1/query":
                self._send(200, self._query(doc))
            elif self.path == "/v1/generate":
                self._send(200, self._generate(doc))
            else:
                self._send(404, {"error": f"no route {self.path}"})
        except _BadRequest as exc:
            self._send(400, {"error": str(exc)})
        except CapabilityError as exc:
            self._send(403, {"error": "capability", "message": str(exc)})
        except SynthStealError as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # keep serving; report the failure to the client
            log.exception("request failed")
            self._send(500, {"error": repr(exc)})

    def _query(self, doc):
        t = self.server.target
        inputs = doc.get("inputs")
        if not isinstance(inputs, list):
            raise _BadRequest("'inputs' must be a list of rows")
        try:
            X = np.asarray(inputs, dtype=float).reshape(len(inputs), -1) if inputs else np.empty((0, t.n_features))
        except (TypeError, ValueError) as exc:
            raise _BadRequest(f"'inputs' must be numeric rows: {exc}") from exc
        if X.shape[1] != t.n_features or not np.all(np.isfinite(X)):
            raise _BadRequest(f"each input row must hold {t.n_features} finite numbers")
        kind = doc.get("kind", t.mode)
        if kind == CONFIDENCE:
            return {"outputs": t.query_confidence(X).tolist()}
        if kind == LABEL:
            return {"labels": [int(v) for v in t.query_label(X)]}
        raise _BadRequest("'kind' must be 'confidence' or 'label'")

    def _generate(self, doc):
        gen = self.server.generator
        if gen is None:
            raise _BadRequest("this server has no generator attached")
        c, n = doc.get("class"), doc.get("count")
        if not isinstance(c, int) or not isinstance(n, int):
            raise _BadRequest("'class' and 'count' must be integers")
        return {"samples": gen.generate(c, n).X.tolist()}


def make_server(target: Target, host: str = "127.0.0.1", port: int = 0, generator=None) -> TargetServer:
    """Bind a server; ``port=0`` picks a free port (see ``server.url``)."""
    return TargetServer((host, port), target, generator)


def serve_in_thread(server: TargetServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
