"""Local HTTP service implementing the annotation wire contract.

POST /annotate with {"texts": [{"id", "text", "language"}], "kinds": [...]}
returns {"annotations": [<sidecar records>]} in request order. Malformed
requests get a 400 whose body names the offending field. GET /health is a
liveness probe. Stateless per request.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .backends import ALL_KINDS, NOUN_PHRASES, SEGMENTATION
from .exporter import annotate_one


def validate_request(body: dict) -> str | None:
    """Field name of the first contract violation, or None if valid."""
    if not isinstance(body, dict):
        return "body"
    texts = body.get("texts")
    if not isinstance(texts, list):
        return "texts"
    for item in texts:
        if not isinstance(item, dict):
            return "texts"
        for key in ("id", "text", "language"):
            if not isinstance(item.get(key), str):
                return key
        if item["language"] not in ("zh", "en"):
            return "language"
    kinds = body.get("kinds")
    if not isinstance(kinds, list) or not kinds:
        return "kinds"
    for kind in kinds:
        if kind not in ALL_KINDS or kind == NOUN_PHRASES:
            return "kinds"
    if SEGMENTATION in kinds and any(t["language"] != "zh" for t in texts):
        return "kinds"
    return None


def _make_handler(backend):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def _send(self, status: int, payload: dict):
            data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok", "backend": backend.name})
            else:
                self._send(404, {"error": "path"})

        def do_POST(self):
            if self.path != "/annotate":
                self._send(404, {"error": "path"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                self._send(400, {"error": "body"})
                return
            bad_field = validate_request(body)
            if bad_field is not None:
                self._send(400, {"error": bad_field})
                return
            records = [
                annotate_one(backend, t["id"], t["text"], t["language"], body["kinds"])
                for t in body["texts"]
            ]
            self._send(200, {"annotations": records})

    return Handler


def make_server(backend, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _make_handler(backend))


def serve(backend, port: int, host: str = "127.0.0.1") -> None:
    server = make_server(backend, port, host)
    print(f"annotation service on http://{host}:{server.server_address[1]}/annotate "
          f"(backend={backend.name})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


class BackgroundServer:
    """Context manager used by tests: serve on an ephemeral port."""

    def __init__(self, backend):
        self.server = make_server(backend, 0)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
