"""HTTP wire protocol for the annotation service (stdlib http.server).

Fixed paths:
  POST /annotators      {"id": str, "answers"?: [{insertion, deletion, substitution} x10]}
                        -> qualification outcome
  GET  /qualification   -> the 10 gold pairs, without their gold labels
  GET  /tasks/next?annotator=ID -> pair record, or 204 when exhausted
  POST /votes           {"annotator", "pair_id", "insertion", "deletion", "substitution"} -> 201
  GET  /export          -> {"aggregated": [...], "agreement": {...}}
  GET  /progress        -> counters

Errors are JSON bodies {"error": code, "message": str} with 4xx statuses.
Responses carry permissive CORS headers so the browser workbench can run
from a different origin.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .service import AnnotationService, ServiceError, export_bytes

__all__ = ["make_server", "serve_forever"]


def _pair_record(pair) -> dict:
    return {
        "id": pair.id,
        "complex_text": pair.complex_text,
        "simple_text": pair.simple_text,
    }


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService  # set by make_server

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass  # silence per-request stderr noise

    def _send(self, status: int, body: bytes | None, content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        if body is not None:
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
        else:
            self.send_header("Content-Length", "0")
        self.end_headers()
        if body is not None:
            self.wfile.write(body)

    def _send_json(self, status: int, payload) -> None:
        self._send(status, json.dumps(payload, ensure_ascii=False).encode("utf-8"))

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValueError("empty request body")
        payload = json.loads(raw.decode("utf-8"))
        if not isinstance(payload, dict):
            raise ValueError("request body must be a JSON object")
        return payload

    def do_OPTIONS(self) -> None:  # CORS preflight
        self._send(204, None)

    def do_GET(self) -> None:
        url = urlparse(self.path)
        try:
            if url.path == "/tasks/next":
                params = parse_qs(url.query)
                annotator = (params.get("annotator") or [""])[0]
                pair = self.service.next_task(annotator)
                if pair is None:
                    self._send(204, None)
                else:
                    self._send_json(200, _pair_record(pair))
            elif url.path == "/qualification":
                items = [
                    {"id": g.id, "complex_text": g.complex_text, "simple_text": g.simple_text}
                    for g in self.service.gold_items
                ]
                self._send_json(200, {"pairs": items})
            elif url.path == "/export":
                self._send(200, export_bytes(self.service.export_results()))
            elif url.path == "/progress":
                self._send_json(200, self.service.progress())
            else:
                self._send_json(404, {"error": "not_found", "message": f"no route {url.path}"})
        except ServiceError as exc:
            self._send_json(exc.http_status, {"error": exc.code, "message": str(exc)})

    def do_POST(self) -> None:
        url = urlparse(self.path)
        try:
            body = self._read_json()
        except (ValueError, json.JSONDecodeError) as exc:
            self._send_json(400, {"error": "bad_request", "message": str(exc)})
            return
        try:
            if url.path == "/annotators":
                annotator_id = body.get("id", "")
                if "answers" in body and body["answers"] is not None:
                    outcome = self.service.register_and_qualify(annotator_id, body["answers"])
                    self._send_json(200, outcome.to_record())
                else:
                    outcome = self.service.qualification_status(annotator_id)
                    if outcome is None:
                        self._send_json(
                            404, {"error": "unknown_annotator", "message": f"{annotator_id!r} not registered"}
                        )
                    else:
                        self._send_json(200, outcome.to_record())
            elif url.path == "/votes":
                ack = self.service.submit_vote(
                    body.get("annotator", ""),
                    body.get("pair_id", ""),
                    {k: body.get(k) for k in ("insertion", "deletion", "substitution")},
                )
                self._send_json(201, ack)
            else:
                self._send_json(404, {"error": "not_found", "message": f"no route {url.path}"})
        except ServiceError as exc:
            self._send_json(exc.http_status, {"error": exc.code, "message": str(exc)})


def make_server(service: AnnotationService, port: int, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: AnnotationService, port: int, host: str = "127.0.0.1") -> None:
    server = make_server(service, port, host=host)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        service.close()


def run_in_thread(service: AnnotationService, port: int = 0, host: str = "127.0.0.1"):
    """Start the server on a background thread; returns (server, base_url)."""
    server = make_server(service, port, host=host)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://{host}:{server.server_address[1]}"
