"""Filesystem-backed HTTP endpoint for browser study sessions.

Routes:

* ``GET /plan/<observer_id>``  -> serves ``plans_dir/<observer_id>.json``
* ``POST /record``             -> validates a preference-record body and
  writes ``records_dir/<observer_id>.json`` atomically
* any other ``GET``            -> static file from ``static_dir`` when one
  is configured (``/`` maps to ``index.html``)

The server is a toy for local studies: no auth, bind it to localhost.
"""

from __future__ import annotations

import json
import mimetypes
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import unquote, urlsplit

from .subjective import PreferenceRecord, SubjectiveError, write_record

__all__ = ["build_server"]

_OBSERVER_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]{0,63}$")
_MAX_BODY = 10 * 1024 * 1024


def build_server(
    plans_dir: str | Path,
    records_dir: str | Path,
    static_dir: str | Path | None = None,
    host: str = "127.0.0.1",
    port: int = 0,
) -> ThreadingHTTPServer:
    """Create (but do not start) the session server; port 0 picks a free port."""
    plans = Path(plans_dir)
    records = Path(records_dir)
    records.mkdir(parents=True, exist_ok=True)
    static = Path(static_dir).resolve() if static_dir is not None else None

    class Handler(BaseHTTPRequestHandler):
        server_version = "lapvqa-session"

        def log_message(self, fmt: str, *args: object) -> None:  # keep tests quiet
            pass

        def _send(self, code: int, body: bytes, content_type: str) -> None:
            self.send_response(code)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, code: int, obj: object) -> None:
            self._send(code, json.dumps(obj).encode("utf-8"), "application/json")

        def do_GET(self) -> None:  # noqa: N802 (http.server API)
            path = unquote(urlsplit(self.path).path)
            if path.startswith("/plan/"):
                observer = path[len("/plan/"):]
                if not _OBSERVER_RE.match(observer):
                    self._send_json(400, {"error": "invalid observer id"})
                    return
                plan_file = plans / f"{observer}.json"
                if not plan_file.is_file():
                    self._send_json(404, {"error": f"no plan for observer {observer!r}"})
                    return
                self._send(200, plan_file.read_bytes(), "application/json")
                return
            if static is not None:
                rel = path.lstrip("/") or "index.html"
                target = (static / rel).resolve()
                if static not in target.parents and target != static:
                    self._send_json(404, {"error": "not found"})
                    return
                if target.is_dir():
                    target = target / "index.html"
                if not target.is_file():
                    self._send_json(404, {"error": "not found"})
                    return
                ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
                self._send(200, target.read_bytes(), ctype)
                return
            self._send_json(404, {"error": "not found"})

        def do_POST(self) -> None:  # noqa: N802 (http.server API)
            path = unquote(urlsplit(self.path).path)
            if path != "/record":
                self._send_json(404, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
            except ValueError:
                self._send_json(400, {"error": "bad Content-Length"})
                return
            if length <= 0 or length > _MAX_BODY:
                self._send_json(400, {"error": "body required and must be under 10MB"})
                return
            body = self.rfile.read(length)
            try:
                record = PreferenceRecord.from_json_obj(json.loads(body))
            except (json.JSONDecodeError, SubjectiveError) as exc:
                self._send_json(400, {"error": str(exc)})
                return
            if not _OBSERVER_RE.match(record.observer_id):
                self._send_json(400, {"error": "invalid observer id"})
                return
            write_record(record, records / f"{record.observer_id}.json")
            self._send_json(201, {"ok": True, "observer_id": record.observer_id})

    return ThreadingHTTPServer((host, port), Handler)
