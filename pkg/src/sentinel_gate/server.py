"""Operator HTTP API over a live session: pending escalations, approval
resolution, the audit log, and an ndjson event stream with replay.

Endpoints (all JSON):

    GET  /v1/pending            escalations awaiting an operator
    POST /v1/approvals/{id}     body {"granted": bool, "approver"?: str}
    GET  /v1/audit?since=N      audit records with seq > N
    GET  /v1/events?since=N     ndjson stream; replays events with id > N,
                                then stays open for live ones

If the server was started with an operator token, every request must carry
it in the X-Operator-Token header.  Built on the stdlib threading HTTP
server; responses close the connection, which keeps streaming simple.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from urllib.parse import parse_qs, urlsplit

from .gateway import AlreadyResolvedError, Gateway, NoSuchApprovalError, SessionContext


class EventLog:
    """Monotonic event journal with blocking tail reads."""

    def __init__(self) -> None:
        self._events: list[dict] = []
        self._cond = threading.Condition()

    def append(self, event: str, data: dict) -> None:
        with self._cond:
            self._events.append({"id": len(self._events) + 1, "event": event, "data": data})
            self._cond.notify_all()

    def since(self, last_id: int) -> list[dict]:
        with self._cond:
            return [e for e in self._events if e["id"] > last_id]

    def wait_beyond(self, last_id: int, timeout: float) -> list[dict]:
        with self._cond:
            self._cond.wait_for(lambda: self._events and self._events[-1]["id"] > last_id, timeout)
            return [e for e in self._events if e["id"] > last_id]


class MonitorServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], session: SessionContext, gateway: Gateway,
                 token: Optional[str] = None, on_resolve: Optional[Callable[[], None]] = None):
        super().__init__(address, _Handler)
        self.session = session
        self.gateway = gateway
        self.token = token
        # Invoked (under the session lock) after each successful resolution;
        # serve mode uses it to let a paused fixture replay continue.
        self.on_resolve = on_resolve
        self.events = EventLog()
        self.lock = threading.Lock()
        session.hooks.append(self.events.append)


class _Handler(BaseHTTPRequestHandler):
    server: MonitorServer

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass

    # -- plumbing ------------------------------------------------------------

    def _headers(self, status: int, content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, X-Operator-Token")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()

    def _json(self, status: int, payload: dict) -> None:
        self._headers(status)
        self.wfile.write(json.dumps(payload).encode("utf-8"))

    def _authorized(self) -> bool:
        token = self.server.token
        if token is None:
            return True
        return self.headers.get("X-Operator-Token") == token

    def _query(self) -> dict[str, list[str]]:
        return parse_qs(urlsplit(self.path).query)

    def _route(self) -> str:
        return urlsplit(self.path).path.rstrip("/") or "/"

    # -- methods ---------------------------------------------------------------

    def do_OPTIONS(self) -> None:
        self._headers(204)

    def do_GET(self) -> None:
        if not self._authorized():
            self._json(401, {"error": "missing or bad operator token"})
            return
        route = self._route()
        if route == "/":
            self._json(200, {
                "service": "tool-call monitor",
                "session": self.server.session.session_id,
                "endpoints": ["/v1/pending", "/v1/approvals/{id}", "/v1/audit", "/v1/events"],
            })
        elif route == "/v1/pending":
            with self.server.lock:
                pending = [
                    e.to_dict()
                    for e in self.server.session.pending.values()
                    if e.status == "pending"
                ]
            pending.sort(key=lambda e: e["created_seq"])
            self._json(200, {"pending": pending})
        elif route == "/v1/audit":
            since = self._int_param("since", 0)
            if since is None:
                return
            with self.server.lock:
                records = [r.to_dict() for r in self.server.session.audit if r.seq > since]
                latest = self.server.session.audit[-1].seq if self.server.session.audit else 0
            self._json(200, {"records": records, "latest_seq": latest})
        elif route == "/v1/events":
            since = self._int_param("since", 0)
            if since is None:
                return
            self._stream_events(since)
        else:
            self._json(404, {"error": f"no such route: {route}"})

    def do_POST(self) -> None:
        if not self._authorized():
            self._json(401, {"error": "missing or bad operator token"})
            return
        route = self._route()
        if route.startswith("/v1/approvals/"):
            approval_id = route.rsplit("/", 1)[1]
            length = int(self.headers.get("Content-Length") or 0)
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._json(400, {"error": "body must be JSON"})
                return
            granted = body.get("granted")
            if not isinstance(granted, bool):
                self._json(400, {"error": "granted must be a boolean"})
                return
            approver = body.get("approver", "operator")
            if not isinstance(approver, str):
                self._json(400, {"error": "approver must be a string"})
                return
            with self.server.lock:
                try:
                    record = self.server.gateway.resolve_approval(approval_id, granted, approver)
                except NoSuchApprovalError:
                    self._json(404, {"error": f"unknown approval id: {approval_id}"})
                    return
                except AlreadyResolvedError as e:
                    self._json(409, {"error": str(e)})
                    return
                esc = self.server.session.pending[approval_id]
                if self.server.on_resolve is not None:
                    self.server.on_resolve()
            self._json(200, {"resolution": record.to_dict(), "escalation": esc.to_dict()})
        else:
            self._json(404, {"error": f"no such route: {route}"})

    # -- helpers ---------------------------------------------------------------

    def _int_param(self, name: str, default: int) -> Optional[int]:
        values = self._query().get(name)
        if not values:
            return default
        try:
            return int(values[0])
        except ValueError:
            self._json(400, {"error": f"{name} must be an integer"})
            return None

    def _stream_events(self, since: int) -> None:
        self._headers(200, content_type="application/x-ndjson")
        last = since
        try:
            backlog = self.server.events.since(last)
            for event in backlog:
                self.wfile.write((json.dumps(event) + "\n").encode("utf-8"))
                last = event["id"]
            self.wfile.flush()
            while True:
                fresh = self.server.events.wait_beyond(last, timeout=15.0)
                if not fresh:
                    self.wfile.write(b'{"event":"heartbeat"}\n')
                    self.wfile.flush()
                    continue
                for event in fresh:
                    self.wfile.write((json.dumps(event) + "\n").encode("utf-8"))
                    last = event["id"]
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            return


def make_server(
    session: SessionContext,
    gateway: Gateway,
    host: str = "127.0.0.1",
    port: int = 8787,
    token: Optional[str] = None,
    on_resolve: Optional[Callable[[], None]] = None,
) -> MonitorServer:
    return MonitorServer((host, port), session, gateway, token=token, on_resolve=on_resolve)
