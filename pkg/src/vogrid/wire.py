"""Newline-delimited JSON over TCP.

Every request is one JSON object on one line with at least "type" and "id"
fields; every reply echoes the id. Failures come back as
{"id": ..., "error": {"code": ..., "message": ...}} and the connection stays
open. A server constructed with a token requires an "auth" field on every
request.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from typing import Callable


class WireError(Exception):
    pass


def error_reply(msg_id, code: str, message: str) -> dict:
    return {"id": msg_id, "error": {"code": code, "message": message}}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline()
            if not line:
                return
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                self._send(error_reply(None, "malformed", "not valid JSON"))
                continue
            if not isinstance(msg, dict):
                self._send(error_reply(None, "malformed", "request must be an object"))
                continue
            token = self.server.auth_token
            if token is not None and msg.get("auth") != token:
                self._send(error_reply(msg.get("id"), "unauthorized", "bad or missing auth token"))
                continue
            try:
                reply = self.server.dispatch(msg)
            except Exception as exc:  # handler bug; keep serving
                reply = error_reply(msg.get("id"), "internal", str(exc))
            self._send(reply)

    def _send(self, reply: dict):
        data = json.dumps(reply, separators=(",", ":")) + "\n"
        try:
            self.wfile.write(data.encode("utf-8"))
            self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass


class LineServer(socketserver.ThreadingTCPServer):
    """TCP server feeding one-line JSON requests to a dispatch callable."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str, port: int, dispatch: Callable[[dict], dict],
                 auth_token: str | None = None):
        super().__init__((host, port), _Handler)
        self.dispatch = dispatch
        self.auth_token = auth_token

    @property
    def port(self) -> int:
        return self.server_address[1]

    def serve_in_thread(self) -> threading.Thread:
        # tight poll so shutdown() returns promptly
        t = threading.Thread(target=lambda: self.serve_forever(poll_interval=0.05),
                             daemon=True)
        t.start()
        return t


class Connection:
    """Client side: send one request per call, read one reply line."""

    def __init__(self, host: str, port: int, timeout: float = 10.0,
                 auth_token: str | None = None):
        self._auth = auth_token
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._rfile = self._sock.makefile("rb")
        self._next_id = 0

    def request(self, msg: dict) -> dict:
        msg = dict(msg)
        if "id" not in msg:
            self._next_id += 1
            msg["id"] = self._next_id
        if self._auth is not None:
            msg["auth"] = self._auth
        data = json.dumps(msg, separators=(",", ":")) + "\n"
        self._sock.sendall(data.encode("utf-8"))
        line = self._rfile.readline()
        if not line:
            raise WireError("connection closed by server")
        reply = json.loads(line)
        if reply.get("id") != msg["id"]:
            raise WireError(f"reply id {reply.get('id')!r} does not match {msg['id']!r}")
        return reply

    def close(self):
        try:
            self._rfile.close()
        finally:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def send_request(host: str, port: int, msg: dict, timeout: float = 10.0,
                 auth_token: str | None = None) -> dict:
    with Connection(host, port, timeout=timeout, auth_token=auth_token) as conn:
        return conn.request(msg)
