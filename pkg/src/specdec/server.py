"""Newline-delimited JSON oracle server.

Each connection gets its own oracle instance from the factory; connections
never share cache state. Requests are handled strictly in order, one reply
line per request line. Malformed requests get an error reply and the
connection stays open.
"""

from __future__ import annotations

import json
import logging
import socketserver
import threading
from typing import Callable

log = logging.getLogger("specdec.server")

__all__ = ["OracleServer"]


def _handle_request(oracle, payload: bytes) -> dict:
    try:
        req = json.loads(payload)
    except json.JSONDecodeError as exc:
        return {"ok": False, "error": f"malformed json: {exc}"}
    if not isinstance(req, dict) or "op" not in req:
        return {"ok": False, "error": "request must be an object with an 'op' field"}
    op = req["op"]
    try:
        if op == "extend":
            tokens = req.get("tokens")
            if (
                not isinstance(tokens, list)
                or not tokens
                or not all(isinstance(t, int) and t >= 0 for t in tokens)
            ):
                return {"ok": False, "error": "extend needs a non-empty list of token ids"}
            return {"ok": True, "predictions": oracle.extend(tokens)}
        if op == "reset":
            oracle.reset()
            return {"ok": True}
        if op == "info":
            eos = oracle.eos if oracle.eos is not None else -1
            return {"ok": True, "vocab_size": oracle.vocab_size, "eos": eos}
        return {"ok": False, "error": f"unknown op {op!r}"}
    except Exception as exc:  # noqa: BLE001 - report, keep the connection alive
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        oracle = self.server.oracle_factory()  # type: ignore[attr-defined]
        log.info("connection from %s:%s", *self.client_address)
        while True:
            line = self.rfile.readline()
            if not line:
                break
            reply = _handle_request(oracle, line)
            self.wfile.write(json.dumps(reply).encode("utf-8") + b"\n")
            self.wfile.flush()


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class OracleServer:
    """Threaded TCP server speaking the oracle wire protocol."""

    def __init__(self, oracle_factory: Callable[[], object], host: str = "127.0.0.1", port: int = 0):
        self._server = _TCPServer((host, port), _Handler)
        self._server.oracle_factory = oracle_factory  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def serve_forever(self) -> None:
        log.info("listening on %s", self.address)
        self._server.serve_forever()

    def start_background(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
