"""Socket mode: the edge agent as a TCP server, the device side as its client."""
from __future__ import annotations

import logging
import socket
import socketserver
import threading

from .errors import ProtocolError
from .protocol import BoxMessage, ResultMessage, encode_message, read_message

log = logging.getLogger(__name__)


class _EdgeHandler(socketserver.StreamRequestHandler):
    def handle(self):
        edge = self.server.edge
        while True:
            try:
                msg = read_message(self.rfile)
            except ProtocolError as exc:
                log.warning("dropping connection from %s: %s", self.client_address, exc)
                return
            if msg is None:
                return
            if not isinstance(msg, BoxMessage):
                log.warning("unexpected %s from %s", type(msg).__name__, self.client_address)
                return
            self.wfile.write(encode_message(edge.infer(msg)))
            self.wfile.flush()


class EdgeServer(socketserver.ThreadingTCPServer):
    """Each device connection gets its own thread; requests on one connection are answered in order."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, edge):
        self.edge = edge
        super().__init__(address, _EdgeHandler)

    def start_background(self) -> threading.Thread:
        th = threading.Thread(target=self.serve_forever, daemon=True)
        th.start()
        return th


class SocketEdge:
    """Drop-in for ``InProcessEdge`` that forwards box messages over TCP."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")

    def infer(self, msg: BoxMessage) -> ResultMessage:
        self.sock.sendall(encode_message(msg))
        reply = read_message(self.rfile)
        if not isinstance(reply, ResultMessage) or (reply.frame, reply.part) != (msg.frame, msg.part):
            raise ProtocolError(f"unexpected reply {reply!r} to box for frame {msg.frame} part {msg.part}")
        return reply

    def close(self):
        try:
            self.rfile.close()
        finally:
            self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
