"""Socket layer: a threading HTTP/1.1 server delegating every request to a :class:`MintApp`."""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .app import MintApp


def make_handler(app: MintApp):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "mint"

        def _run(self):
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            resp = app.handle(self.command, self.path, dict(self.headers.items()), body)
            self.send_response(resp.status)
            for k, v in resp.headers.items():
                self.send_header(k, v)
            if "Content-Length" not in resp.headers:
                self.send_header("Content-Length", str(len(resp.body)))
            self.end_headers()
            if resp.body:
                self.wfile.write(resp.body)

        do_GET = do_POST = do_HEAD = _run

        def log_message(self, format, *args):
            # request logging goes through the app's redacting logger instead
            pass

    return Handler


def make_server(app: MintApp, host: str | None = None, port: int | None = None) -> ThreadingHTTPServer:
    host = app.config.host if host is None else host
    port = app.config.port if port is None else port
    server = ThreadingHTTPServer((host, port), make_handler(app))
    server.daemon_threads = True
    return server


def serve_in_background(app: MintApp, host: str = "127.0.0.1", port: int = 0) -> tuple[ThreadingHTTPServer, threading.Thread]:
    """Start a server on a free port; callers stop it with ``server.shutdown()``."""
    server = make_server(app, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
