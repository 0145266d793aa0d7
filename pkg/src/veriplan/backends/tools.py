"""Tool services over HTTP.

Wire protocol: ``POST /call`` with ``{"tool": name, "arguments": {...}}``
answers ``{"ok": true, "result": ...}`` or ``{"ok": false, "error": msg}``;
``GET /tools`` answers ``{"tools": [names]}``. Loosely modelled on an
MCP-over-HTTP deployment, not a conformant MCP implementation.
"""
from __future__ import annotations

import json
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable

from ..limiter import ToolCallLimiter
from ..results import ToolTraceEntry


@dataclass(frozen=True)
class ToolResponse:
    ok: bool
    result: Any = None
    error: str | None = None
    # short outcome tag recorded in tool traces
    outcome: str = "ok"


def tool_service_call(
    endpoint: str,
    tool: str,
    arguments: dict[str, Any],
    *,
    timeout: float = 30.0,
    trace: list[ToolTraceEntry] | None = None,
) -> ToolResponse:
    """Issue one tool call; transport problems come back as error values."""
    body = json.dumps({"tool": tool, "arguments": arguments}).encode()
    req = urllib.request.Request(
        endpoint.rstrip("/") + "/call",
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
        response = _parse_response(raw)
    except urllib.error.HTTPError as exc:
        try:
            response = _parse_response(exc.read())
        except Exception:
            response = ToolResponse(False, error=f"HTTP {exc.code}", outcome="transport")
    except (socket.timeout, TimeoutError):
        response = ToolResponse(False, error=f"timed out after {timeout}s", outcome="timeout")
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            response = ToolResponse(False, error=f"timed out after {timeout}s", outcome="timeout")
        else:
            response = ToolResponse(False, error=str(exc.reason), outcome="transport")
    except OSError as exc:
        response = ToolResponse(False, error=str(exc), outcome="transport")
    if trace is not None:
        trace.append(ToolTraceEntry(tool, response.outcome))
    return response


def _parse_response(raw: bytes) -> ToolResponse:
    try:
        doc = json.loads(raw)
    except ValueError:
        return ToolResponse(False, error="malformed response", outcome="malformed")
    if not isinstance(doc, dict) or not isinstance(doc.get("ok"), bool):
        return ToolResponse(False, error="malformed response", outcome="malformed")
    if doc["ok"]:
        return ToolResponse(True, result=doc.get("result"))
    return ToolResponse(False, error=str(doc.get("error", "")), outcome="error")


def list_tools(endpoint: str, *, timeout: float = 10.0) -> list[str]:
    with urllib.request.urlopen(endpoint.rstrip("/") + "/tools", timeout=timeout) as resp:
        return list(json.loads(resp.read())["tools"])


ToolFn = Callable[[dict[str, Any]], Any]


class ToolServer:
    """Threaded in-process tool service, mainly for tests and demos.

    Usable as a context manager; ``endpoint`` is valid once started.
    """

    def __init__(self, tools: dict[str, ToolFn], host: str = "127.0.0.1", port: int = 0):
        self.tools = dict(tools)
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, doc: Any) -> None:
                data = json.dumps(doc).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                if self.path.rstrip("/") == "/tools":
                    self._send(200, {"tools": sorted(server.tools)})
                else:
                    self._send(404, {"ok": False, "error": "not found"})

            def do_POST(self):
                if self.path.rstrip("/") != "/call":
                    self._send(404, {"ok": False, "error": "not found"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    doc = json.loads(self.rfile.read(length))
                    name, args = doc["tool"], doc.get("arguments") or {}
                except (ValueError, KeyError, TypeError):
                    self._send(400, {"ok": False, "error": "bad request"})
                    return
                fn = server.tools.get(name)
                if fn is None:
                    self._send(404, {"ok": False, "error": f"unknown tool {name!r}"})
                    return
                try:
                    self._send(200, {"ok": True, "result": fn(args)})
                except Exception as exc:
                    self._send(200, {"ok": False, "error": str(exc)})

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ToolServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "ToolServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class ToolSession:
    """Tool access for one agent execution.

    Every call passes the limiter first; a denied call never reaches the
    transport. ``transport`` is either an HTTP endpoint string or a dict of
    local tool functions (for scripted runs).
    """

    def __init__(
        self,
        transport: str | dict[str, ToolFn] | None,
        limiter: ToolCallLimiter | None = None,
        *,
        timeout: float = 30.0,
    ):
        self.transport = transport
        self.limiter = limiter or ToolCallLimiter()
        self.timeout = timeout
        self.trace: list[ToolTraceEntry] = []

    def call(self, tool: str, arguments: dict[str, Any] | None = None) -> ToolResponse:
        arguments = arguments or {}
        verdict = self.limiter.record(tool)
        if not verdict:
            self.trace.append(ToolTraceEntry(tool, f"denied:{verdict.reason}"))
            return ToolResponse(False, error=f"tool call limit ({verdict.reason})", outcome="denied")
        if isinstance(self.transport, str):
            return tool_service_call(self.transport, tool, arguments, timeout=self.timeout, trace=self.trace)
        fn = (self.transport or {}).get(tool)
        if fn is None:
            response = ToolResponse(False, error=f"unknown tool {tool!r}", outcome="error")
        else:
            try:
                response = ToolResponse(True, result=fn(arguments))
            except Exception as exc:
                response = ToolResponse(False, error=str(exc), outcome="error")
        self.trace.append(ToolTraceEntry(tool, response.outcome))
        return response
