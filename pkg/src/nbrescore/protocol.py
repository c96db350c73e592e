"""Line-delimited JSON protocol for out-of-process language-model scorers.

One JSON object per ``\\n``-terminated UTF-8 line.  The first line in each
direction is a hello; afterwards the client pipelines up to ``max_inflight``
score requests and the server may answer out of order.  Requests carry a
monotonically increasing id; every id is resolved exactly once on the client
no matter how replies are ordered, duplicated, or delayed.

Client hello:   {"type": "hello", "version": 1}
Server hello:   {"type": "hello", "version": 1, "modes": ["masked"],
                 "max_window": 512, "name": "...", "provenance": "pretrained"}
Request:        {"id": 7, "mode": "masked", "tokens": [...],
                 "left_context": [...], "right_context": [...]}
Response:       {"id": 7, "logprob": -12.25}   or   {"id": 7, "error": "OOM"}

Transports: a child process's stdio (default) or a TCP stream.
"""

from __future__ import annotations

import json
import math
import shlex
import socket
import subprocess
import threading
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass

from .errors import BackendError, ProtocolError, ScorerTimeout

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT_S = 60.0
DEFAULT_MAX_INFLIGHT = 32


@dataclass(frozen=True)
class Capabilities:
    modes: frozenset[str]
    max_window: int | None
    name: str
    provenance: str


class StdioTransport:
    """Spawn a scorer child process and talk over its standard streams."""

    def __init__(self, command: str | list[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )

    def send_line(self, line: str) -> None:
        if self.proc.stdin is None or self.proc.poll() is not None:
            raise ProtocolError("scorer process is gone")
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv_line(self) -> str | None:
        line = self.proc.stdout.readline()
        return line.rstrip("\n") if line else None

    def close(self) -> None:
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class TcpTransport:
    """Connect to a scorer serving the same protocol on a TCP port."""

    def __init__(self, addr: str):
        host, _, port = addr.rpartition(":")
        self.sock = socket.create_connection((host, int(port)))
        self._reader = self.sock.makefile("r", encoding="utf-8", newline="\n")
        self._writer = self.sock.makefile("w", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        self._writer.write(line + "\n")
        self._writer.flush()

    def recv_line(self) -> str | None:
        line = self._reader.readline()
        return line.rstrip("\n") if line else None

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def _check_tokens(label: str, tokens) -> list[str]:
    out = []
    for t in tokens:
        if not isinstance(t, str):
            raise ProtocolError(f"{label} contains a non-string token")
        if "\n" in t:
            raise ProtocolError(f"{label} contains the record delimiter")
        out.append(t)
    return out


class ScorerClient:
    """Pipelined client with exactly-once id resolution.

    One reader thread resolves responses to futures; callers may submit from
    any thread.  On timeout the same id is re-sent once (the server side must
    treat requests idempotently); a second timeout raises ScorerTimeout.
    """

    def __init__(
        self,
        transport,
        max_inflight: int = DEFAULT_MAX_INFLIGHT,
        timeout_s: float = DEFAULT_TIMEOUT_S,
    ):
        self.transport = transport
        self.timeout_s = timeout_s
        self.capabilities: Capabilities | None = None
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()  # lines must never interleave
        self._pending: dict[int, Future] = {}
        self._payloads: dict[int, str] = {}
        self._next_id = 0
        self._inflight = threading.BoundedSemaphore(max_inflight)
        self._reader: threading.Thread | None = None
        self._closed = False

    # -- handshake ---------------------------------------------------------

    def handshake(self, hello_timeout_s: float | None = None) -> Capabilities:
        self.transport.send_line(
            json.dumps({"type": "hello", "version": PROTOCOL_VERSION})
        )
        line = self.transport.recv_line()
        if line is None:
            raise ProtocolError("connection closed before hello")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed hello: {line!r}") from exc
        if not isinstance(obj, dict) or obj.get("type") != "hello":
            raise ProtocolError(f"expected hello, got {line!r}")
        if "version" not in obj:
            raise ProtocolError("hello is missing the version field")
        if obj["version"] != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version {obj['version']!r}")
        modes = obj.get("modes")
        if not isinstance(modes, list) or not modes:
            raise ProtocolError("hello does not advertise any modes")
        max_window = obj.get("max_window")
        if max_window is not None and (not isinstance(max_window, int) or max_window < 1):
            raise ProtocolError(f"bad max_window {max_window!r}")
        self.capabilities = Capabilities(
            modes=frozenset(modes),
            max_window=max_window,
            name=str(obj.get("name", "external")),
            provenance=str(obj.get("provenance", "pretrained")),
        )
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        return self.capabilities

    # -- request path ------------------------------------------------------

    def submit(self, request, mode: str) -> Future:
        caps = self.capabilities
        if caps is None:
            raise ProtocolError("handshake has not completed")
        if mode not in caps.modes:
            raise ProtocolError(f"backend does not support mode {mode!r}")
        tokens = _check_tokens("tokens", request.tokens)
        left = _check_tokens("left_context", request.left_context)
        right = _check_tokens("right_context", request.right_context)
        if caps.max_window is not None and request.total_length() > caps.max_window:
            raise ProtocolError(
                f"request of {request.total_length()} tokens exceeds "
                f"max_window={caps.max_window}"
            )

        future: Future = Future()
        self._inflight.acquire()
        future.add_done_callback(lambda _f: self._inflight.release())
        with self._lock:
            if self._closed:
                self._inflight.release()
                raise ProtocolError("client is closed")
            req_id = self._next_id
            self._next_id += 1
            payload = json.dumps(
                {
                    "id": req_id,
                    "mode": mode,
                    "tokens": tokens,
                    "left_context": left,
                    "right_context": right,
                },
                ensure_ascii=False,
            )
            self._pending[req_id] = future
            self._payloads[req_id] = payload
        try:
            with self._write_lock:
                self.transport.send_line(payload)
        except Exception as exc:
            self._fail_pending(req_id, exc)
            raise
        future.request_id = req_id
        return future

    def score(self, request, mode: str) -> float:
        future = self.submit(request, mode)
        try:
            return future.result(timeout=self.timeout_s)
        except FutureTimeout:
            pass
        # One idempotent retry: re-send the identical payload under the same id.
        with self._lock:
            payload = self._payloads.get(future.request_id)
        if payload is not None:
            with self._write_lock:
                self.transport.send_line(payload)
        try:
            return future.result(timeout=self.timeout_s)
        except FutureTimeout:
            exc = ScorerTimeout(
                f"no response for request {future.request_id} after retry"
            )
            self._fail_pending(future.request_id, exc)
            raise exc from None

    def close(self) -> None:
        with self._lock:
            self._closed = True
            pending = list(self._pending.items())
            self._pending.clear()
            self._payloads.clear()
        for _id, future in pending:
            future.set_exception(ProtocolError("client closed"))
        self.transport.close()

    # -- internals ---------------------------------------------------------

    def _fail_pending(self, req_id: int, exc: Exception | None) -> None:
        with self._lock:
            future = self._pending.pop(req_id, None)
            self._payloads.pop(req_id, None)
        if future is not None and exc is not None and not future.done():
            future.set_exception(exc)

    def _resolve(self, obj: dict) -> None:
        req_id = obj.get("id")
        with self._lock:
            future = self._pending.pop(req_id, None)
            self._payloads.pop(req_id, None)
        if future is None or future.done():
            return  # duplicate or unknown id: exactly-once toward the caller
        if "error" in obj:
            future.set_exception(BackendError(str(obj["error"])))
            return
        logprob = obj.get("logprob")
        if not isinstance(logprob, (int, float)) or not math.isfinite(logprob):
            future.set_exception(
                ProtocolError(f"response {req_id} has no finite logprob")
            )
            return
        future.set_result(float(logprob))

    def _read_loop(self) -> None:
        while True:
            try:
                line = self.transport.recv_line()
            except Exception as exc:
                self._shutdown(ProtocolError(f"transport failed: {exc}"))
                return
            if line is None:
                self._shutdown(ProtocolError("connection closed by scorer"))
                return
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                self._shutdown(ProtocolError(f"malformed response line: {line!r}"))
                return
            if isinstance(obj, dict) and "id" in obj:
                self._resolve(obj)

    def _shutdown(self, exc: Exception) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            pending = list(self._pending.values())
            self._pending.clear()
            self._payloads.clear()
        for future in pending:
            if not future.done():
                future.set_exception(exc)


def connect_stdio(command, **kwargs) -> ScorerClient:
    client = ScorerClient(StdioTransport(command), **kwargs)
    client.handshake()
    return client


def connect_tcp(addr: str, **kwargs) -> ScorerClient:
    client = ScorerClient(TcpTransport(addr), **kwargs)
    client.handshake()
    return client


def serve_loop(
    score_fn,
    instream,
    outstream,
    modes: tuple[str, ...],
    max_window: int | None = None,
    name: str = "python-scorer",
    provenance: str = "pretrained",
) -> None:
    """Serve the protocol over text streams; the reference server skeleton.

    ``score_fn(mode, tokens, left_context, right_context) -> float`` raising
    any exception turns into a per-request error frame; the loop stays alive
    until the input stream closes.
    """
    hello = instream.readline()
    if not hello:
        return
    try:
        obj = json.loads(hello)
        if obj.get("type") != "hello" or "version" not in obj:
            raise ValueError("bad hello")
    except (json.JSONDecodeError, ValueError):
        outstream.write(json.dumps({"type": "error", "error": "bad hello"}) + "\n")
        outstream.flush()
        return
    outstream.write(
        json.dumps(
            {
                "type": "hello",
                "version": PROTOCOL_VERSION,
                "modes": list(modes),
                "max_window": max_window,
                "name": name,
                "provenance": provenance,
            }
        )
        + "\n"
    )
    outstream.flush()

    for line in instream:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            req_id = req["id"]
        except (json.JSONDecodeError, KeyError):
            continue  # nothing to answer without an id
        try:
            mode = req["mode"]
            if mode not in modes:
                raise ValueError(f"unsupported mode {mode!r}")
            total = len(req["tokens"]) + len(req["left_context"]) + len(req["right_context"])
            if max_window is not None and total > max_window:
                raise ValueError(f"request of {total} tokens exceeds max_window")
            value = score_fn(
                mode,
                list(req["tokens"]),
                list(req["left_context"]),
                list(req["right_context"]),
            )
            reply = {"id": req_id, "logprob": float(value)}
        except Exception as exc:
            reply = {"id": req_id, "error": str(exc)}
        outstream.write(json.dumps(reply, ensure_ascii=False) + "\n")
        outstream.flush()
