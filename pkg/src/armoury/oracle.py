"""Split runtime: a serving party holding the cipher and pools, a client asking it.

Every frame is 9 bytes: one opcode byte and an 8-byte little-endian
payload.  Requests are DECODE (payload = key) and MUTATE (payload = pool
index in the low 4 bytes); replies are DECODE-OK (chunk), MUTATE-OK (key)
or ERROR (payload = reason code byte, zero padded).
"""

from __future__ import annotations

import logging
import os
import random
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

from .cipher import CipherSpec, sco

log = logging.getLogger(__name__)

FRAME_SIZE = 9

DECODE = 0x01
MUTATE = 0x02
DECODE_OK = 0x81
MUTATE_OK = 0x82
ERROR = 0xFF

ERR_UNKNOWN_OPCODE = 0x01
ERR_POOL_RANGE = 0x02
ERR_BAD_KEY = 0x03

TRANSPORTS = ("loopback", "pipe", "socket")


class OracleError(RuntimeError):
    """The oracle answered with an ERROR frame."""

    def __init__(self, reason: int):
        names = {ERR_UNKNOWN_OPCODE: "unknown opcode", ERR_POOL_RANGE: "pool index out of range",
                 ERR_BAD_KEY: "key wider than the cipher"}
        super().__init__(f"oracle error 0x{reason:02X} ({names.get(reason, 'unknown reason')})")
        self.reason = reason


class OracleUnavailable(ConnectionError):
    pass


@dataclass(frozen=True)
class Frame:
    opcode: int
    payload: int = 0

    def encode(self) -> bytes:
        return struct.pack("<BQ", self.opcode, self.payload)

    @classmethod
    def decode(cls, data: bytes) -> "Frame":
        if len(data) != FRAME_SIZE:
            raise ValueError(f"frames are {FRAME_SIZE} bytes, got {len(data)}")
        opcode, payload = struct.unpack("<BQ", data)
        return cls(opcode, payload)

    @classmethod
    def error(cls, reason: int) -> "Frame":
        return cls(ERROR, reason & 0xFF)


class OracleCore:
    """Request handler; spec and pools are read-only after construction."""

    def __init__(self, spec: CipherSpec, pools=(), seed=None):
        self.spec = spec
        self._pools = [pool.key_list() for pool in _pool_list(pools)]
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def handle(self, request: bytes) -> bytes:
        frame = Frame.decode(request)
        if frame.opcode == DECODE:
            if frame.payload >> self.spec.key_bits:
                return Frame.error(ERR_BAD_KEY).encode()
            return Frame(DECODE_OK, sco(frame.payload, self.spec)).encode()
        if frame.opcode == MUTATE:
            index = frame.payload & 0xFFFFFFFF
            if frame.payload >> 32 or index >= len(self._pools):
                return Frame.error(ERR_POOL_RANGE).encode()
            keys = self._pools[index]
            with self._lock:
                key = keys[self._rng.randrange(len(keys))]
            return Frame(MUTATE_OK, key).encode()
        return Frame.error(ERR_UNKNOWN_OPCODE).encode()


def _pool_list(pools):
    if hasattr(pools, "entries"):
        return [p for _, p in pools.entries]
    return list(pools)


# ------------------------------------------------------------------ channels


class Channel:
    """Minimal byte stream: ``read`` may return short on EOF."""

    def read(self, n: int) -> bytes:
        raise NotImplementedError

    def write(self, data: bytes) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def read_exact(self, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            part = self.read(n - len(buf))
            if not part:
                break
            buf += part
        return buf


class SocketChannel(Channel):
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def read(self, n):
        return self.sock.recv(n)

    def write(self, data):
        self.sock.sendall(data)

    def close(self):
        self.sock.close()


class FileChannel(Channel):
    def __init__(self, rfile, wfile):
        self.rfile, self.wfile = rfile, wfile

    def read(self, n):
        return self.rfile.read(n)

    def write(self, data):
        self.wfile.write(data)
        self.wfile.flush()

    def close(self):
        for f in (self.rfile, self.wfile):
            try:
                f.close()
            except OSError:
                pass


class LoopbackChannel(Channel):
    """Client end wired straight to an in-process core."""

    def __init__(self, core: OracleCore):
        self.core = core
        self._pending = b""
        self._inbox = b""
        self.closed = False

    def write(self, data):
        if self.closed:
            raise OracleUnavailable("loopback channel closed")
        self._inbox += data
        while len(self._inbox) >= FRAME_SIZE:
            req, self._inbox = self._inbox[:FRAME_SIZE], self._inbox[FRAME_SIZE:]
            self._pending += self.core.handle(req)

    def read(self, n):
        out, self._pending = self._pending[:n], self._pending[n:]
        return out

    def close(self):
        self.closed = True


def serve(channel: Channel, core: OracleCore) -> int:
    """Answer frames in arrival order until the peer closes; returns frames served.

    A short trailing frame ends the session.
    """
    served = 0
    try:
        while True:
            req = channel.read_exact(FRAME_SIZE)
            if len(req) < FRAME_SIZE:
                if req:
                    log.warning("dropping connection after a %d-byte short frame", len(req))
                break
            channel.write(core.handle(req))
            served += 1
    except (BrokenPipeError, ConnectionResetError):
        pass
    finally:
        channel.close()
    return served


# ------------------------------------------------------------------ client


class OracleClient:
    def __init__(self, channel: Channel):
        self.channel = channel

    def _call(self, frame: Frame, expect: int) -> int:
        try:
            self.channel.write(frame.encode())
            data = self.channel.read_exact(FRAME_SIZE)
        except OracleUnavailable:
            raise
        except OSError as exc:
            raise OracleUnavailable(f"oracle channel failed: {exc}") from exc
        if len(data) < FRAME_SIZE:
            raise OracleUnavailable("oracle closed the channel")
        reply = Frame.decode(data)
        if reply.opcode == ERROR:
            raise OracleError(reply.payload & 0xFF)
        if reply.opcode != expect:
            raise OracleUnavailable(f"unexpected reply opcode 0x{reply.opcode:02X}")
        return reply.payload

    def decode(self, key: int) -> int:
        return self._call(Frame(DECODE, key), DECODE_OK)

    def mutate(self, pool_index: int) -> int:
        return self._call(Frame(MUTATE, pool_index), MUTATE_OK)

    def close(self):
        self.channel.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def client_decode(channel: Channel, key: int) -> int:
    return OracleClient(channel).decode(key)


def client_mutate(channel: Channel, pool_index: int) -> int:
    return OracleClient(channel).mutate(pool_index)


# ------------------------------------------------------------------ servers


def _socket_family(addr: str):
    if str(addr).isdigit():
        return socket.AF_INET, ("127.0.0.1", int(addr))
    return socket.AF_UNIX, str(addr)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        serve(SocketChannel(self.request), self.server.core)


class _UnixServer(socketserver.ThreadingMixIn, socketserver.UnixStreamServer):
    daemon_threads = True


class _TcpServer(socketserver.ThreadingMixIn, socketserver.TCPServer):
    daemon_threads = True
    allow_reuse_address = True


def _fifo_paths(addr: str) -> tuple[Path, Path]:
    return Path(f"{addr}.req"), Path(f"{addr}.resp")


class OracleServer:
    """Runs a core behind the pipe or socket transport.

    ``addr`` is a filesystem path (Unix socket, or the stem of the two
    FIFOs ``<addr>.req``/``<addr>.resp``) or, for sockets, a localhost port.
    """

    def __init__(self, core: OracleCore, transport: str, addr: str):
        if transport not in ("pipe", "socket"):
            raise ValueError(f"no server for transport {transport!r}")
        self.core, self.transport, self.addr = core, transport, str(addr)
        self._thread: threading.Thread | None = None
        self._server = None
        self._stop = threading.Event()

    def start(self) -> "OracleServer":
        if self.transport == "socket":
            family, where = _socket_family(self.addr)
            cls = _UnixServer if family == socket.AF_UNIX else _TcpServer
            if family == socket.AF_UNIX and os.path.exists(where):
                os.unlink(where)
            self._server = cls(where, _Handler)
            self._server.core = self.core
            target = self._server.serve_forever
        else:
            for p in _fifo_paths(self.addr):
                if p.exists():
                    p.unlink()
                os.mkfifo(p)
            target = self._serve_fifo
        self._thread = threading.Thread(target=target, daemon=True)
        self._thread.start()
        return self

    def _serve_fifo(self):
        req, resp = _fifo_paths(self.addr)
        while not self._stop.is_set():
            # one client at a time; opening blocks until the peer opens its end
            rfile = open(req, "rb", buffering=0)
            wfile = open(resp, "wb", buffering=0)
            if self._stop.is_set():
                rfile.close()
                wfile.close()
                break
            serve(FileChannel(rfile, wfile), self.core)

    def serve_forever(self):
        self.start()
        try:
            self._thread.join()
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def stop(self):
        self._stop.set()
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            if self._server.address_family == socket.AF_UNIX and os.path.exists(self.addr):
                os.unlink(self.addr)
        elif self.transport == "pipe":
            req, resp = _fifo_paths(self.addr)
            # unblock a server thread waiting in open()
            fds = []
            for path, flags in ((req, os.O_WRONLY), (resp, os.O_RDONLY)):
                try:
                    fds.append(os.open(path, flags | os.O_NONBLOCK))
                except OSError:
                    pass
            if self._thread is not None:
                self._thread.join(timeout=2)
            for fd in fds:
                os.close(fd)
            for p in (req, resp):
                if p.exists():
                    p.unlink()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def connect(transport: str, addr: str | None = None, core: OracleCore | None = None,
            timeout: float = 10.0) -> OracleClient:
    """Open a client on ``transport``; loopback needs the in-process ``core``."""
    if transport == "loopback":
        if core is None:
            raise ValueError("loopback transport needs an in-process core")
        return OracleClient(LoopbackChannel(core))
    if transport == "socket":
        family, where = _socket_family(addr)
        sock = socket.socket(family, socket.SOCK_STREAM)
        sock.settimeout(timeout)
        try:
            sock.connect(where)
        except OSError as exc:
            sock.close()
            raise OracleUnavailable(f"cannot reach oracle at {addr}: {exc}") from exc
        return OracleClient(SocketChannel(sock))
    if transport == "pipe":
        req, resp = _fifo_paths(addr)
        if not req.exists() or not resp.exists():
            raise OracleUnavailable(f"no oracle FIFOs at {addr}.req/.resp")
        try:
            # non-blocking open fails with ENXIO when no server holds the read end
            fd = os.open(req, os.O_WRONLY | os.O_NONBLOCK)
        except OSError as exc:
            raise OracleUnavailable(f"oracle not listening on {req}: {exc}") from exc
        os.set_blocking(fd, True)
        wfile = os.fdopen(fd, "wb", buffering=0)
        rfile = open(resp, "rb", buffering=0)
        return OracleClient(FileChannel(rfile, wfile))
    raise ValueError(f"unknown transport {transport!r} (choose from {', '.join(TRANSPORTS)})")
