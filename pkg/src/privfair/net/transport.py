"""Point-to-point frame delivery: in-process loopback and TCP.

Both transports move encoded :class:`WireMessage` frames and keep one FIFO
inbox per sender, so per-sender ordering is preserved.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from collections import defaultdict

from ..errors import NetworkError, ProtocolAbort
from .wire import HEADER, HELLO_ROUND, WireMessage

log = logging.getLogger(__name__)

_CLOSED = object()


class _Inboxes:
    def __init__(self):
        self._lock = threading.Lock()
        self._queues: dict[int, queue.Queue] = defaultdict(queue.Queue)

    def get(self, sender: int) -> queue.Queue:
        with self._lock:
            return self._queues[sender]


class Transport:
    party_id: int

    def send(self, recipient: int, msg: WireMessage) -> None:
        raise NotImplementedError

    def recv(self, sender: int, timeout: float) -> WireMessage:
        raise NotImplementedError

    def connect(self, endpoints: dict[int, str]) -> None:
        """Make sure every listed party is reachable; raise NetworkError otherwise."""

    def close(self) -> None:
        pass


def _pop(q: queue.Queue, sender: int, timeout: float) -> WireMessage:
    try:
        item = q.get(timeout=timeout)
    except queue.Empty:
        raise TimeoutError(f"no message from party {sender} within {timeout}s") from None
    if item is _CLOSED:
        raise NetworkError(f"connection to party {sender} closed")
    return WireMessage.decode(item)


class LoopbackHub:
    """Routes frames between transports living in the same process."""

    def __init__(self):
        self._lock = threading.Lock()
        self._online: dict[int, "LoopbackTransport"] = {}

    def attach(self, party_id: int) -> "LoopbackTransport":
        with self._lock:
            if party_id in self._online:
                raise ValueError(f"party {party_id} already attached")
            t = LoopbackTransport(self, party_id)
            self._online[party_id] = t
            return t

    def detach(self, party_id: int) -> None:
        """Take a party offline; everyone else sees its stream end, as with TCP."""
        with self._lock:
            gone = self._online.pop(party_id, None)
            others = list(self._online.values())
        if gone is not None:
            for t in others:
                t.inbox.get(party_id).put(_CLOSED)

    def is_online(self, party_id: int) -> bool:
        with self._lock:
            return party_id in self._online

    def deliver(self, recipient: int, sender: int, frame: bytes) -> None:
        with self._lock:
            target = self._online.get(recipient)
        if target is None:
            raise NetworkError(f"party {recipient} is unreachable")
        target.inbox.get(sender).put(frame)


class LoopbackTransport(Transport):
    def __init__(self, hub: LoopbackHub, party_id: int):
        self.hub = hub
        self.party_id = party_id
        self.inbox = _Inboxes()

    def connect(self, endpoints):
        missing = [p for p in endpoints if not self.hub.is_online(p)]
        if missing:
            raise NetworkError(f"parties {missing} are unreachable")

    def send(self, recipient, msg):
        self.hub.deliver(recipient, self.party_id, msg.encode())

    def recv(self, sender, timeout):
        return _pop(self.inbox.get(sender), sender, timeout)

    def close(self):
        self.hub.detach(self.party_id)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


class SocketTransport(Transport):
    """TCP transport. Every connection opens with a hello frame naming the sender."""

    def __init__(self, party_id: int, session_id: bytes, listen: str | None = None, timeout: float = 30.0, connect_retry: float = 0.0):
        self.party_id = party_id
        self.session_id = session_id
        self.timeout = timeout
        self.connect_retry = connect_retry
        self.inbox = _Inboxes()
        self._socks: dict[int, socket.socket] = {}
        self._send_locks: dict[int, threading.Lock] = {}
        self._cond = threading.Condition()
        self._closed = False
        self._server = None
        if listen is not None:
            host, port = parse_endpoint(listen)
            self._server = socket.create_server((host, port), reuse_port=False)
            self.address = "%s:%d" % self._server.getsockname()[:2]
            threading.Thread(target=self._accept_loop, daemon=True).start()

    def _accept_loop(self):
        while not self._closed:
            try:
                sock, _ = self._server.accept()
            except OSError:
                return
            threading.Thread(target=self._reader, args=(sock, None), daemon=True).start()

    def _register(self, peer: int, sock: socket.socket):
        with self._cond:
            self._socks[peer] = sock
            self._send_locks[peer] = threading.Lock()
            self._cond.notify_all()

    def _reader(self, sock: socket.socket, peer: int | None):
        try:
            while True:
                head = _read_exact(sock, HEADER.size)
                if head is None:
                    break
                length = HEADER.unpack(head)[4]
                body = _read_exact(sock, length) if length else b""
                if body is None:
                    break
                frame = head + body
                msg = WireMessage.decode(frame)
                if msg.round == HELLO_ROUND:
                    peer = msg.sender
                    self._register(peer, sock)
                    continue
                if peer is None:
                    log.warning("dropping frame from unidentified connection")
                    break
                self.inbox.get(peer).put(frame)
        except (OSError, ProtocolAbort) as exc:
            log.debug("reader for party %s stopped: %s", peer, exc)
        if peer is not None:
            self.inbox.get(peer).put(_CLOSED)

    def connect(self, endpoints: dict[int, str], retry_for: float | None = None) -> None:
        """Dial every endpoint; all must answer before anything is sent."""
        if retry_for is None:
            retry_for = self.connect_retry
        with self._cond:
            endpoints = {p: e for p, e in endpoints.items() if p not in self._socks}
        opened = {}
        try:
            for peer, endpoint in endpoints.items():
                deadline = time.monotonic() + retry_for
                while True:
                    try:
                        opened[peer] = socket.create_connection(parse_endpoint(endpoint), timeout=self.timeout)
                        break
                    except OSError as exc:
                        if time.monotonic() >= deadline:
                            raise NetworkError(f"party {peer} at {endpoint} is unreachable: {exc}") from None
                        time.sleep(0.05)
        except NetworkError:
            for s in opened.values():
                s.close()
            raise
        for peer, sock in opened.items():
            sock.settimeout(None)
            sock.sendall(WireMessage(self.session_id, HELLO_ROUND, self.party_id).encode())
            self._register(peer, sock)
            threading.Thread(target=self._reader, args=(sock, peer), daemon=True).start()

    def _sock_for(self, peer: int) -> socket.socket:
        with self._cond:
            if not self._cond.wait_for(lambda: peer in self._socks, timeout=self.timeout):
                raise NetworkError(f"no connection to party {peer}")
            return self._socks[peer]

    def send(self, recipient, msg):
        sock = self._sock_for(recipient)
        try:
            with self._send_locks[recipient]:
                sock.sendall(msg.encode())
        except OSError as exc:
            raise NetworkError(f"sending to party {recipient} failed: {exc}") from None

    def wait_for_peers(self, peers, timeout: float) -> None:
        with self._cond:
            if not self._cond.wait_for(lambda: all(p in self._socks for p in peers), timeout=timeout):
                missing = [p for p in peers if p not in self._socks]
                raise NetworkError(f"parties {missing} never connected")

    def recv(self, sender, timeout):
        return _pop(self.inbox.get(sender), sender, timeout)

    def close(self):
        self._closed = True
        if self._server is not None:
            self._server.close()
        with self._cond:
            socks = list(self._socks.values())
        for s in socks:
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
