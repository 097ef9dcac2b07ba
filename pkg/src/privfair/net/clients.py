"""Input submission by the model owner / investigator and output release.

A submission is two frames per server: round 0 carries
``[len(meta), *meta, *share components]`` and round 1 is an empty commit.
Clients connect to every server before sending anything, and servers only
accept a submission once its commit arrives.
"""

from __future__ import annotations

import numpy as np

from ..errors import IntegrityError, NetworkError, ProtocolAbort
from ..mpc.shared import Shared
from ..ring import DTYPE, as_ring
from ..sharing import Scheme, reconstruct, share
from .session import Session
from .transport import Transport
from .wire import INVESTIGATOR, WireMessage


def submit_inputs(
    transport: Transport,
    owner: int,
    values,
    scheme: Scheme,
    rng: np.random.Generator,
    session_id: bytes,
    servers: dict[int, str],
    meta=(),
) -> None:
    """Secret-share ``values`` and deliver one share batch to every server."""
    scheme = Scheme(scheme)
    values = as_ring(values).ravel()
    transport.connect(servers)
    shares = share(values, scheme, rng)
    header = np.array([len(meta), *meta], dtype=DTYPE)
    frames = {
        pid: WireMessage.of(session_id, 0, owner, np.concatenate([header, *shares[pid - 1]]))
        for pid in scheme.party_ids
    }
    for pid in scheme.party_ids:
        transport.send(pid, frames[pid])
    for pid in scheme.party_ids:
        transport.send(pid, WireMessage(session_id, 1, owner))


def receive_submission(session: Session, owner: int) -> tuple[list[int], Shared]:
    """Block until ``owner``'s committed submission arrives at this server."""
    timeout = session.config.input_timeout
    try:
        data = session.transport.recv(owner, timeout)
        commit = session.transport.recv(owner, timeout)
    except TimeoutError:
        raise ProtocolAbort(f"no committed submission from client {owner:#x}") from None
    except NetworkError:
        raise ProtocolAbort(f"client {owner:#x} disconnected before committing its submission") from None
    if data.session_id != session.session_id or (data.round, commit.round) != (0, 1):
        raise ProtocolAbort(f"malformed submission from client {owner:#x}")
    session.transcript.record("recv", owner, 0, "input", "input", data.encode())
    words = data.values()
    n_meta = int(words[0])
    meta = [int(v) for v in words[1:1 + n_meta]]
    body = words[1 + n_meta:]
    k = session.scheme.n_parts
    if len(body) % k:
        raise ProtocolAbort("submission body does not split into share components")
    size = len(body) // k
    return meta, Shared(session, tuple(body[i * size:(i + 1) * size] for i in range(k)))


def release_output(session: Session, result: Shared, recipient: int = INVESTIGATOR) -> None:
    """Send this server's shares of ``result`` to the investigator. Servers never reconstruct."""
    session.round += 1
    msg = WireMessage.of(session.session_id, session.round, session.party_id, np.concatenate([p.ravel() for p in result.parts]))
    session.transport.send(recipient, msg)
    session.transcript.record("send", recipient, session.round, "release", "release", msg.encode())


def collect_output(transport: Transport, scheme: Scheme, session_id: bytes, timeout: float) -> np.ndarray:
    """Investigator side: gather every server's release and reconstruct."""
    scheme = Scheme(scheme)
    shares = []
    for pid in scheme.party_ids:
        try:
            msg = transport.recv(pid, timeout)
        except (TimeoutError, NetworkError):
            raise IntegrityError(f"missing output share from server {pid}") from None
        if msg.session_id != session_id:
            raise IntegrityError(f"server {pid} released shares for another session")
        words = msg.values()
        size = len(words) // scheme.n_parts
        shares.append(tuple(words[i * size:(i + 1) * size] for i in range(scheme.n_parts)))
    if len({s[0].size for s in shares}) != 1:
        raise IntegrityError("servers released outputs of different lengths")
    return reconstruct(shares, scheme)
