"""Run a protocol among in-process parties, one thread each, over loopback."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from ..dealer import Kind, dealer_gen
from ..mpc.shared import Shared
from ..ring import FixedPointCodec
from ..sharing import Scheme, reconstruct, share
from .session import Preprocessing, Session, SessionConfig
from .transport import LoopbackHub


def derive_rng(seed, tag: int) -> np.random.Generator:
    """Independent generator per role; ``seed=None`` draws OS entropy."""
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def make_preprocessing(scheme: Scheme, counts: dict, rng) -> dict[int, Preprocessing]:
    pre = {pid: Preprocessing(pid) for pid in scheme.party_ids}
    for kind, count in counts.items():
        if count > 0:
            batch = dealer_gen(Kind(kind), int(count), scheme, rng)
            for p in pre.values():
                p.add(batch)
    return pre


def make_sessions(scheme, hub, *, codec=None, seed=None, counts=None, timeout=30.0, pre=None):
    scheme = Scheme(scheme)
    rng = derive_rng(seed, 1)
    session_id = derive_rng(seed, 0).bytes(16)
    if pre is None:
        pre = make_preprocessing(scheme, counts or {}, rng)
    roster = {pid: "loopback" for pid in scheme.party_ids}
    sessions = {}
    for pid in scheme.party_ids:
        cfg = SessionConfig(
            scheme=scheme,
            roster=roster,
            party_id=pid,
            codec=codec or FixedPointCodec(),
            session_id=session_id,
            seed=derive_rng(seed, 10 + pid).bytes(16),
            timeout=timeout,
        )
        sessions[pid] = Session(cfg, hub.attach(pid), pre[pid])
    return sessions


def run_threads(fns: dict[int, callable]) -> dict:
    results, errors = {}, {}

    def runner(key, fn):
        try:
            results[key] = fn()
        except BaseException as exc:  # surfaced below
            errors[key] = exc

    threads = [threading.Thread(target=runner, args=(k, fn), daemon=True) for k, fn in fns.items()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[min(errors)]
    return results


def combine(scheme: Scheme, per_party: dict):
    """Reconstruct every Shared leaf of the parties' (identically shaped) results."""
    first = per_party[min(per_party)]
    if isinstance(first, Shared):
        return reconstruct([per_party[p].parts for p in sorted(per_party)], scheme)
    if isinstance(first, dict):
        return {k: combine(scheme, {p: v[k] for p, v in per_party.items()}) for k in first}
    if isinstance(first, (list, tuple)):
        return type(first)(combine(scheme, {p: v[i] for p, v in per_party.items()}) for i in range(len(first)))
    return first


@dataclass
class LocalRun:
    scheme: Scheme
    sessions: dict
    results: dict = field(default_factory=dict)

    def output(self):
        return combine(self.scheme, self.results)


def run_local(scheme, program, *, inputs=None, counts=None, codec=None, seed=None, timeout=30.0) -> LocalRun:
    """Share ``inputs`` (name -> ring array), run ``program(session, **shared)`` on every party."""
    scheme = Scheme(scheme)
    hub = LoopbackHub()
    sessions = make_sessions(scheme, hub, codec=codec, seed=seed, counts=counts, timeout=timeout)
    rng = derive_rng(seed, 2)
    shared = {pid: {} for pid in scheme.party_ids}
    for name, value in (inputs or {}).items():
        for pid, parts in zip(scheme.party_ids, share(value, scheme, rng)):
            shared[pid][name] = Shared(sessions[pid], parts)

    def make(pid):
        def fn():
            sessions[pid].setup()
            return program(sessions[pid], **shared[pid])
        return fn

    results = run_threads({pid: make(pid) for pid in scheme.party_ids})
    return LocalRun(scheme, sessions, results)
