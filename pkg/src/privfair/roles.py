"""Deployment roles: compute server, model owner, investigator and dealer,
plus an all-in-one simulation over the loopback transport."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sizing
from .audit import METRICS, SharedDataset, run_metrics
from .dealer import Kind, dealer_gen, read_batch, write_batch
from .errors import ParseError, ProtocolAbort, ShapeError
from .files import AuditDataset
from .inference import ARCHITECTURES, ModelParams, SharedModel
from .net.clients import collect_output, receive_submission, release_output, submit_inputs
from .net.local import derive_rng, make_sessions, run_threads
from .net.session import Preprocessing, Session, SessionConfig
from .net.transport import LoopbackHub, SocketTransport, Transport, parse_endpoint
from .net.wire import INVESTIGATOR, MODEL_OWNER
from .report import FairnessReport, flatten_outputs
from .ring import DTYPE, FixedPointCodec
from .sharing import Scheme

SEED_ENV = "PRIVFAIR_SEED"

# derive_rng tags per role; servers use 10 + party id for their PRF seed
OWNER_TAG = 3
INVESTIGATOR_TAG = 4


def env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def parse_metrics(text: str) -> list[str]:
    metrics = [m.strip().lower() for m in text.split(",") if m.strip()]
    if not metrics:
        raise ParseError("metric selection is empty")
    bad = [m for m in metrics if m not in METRICS]
    if bad:
        raise ParseError(f"unknown metrics {bad}; choose from {','.join(METRICS)}")
    if len(set(metrics)) != len(metrics):
        raise ParseError("metric selection lists a metric twice")
    return metrics


def check_compatible(model: ModelParams, data: AuditDataset, metrics) -> None:
    if model.n_features != data.n_features:
        raise ShapeError(f"model expects {model.n_features} features, dataset has {data.n_features}")
    if model.n_classes != data.n_classes:
        raise ShapeError(f"model has {model.n_classes} classes, dataset declares {data.n_classes}")
    if data.n_classes != 2 and {"dp", "eop"} & set(metrics):
        raise ShapeError("dp and eop need a binary task")


# -- submissions ---------------------------------------------------------

def model_meta(model: ModelParams) -> list[int]:
    return [ARCHITECTURES.index(model.architecture), model.n_features, model.hidden, model.n_classes]


def data_meta(data: AuditDataset, metrics, include_counts: bool) -> list[int]:
    return [data.n, data.n_features, data.n_classes, int(include_counts), len(metrics)] + [METRICS.index(m) for m in metrics]


def encode_model(model: ModelParams, codec: FixedPointCodec) -> np.ndarray:
    return codec.encode_array(model.flatten())


def encode_dataset(data: AuditDataset, codec: FixedPointCodec) -> np.ndarray:
    return np.concatenate([codec.encode_array(data.X.ravel()), data.Y.astype(DTYPE), data.A.astype(DTYPE)])


@dataclass
class AuditJob:
    """What the servers learn in the clear: dimensions and the metric list."""

    architecture: str
    n: int
    d: int
    hidden: int
    n_classes: int
    metrics: list[str]
    include_counts: bool


def _parse_job(mmeta: list[int], dmeta: list[int]) -> AuditJob:
    try:
        arch_code, d_model, hidden, c_model = mmeta
        n, d, c, counts, k, *codes = dmeta
        architecture = ARCHITECTURES[arch_code]
        metrics = [METRICS[i] for i in codes]
    except (ValueError, IndexError):
        raise ProtocolAbort("malformed submission header") from None
    if len(metrics) != k or not metrics:
        raise ProtocolAbort("malformed metric list in audit request")
    if (d_model, c_model) != (d, c):
        raise ProtocolAbort(f"model is {d_model} features / {c_model} classes, audit data is {d} / {c}")
    return AuditJob(architecture, n, d, hidden, c, metrics, bool(counts))


def serve(session: Session):
    """Run one audit as a compute server: receive inputs, compute, release."""
    session.setup()
    mmeta, mflat = receive_submission(session, MODEL_OWNER)
    dmeta, dflat = receive_submission(session, INVESTIGATOR)
    job = _parse_job(mmeta, dmeta)
    n, d = job.n, job.d
    if dflat.size != n * d + 2 * n:
        raise ProtocolAbort(f"audit data has {dflat.size} entries, header promises {n * d + 2 * n}")
    try:
        model = SharedModel.from_flat(job.architecture, d, job.hidden, job.n_classes, mflat)
        data = SharedDataset(dflat[:n * d].reshape(n, d), dflat[n * d:n * d + n], dflat[n * d + n:], job.n_classes)
    except ShapeError as exc:
        raise ProtocolAbort(str(exc)) from None
    results = run_metrics(model, data, job.metrics)
    release_output(session, flatten_outputs(results, job.n_classes, job.include_counts))
    return job


def run_owner(model: ModelParams, transport: Transport, servers: dict, scheme, codec, session_id, rng, log=print):
    log("Encoding model parameters...")
    values = encode_model(model, codec)
    log("Connecting to servers...")
    transport.connect(servers)
    log(f"Connected to {len(servers)} servers")
    log("Sharing model parameters with servers...")
    submit_inputs(transport, MODEL_OWNER, values, scheme, rng, session_id, servers, model_meta(model))
    log("Model submitted")


def run_investigator(
    data: AuditDataset,
    metrics,
    transport: Transport,
    servers: dict,
    scheme,
    codec,
    session_id,
    rng,
    timeout: float = 300.0,
    include_counts: bool = False,
    log=print,
) -> FairnessReport:
    log("Encoding audit data...")
    values = encode_dataset(data, codec)
    log("Connecting to servers...")
    transport.connect(servers)
    log(f"Connected to {len(servers)} servers")
    log("Sharing audit data with servers...")
    submit_inputs(transport, INVESTIGATOR, values, scheme, rng, session_id, servers, data_meta(data, metrics, include_counts))
    for m in metrics:
        log(f"Servers computing {m.upper()}")
    opened = collect_output(transport, scheme, session_id, timeout)
    log("Protocol execution finished")
    log("Reconstructing results...")
    return FairnessReport.from_release(opened, metrics, data.n_classes, codec, include_counts)


# -- dealer ----------------------------------------------------------------

def dealer_counts(scheme, metrics, architecture, n, d, hidden=0, n_classes=2, frac_bits=16) -> dict[Kind, int]:
    cost = sizing.audit(metrics, architecture, n, d, hidden, n_classes, frac_bits)
    return sizing.provision(cost, scheme)


def preprocessing_path(directory, party_id: int, kind: Kind) -> Path:
    return Path(directory) / f"party{party_id}-{kind.name.lower()}.pfd"


def run_dealer(directory, scheme, counts: dict[Kind, int], rng) -> list[Path]:
    """Write each server's share of every batch to its own file."""
    scheme = Scheme(scheme)
    Path(directory).mkdir(parents=True, exist_ok=True)
    written = []
    for kind, count in sorted(counts.items()):
        batch = dealer_gen(kind, count, scheme, rng)
        for pid in scheme.party_ids:
            path = preprocessing_path(directory, pid, kind)
            write_batch(path, batch.for_party(pid))
            written.append(path)
    return written


def load_preprocessing(directory, party_id: int, scheme) -> Preprocessing:
    pre = Preprocessing(party_id)
    for kind in Kind:
        path = preprocessing_path(directory, party_id, kind)
        if path.exists():
            batch = read_batch(path, party_id)
            if batch.scheme is not Scheme(scheme):
                raise ParseError(f"{path}: dealt for {batch.scheme.value}, roster says {Scheme(scheme).value}")
            pre.add(batch)
    return pre


# -- roster and socket deployment -----------------------------------------

@dataclass
class Roster:
    scheme: Scheme
    session_id: bytes
    servers: dict[int, str]
    frac_bits: int = 16

    @property
    def codec(self) -> FixedPointCodec:
        return FixedPointCodec(self.frac_bits)


def load_roster(path) -> Roster:
    try:
        doc = json.loads(Path(path).read_text())
        scheme = Scheme(doc["scheme"])
        sid = bytes.fromhex(doc["session_id"])
        servers = {int(k): str(v) for k, v in doc["servers"].items()}
        for endpoint in servers.values():
            parse_endpoint(endpoint)
        frac_bits = int(doc.get("frac_bits", 16))
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise ParseError(f"{path}: bad roster ({exc})") from None
    if len(sid) != 16:
        raise ParseError(f"{path}: session_id must be 32 hex digits")
    if sorted(servers) != list(scheme.party_ids):
        raise ParseError(f"{path}: {scheme.value} needs servers {list(scheme.party_ids)}")
    return Roster(scheme, sid, servers, frac_bits)


def run_server(roster: Roster, party_id: int, pre: Preprocessing, *, listen=None, seed=None, timeout=30.0, input_timeout=300.0):
    """Serve one audit over TCP. Lower ids are dialled, higher ids dial us."""
    if party_id not in roster.servers:
        raise ParseError(f"party {party_id} is not in the roster")
    transport = SocketTransport(party_id, roster.session_id, listen or roster.servers[party_id], timeout)
    try:
        transport.connect({p: e for p, e in roster.servers.items() if p < party_id}, retry_for=timeout)
        transport.wait_for_peers([p for p in roster.servers if p > party_id], timeout)
        cfg = SessionConfig(
            scheme=roster.scheme,
            roster=roster.servers,
            party_id=party_id,
            codec=roster.codec,
            session_id=roster.session_id,
            seed=None if seed is None else derive_rng(seed, 10 + party_id).bytes(16),
            timeout=timeout,
            input_timeout=input_timeout,
        )
        session = Session(cfg, transport, pre)
        serve(session)
        return session
    finally:
        transport.close()


# -- single-process simulation ---------------------------------------------

@dataclass
class Simulation:
    report: FairnessReport
    investigator_log: list[str]
    owner_log: list[str]
    sessions: dict[int, Session] = field(default_factory=dict)

    def transcripts(self) -> dict[int, bytes]:
        return {pid: s.transcript.to_bytes() for pid, s in self.sessions.items()}


def simulate(
    model: ModelParams,
    data: AuditDataset,
    metrics,
    scheme="3pc",
    codec: FixedPointCodec | None = None,
    seed: int | None = None,
    include_counts: bool = False,
    timeout: float = 30.0,
) -> Simulation:
    """Every role in one process, one thread each, over the loopback hub."""
    scheme = Scheme(scheme)
    codec = codec or FixedPointCodec()
    metrics = list(metrics)
    check_compatible(model, data, metrics)
    counts = dealer_counts(scheme, metrics, model.architecture, data.n, data.n_features, model.hidden, model.n_classes, codec.frac_bits)
    hub = LoopbackHub()
    sessions = make_sessions(scheme, hub, codec=codec, seed=seed, counts=counts, timeout=timeout)
    session_id = sessions[1].session_id
    servers = {pid: "loopback" for pid in scheme.party_ids}
    owner_t, inv_t = hub.attach(MODEL_OWNER), hub.attach(INVESTIGATOR)
    owner_log, inv_log = [], []

    def server(pid):
        def fn():
            try:
                return serve(sessions[pid])
            finally:
                sessions[pid].transport.close()
        return fn

    def owner():
        try:
            run_owner(model, owner_t, servers, scheme, codec, session_id, derive_rng(seed, OWNER_TAG), owner_log.append)
        finally:
            owner_t.close()

    def investigator():
        try:
            return run_investigator(
                data, metrics, inv_t, servers, scheme, codec, session_id,
                derive_rng(seed, INVESTIGATOR_TAG), timeout, include_counts, inv_log.append,
            )
        finally:
            inv_t.close()

    fns = {pid: server(pid) for pid in scheme.party_ids}
    fns[MODEL_OWNER] = owner
    fns[INVESTIGATOR] = investigator
    results = run_threads(fns)
    return Simulation(results[INVESTIGATOR], inv_log, owner_log, sessions)
