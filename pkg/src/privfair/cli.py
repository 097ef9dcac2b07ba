"""Command line entry points for every audit role."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import NetworkError, ParseError, PrivFairError
from .files import load_dataset, load_model
from .inference import ARCHITECTURES, LOGISTIC_REGRESSION
from .net.local import derive_rng
from .net.transport import SocketTransport
from .net.wire import INVESTIGATOR, MODEL_OWNER
from .oracle import plain_infer, plain_metrics
from .report import DIGITS, render, report_to_dict
from .ring import FixedPointCodec
from .roles import (
    INVESTIGATOR_TAG,
    OWNER_TAG,
    check_compatible,
    dealer_counts,
    env_seed,
    load_preprocessing,
    load_roster,
    parse_metrics,
    run_dealer,
    run_investigator,
    run_owner,
    run_server,
    simulate,
)

PLAIN_DIGITS = 10


def _groups(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError("expected two names: A=1 group, A=0 group")
    return parts[0], parts[1]


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privfair", description="Private fairness audits over secret-shared models and data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def metrics_arg(sp):
        sp.add_argument("--metrics", default="dp,eop", help="comma list from dp,eop,eod,gacc, run in order (default: dp,eop)")

    def report_args(sp):
        sp.add_argument("--groups", type=_groups, default=("protected", "unprotected"), help="display names for A=1 and A=0")
        sp.add_argument("--out", type=Path, help="also write the report as JSON")

    d = sub.add_parser("dealer", help="pre-generate correlated randomness for the servers")
    d.add_argument("--scheme", choices=["2pc", "3pc"], default="3pc")
    metrics_arg(d)
    d.add_argument("--arch", choices=ARCHITECTURES, default=LOGISTIC_REGRESSION)
    d.add_argument("--instances", type=_positive, required=True, help="audit size N")
    d.add_argument("--features", type=_positive, required=True)
    d.add_argument("--hidden", type=int, default=0)
    d.add_argument("--classes", type=int, default=2)
    d.add_argument("--frac-bits", type=int, default=16)
    d.add_argument("--out", type=Path, required=True, help="output directory, one file per server and kind")

    s = sub.add_parser("server", help="run one compute server")
    s.add_argument("--roster", type=Path, required=True)
    s.add_argument("--party-id", type=int, required=True)
    s.add_argument("--listen", help="host:port to bind (default: roster entry)")
    s.add_argument("--preprocessing", type=Path, help="directory written by the dealer")
    s.add_argument("--timeout", type=float, default=30.0, help="per-round timeout in seconds")
    s.add_argument("--input-timeout", type=float, default=300.0, help="how long to wait for client submissions")
    s.add_argument("--transcript", type=Path, help="write this server's transcript here")

    o = sub.add_parser("owner", help="share a model with the servers")
    o.add_argument("--roster", type=Path, required=True)
    o.add_argument("--model", type=Path, required=True)
    o.add_argument("--timeout", type=float, default=30.0, help="seconds to keep dialling the servers")

    i = sub.add_parser("investigator", help="share audit data, wait, and print the report")
    i.add_argument("--roster", type=Path, required=True)
    i.add_argument("--data", type=Path, required=True)
    i.add_argument("--classes", type=int, default=2)
    metrics_arg(i)
    report_args(i)
    i.add_argument("--with-counts", action="store_true", help="also release confusion counts")
    i.add_argument("--timeout", type=float, default=300.0)

    m = sub.add_parser("simulate", help="run every role in this process over loopback")
    m.add_argument("--model", type=Path, required=True)
    m.add_argument("--data", type=Path, required=True)
    m.add_argument("--scheme", choices=["2pc", "3pc"], default="3pc")
    m.add_argument("--frac-bits", type=int, default=16)
    metrics_arg(m)
    report_args(m)
    m.add_argument("--with-counts", action="store_true")
    m.add_argument("--transcripts", type=Path, help="directory for per-server transcripts")

    a = sub.add_parser("plain-audit", help="reference audit in the clear")
    a.add_argument("--model", type=Path, required=True)
    a.add_argument("--data", type=Path, required=True)
    metrics_arg(a)
    report_args(a)
    return p


def _write_json(path: Path | None, report) -> None:
    if path is not None:
        path.write_text(json.dumps(report_to_dict(report), indent=1) + "\n")


def _cmd_dealer(args) -> None:
    metrics = parse_metrics(args.metrics)
    counts = dealer_counts(args.scheme, metrics, args.arch, args.instances, args.features, args.hidden, args.classes, args.frac_bits)
    for path in run_dealer(args.out, args.scheme, counts, derive_rng(env_seed(), 1)):
        print(path)


def _cmd_server(args) -> None:
    roster = load_roster(args.roster)
    pre = load_preprocessing(args.preprocessing, args.party_id, roster.scheme) if args.preprocessing else None
    session = run_server(
        roster, args.party_id, pre, listen=args.listen, seed=env_seed(),
        timeout=args.timeout, input_timeout=args.input_timeout,
    )
    if args.transcript:
        args.transcript.write_bytes(session.transcript.to_bytes())
    print(f"server {args.party_id}: audit released after {session.round} rounds")


def _cmd_owner(args) -> None:
    model = load_model(args.model)
    roster = load_roster(args.roster)
    transport = SocketTransport(MODEL_OWNER, roster.session_id, timeout=args.timeout, connect_retry=args.timeout)
    try:
        run_owner(model, transport, roster.servers, roster.scheme, roster.codec, roster.session_id,
                  derive_rng(env_seed(), OWNER_TAG))
    finally:
        transport.close()


def _cmd_investigator(args) -> None:
    metrics = parse_metrics(args.metrics)
    data = load_dataset(args.data, args.classes)
    roster = load_roster(args.roster)
    transport = SocketTransport(INVESTIGATOR, roster.session_id, timeout=args.timeout, connect_retry=args.timeout)
    try:
        report = run_investigator(data, metrics, transport, roster.servers, roster.scheme, roster.codec,
                                  roster.session_id, derive_rng(env_seed(), INVESTIGATOR_TAG), args.timeout,
                                  args.with_counts)
    finally:
        transport.close()
    print("\n".join(render(report, args.groups)))
    _write_json(args.out, report)


def _load_pair(args, metrics):
    model = load_model(args.model)
    data = load_dataset(args.data, model.n_classes)
    check_compatible(model, data, metrics)
    return model, data


def _cmd_simulate(args) -> None:
    metrics = parse_metrics(args.metrics)
    model, data = _load_pair(args, metrics)
    sim = simulate(model, data, metrics, args.scheme, FixedPointCodec(args.frac_bits), env_seed(), args.with_counts)
    print("\n".join(sim.investigator_log + render(sim.report, args.groups, DIGITS)))
    _write_json(args.out, sim.report)
    if args.transcripts:
        args.transcripts.mkdir(parents=True, exist_ok=True)
        for pid, blob in sim.transcripts().items():
            (args.transcripts / f"server{pid}.transcript").write_bytes(blob)


def _cmd_plain(args) -> None:
    metrics = parse_metrics(args.metrics)
    model, data = _load_pair(args, metrics)
    report = plain_metrics(plain_infer(model, data.X), data.Y, data.A, data.n_classes, metrics)
    print("\n".join(render(report, args.groups, PLAIN_DIGITS)))
    _write_json(args.out, report)


COMMANDS = {
    "dealer": _cmd_dealer,
    "server": _cmd_server,
    "owner": _cmd_owner,
    "investigator": _cmd_investigator,
    "simulate": _cmd_simulate,
    "plain-audit": _cmd_plain,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except PrivFairError as exc:
        print(f"privfair {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except TimeoutError as exc:
        print(f"privfair {args.command}: {exc}", file=sys.stderr)
        return NetworkError.exit_code
    except OSError as exc:
        print(f"privfair {args.command}: {exc}", file=sys.stderr)
        return ParseError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
