import json
import socket
from pathlib import Path

import numpy as np
import pytest

from privfair.cli import main
from privfair.errors import ParseError
from privfair.files import load_dataset, load_model, save_model
from privfair.net.local import run_threads
from privfair.net.transport import SocketTransport
from privfair.net.wire import INVESTIGATOR, MODEL_OWNER
from privfair.oracle import plain_infer, plain_metrics
from privfair.roles import (
    Roster,
    dealer_counts,
    load_preprocessing,
    load_roster,
    run_dealer,
    run_investigator,
    run_owner,
    run_server,
)

from conftest import CODEC, SCHEMES, TOL, random_dataset, random_lr

DATA = Path(__file__).parent / "data"
SID = bytes.fromhex("00112233445566778899aabbccddeeff")


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _roster(tmp_path, scheme, endpoints):
    path = tmp_path / "roster.json"
    path.write_text(json.dumps({"scheme": scheme, "session_id": SID.hex(), "frac_bits": 16,
                                "servers": {str(k): v for k, v in endpoints.items()}}))
    return path


def test_load_dataset_valid_and_shaped(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("f1,f2,y,a\n0.5,1,1,0\n-2,3.25,0,1\n1e-3,0,1,1\n")
    data = load_dataset(p)
    assert data.n == 3 and data.n_features == 2 and data.A.tolist() == [0, 1, 1]
    credit = load_dataset(DATA / "credit.csv")
    assert (credit.n, credit.n_features) == (200, 47)
    assert load_model(DATA / "credit_lr.json").n_features == credit.n_features


@pytest.mark.parametrize(
    "body,line,needle",
    [
        ("f1,y,a\n1,0,0\n2,1,2\n", 3, "sensitive attribute 2"),
        ("f1,y,a\n1,2,0\n", 2, "label 2"),
        ("f1,y,a\n1,0\n", 2, "expected 3 fields"),
        ("f1,y,a\nabc,0,0\n", 2, "could not convert"),
        ("x1,y,a\n1,0,0\n", 1, "header"),
    ],
)
def test_load_dataset_names_bad_line(tmp_path, body, line, needle):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(ParseError, match=f":{line}:.*{needle}"):
        load_dataset(p)


def test_model_file_roundtrip_and_errors(tmp_path):
    rng = np.random.default_rng(0)
    model = random_lr(rng, 4)
    save_model(tmp_path / "m.json", model)
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.flatten(), model.flatten())
    (tmp_path / "bad.json").write_text('{"format": "privfair-model", "version": 2}')
    with pytest.raises(ParseError, match="version"):
        load_model(tmp_path / "bad.json")
    (tmp_path / "shape.json").write_text(json.dumps({"format": "privfair-model", "version": 1, "architecture": "logistic_regression",
                                                     "dims": {"features": 3}, "params": {"w": [1, 2], "b": [0]}}))
    with pytest.raises(ParseError):
        load_model(tmp_path / "shape.json")


def test_missing_model_exits_2_without_network(tmp_path, capsys):
    listener = socket.create_server(("127.0.0.1", 0))
    listener.setblocking(False)
    port = listener.getsockname()[1]
    roster = _roster(tmp_path, "2pc", {1: f"127.0.0.1:{port}", 2: f"127.0.0.1:{port}"})
    assert main(["owner", "--roster", str(roster), "--model", str(tmp_path / "nope.json")]) == 2
    with pytest.raises(BlockingIOError):
        listener.accept()
    listener.close()
    assert main(["simulate", "--model", str(tmp_path / "nope.json"), "--data", str(DATA / "credit.csv")]) == 2
    assert "nope.json" in capsys.readouterr().err


def test_unreachable_servers_exit_3(tmp_path):
    roster = _roster(tmp_path, "2pc", {1: f"127.0.0.1:{_free_port()}", 2: f"127.0.0.1:{_free_port()}"})
    assert main(["owner", "--roster", str(roster), "--model", str(DATA / "credit_lr.json"), "--timeout", "1"]) == 3


def test_bad_inputs_exit_2(tmp_path, monkeypatch):
    assert main(["plain-audit", "--model", str(DATA / "credit_lr.json"), "--data", str(DATA / "credit.csv"), "--metrics", "dp,foo"]) == 2
    bad = tmp_path / "r.json"
    bad.write_text("{}")
    assert main(["investigator", "--roster", str(bad), "--data", str(DATA / "credit.csv")]) == 2
    monkeypatch.setenv("PRIVFAIR_SEED", "abc")
    assert main(["simulate", "--model", str(DATA / "credit_lr.json"), "--data", str(DATA / "credit.csv")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scheme", "4pc"])
    assert exc.value.code == 2


def test_plain_audit_prints_ten_digits(capsys):
    assert main(["plain-audit", "--model", str(DATA / "credit_lr.json"), "--data", str(DATA / "credit.csv"), "--metrics", "gacc"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "Overall accuracy: 0.7850000000"


def test_dealer_writes_per_party_files(tmp_path, capsys):
    code = main(["dealer", "--scheme", "2pc", "--metrics", "dp", "--instances", "10", "--features", "3", "--out", str(tmp_path)])
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["party1-random_with_bits.pfd", "party1-triples.pfd", "party2-random_with_bits.pfd", "party2-triples.pfd"]
    pre = load_preprocessing(tmp_path, 2, "2pc")
    counts = dealer_counts("2pc", ["dp"], "logistic_regression", 10, 3)
    assert all(pre.remaining(k) == v for k, v in counts.items())
    with pytest.raises(ParseError):
        load_preprocessing(tmp_path, 1, "3pc")


def test_roster_validation(tmp_path):
    good = _roster(tmp_path, "3pc", {1: "h:1", 2: "h:2", 3: "h:3"})
    assert load_roster(good).servers[3] == "h:3"
    for servers in ({1: "h:1", 2: "h:2"}, {1: "h:1", 2: "h:2", 3: "nohost"}):
        with pytest.raises(ParseError):
            load_roster(_roster(tmp_path, "3pc", servers))


@pytest.mark.parametrize("scheme", SCHEMES)
def test_socket_deployment_end_to_end(tmp_path, scheme):
    rng = np.random.default_rng(5)
    model, data = random_lr(rng, 6), random_dataset(rng, 60, 6)
    ids = (1, 2) if scheme == "2pc" else (1, 2, 3)
    roster = Roster(scheme, SID, {pid: f"127.0.0.1:{_free_port()}" for pid in ids})
    counts = dealer_counts(scheme, ["dp", "eop", "gacc"], model.architecture, data.n, data.n_features)
    run_dealer(tmp_path, scheme, counts, np.random.default_rng(1))

    def server(pid):
        return lambda: run_server(roster, pid, load_preprocessing(tmp_path, pid, scheme), timeout=10, input_timeout=20)

    def owner():
        t = SocketTransport(MODEL_OWNER, SID, timeout=10, connect_retry=5)
        try:
            run_owner(model, t, roster.servers, scheme, CODEC, SID, np.random.default_rng(2), log=lambda _: None)
        finally:
            t.close()

    def investigator():
        t = SocketTransport(INVESTIGATOR, SID, timeout=10, connect_retry=5)
        try:
            return run_investigator(data, ["dp", "eop", "gacc"], t, roster.servers, scheme, CODEC, SID,
                                    np.random.default_rng(3), 20, True, log=lambda _: None)
        finally:
            t.close()

    fns = {pid: server(pid) for pid in ids}
    fns[MODEL_OWNER] = owner
    fns[INVESTIGATOR] = investigator
    out = run_threads(fns)
    report = out[INVESTIGATOR]
    rep = plain_metrics(plain_infer(model, data.X), data.Y, data.A, 2, ["dp", "eop", "gacc"])
    for m, name in (("dp", "rate"), ("eop", "tpr"), ("gacc", "acc"), ("gacc", "overall")):
        assert np.nanmax(np.abs(report.as_float(m, name) - rep.as_float(m, name))) <= TOL
    assert np.array_equal(report.counts["dp"]["tp"], rep.counts["dp"]["tp"])
    for pid in ids:
        kinds = out[pid].transcript.kinds()
        assert set(kinds) <= {"setup", "masked", "reshare", "input", "release"}
        assert kinds["release"] == 1
