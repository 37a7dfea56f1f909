import socket
import threading
import time

import numpy as np
import pytest

from peec import wire
from peec.corpus import synth_corpus
from peec.edgecloud import (
    AuditError, CloudService, EdgeService, ServiceThread, TapProxy, audit_leakage, captured_attack,
    edge_encode, offline_predict, ping, predict_latent, run_sensor, split_attack,
)
from peec.evaluate import AttackerConfig, svm_train_smo
from peec.model import desk_config, fit_encoder

D, L = 32, 8
ATTACKER = AttackerConfig(hidden=32, epochs=20, dtype="float32")


@pytest.fixture(scope="module")
def deployed():
    corpus = synth_corpus(n_per_cell=5, dim=D, n_speakers=8, n_languages=2, seed=3)
    model, _ = fit_encoder(corpus, np.arange(len(corpus)),
                           desk_config(epochs=15, latent_dim=L, hidden=(32, 16), head_hidden=16))
    Z = np.array([edge_encode(model, x) for x in corpus.X])
    y = np.where(corpus.labels("valence") == "POS", 1.0, -1.0)
    svm = svm_train_smo(np.float32(Z).astype(np.float64), y, 1.0, 0.5)
    return corpus, model, svm


@pytest.fixture
def chain(deployed, tmp_path):
    """cloud <- tap <- edge, torn down after the test."""
    corpus, model, svm = deployed
    cloud = ServiceThread(CloudService(svm)).start()
    tap = ServiceThread(TapProxy(cloud.addr, tmp_path / "capture.bin")).start()
    edge = ServiceThread(EdgeService(model, tap.addr)).start()
    yield {"cloud": cloud, "tap": tap, "edge": edge, "capture": tmp_path / "capture.bin"}
    for s in (edge, tap, cloud):
        s.stop()


def raw_exchange(addr, payload: bytes) -> list:
    """Send bytes, half-close, return every frame the peer sends back."""
    host, port = wire.parse_addr(addr)
    with socket.create_connection((host, port), timeout=10) as sock:
        sock.sendall(payload)
        sock.shutdown(socket.SHUT_WR)
        out = []
        while True:
            f = wire.recv_frame(sock)
            if f is None:
                return out
            out.append(f)


def test_pipeline_equals_offline(deployed, chain):
    corpus, model, svm = deployed
    t = run_sensor(corpus, chain["edge"].addr)
    assert len(t) == len(corpus) and not t.errors
    labels, scores = offline_predict(model, svm, corpus.X)
    assert [r.utt_id for r in t.rows] == corpus.ids.tolist()
    assert np.array_equal([r.valence for r in t.rows], labels)
    assert np.array_equal([r.score for r in t.rows], scores)


def test_healthy_audit_passes_and_attack_matches_offline(deployed, chain):
    corpus, model, _ = deployed
    run_sensor(corpus, chain["edge"].addr)
    v = audit_leakage(chain["capture"], D, L)
    assert v.passed and v.label == "PASS"
    assert v.raw_dim_frames == 0 and v.latent_frames == len(corpus)
    assert v.counts == {"LATENT": len(corpus), "PREDICTION": len(corpus)}
    offline = np.vstack([np.float32(edge_encode(model, x)) for x in corpus.X]).astype(np.float64)
    assert np.array_equal(v.latents, offline)
    a = captured_attack(v, corpus, "gender", seed=4, config=ATTACKER)
    b = split_attack(offline, corpus.labels("gender"), seed=4, config=ATTACKER)
    assert abs(a - b) <= 0.01


def test_passthrough_fails_audit(deployed, tmp_path):
    corpus, model, svm = deployed
    with ServiceThread(CloudService(svm)) as cloud, \
            ServiceThread(TapProxy(cloud.addr, tmp_path / "cap.bin")) as tap, \
            ServiceThread(EdgeService(model, tap.addr, passthrough=True)) as edge:
        t = run_sensor(corpus.subset(np.arange(6)), edge.addr)
    assert len(t.errors) == 6  # cloud refuses FEATURES
    v = audit_leakage(tmp_path / "cap.bin", D, L)
    assert not v.passed and v.label == "FAIL"
    assert v.raw_dim_frames == 6 and v.counts["FEATURES"] == 6
    assert "verdict=FAIL" in v.summary()


def test_wrong_feature_dim_never_goes_upstream(chain):
    frames = raw_exchange(chain["edge"].addr, wire.encode_frame(wire.features_frame("w", np.zeros(D + 1))))
    assert len(frames) == 1 and frames[0].msg_type == wire.MsgType.ERROR
    err = wire.parse_error(frames[0])
    assert err.utt_id == "w" and str(D + 1) in err.message and str(D) in err.message
    time.sleep(0.1)
    assert chain["capture"].read_bytes() == b""


def test_cloud_dim_mismatch_names_both(deployed):
    _, _, svm = deployed
    reply = CloudService(svm).respond(wire.latent_frame("q", np.zeros(L + 3)))
    err = wire.parse_error(reply)
    assert err.utt_id == "q" and f"{L + 3}" in err.message and f"{L}" in err.message


def test_ping_answered_locally(deployed):
    corpus, model, _ = deployed
    with ServiceThread(EdgeService(model, "127.0.0.1:1")) as edge:  # no cloud at all
        assert ping(edge.addr)


def test_malformed_frame_gets_one_error_then_close(chain):
    frames = raw_exchange(chain["edge"].addr, b"JUNKJUNKJUNK" + wire.encode_frame(wire.ping_frame()))
    assert len(frames) == 1
    assert "malformed" in wire.parse_error(frames[0]).message


def test_concurrent_clients_get_their_own_ids(deployed, chain):
    corpus, _, _ = deployed
    parts = [corpus.subset(np.arange(i, len(corpus), 3)) for i in range(3)]
    results = [None] * 3

    def go(i):
        results[i] = run_sensor(parts[i], chain["edge"].addr)
    threads = [threading.Thread(target=go, args=(i,)) for i in range(3)]
    for th in threads:
        th.start()
    for th in threads:
        th.join(60)
    for part, t in zip(parts, results):
        assert [r.utt_id for r in t.rows] == part.ids.tolist()
        assert not t.errors


def test_killing_cloud_gives_errors_not_silence(deployed):
    corpus, model, svm = deployed
    cloud = ServiceThread(CloudService(svm)).start()
    edge = EdgeService(model, cloud.addr, connect_attempts=2, retry_delay=0.05)
    with ServiceThread(edge) as e:
        box = {}
        th = threading.Thread(target=lambda: box.setdefault("t", run_sensor(corpus, e.addr, rate_limit=80)))
        th.start()
        time.sleep(0.15)
        cloud.stop()
        th.join(60)
    t = box["t"]
    assert [r.utt_id for r in t.rows] == corpus.ids.tolist()
    assert t.errors, "stopping the cloud must surface errors"
    assert all("retry-after" in r.error for r in t.errors)
    answered = [r for r in t.rows if r.error is None]
    assert answered, "the cloud was stopped before any reply"
    assert all(r.valence in (0, 1) for r in answered)


def test_predict_latent_matches_offline(deployed):
    corpus, model, svm = deployed
    labels, scores = offline_predict(model, svm, corpus.X[:5])
    for x, lab, s in zip(corpus.X[:5], labels, scores):
        assert predict_latent(svm, edge_encode(model, x)) == (lab, s)


def test_audit_errors(tmp_path):
    with pytest.raises(AuditError):
        audit_leakage(tmp_path / "missing.bin", D, L)
    (tmp_path / "bad.bin").write_bytes(b"not frames")
    with pytest.raises(AuditError):
        audit_leakage(tmp_path / "bad.bin", D, L)


def test_audit_flags_wrong_latent_width(tmp_path):
    path = tmp_path / "c.bin"
    path.write_bytes(wire.encode_frame(wire.latent_frame("a", np.zeros(L))) +
                     wire.encode_frame(wire.latent_frame("b", np.zeros(L + 1))))
    v = audit_leakage(path, D, L)
    assert not v.passed and v.latent_frames == 1 and v.raw_dim_frames == 0


def test_transcript_csv(deployed, chain, tmp_path):
    corpus, _, _ = deployed
    t = run_sensor(corpus.subset(np.arange(3)), chain["edge"].addr)
    t.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "id,valence,score,rtt_s,error" and len(lines) == 4
