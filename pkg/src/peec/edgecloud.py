"""Three-layer deployment: sensing client -> edge encoder -> cloud classifier.

The edge is the privacy boundary.  It receives raw feature vectors, applies
the model's stored scaler and encoder, and forwards only latents upstream.
The cloud scores latents with an RBF SVM.  A tap can sit on the edge->cloud
link and record every frame, and :func:`audit_leakage` checks such a
capture for raw-dimension payloads.

Services run on asyncio.  Each client connection of the edge gets its own
upstream connection, opened lazily, so request order is kept per
connection and one client's failure never touches another's.
"""

from __future__ import annotations

import asyncio
import csv
import logging
import signal
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import wire
from .corpus import Corpus, load_corpus
from .evaluate import SvmModel, attack_attribute, decision_values, load_svm, stratified_split
from .model import PrivacyEncoderModel, load
from .tensor import RandomSource, derive_seed
from .wire import Frame, MsgType, WireError

log = logging.getLogger(__name__)

RETRY_AFTER = 1.0


class NetworkError(ConnectionError):
    pass


class AuditError(ValueError):
    pass


def _quantize(x) -> np.ndarray:
    """Round-trip through f32, as values do on the wire."""
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def predict_latent(svm: SvmModel, latent) -> tuple[int, float]:
    """Cloud-side scoring of one latent vector: (valence 0/1, f32 score)."""
    value = float(decision_values(svm, _quantize(latent).reshape(1, -1))[0])
    return (1 if value >= 0.0 else 0), float(np.float32(value))


def edge_encode(model: PrivacyEncoderModel, features) -> np.ndarray:
    """Edge-side encoding of one received feature vector (f32 in, f64 out)."""
    return model.encode_raw(_quantize(features).reshape(1, -1))[0]


def offline_predict(model: PrivacyEncoderModel, svm: SvmModel, X) -> tuple[np.ndarray, np.ndarray]:
    """What the pipeline must return for each row, computed without sockets.

    Mirrors the services step by step, one row at a time, including both f32
    hops, so results can be compared exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels, scores = [], []
    for x in X:
        v, s = predict_latent(svm, edge_encode(model, x))
        labels.append(v)
        scores.append(s)
    return np.array(labels, dtype=np.int64), np.array(scores, dtype=np.float64)


# -- services --------------------------------------------------------------

class _Service:
    """Shared plumbing: start/stop an asyncio server and track connections."""

    name = "service"

    def __init__(self, listen: str = "127.0.0.1:0"):
        self.listen = listen
        self._server: asyncio.base_events.Server | None = None
        self._writers: set[asyncio.StreamWriter] = set()

    @property
    def addr(self) -> str:
        if self._server is None:
            raise RuntimeError(f"{self.name} is not running")
        host, port = self._server.sockets[0].getsockname()[:2]
        return f"{host}:{port}"

    async def start(self) -> None:
        host, port = wire.parse_addr(self.listen)
        self._server = await asyncio.start_server(self._handle, host, port)
        log.info("%s listening on %s", self.name, self.addr)

    async def stop(self) -> None:
        if self._server is None:
            return
        self._server.close()
        for w in list(self._writers):
            w.close()
        await self._server.wait_closed()
        self._server = None

    async def serve_until(self, stop: asyncio.Event) -> None:
        await self.start()
        try:
            await stop.wait()
        finally:
            await self.stop()

    async def _handle(self, reader, writer):
        self._writers.add(writer)
        try:
            await self.handle(reader, writer)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            self._writers.discard(writer)
            writer.close()

    async def handle(self, reader, writer):
        raise NotImplementedError


async def _read_or_reject(reader, writer) -> Frame | None:
    """Next frame from a client; a malformed one gets one ERROR frame and None."""
    try:
        got = await wire.read_frame(reader)
    except WireError as e:
        await wire.write_frame(writer, wire.error_frame(f"malformed frame: {e}"))
        return None
    return None if got is None else got[0]


class CloudService(_Service):
    """Scores LATENT frames with a fixed SVM."""

    name = "cloud"

    def __init__(self, svm: SvmModel, listen: str = "127.0.0.1:0"):
        super().__init__(listen)
        self.svm = svm

    async def handle(self, reader, writer):
        while True:
            frame = await _read_or_reject(reader, writer)
            if frame is None:
                return
            reply = self.respond(frame)
            if reply is None:
                return
            await wire.write_frame(writer, reply)

    def respond(self, frame: Frame) -> Frame | None:
        if frame.msg_type == MsgType.PING:
            return wire.pong_frame()
        if frame.msg_type != MsgType.LATENT:
            return wire.error_frame(f"cloud accepts LATENT frames, got {frame.msg_type.name}")
        try:
            vec = wire.parse_vector(frame)
        except WireError as e:
            return wire.error_frame(f"malformed frame: {e}")
        if vec.dim != self.svm.dim:
            return wire.error_frame(f"latent dim {vec.dim} does not match classifier dim {self.svm.dim}",
                                    vec.utt_id)
        valence, score = predict_latent(self.svm, vec.values)
        return wire.prediction_frame(vec.utt_id, valence, score)


class _Upstream:
    """One lazily opened connection from the edge to the cloud."""

    def __init__(self, addr: str, attempts: int, delay: float):
        self.addr, self.attempts, self.delay = addr, attempts, delay
        self.reader = self.writer = None

    async def connect(self):
        host, port = wire.parse_addr(self.addr)
        err = None
        for i in range(self.attempts):
            try:
                self.reader, self.writer = await asyncio.open_connection(host, port)
                return
            except OSError as e:
                err = e
                if i + 1 < self.attempts:
                    await asyncio.sleep(self.delay)
        raise NetworkError(f"cloud unreachable at {self.addr}: {err}")

    async def request(self, frame: Frame) -> Frame:
        if self.writer is None:
            await self.connect()
        try:
            await wire.write_frame(self.writer, frame)
            got = await wire.read_frame(self.reader)
        except (OSError, WireError, asyncio.IncompleteReadError) as e:
            self.close()
            raise NetworkError(f"cloud connection to {self.addr} failed: {e}") from None
        if got is None:
            self.close()
            raise NetworkError(f"cloud at {self.addr} closed the connection")
        return got[0]

    def close(self):
        if self.writer is not None:
            self.writer.close()
        self.reader = self.writer = None


class EdgeService(_Service):
    """Encodes FEATURES into LATENT frames and relays the cloud's answer.

    ``passthrough=True`` is a deliberately broken mode that forwards raw
    features upstream unchanged; it exists only as a negative control for
    the leakage audit.
    """

    name = "edge"

    def __init__(self, model: PrivacyEncoderModel, cloud_addr: str, listen: str = "127.0.0.1:0",
                 passthrough: bool = False, connect_attempts: int = 3, retry_delay: float = 0.2):
        super().__init__(listen)
        self.model = model
        self.cloud_addr = cloud_addr
        self.passthrough = passthrough
        self.connect_attempts = connect_attempts
        self.retry_delay = retry_delay

    async def handle(self, reader, writer):
        upstream = _Upstream(self.cloud_addr, self.connect_attempts, self.retry_delay)
        try:
            while True:
                frame = await _read_or_reject(reader, writer)
                if frame is None:
                    return
                reply = await self.respond(frame, upstream)
                if reply is None:
                    return
                await wire.write_frame(writer, reply)
        finally:
            upstream.close()

    async def respond(self, frame: Frame, upstream: _Upstream) -> Frame | None:
        if frame.msg_type == MsgType.PING:
            return wire.pong_frame()
        if frame.msg_type != MsgType.FEATURES:
            return wire.error_frame(f"edge accepts FEATURES frames, got {frame.msg_type.name}")
        try:
            vec = wire.parse_vector(frame)
        except WireError as e:
            return wire.error_frame(f"malformed frame: {e}")
        if vec.dim != self.model.dim:
            return wire.error_frame(f"feature dim {vec.dim} does not match model input dim {self.model.dim}",
                                    vec.utt_id)
        if self.passthrough:
            out = frame
        else:
            out = wire.latent_frame(vec.utt_id, edge_encode(self.model, vec.values))
        try:
            return await upstream.request(out)
        except NetworkError as e:
            return wire.error_frame(f"{e}; retry-after={RETRY_AFTER:g}s", vec.utt_id)


class TapProxy(_Service):
    """Transparent relay that appends every frame, both directions, to a capture file."""

    name = "tap"

    def __init__(self, upstream: str, capture_path, listen: str = "127.0.0.1:0"):
        super().__init__(listen)
        self.upstream = upstream
        self.capture_path = Path(capture_path)
        self.capture_path.write_bytes(b"")
        self._lock = asyncio.Lock()
        self.frames = 0

    async def _record(self, raw: bytes):
        async with self._lock:
            with open(self.capture_path, "ab") as fh:
                fh.write(raw)
            self.frames += 1

    async def _pump(self, reader, writer):
        try:
            while True:
                got = await wire.read_frame(reader)
                if got is None:
                    break
                await self._record(got[1])
                writer.write(got[1])
                await writer.drain()
        except (OSError, WireError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()

    async def handle(self, reader, writer):
        host, port = wire.parse_addr(self.upstream)
        try:
            up_reader, up_writer = await asyncio.open_connection(host, port)
        except OSError:
            return
        await asyncio.gather(self._pump(reader, up_writer), self._pump(up_reader, writer))


# -- running services ------------------------------------------------------

def _run_blocking(service: _Service) -> None:
    async def main():
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, stop.set)
            except (NotImplementedError, RuntimeError):
                pass
        await service.serve_until(stop)

    asyncio.run(main())


def run_cloud(listen_addr: str, svm_path) -> None:
    """Serve the cloud classifier until SIGINT/SIGTERM."""
    _run_blocking(CloudService(load_svm(svm_path), listen_addr))


def run_edge(listen_addr: str, model_path, cloud_addr: str, passthrough: bool = False) -> None:
    """Serve the edge encoder until SIGINT/SIGTERM."""
    _run_blocking(EdgeService(load(model_path), cloud_addr, listen_addr, passthrough=passthrough))


def run_tap(listen_addr: str, upstream: str, record_path) -> None:
    _run_blocking(TapProxy(upstream, record_path, listen_addr))


class ServiceThread:
    """Runs one service on a private event loop in a daemon thread.

    >>> with ServiceThread(CloudService(svm)) as cloud:   # doctest: +SKIP
    ...     print(cloud.addr)
    """

    def __init__(self, service: _Service):
        self.service = service
        self.loop = asyncio.new_event_loop()
        self._ready = threading.Event()
        self._error: BaseException | None = None
        self._thread = threading.Thread(target=self._main, daemon=True, name=f"{service.name}-loop")

    def _main(self):
        asyncio.set_event_loop(self.loop)
        try:
            self.loop.run_until_complete(self.service.start())
        except BaseException as e:  # surfaced to the caller of start()
            self._error = e
            self._ready.set()
            return
        self._ready.set()
        self.loop.run_forever()
        self.loop.run_until_complete(self.service.stop())
        self.loop.close()

    @property
    def addr(self) -> str:
        return self.service.addr

    def start(self) -> "ServiceThread":
        self._thread.start()
        self._ready.wait()
        if self._error is not None:
            raise self._error
        return self

    def stop(self) -> None:
        if self._thread.is_alive():
            self.loop.call_soon_threadsafe(self.loop.stop)
            self._thread.join(timeout=10)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


# -- sensing client --------------------------------------------------------

@dataclass
class TranscriptRow:
    utt_id: str
    valence: int | None
    score: float | None
    rtt: float
    error: str | None = None


@dataclass
class Transcript:
    rows: list[TranscriptRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def errors(self) -> list[TranscriptRow]:
        return [r for r in self.rows if r.error is not None]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "valence", "score", "rtt_s", "error"])
            for r in self.rows:
                w.writerow([r.utt_id, "" if r.valence is None else r.valence,
                            "" if r.score is None else repr(r.score), f"{r.rtt:.6f}", r.error or ""])


def _connect(addr: str, timeout: float) -> socket.socket:
    host, port = wire.parse_addr(addr)
    return socket.create_connection((host, port), timeout=timeout)


def ping(addr: str, timeout: float = 5.0) -> bool:
    with _connect(addr, timeout) as sock:
        wire.send_frame(sock, wire.ping_frame())
        reply = wire.recv_frame(sock)
    return reply is not None and reply.msg_type == MsgType.PONG


def run_sensor(corpus, edge_addr: str, rate_limit: float = 0.0, timeout: float = 30.0) -> Transcript:
    """Stream every record as FEATURES and collect the replies.

    ``corpus`` is a :class:`Corpus` or a path to an ARFF/CSV file.
    ``rate_limit`` caps utterances per second; 0 streams unpaced.  A failed
    exchange is recorded against its utterance and the stream continues on
    a fresh connection.
    """
    if not isinstance(corpus, Corpus):
        corpus = load_corpus(corpus)
    if rate_limit < 0:
        raise ValueError(f"rate_limit must be >= 0, got {rate_limit}")
    period = 1.0 / rate_limit if rate_limit > 0 else 0.0
    transcript = Transcript()
    sock = None
    next_t = time.monotonic()
    try:
        for rec in corpus.records:
            if period:
                delay = next_t - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                next_t += period
            t0 = time.perf_counter()
            try:
                if sock is None:
                    sock = _connect(edge_addr, timeout)
                wire.send_frame(sock, wire.features_frame(rec.id, rec.features))
                reply = wire.recv_frame(sock)
                if reply is None:
                    raise NetworkError("edge closed the connection")
            except (OSError, WireError) as e:
                if sock is not None:
                    sock.close()
                    sock = None
                transcript.rows.append(TranscriptRow(rec.id, None, None, time.perf_counter() - t0,
                                                     f"network: {e}"))
                continue
            rtt = time.perf_counter() - t0
            if reply.msg_type == MsgType.PREDICTION:
                p = wire.parse_prediction(reply)
                if p.utt_id != rec.id:
                    transcript.rows.append(TranscriptRow(rec.id, None, None, rtt,
                                                         f"reply for unexpected id {p.utt_id!r}"))
                else:
                    transcript.rows.append(TranscriptRow(rec.id, p.valence, p.score, rtt))
            elif reply.msg_type == MsgType.ERROR:
                transcript.rows.append(TranscriptRow(rec.id, None, None, rtt, wire.parse_error(reply).message))
            else:
                transcript.rows.append(TranscriptRow(rec.id, None, None, rtt,
                                                     f"unexpected {reply.msg_type.name} reply"))
    finally:
        if sock is not None:
            sock.close()
    return transcript


# -- leakage audit ---------------------------------------------------------

@dataclass
class AuditVerdict:
    passed: bool
    n_frames: int
    counts: dict
    raw_dim_frames: int
    latent_frames: int
    problems: list[str]
    latent_ids: list[str]
    latents: np.ndarray

    @property
    def label(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def summary(self) -> str:
        kinds = " ".join(f"{k}={v}" for k, v in sorted(self.counts.items()))
        return (f"verdict={self.label} frames={self.n_frames} raw_dim_frames={self.raw_dim_frames} "
                f"latent_frames={self.latent_frames} {kinds}")


def audit_leakage(record_path, D: int, L: int) -> AuditVerdict:
    """Check a capture of the edge->cloud link.

    The link passes when it carries no FEATURES frame, no vector of width
    ``D``, and every data frame is a LATENT of width ``L``.
    """
    try:
        data = Path(record_path).read_bytes()
    except OSError as e:
        raise AuditError(f"cannot read capture {record_path}: {e}") from None
    counts: dict = {}
    problems: list[str] = []
    raw_dim = 0
    ids, vecs = [], []
    try:
        frames = [f for f, _ in wire.iter_frames(data)]
    except WireError as e:
        raise AuditError(f"capture {record_path} is not a valid frame stream: {e}") from None
    for i, frame in enumerate(frames):
        counts[frame.msg_type.name] = counts.get(frame.msg_type.name, 0) + 1
        if frame.msg_type not in (MsgType.FEATURES, MsgType.LATENT):
            continue
        vec = wire.parse_vector(frame)
        if vec.dim == D:
            raw_dim += 1
        if frame.msg_type == MsgType.FEATURES:
            problems.append(f"frame {i}: FEATURES frame for {vec.utt_id!r} on the link")
        elif vec.dim != L:
            problems.append(f"frame {i}: LATENT of dim {vec.dim}, expected {L}")
        else:
            ids.append(vec.utt_id)
            vecs.append(vec.values)
    if raw_dim:
        problems.append(f"{raw_dim} payload(s) of raw dimension {D}")
    latents = np.vstack(vecs).astype(np.float64) if vecs else np.zeros((0, L))
    return AuditVerdict(not problems, len(frames), counts, raw_dim, len(ids), problems, ids, latents)


def captured_attack(verdict: AuditVerdict, corpus: Corpus, attribute: str = "gender",
                    train_fraction: float = 0.5, seed: int = 0, config=None) -> float:
    """Attack accuracy on latents recovered from a capture, joined to labels by id."""
    if verdict.latent_frames == 0:
        raise AuditError("capture holds no latents to attack")
    index = {rid: i for i, rid in enumerate(corpus.ids)}
    labels = corpus.labels(attribute)[[index[i] for i in verdict.latent_ids]]
    return split_attack(verdict.latents, labels, train_fraction, seed, config)


def split_attack(Z, labels, train_fraction: float = 0.5, seed: int = 0, config=None) -> float:
    """Stratified train/test split of (Z, labels), then :func:`attack_attribute`."""
    labels = np.asarray(labels)
    tr, te = stratified_split(labels, 1.0 - train_fraction, RandomSource(derive_seed(seed, 0)))
    return attack_attribute(Z[tr], labels[tr], Z[te], labels[te], derive_seed(seed, 1), config)
