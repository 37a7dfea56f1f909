"""Binary framing for the sensing -> edge -> cloud links.

Every message is one frame::

    offset  size  field
    0       4     magic b"PEEC" (50 45 45 43)
    4       1     version (1)
    5       1     message type
    6       4     payload length, u32 little-endian
    10      n     payload

Payloads (little-endian throughout):

* FEATURES / LATENT: u16 id length, UTF-8 id, u32 dim, dim x f32
* PREDICTION: u16 id length, UTF-8 id, u8 valence (0 = NEG, 1 = POS), f32 score
* ERROR: u16 id length, UTF-8 id (may be empty), UTF-8 message text
* PING / PONG: empty

Values travel as f32, so vectors lose precision relative to the f64 used
everywhere else.
"""

from __future__ import annotations

import asyncio
import enum
import socket
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"PEEC"
VERSION = 1
HEADER = struct.Struct("<4sBBI")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 1 << 26


class MsgType(enum.IntEnum):
    FEATURES = 1
    LATENT = 2
    PREDICTION = 3
    ERROR = 4
    PING = 5
    PONG = 6


class WireError(ValueError):
    pass


class BadMagic(WireError):
    pass


class BadVersion(WireError):
    pass


class UnknownType(WireError):
    pass


class Truncated(WireError):
    def __init__(self, missing: int, what: str = "frame"):
        self.missing = missing
        super().__init__(f"truncated {what}: {missing} bytes missing")


class PayloadError(WireError):
    pass


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    payload: bytes = b""


@dataclass(frozen=True, eq=False)
class VectorPayload:
    utt_id: str
    values: np.ndarray  # float32

    def __eq__(self, other):
        return isinstance(other, VectorPayload) and self.utt_id == other.utt_id \
            and np.array_equal(self.values, other.values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class PredictionPayload:
    utt_id: str
    valence: int
    score: float


@dataclass(frozen=True)
class ErrorPayload:
    utt_id: str
    message: str


def encode_frame(frame: Frame) -> bytes:
    mt = MsgType(frame.msg_type)
    if len(frame.payload) > MAX_PAYLOAD:
        raise WireError(f"payload of {len(frame.payload)} bytes exceeds limit {MAX_PAYLOAD}")
    return HEADER.pack(MAGIC, VERSION, mt, len(frame.payload)) + frame.payload


def decode_header(data: bytes) -> tuple[MsgType, int]:
    if len(data) < HEADER_SIZE:
        if data[:4] != MAGIC[:len(data[:4])]:
            raise BadMagic(f"bad magic {bytes(data[:4])!r}")
        raise Truncated(HEADER_SIZE - len(data), "header")
    magic, version, mt, n = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported protocol version {version}")
    try:
        mt = MsgType(mt)
    except ValueError:
        raise UnknownType(f"unknown message type {mt}") from None
    if n > MAX_PAYLOAD:
        raise WireError(f"payload length {n} exceeds limit {MAX_PAYLOAD}")
    return mt, n


def decode_frame(data: bytes) -> tuple[Frame, int]:
    """Decode one frame from the start of ``data``; returns (frame, bytes consumed)."""
    mt, n = decode_header(data)
    end = HEADER_SIZE + n
    if len(data) < end:
        raise Truncated(end - len(data), "payload")
    return Frame(mt, bytes(data[HEADER_SIZE:end])), end


def iter_frames(data: bytes):
    pos = 0
    while pos < len(data):
        frame, used = decode_frame(data[pos:])
        yield frame, data[pos:pos + used]
        pos += used


# -- payloads --------------------------------------------------------------

def _pack_id(utt_id: str) -> bytes:
    raw = utt_id.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise WireError("utterance id longer than 65535 bytes")
    return struct.pack("<H", len(raw)) + raw


def _unpack_id(buf: bytes) -> tuple[str, int]:
    if len(buf) < 2:
        raise PayloadError("payload too short for id length")
    (n,) = struct.unpack_from("<H", buf)
    if len(buf) < 2 + n:
        raise PayloadError("payload too short for id")
    return buf[2:2 + n].decode("utf-8"), 2 + n


def vector_frame(msg_type: MsgType, utt_id: str, values) -> Frame:
    v = np.asarray(values, dtype="<f4").reshape(-1)
    return Frame(MsgType(msg_type), _pack_id(utt_id) + struct.pack("<I", v.shape[0]) + v.tobytes())


def features_frame(utt_id: str, values) -> Frame:
    return vector_frame(MsgType.FEATURES, utt_id, values)


def latent_frame(utt_id: str, values) -> Frame:
    return vector_frame(MsgType.LATENT, utt_id, values)


def prediction_frame(utt_id: str, valence: int, score: float) -> Frame:
    if valence not in (0, 1):
        raise WireError(f"valence must be 0 or 1, got {valence}")
    return Frame(MsgType.PREDICTION, _pack_id(utt_id) + struct.pack("<Bf", valence, score))


def error_frame(message: str, utt_id: str = "") -> Frame:
    return Frame(MsgType.ERROR, _pack_id(utt_id) + message.encode("utf-8"))


def ping_frame() -> Frame:
    return Frame(MsgType.PING)


def pong_frame() -> Frame:
    return Frame(MsgType.PONG)


def parse_vector(frame: Frame) -> VectorPayload:
    if frame.msg_type not in (MsgType.FEATURES, MsgType.LATENT):
        raise PayloadError(f"{frame.msg_type.name} frame carries no vector")
    utt_id, off = _unpack_id(frame.payload)
    if len(frame.payload) < off + 4:
        raise PayloadError("payload too short for dim")
    (dim,) = struct.unpack_from("<I", frame.payload, off)
    off += 4
    if len(frame.payload) != off + 4 * dim:
        raise PayloadError(f"vector payload holds {len(frame.payload) - off} bytes, dim {dim} needs {4 * dim}")
    values = np.frombuffer(frame.payload, dtype="<f4", count=dim, offset=off).astype(np.float32)
    return VectorPayload(utt_id, values)


def parse_prediction(frame: Frame) -> PredictionPayload:
    if frame.msg_type != MsgType.PREDICTION:
        raise PayloadError(f"expected PREDICTION, got {frame.msg_type.name}")
    utt_id, off = _unpack_id(frame.payload)
    if len(frame.payload) != off + 5:
        raise PayloadError("prediction payload has wrong length")
    valence, score = struct.unpack_from("<Bf", frame.payload, off)
    if valence not in (0, 1):
        raise PayloadError(f"invalid valence byte {valence}")
    return PredictionPayload(utt_id, valence, score)


def parse_error(frame: Frame) -> ErrorPayload:
    if frame.msg_type != MsgType.ERROR:
        raise PayloadError(f"expected ERROR, got {frame.msg_type.name}")
    utt_id, off = _unpack_id(frame.payload)
    return ErrorPayload(utt_id, frame.payload[off:].decode("utf-8", errors="replace"))


def parse_payload(frame: Frame):
    if frame.msg_type in (MsgType.FEATURES, MsgType.LATENT):
        return parse_vector(frame)
    if frame.msg_type == MsgType.PREDICTION:
        return parse_prediction(frame)
    if frame.msg_type == MsgType.ERROR:
        return parse_error(frame)
    if frame.payload:
        raise PayloadError(f"{frame.msg_type.name} frame must have an empty payload")
    return None


# -- transport -------------------------------------------------------------

async def read_frame(reader: asyncio.StreamReader) -> tuple[Frame, bytes] | None:
    """Read one frame; returns (frame, raw bytes), or None on clean EOF."""
    try:
        head = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as e:
        if not e.partial:
            return None
        decode_header(e.partial)  # raises BadMagic or Truncated
        raise Truncated(HEADER_SIZE - len(e.partial), "header") from None
    mt, n = decode_header(head)
    try:
        body = await reader.readexactly(n)
    except asyncio.IncompleteReadError as e:
        raise Truncated(n - len(e.partial), "payload") from None
    return Frame(mt, body), head + body


async def write_frame(writer: asyncio.StreamWriter, frame: Frame) -> None:
    writer.write(encode_frame(frame))
    await writer.drain()


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


def recv_frame(sock: socket.socket) -> Frame | None:
    head = _recv_exact(sock, HEADER_SIZE)
    if not head:
        return None
    mt, n = decode_header(head)
    body = _recv_exact(sock, n)
    if len(body) < n:
        raise Truncated(n - len(body), "payload")
    return Frame(mt, body)


def send_frame(sock: socket.socket, frame: Frame) -> None:
    sock.sendall(encode_frame(frame))


def parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must be host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)
