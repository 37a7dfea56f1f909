import asyncio
import socket
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from peec.wire import (
    HEADER_SIZE, BadMagic, BadVersion, Frame, MsgType, PayloadError, Truncated, UnknownType,
    WireError, decode_frame, decode_header, encode_frame, error_frame, features_frame,
    iter_frames, latent_frame, parse_addr, parse_payload, parse_prediction, parse_vector,
    ping_frame, pong_frame, prediction_frame, read_frame, recv_frame, send_frame,
)


def test_ping_golden_bytes():
    assert encode_frame(ping_frame()) == bytes.fromhex("50 45 45 43 01 05 00 00 00 00")


def test_features_frame_hand_assembled():
    raw = encode_frame(features_frame("u1", [1.0, -2.0]))
    payload = b"\x02\x00u1" + b"\x02\x00\x00\x00" + struct.pack("<ff", 1.0, -2.0)
    assert raw == b"PEEC\x01\x01" + len(payload).to_bytes(4, "little") + payload


def test_prediction_frame_hand_assembled():
    raw = encode_frame(prediction_frame("a", 1, 0.5))
    assert raw == b"PEEC\x01\x03\x08\x00\x00\x00" + b"\x01\x00a" + b"\x01" + struct.pack("<f", 0.5)


@pytest.mark.parametrize("frame", [
    features_frame("utt-1", np.arange(5)),
    latent_frame("", np.zeros(0)),
    prediction_frame("x", 0, -1.25),
    error_frame("bad dim", "x"),
    error_frame("no id"),
    ping_frame(),
    pong_frame(),
])
def test_round_trip_each_type(frame):
    raw = encode_frame(frame)
    back, used = decode_frame(raw)
    assert back == frame and used == len(raw)
    assert encode_frame(back) == raw


@pytest.mark.parametrize("n", [0, 1, 1000, (1 << 20) // 4 - 4])
def test_large_vector_round_trip(n):
    v = np.linspace(-1, 1, n, dtype=np.float32)
    raw = encode_frame(latent_frame("big", v))
    assert len(raw) - HEADER_SIZE <= 1 << 20
    p = parse_vector(decode_frame(raw)[0])
    assert p.utt_id == "big" and np.array_equal(p.values, v)


def test_raw_payload_of_exactly_one_mebibyte():
    frame = Frame(MsgType.ERROR, b"\x00\x00" + b"x" * ((1 << 20) - 2))
    raw = encode_frame(frame)
    assert decode_frame(raw) == (frame, len(raw))
    assert struct.unpack_from("<I", raw, 6)[0] == 1 << 20


@settings(max_examples=60)
@given(st.sampled_from(list(MsgType)), st.binary(max_size=300))
def test_round_trip_arbitrary_payload(mt, payload):
    frame = Frame(mt, payload)
    assert decode_frame(encode_frame(frame)) == (frame, HEADER_SIZE + len(payload))


@settings(max_examples=60)
@given(st.text(max_size=20), st.lists(st.floats(width=32, allow_nan=False), max_size=40))
def test_vector_payload_round_trip(utt_id, values):
    p = parse_vector(features_frame(utt_id, values))
    assert p.utt_id == utt_id and p.values.tolist() == values


def test_decode_consumes_exactly_one_frame():
    stream = encode_frame(ping_frame()) + encode_frame(error_frame("e", "i")) + encode_frame(pong_frame())
    frames = [f for f, _ in iter_frames(stream)]
    assert [f.msg_type for f in frames] == [MsgType.PING, MsgType.ERROR, MsgType.PONG]
    assert b"".join(raw for _, raw in iter_frames(stream)) == stream


def test_distinct_errors():
    good = encode_frame(error_frame("hello", "id"))
    with pytest.raises(BadMagic):
        decode_frame(b"XEEC" + good[4:])
    with pytest.raises(BadVersion):
        decode_frame(good[:4] + b"\x02" + good[5:])
    with pytest.raises(UnknownType):
        decode_frame(good[:5] + b"\x09" + good[6:])
    with pytest.raises(Truncated) as e:
        decode_frame(good[:-3])
    assert e.value.missing == 3 and "3 bytes missing" in str(e.value)
    kinds = {BadMagic, BadVersion, UnknownType, Truncated}
    assert len(kinds) == 4 and all(issubclass(k, WireError) for k in kinds)


def test_truncated_header():
    with pytest.raises(Truncated) as e:
        decode_header(b"PEEC\x01")
    assert e.value.missing == HEADER_SIZE - 5
    with pytest.raises(BadMagic):
        decode_header(b"GET ")


def test_payload_errors():
    with pytest.raises(PayloadError):
        parse_vector(Frame(MsgType.LATENT, b"\x00\x00\x05\x00\x00\x00" + b"\x00" * 8))
    with pytest.raises(PayloadError):
        parse_vector(ping_frame())
    with pytest.raises(PayloadError):
        parse_prediction(Frame(MsgType.PREDICTION, b"\x00\x00\x07" + b"\x00" * 4))
    with pytest.raises(PayloadError):
        parse_payload(Frame(MsgType.PING, b"x"))
    with pytest.raises(WireError):
        prediction_frame("a", 2, 0.0)


def test_socket_transport():
    a, b = socket.socketpair()
    with a, b:
        send_frame(a, features_frame("s", [3.0]))
        send_frame(a, ping_frame())
        assert parse_vector(recv_frame(b)).values.tolist() == [3.0]
        assert recv_frame(b) == ping_frame()
        a.sendall(encode_frame(pong_frame())[:7])
        a.shutdown(socket.SHUT_WR)
        with pytest.raises(Truncated):
            recv_frame(b)


def test_stream_cut_inside_payload_reports_missing():
    async def go():
        reader = asyncio.StreamReader()
        raw = encode_frame(error_frame("0123456789"))
        reader.feed_data(raw[:-4])
        reader.feed_eof()
        return await read_frame(reader)
    with pytest.raises(Truncated) as e:
        asyncio.run(go())
    assert e.value.missing == 4


def test_async_read_returns_raw_bytes_and_eof():
    async def go():
        reader = asyncio.StreamReader()
        raw = encode_frame(latent_frame("z", [1, 2]))
        reader.feed_data(raw)
        reader.feed_eof()
        first = await read_frame(reader)
        return raw, first, await read_frame(reader)
    raw, (frame, got), end = asyncio.run(go())
    assert got == raw and frame.msg_type == MsgType.LATENT and end is None


def test_parse_addr():
    assert parse_addr("127.0.0.1:9000") == ("127.0.0.1", 9000)
    assert parse_addr(":81") == ("127.0.0.1", 81)
    with pytest.raises(ValueError):
        parse_addr("localhost")
