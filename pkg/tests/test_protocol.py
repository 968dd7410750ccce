import io
import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roiedge.errors import ProtocolError
from roiedge.geometry import Rect
from roiedge.oracle import Detection
from roiedge.protocol import BoxMessage, ResultMessage, decode_message, encode_message, read_message

rects = st.builds(Rect, st.integers(0, 10**5), st.integers(0, 10**5), st.integers(1, 10**4), st.integers(1, 10**4))
unit = st.floats(0.0, 1.0, exclude_min=True)
boxes = st.builds(BoxMessage, st.integers(0, 2**31), st.integers(0, 5), rects, unit, st.integers(0, 2**40))
dets = st.builds(Detection, st.integers(0, 100), rects, unit, st.integers(-1, 10**6))
results = st.builds(ResultMessage, st.integers(0, 2**31), st.integers(0, 5), st.lists(dets, max_size=6).map(tuple))


def test_large_payload_box_round_trip():
    m = BoxMessage(3, 4, Rect(10, 20, 300, 200), 0.75, 100_000)
    raw = encode_message(m)
    assert decode_message(raw) == m
    assert struct.unpack("<I", raw[:4])[0] == len(raw) - 4
    assert json.loads(raw[4:])["type"] == "box"


@given(st.one_of(boxes, results))
def test_round_trip(m):
    assert decode_message(encode_message(m)) == m


def test_truncated_header():
    with pytest.raises(ProtocolError) as exc:
        decode_message(b"\x05\x00")
    assert exc.value.offset == 2


def test_every_truncation_and_trailing_byte():
    m = ResultMessage(7, 5, (Detection(1, Rect(1, 2, 3, 4), 0.9, 12),))
    raw = encode_message(m)
    for cut in range(len(raw)):
        with pytest.raises(ProtocolError):
            decode_message(raw[:cut])
    with pytest.raises(ProtocolError):
        decode_message(raw + b"\x00")


def framed(body: bytes) -> bytes:
    return struct.pack("<I", len(body)) + body


@pytest.mark.parametrize(
    "body",
    [
        b"\xff\xfe",
        b"{not json",
        b"[]",
        b'{"type":"nope"}',
        b'{"type":"box","frame":0,"part":3,"rect":[0,0,1,1],"rate":0.5}',
        b'{"type":"box","frame":0,"part":3,"rect":[0,0,1,1],"rate":1.5,"payload_bytes":1}',
        b'{"type":"box","frame":-1,"part":3,"rect":[0,0,1,1],"rate":0.5,"payload_bytes":1}',
        b'{"type":"box","frame":0,"part":3,"rect":[0,0,-1,1],"rate":0.5,"payload_bytes":1}',
        b'{"type":"box","frame":0.5,"part":3,"rect":[0,0,1,1],"rate":0.5,"payload_bytes":1}',
        b'{"type":"box","frame":0,"part":3,"rect":[0,0,1,1],"rate":NaN,"payload_bytes":1}',
        b'{"type":"result","frame":0,"part":3,"detections":[{"class":0}]}',
        b'{"type":"result","frame":0,"part":3,"detections":{}}',
    ],
)
def test_malformed_bodies(body):
    with pytest.raises(ProtocolError) as exc:
        decode_message(framed(body))
    assert exc.value.offset >= 4


def test_oversized_length_prefix():
    with pytest.raises(ProtocolError):
        decode_message(struct.pack("<I", 2**31) + b"{}")


def test_random_corruption_never_crashes(rng):
    raw = bytearray(encode_message(BoxMessage(1, 3, Rect(5, 6, 7, 8), 0.5, 1234)))
    for _ in range(2000):
        buf = bytearray(raw)
        for pos in rng.integers(0, len(buf), rng.integers(1, 4)):
            buf[pos] = int(rng.integers(0, 256))
        try:
            decode_message(bytes(buf))
        except ProtocolError:
            pass


def test_stream_reader():
    a = BoxMessage(0, 3, Rect(0, 0, 4, 4), 1.0, 48)
    b = ResultMessage(0, 3, ())
    stream = io.BytesIO(encode_message(a) + encode_message(b))
    assert read_message(stream) == a
    assert read_message(stream) == b
    assert read_message(stream) is None
    with pytest.raises(ProtocolError):
        read_message(io.BytesIO(encode_message(a)[:-2]))
    with pytest.raises(ProtocolError):
        read_message(io.BytesIO(b"\x01\x00"))
