"""Device <-> edge messages: 4-byte little-endian length prefix + JSON body."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

from .errors import ProtocolError
from .geometry import Rect
from .oracle import Detection

_LEN = struct.Struct("<I")
MAX_BODY = 16 * 1024 * 1024


@dataclass(frozen=True)
class BoxMessage:
    frame: int
    part: int
    rect: Rect
    rate: float
    payload_bytes: int


@dataclass(frozen=True)
class ResultMessage:
    frame: int
    part: int
    detections: tuple[Detection, ...] = ()


def _body(msg) -> dict:
    if isinstance(msg, BoxMessage):
        return {
            "type": "box",
            "frame": msg.frame,
            "part": msg.part,
            "rect": msg.rect.as_list(),
            "rate": msg.rate,
            "payload_bytes": msg.payload_bytes,
        }
    if isinstance(msg, ResultMessage):
        return {
            "type": "result",
            "frame": msg.frame,
            "part": msg.part,
            "detections": [
                {"class": d.class_id, "rect": d.rect.as_list(), "confidence": d.confidence, "object_id": d.object_id}
                for d in msg.detections
            ],
        }
    raise TypeError(f"cannot encode {type(msg).__name__}")


def encode_message(msg) -> bytes:
    body = json.dumps(_body(msg), separators=(",", ":"), sort_keys=True, allow_nan=False).encode("utf-8")
    return _LEN.pack(len(body)) + body


def _int(obj, key, off, lo=0):
    v = obj.get(key)
    if type(v) is not int or v < lo:
        raise ProtocolError(f"field {key!r} must be an integer >= {lo}", off)
    return v


def _unit(obj, key, off):
    """A number in (0, 1]."""
    v = obj.get(key)
    if type(v) not in (int, float) or not 0.0 < v <= 1.0:
        raise ProtocolError(f"field {key!r} must be a number in (0, 1]", off)
    return float(v)


def _rect(v, off) -> Rect:
    if not isinstance(v, list) or len(v) != 4 or any(type(x) is not int for x in v) or v[2] <= 0 or v[3] <= 0:
        raise ProtocolError("rect must be four integers with positive width and height", off)
    return Rect(*v)


def _parse(obj, off: int):
    if not isinstance(obj, dict):
        raise ProtocolError("message body must be an object", off)
    kind = obj.get("type")
    if kind == "box":
        expected = {"type", "frame", "part", "rect", "rate", "payload_bytes"}
        if set(obj) != expected:
            raise ProtocolError(f"box message keys {sorted(obj)} != {sorted(expected)}", off)
        return BoxMessage(
            _int(obj, "frame", off), _int(obj, "part", off), _rect(obj["rect"], off),
            _unit(obj, "rate", off), _int(obj, "payload_bytes", off),
        )
    if kind == "result":
        expected = {"type", "frame", "part", "detections"}
        if set(obj) != expected:
            raise ProtocolError(f"result message keys {sorted(obj)} != {sorted(expected)}", off)
        raw = obj["detections"]
        if not isinstance(raw, list):
            raise ProtocolError("detections must be a list", off)
        dets = []
        for d in raw:
            if not isinstance(d, dict) or set(d) != {"class", "rect", "confidence", "object_id"}:
                raise ProtocolError("malformed detection record", off)
            dets.append(Detection(_int(d, "class", off), _rect(d["rect"], off), _unit(d, "confidence", off), _int(d, "object_id", off, -1)))
        return ResultMessage(_int(obj, "frame", off), _int(obj, "part", off), tuple(dets))
    raise ProtocolError(f"unknown message type {kind!r}", off)


def decode_body(body: bytes, offset: int = _LEN.size):
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProtocolError("body is not UTF-8", offset + exc.start) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc.msg}", offset + exc.pos) from None
    return _parse(obj, offset)


def decode_message(buf: bytes):
    """Decode exactly one framed message; trailing or missing bytes are errors."""
    if len(buf) < _LEN.size:
        raise ProtocolError(f"length prefix truncated ({len(buf)} of {_LEN.size} bytes)", len(buf))
    (n,) = _LEN.unpack_from(buf, 0)
    if n > MAX_BODY:
        raise ProtocolError(f"declared body length {n} exceeds {MAX_BODY}", 0)
    have = len(buf) - _LEN.size
    if have < n:
        raise ProtocolError(f"body truncated ({have} of {n} bytes)", len(buf))
    if have > n:
        raise ProtocolError(f"{have - n} trailing bytes after message", _LEN.size + n)
    return decode_body(bytes(buf[_LEN.size :]))


def read_message(stream):
    """Read one message from a binary file-like stream; ``None`` on clean EOF."""
    head = stream.read(_LEN.size)
    if not head:
        return None
    if len(head) < _LEN.size:
        raise ProtocolError("connection closed inside length prefix", len(head))
    (n,) = _LEN.unpack(head)
    if n > MAX_BODY:
        raise ProtocolError(f"declared body length {n} exceeds {MAX_BODY}", 0)
    body = stream.read(n)
    if len(body) < n:
        raise ProtocolError(f"connection closed inside body ({len(body)} of {n} bytes)", _LEN.size + len(body))
    return decode_body(body)
