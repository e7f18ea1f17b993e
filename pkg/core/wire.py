"""C&C envelope codec: the six-field JSON message and base64 reply payloads."""

from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Tuple

WIRE_KEYS: Tuple[str, ...] = ("userName", "userHost", "frm", "typ", "cmd", "args")


class WireError(ValueError):
    """Base class for everything the codec refuses."""


class ParseError(WireError):
    pass


class SchemaError(WireError):
    pass


class InvalidEnvelope(WireError):
    pass


class PayloadError(WireError):
    pass


class MessageType(str, Enum):
    MSG = "Msg"
    CMD = "Cmd"
    REP = "Rep"


@dataclass(frozen=True, slots=True)
class Envelope:
    user_name: str
    user_host: str
    frm: str
    typ: MessageType
    cmd: str
    args: str

    def validate(self) -> "Envelope":
        if not isinstance(self.typ, MessageType):
            raise InvalidEnvelope(f"Unknown message type {self.typ!r}")
        if self.typ is MessageType.CMD:
            if not self.cmd:
                raise InvalidEnvelope("Cmd envelope requires a command name")
        elif self.cmd:
            raise InvalidEnvelope(f"{self.typ.value} envelope must carry an empty cmd")
        if self.typ is MessageType.REP:
            try:
                decode_reply_payload(self.args)
            except PayloadError as exc:
                raise InvalidEnvelope(f"Rep envelope args must be base64: {exc}") from exc
        return self

    def to_wire(self) -> Dict[str, str]:
        return {
            "userName": self.user_name,
            "userHost": self.user_host,
            "frm": self.frm,
            "typ": self.typ.value,
            "cmd": self.cmd,
            "args": self.args,
        }


def encode_envelope(envelope: Envelope) -> str:
    """Render a validated envelope as one JSON line in canonical key order."""

    envelope.validate()
    return json.dumps(envelope.to_wire())


def decode_envelope(text: str) -> Envelope:
    try:
        data: Any = json.loads(text)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"Malformed envelope JSON: {exc}") from exc

    if not isinstance(data, dict):
        raise SchemaError("Envelope must be a JSON object")
    missing = [key for key in WIRE_KEYS if key not in data]
    extra = sorted(key for key in data if key not in WIRE_KEYS)
    if missing or extra:
        raise SchemaError(f"Envelope keys mismatch (missing={missing}, extra={extra})")
    wrong = [key for key in WIRE_KEYS if not isinstance(data[key], str)]
    if wrong:
        raise SchemaError("Envelope values must be strings: " + ", ".join(wrong))

    try:
        typ = MessageType(data["typ"])
    except ValueError as exc:
        raise InvalidEnvelope(f"Unknown message type {data['typ']!r}") from exc

    return Envelope(
        user_name=data["userName"],
        user_host=data["userHost"],
        frm=data["frm"],
        typ=typ,
        cmd=data["cmd"],
        args=data["args"],
    ).validate()


def encode_reply_payload(raw: bytes) -> str:
    return base64.b64encode(raw).decode("ascii")


def decode_reply_payload(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise PayloadError(f"Reply payload is not base64: {exc}") from exc


def reply_text(envelope: Envelope) -> str:
    """Decoded Rep payload as text; undecodable bytes are replaced."""

    return decode_reply_payload(envelope.args).decode("utf-8", errors="replace")


__all__ = [
    "WIRE_KEYS",
    "WireError",
    "ParseError",
    "SchemaError",
    "InvalidEnvelope",
    "PayloadError",
    "MessageType",
    "Envelope",
    "encode_envelope",
    "decode_envelope",
    "encode_reply_payload",
    "decode_reply_payload",
    "reply_text",
]
