import base64
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.wire import (
    WIRE_KEYS,
    Envelope,
    InvalidEnvelope,
    MessageType,
    ParseError,
    PayloadError,
    SchemaError,
    decode_envelope,
    decode_reply_payload,
    encode_envelope,
    encode_reply_payload,
    reply_text,
)

FORWARDED_CO2 = (
    '{"userName": "someUserName", "userHost": "someUserHost", "frm": "someUserIdentifier", '
    '"typ": "Cmd", "cmd": "co2", "args": "room23"}'
)


@st.composite
def envelopes(draw):
    typ = draw(st.sampled_from(list(MessageType)))
    text = st.text(max_size=40)
    if typ is MessageType.CMD:
        cmd = draw(st.text(min_size=1, max_size=12))
    else:
        cmd = ""
    if typ is MessageType.REP:
        args = encode_reply_payload(draw(st.binary(max_size=64)))
    else:
        args = draw(text)
    return Envelope(draw(text), draw(text), draw(text), typ, cmd, args)


def test_encode_matches_printed_command_block():
    envelope = Envelope("someUserName", "someUserHost", "someUserIdentifier", MessageType.CMD, "co2", "room23")
    assert encode_envelope(envelope) == FORWARDED_CO2


def test_encode_registration_message_keeps_empty_fields():
    envelope = Envelope("", "", "", MessageType.MSG, "", "Hello! IP: 192.168.1.82")
    data = json.loads(encode_envelope(envelope))
    assert list(data) == list(WIRE_KEYS)
    assert data["frm"] == "" and data["cmd"] == "" and data["typ"] == "Msg"


def test_encode_is_single_line_and_stable():
    envelope = Envelope("a", "b", "c", MessageType.MSG, "", "line\nbreak")
    first = encode_envelope(envelope)
    assert "\n" not in first
    assert first == encode_envelope(Envelope("a", "b", "c", MessageType.MSG, "", "line\nbreak"))


def test_encode_rejects_inconsistent_envelopes():
    with pytest.raises(InvalidEnvelope):
        encode_envelope(Envelope("", "", "", MessageType.CMD, "", "room23"))
    with pytest.raises(InvalidEnvelope):
        encode_envelope(Envelope("", "", "", MessageType.REP, "co2", ""))
    with pytest.raises(InvalidEnvelope, match="base64"):
        encode_envelope(Envelope("", "", "", MessageType.REP, "", "!!!"))
    with pytest.raises(InvalidEnvelope):
        decode_envelope(json.dumps({**json.loads(FORWARDED_CO2), "typ": "Rep", "cmd": "", "args": "!!!"}))


def test_decode_printed_command_block():
    envelope = decode_envelope(FORWARDED_CO2)
    assert envelope == Envelope("someUserName", "someUserHost", "someUserIdentifier", MessageType.CMD, "co2", "room23")


def test_decode_reports_each_failure_class():
    with pytest.raises(ParseError):
        decode_envelope("{not json")
    with pytest.raises(SchemaError):
        decode_envelope('{"typ": "Cmd"}')
    with pytest.raises(SchemaError):
        decode_envelope(FORWARDED_CO2[:-1] + ', "extra": ""}')
    with pytest.raises(SchemaError):
        decode_envelope(FORWARDED_CO2.replace('"room23"', "23"))
    with pytest.raises(SchemaError):
        decode_envelope("[1, 2]")
    with pytest.raises(InvalidEnvelope):
        decode_envelope(FORWARDED_CO2.replace('"Cmd"', '"cmd"'))
    with pytest.raises(InvalidEnvelope):
        decode_envelope(FORWARDED_CO2.replace('"co2"', '""'))


@settings(max_examples=1000)
@given(envelopes())
def test_envelope_round_trip(envelope):
    assert decode_envelope(encode_envelope(envelope)) == envelope


@settings(max_examples=1000)
@given(st.binary(max_size=256))
def test_reply_payload_round_trip(raw):
    encoded = encode_reply_payload(raw)
    assert encoded == base64.b64encode(raw).decode("ascii")
    assert decode_reply_payload(encoded) == raw


def test_reply_payload_edges():
    assert encode_reply_payload(b"") == ""
    assert decode_reply_payload("") == b""
    encoded = encode_reply_payload('say "hi"\nñandú'.encode("utf-8"))
    assert set(encoded) <= set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/=")
    with pytest.raises(PayloadError):
        decode_reply_payload("!!!")


def test_reply_text_decodes_dict_rendering():
    text = "{'co2': 1099, 'temperature': 26, 'TT': 66, 'SS': 0, 'UhUl': 4608}"
    envelope = Envelope("salon", "192.168.1.83", "x", MessageType.REP, "", encode_reply_payload(text.encode()))
    assert reply_text(envelope) == text
