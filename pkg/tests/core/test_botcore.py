import json

import pytest

from core.botcore import Bot, MalformedHello, hello_text, parse_hello
from core.channel import ChannelConfig, MemoryChannel
from core.commands import CommandRegistry, CommandSpec
from core.config import BotConfig, DeviceConfig
from core.events import ANY_EVENT, EventRouter
from core.plugins import build_registry
from core.wire import Envelope, MessageType, decode_reply_payload, encode_envelope, encode_reply_payload
from security.auth import Unauthorized

USER = "someUserName@someUserHost"
PINNED_CO2 = {"co2": 1099, "temperature": 26, "UhUl": 4608}
PINNED_DHT = {"temperature": 21.0, "humidity": 57.1}


def make_bot(channel, name, commands, location="room23", **config):
    bot_config = BotConfig(name=name, **config)
    devices = DeviceConfig(location=location, co2_pin=PINNED_CO2, dht_pin=PINNED_DHT)
    registry = build_registry(bot_config, devices, commands=commands).registry
    events = EventRouter()
    log = []
    events.subscribe(ANY_EVENT, lambda kind, payload: log.append(payload))
    bot = Bot(bot_config, registry, channel, events)
    bot.log = log
    bot.start(0)
    return bot


def kinds(bot):
    return [event["kind"] for event in bot.log]


@pytest.fixture
def channel():
    return MemoryChannel()


def test_register_posts_hello(channel):
    bot = make_bot(channel, "estudio", ["hello", "temp"], backend_label="Discord", address="192.168.1.82")
    message = channel.history()[0]
    assert message.envelope.typ is MessageType.MSG
    assert message.envelope.args == "Hello! IP: 192.168.1.82. Commands [hello, temp]. Name: estudio. Backend: Discord"
    assert kinds(bot)[:2] == ["Post", "Register"]


def test_hello_with_empty_registry():
    config = BotConfig(name="empty")
    assert "Commands []." in hello_text(config, [])
    assert parse_hello(hello_text(config, [])).name == "empty"


def test_restart_appends_second_hello(channel):
    make_bot(channel, "estudio", ["hello"])
    make_bot(channel, "estudio", ["hello"])
    assert len([m for m in channel.history() if m.envelope.typ is MessageType.MSG]) == 2


def test_can_execute_checks_name_and_arguments(channel):
    bot = make_bot(channel, "salon", ["co2"])
    assert bot.can_execute("co2", "room23")
    assert bot.can_execute("co2", "")
    assert not bot.can_execute("co2", "room99")
    assert not bot.can_execute("nosuch", "")


def test_local_command_answers_directly(channel):
    bot = make_bot(channel, "estudio", ["temp"], location="estudio")
    bot.submit_user_text(USER, "temp", 1)
    assert bot.state.front_outbox[-1].text == "Temp: 69.8 F / 21.0 C    Humidity: 57.1"
    assert len(channel) == 1
    assert "Execute" in kinds(bot)


@pytest.mark.parametrize("line", ["fw co2 room23", "co2 room23"])
def test_unservable_command_is_forwarded(channel, line):
    bot = make_bot(channel, "estudio", ["hello"])
    bot.submit_user_text(USER, line, 1)
    body = json.loads(channel.history()[-1].body)
    assert body == {
        "userName": "someUserName",
        "userHost": "someUserHost",
        "frm": f"estudio/{USER}",
        "typ": "Cmd",
        "cmd": "co2",
        "args": "room23",
    }
    assert len(bot.state.pending) == 1
    assert bot.state.pending[0].deadline is None


def test_explicit_forward_runs_locally_when_capable(channel):
    bot = make_bot(channel, "estudio", ["hello"])
    bot.submit_user_text(USER, "fw hello", 0)
    assert bot.state.front_outbox[-1].text == "Hello, world!"
    assert bot.state.pending == []
    assert len(channel) == 1


def test_originator_never_claims_its_own_request(channel):
    bot = make_bot(channel, "estudio", ["hello"])
    cmd = Envelope("someUserName", "someUserHost", f"estudio/{USER}", MessageType.CMD, "hello", "")
    channel.post("estudio", encode_envelope(cmd), 0)
    cmd_id = channel.history()[-1].id
    assert not bot.has_work()
    bot.poll_once(1)
    assert not channel.is_deleted(cmd_id)
    assert "Execute" not in kinds(bot)


def test_blank_line_returns_help(channel):
    bot = make_bot(channel, "estudio", ["hello"])
    bot.submit_user_text(USER, "   ", 0)
    assert "hello" in bot.state.front_outbox[-1].text
    assert "listB" in bot.state.front_outbox[-1].text


def test_admin_allowlist_enforced(channel):
    bot = make_bot(channel, "estudio", ["hello"], admins=["ana"])
    with pytest.raises(Unauthorized):
        bot.submit_user_text("mallory@evil", "hello", 0)
    assert kinds(bot)[-1] == "Reject"
    bot.submit_user_text("ana@home", "hello", 0)
    assert bot.state.front_outbox[-1].text == "Hello, world!"


def test_forward_claim_execute_and_reply_round_trip(channel):
    front = make_bot(channel, "estudio", ["hello"])
    owner = make_bot(channel, "salon", ["co2"], address="192.168.1.83")
    front.submit_user_text(USER, "fw co2 room23", 1)
    cmd_id = channel.history()[-1].id

    owner.poll_once(1)
    assert channel.is_deleted(cmd_id)
    reply = channel.history()[-1]
    assert reply.envelope.typ is MessageType.REP
    assert reply.envelope.cmd == ""
    assert reply.envelope.frm == f"estudio/{USER}"
    assert reply.envelope.user_name == "salon"
    assert decode_reply_payload(reply.envelope.args)

    front.poll_once(2)
    assert front.state.front_outbox[-1].text == "{'co2': 1099, 'temperature': 26, 'TT': 66, 'SS': 0, 'UhUl': 4608}"
    assert front.state.pending == []
    assert channel.is_deleted(reply.id)


def test_own_unservable_command_is_not_reforwarded(channel):
    front = make_bot(channel, "estudio", ["hello"])
    front.submit_user_text(USER, "co2 room23", 1)
    size = len(channel)
    pending = list(front.state.pending)
    front.poll_once(2)
    assert len(channel) == size
    assert front.state.pending == pending


def test_presence_messages_leave_state_unchanged(channel):
    make_bot(channel, "other", ["hello"])
    bot = make_bot(channel, "estudio", ["hello"])
    before = (list(bot.state.pending), set(bot.state.executed_broadcasts), list(bot.state.front_outbox))
    bot.poll_once(1)
    assert (bot.state.pending, bot.state.executed_broadcasts, bot.state.front_outbox) == (
        before[0],
        before[1],
        before[2],
    )


def test_claim_race_with_stale_batch(channel):
    first = make_bot(channel, "left", ["co2"])
    second = make_bot(channel, "right", ["co2"])
    cmd = Envelope("ana", "home", "ana@home", MessageType.CMD, "co2", "room23")
    channel.post("ana@home", encode_envelope(cmd), 1)
    first_batch = first.fetch(1)
    second_batch = second.fetch(1)
    first.process(first_batch, 1)
    second.process(second_batch, 1)
    assert kinds(first).count("ClaimSuccess") == 1
    assert kinds(second).count("ClaimFail") == 1
    assert kinds(first).count("Execute") + kinds(second).count("Execute") == 1


def test_handler_failure_becomes_error_reply(channel):
    def broken(args: str) -> str:
        raise RuntimeError("sensor unplugged")

    registry = CommandRegistry([CommandSpec("co2", broken)])
    owner = Bot(BotConfig(name="salon"), registry, channel)
    owner.start(0)
    front = make_bot(channel, "estudio", ["hello"])
    front.submit_user_text(USER, "co2", 1)
    owner.poll_once(1)
    front.poll_once(1)
    assert front.state.front_outbox[-1].text == "ERROR: sensor unplugged"


def test_foreign_reply_is_left_alone(channel):
    bot = make_bot(channel, "estudio", ["hello"])
    reply = Envelope("x", "y", f"other/{USER}", MessageType.REP, "", encode_reply_payload(b"hi"))
    message_id = channel.post("x", encode_envelope(reply), 1)
    bot.poll_once(1)
    assert not channel.is_deleted(message_id)


def test_oldest_pending_entry_matches_first(channel):
    front = make_bot(channel, "estudio", ["hello"], reply_timeout=None)
    front.submit_user_text(USER, "co2 room23", 1)
    front.submit_user_text(USER, "co2 room23", 2)
    first_id = front.state.pending[0].message_id
    reply = Envelope("salon", "h", f"estudio/{USER}", MessageType.REP, "", encode_reply_payload(b"ok"))
    channel.post("salon", encode_envelope(reply), 3)
    front.poll_once(3)
    assert [request.issued_at for request in front.state.pending] == [2]
    assert front.log[-1]["ref"] == first_id


def test_same_tick_duplicate_request_is_refused(channel):
    front = make_bot(channel, "estudio", ["hello"])
    front.submit_user_text(USER, "co2 room23", 1)
    front.submit_user_text(USER, "temp", 1)
    assert len(front.state.pending) == 1
    assert front.state.front_outbox[-1].text.startswith("ERROR:")


@pytest.mark.parametrize("first, second", [("all:temp", "co2 room23"), ("co2 room23", "all:temp"), ("all:temp", "all:co2")])
def test_open_broadcast_blocks_other_requests_from_same_user(channel, first, second):
    front = make_bot(channel, "portal", ["hello"], reply_timeout=6)
    front.submit_user_text(USER, first, 1)
    size = len(channel)
    front.submit_user_text(USER, second, 2)
    assert len(channel) == size
    assert len(front.state.pending) == 1
    assert front.state.front_outbox[-1].text == f"ERROR: {USER} still has {first.split()[0]} in flight"

    front.submit_user_text("ana@home", second, 2)
    assert len(front.state.pending) == 2


def test_reply_to_forward_after_broadcast_window_is_not_a_timeout(channel):
    front = make_bot(channel, "portal", ["hello"], reply_timeout=6)
    node = make_bot(channel, "node", ["temp", "co2"], location="room23")
    front.submit_user_text(USER, "all:temp", 1)
    node.poll_once(1)
    front.poll_once(1)
    front.expire_pending(7)
    front.submit_user_text(USER, "co2 room23", 8)
    node.poll_once(8)
    front.poll_once(9)
    front.expire_pending(14)
    texts = [delivery.text for delivery in front.state.front_outbox]
    assert texts[-1] == "{'co2': 1099, 'temperature': 26, 'TT': 66, 'SS': 0, 'UhUl': 4608}"
    assert not any(text.startswith("TIMEOUT") for text in texts)
    assert front.state.pending == []


def test_broadcast_answered_once_per_bot_and_not_deleted(channel):
    front = make_bot(channel, "portal", ["hello"], reply_timeout=5)
    kitchen = make_bot(channel, "kitchen", ["temp"], location="kitchen")
    garage = make_bot(channel, "garage", ["temp"], location="garage")
    front.submit_user_text(USER, "all:temp", 1)
    cmd_id = front.state.pending[0].message_id
    for bot in (kitchen, garage, front):
        bot.poll_once(1)
    assert not channel.is_deleted(cmd_id)
    assert cmd_id in kitchen.state.executed_broadcasts
    assert [d.text for d in front.state.front_outbox].count("Temp: 69.8 F / 21.0 C    Humidity: 57.1") == 2
    assert len(front.state.pending) == 1

    front.expire_pending(6)
    assert channel.is_deleted(cmd_id)
    assert front.state.pending == []
    assert kinds(front)[-1] == "Withdraw"
    assert not any(d.text.startswith("TIMEOUT") for d in front.state.front_outbox)


def test_timeout_fires_at_deadline(channel):
    front = make_bot(channel, "solo", ["hello"], reply_timeout=10)
    front.submit_user_text(USER, "co2 room23", 0)
    front.expire_pending(9)
    assert front.state.pending
    front.expire_pending(10)
    assert front.state.pending == []
    assert front.state.front_outbox[-1].text == "TIMEOUT: co2"
    assert kinds(front)[-1] == "Timeout"


def test_infinite_timeout_never_expires(channel):
    front = make_bot(channel, "solo", ["hello"])
    front.submit_user_text(USER, "co2 room23", 0)
    front.expire_pending(10**9)
    assert len(front.state.pending) == 1


def test_list_bots_dedupes_by_latest_hello(channel):
    make_bot(channel, "estudio", ["hello"], address="10.0.0.1")
    make_bot(channel, "salon", ["co2"], address="10.0.0.2")
    viewer = make_bot(channel, "estudio", ["hello"], address="10.0.0.9")
    bots = viewer.list_bots()
    assert [(info.name, info.address) for info in bots] == [("salon", "10.0.0.2"), ("estudio", "10.0.0.9")]
    viewer.submit_user_text(USER, "listB", 1)
    assert "salon (Local) at 10.0.0.2" in viewer.state.front_outbox[-1].text


def test_list_bots_skips_malformed_hello(channel, caplog):
    bot = make_bot(channel, "estudio", ["hello"])
    channel.post("x", encode_envelope(Envelope("", "", "", MessageType.MSG, "", "Hello! garbage")), 1)
    assert [info.name for info in bot.list_bots()] == ["estudio"]
    assert "Skipping message" in caplog.text
    with pytest.raises(MalformedHello):
        parse_hello("Hello! garbage")


def test_list_bots_on_memoryless_channel_only_sees_after_attach():
    channel = MemoryChannel(ChannelConfig(has_memory=False))
    make_bot(channel, "early", ["hello"])
    late_config = BotConfig(name="late")
    late = Bot(late_config, CommandRegistry(), channel)
    late.state.cursor = channel.attach("late", now=5)
    assert late.list_bots() == []
    viewer = make_bot(channel, "viewer", ["hello"])
    assert [info.name for info in viewer.list_bots()] == ["early", "viewer"]
