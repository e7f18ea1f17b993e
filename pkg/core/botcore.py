"""Per-bot protocol state machine.

A bot answers its users directly when it can, otherwise forwards the request to
the C&C channel and waits for a reply correlated by ``frm``. Foreign commands are
claimed by deleting them before execution, so each one runs at most once.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Set

from core.channel import Channel, ChannelMessage, Cursor
from core.commands import BROADCAST_PREFIX, CommandRegistry, CommandSpec
from core.config import BotConfig
from core.events import EventRouter
from core.logging import get_bot_logger
from core.wire import Envelope, MessageType, PayloadError, encode_envelope, encode_reply_payload, reply_text
from security.auth import AdminAllowlist
from security.validation import sanitize_user_line, split_user_handle

BATCH_LIMIT = 16
FORWARD_COMMAND = "fw"
LIST_COMMAND = "listB"

POST = "Post"
READ = "Read"
CLAIM_SUCCESS = "ClaimSuccess"
CLAIM_FAIL = "ClaimFail"
EXECUTE = "Execute"
DELIVER = "DeliverToUser"
TIMEOUT = "Timeout"
REGISTER = "Register"
WITHDRAW = "Withdraw"
REJECT = "Reject"

HELLO_PATTERN = re.compile(
    r"^Hello! IP: (?P<address>.*?)\. Commands \[(?P<commands>.*?)\]\. Name: (?P<name>.+?)\. Backend: (?P<backend>.*)$"
)


class MalformedHello(ValueError):
    pass


class BotInfo(NamedTuple):
    name: str
    backend_label: str
    address: str

    def describe(self) -> str:
        return f"{self.name} ({self.backend_label}) at {self.address}"


def hello_text(config: BotConfig, command_names: List[str]) -> str:
    return (
        f"Hello! IP: {config.address}. Commands [{', '.join(command_names)}]. "
        f"Name: {config.name}. Backend: {config.backend_label}"
    )


def parse_hello(text: str) -> BotInfo:
    match = HELLO_PATTERN.match(text)
    if match is None:
        raise MalformedHello(f"Unrecognised presence message: {text!r}")
    return BotInfo(match["name"], match["backend"], match["address"])


def make_frm(bot: str, user: str) -> str:
    return f"{bot}/{user}"


@dataclass(slots=True)
class PendingRequest:
    frm: str
    cmd: str
    args: str
    user: str
    issued_at: int
    # None waits forever
    deadline: Optional[int]
    message_id: int
    broadcast: bool = False

    def expired(self, now: int) -> bool:
        return self.deadline is not None and self.deadline <= now


@dataclass(frozen=True, slots=True)
class Delivery:
    user: str
    text: str


@dataclass(slots=True)
class BotState:
    config: BotConfig
    registry: CommandRegistry
    cursor: Optional[Cursor] = None
    pending: List[PendingRequest] = field(default_factory=list)
    executed_broadcasts: Set[int] = field(default_factory=set)
    front_outbox: List[Delivery] = field(default_factory=list)


class Bot:
    """One federated bot. Not thread-safe: a single driver calls its operations in turn."""

    def __init__(
        self,
        config: BotConfig,
        registry: CommandRegistry,
        channel: Channel,
        events: Optional[EventRouter] = None,
    ) -> None:
        self.state = BotState(config=config, registry=registry)
        self.channel = channel
        self.events = events or EventRouter()
        self.allowlist = AdminAllowlist(config.admins)
        self.logger = get_bot_logger(config.name)

    @property
    def name(self) -> str:
        return self.state.config.name

    @property
    def started(self) -> bool:
        return self.state.cursor is not None

    # ---- Lifecycle ----

    def start(self, now: int) -> None:
        """First start attaches and registers; later calls behave like :meth:`resume`."""

        if self.started:
            self.resume(now)
            return
        self.state.cursor = self.channel.attach(self.name, now)
        self.register(now)

    def resume(self, now: int) -> None:
        # a memoryless channel hides what was said while we were away
        if not self.channel.config.has_memory:
            previous = self.state.cursor
            cursor = self.channel.attach(self.name, now)
            if previous is not None:
                cursor.next_id = max(cursor.next_id, previous.next_id)
            self.state.cursor = cursor
            self.logger.info("Re-attached at message %s", self.state.cursor.next_id)

    def register(self, now: int) -> int:
        envelope = Envelope("", "", "", MessageType.MSG, "", hello_text(self.state.config, self.state.registry.names()))
        message_id = self._post(envelope, now)
        self._emit(REGISTER, now, message_id=message_id, text=envelope.args)
        self.logger.info("Registered as message %s", message_id)
        return message_id

    # ---- Decisions ----

    def can_execute(self, cmd: str, args: str) -> bool:
        return self.state.registry.accepts(cmd, args)

    def submit_user_text(self, user: str, text: str, now: int) -> None:
        """Handle one line typed by ``user`` at this bot."""

        try:
            self.allowlist.require(user, self.name)
        except PermissionError:
            self._emit(REJECT, now, user=user, text=text)
            raise
        line = sanitize_user_line(text)
        if not line:
            self._deliver(user, self.help_text(), now)
            return

        cmd, args = split_command(line)
        if cmd == LIST_COMMAND:
            bots = self.list_bots()
            lines = [info.describe() for info in bots] or ["No bots registered."]
            self._deliver(user, "\n".join(lines), now)
            return

        if cmd == FORWARD_COMMAND:
            cmd, args = split_command(args)
        if not cmd or cmd == BROADCAST_PREFIX:
            self._deliver(user, self.help_text(), now)
            return

        if cmd.startswith(BROADCAST_PREFIX):
            self._forward(user, cmd, args, now, broadcast=True)
        elif self.can_execute(cmd, args):
            spec = self.state.registry.get(cmd)
            assert spec is not None
            result = self._run(spec, args)
            self._emit(EXECUTE, now, cmd=cmd, user=user, text=result)
            self._deliver(user, result, now)
        else:
            # ``fw`` is optional: anything we cannot serve goes to the channel
            self._forward(user, cmd, args, now, broadcast=False)

    def help_text(self) -> str:
        names = ", ".join(self.state.registry.names()) or "none"
        return (
            f"{self.name} commands: {names}. "
            f"Use '{FORWARD_COMMAND} <cmd> [args]' to ask another bot, "
            f"'{BROADCAST_PREFIX}<cmd> [args]' to ask every bot, '{LIST_COMMAND}' to list bots."
        )

    # ---- Channel side ----

    def poll_once(self, now: int) -> None:
        self.process(self.fetch(now), now)

    def fetch(self, now: int) -> List[ChannelMessage]:
        if self.state.cursor is None:
            raise RuntimeError(f"Bot {self.name} polled before start()")
        batch = self.channel.read(self.state.cursor, BATCH_LIMIT)
        for message in batch:
            envelope = message.envelope
            self._emit(READ, now, message_id=message.id, typ=envelope.typ.value, cmd=envelope.cmd, frm=envelope.frm)
        return batch

    def process(self, batch: List[ChannelMessage], now: int) -> None:
        for message in batch:
            envelope = message.envelope
            if envelope.typ is MessageType.CMD:
                if envelope.cmd.startswith(BROADCAST_PREFIX):
                    self._answer_broadcast(message, now)
                else:
                    self._claim_and_answer(message, now)
            elif envelope.typ is MessageType.REP:
                self._collect_reply(message, now)
            # presence messages are never recorded

    def would_act_on(self, message: ChannelMessage) -> bool:
        """Whether :meth:`process` would claim, execute or deliver for ``message``."""

        envelope = message.envelope
        if envelope.typ is MessageType.CMD:
            if envelope.cmd.startswith(BROADCAST_PREFIX):
                name = envelope.cmd[len(BROADCAST_PREFIX):]
                return message.id not in self.state.executed_broadcasts and self.can_execute(name, envelope.args)
            return not self._forwarded_here(envelope) and self.can_execute(envelope.cmd, envelope.args)
        if envelope.typ is MessageType.REP:
            return any(request.frm == envelope.frm for request in self.state.pending)
        return False

    def has_work(self, unread: Optional[List[ChannelMessage]] = None) -> bool:
        """Whether anything past the cursor is actionable.

        ``unread`` may be a shared history slice starting at or before the cursor.
        """

        cursor = self.state.cursor
        if cursor is None:
            return False
        if unread is None:
            unread = self.channel.history(cursor.next_id)
        return any(self.would_act_on(message) for message in unread if message.id >= cursor.next_id)

    def expire_pending(self, now: int) -> None:
        still_waiting: List[PendingRequest] = []
        for request in self.state.pending:
            if not request.expired(now):
                still_waiting.append(request)
                continue
            if request.broadcast:
                withdrawn = self.channel.try_delete(self.name, request.message_id)
                self._emit(WITHDRAW, now, message_id=request.message_id, cmd=request.cmd, user=request.user)
                self.logger.debug("Collection window for %s closed (withdrawn=%s)", request.message_id, withdrawn)
            else:
                text = f"TIMEOUT: {request.cmd}"
                self.state.front_outbox.append(Delivery(request.user, text))
                self._emit(TIMEOUT, now, ref=request.message_id, cmd=request.cmd, user=request.user, text=text)
                self.logger.info("Request %s from %s timed out", request.message_id, request.user)
        self.state.pending = still_waiting

    def list_bots(self) -> List[BotInfo]:
        origin = self.state.cursor.origin if self.state.cursor is not None else 0
        latest: Dict[str, BotInfo] = {}
        for message in self.channel.history(origin):
            envelope = message.envelope
            if envelope.typ is not MessageType.MSG or not envelope.args.startswith("Hello!"):
                continue
            try:
                info = parse_hello(envelope.args)
            except MalformedHello as exc:
                self.logger.warning("Skipping message %s: %s", message.id, exc)
                continue
            latest.pop(info.name, None)
            latest[info.name] = info
        return list(latest.values())

    def drain_outbox(self) -> List[Delivery]:
        deliveries, self.state.front_outbox = self.state.front_outbox, []
        return deliveries

    # ---- Internals ----

    def _forward(self, user: str, cmd: str, args: str, now: int, *, broadcast: bool) -> None:
        frm = make_frm(self.name, user)
        # replies match on frm alone, so an open broadcast must not share it
        for request in self.state.pending:
            if request.frm != frm:
                continue
            if request.issued_at == now:
                self._deliver(user, f"ERROR: a request from {user} is already in flight this tick", now)
                return
            if request.broadcast or broadcast:
                self._deliver(user, f"ERROR: {user} still has {request.cmd} in flight", now)
                return
        user_name, user_host = split_user_handle(user)
        envelope = Envelope(user_name, user_host, frm, MessageType.CMD, cmd, args)
        message_id = self._post(envelope, now)
        timeout = self.state.config.reply_timeout
        self.state.pending.append(
            PendingRequest(
                frm=frm,
                cmd=cmd,
                args=args,
                user=user,
                issued_at=now,
                deadline=None if timeout is None else now + timeout,
                message_id=message_id,
                broadcast=broadcast,
            )
        )
        self.logger.info("Forwarded %r for %s as message %s", cmd, user, message_id)

    def _claim_and_answer(self, message: ChannelMessage, now: int) -> None:
        envelope = message.envelope
        if self._forwarded_here(envelope) or not self.can_execute(envelope.cmd, envelope.args):
            return
        if not self.channel.try_delete(self.name, message.id):
            self._emit(CLAIM_FAIL, now, message_id=message.id, cmd=envelope.cmd, frm=envelope.frm)
            return
        self._emit(CLAIM_SUCCESS, now, message_id=message.id, cmd=envelope.cmd, frm=envelope.frm)
        spec = self.state.registry.get(envelope.cmd)
        assert spec is not None
        self._execute_and_reply(spec, message, envelope.args, now)

    def _forwarded_here(self, envelope: Envelope) -> bool:
        # an originator never claims its own request, even after becoming capable
        return envelope.frm.startswith(f"{self.name}/")

    def _answer_broadcast(self, message: ChannelMessage, now: int) -> None:
        envelope = message.envelope
        name = envelope.cmd[len(BROADCAST_PREFIX):]
        if message.id in self.state.executed_broadcasts or not self.can_execute(name, envelope.args):
            return
        self.state.executed_broadcasts.add(message.id)
        spec = self.state.registry.get(name)
        assert spec is not None
        self._execute_and_reply(spec, message, envelope.args, now)

    def _execute_and_reply(self, spec: CommandSpec, message: ChannelMessage, args: str, now: int) -> None:
        envelope = message.envelope
        result = self._run(spec, args)
        self._emit(EXECUTE, now, message_id=message.id, cmd=envelope.cmd, frm=envelope.frm, text=result)
        config = self.state.config
        reply = Envelope(
            config.name, config.address, envelope.frm, MessageType.REP, "", encode_reply_payload(result.encode("utf-8"))
        )
        self._post(reply, now, ref=message.id)

    def _collect_reply(self, message: ChannelMessage, now: int) -> None:
        envelope = message.envelope
        request = next((request for request in self.state.pending if request.frm == envelope.frm), None)
        if request is None:
            return
        if not self.channel.try_delete(self.name, message.id):
            self._emit(CLAIM_FAIL, now, message_id=message.id, frm=envelope.frm)
            return
        self._emit(CLAIM_SUCCESS, now, message_id=message.id, frm=envelope.frm)
        try:
            text = reply_text(envelope)
        except PayloadError as exc:
            text = f"ERROR: {exc}"
        if not request.broadcast:
            self.state.pending.remove(request)
        self._deliver(request.user, text, now, message_id=message.id, ref=request.message_id)

    def _run(self, spec: CommandSpec, args: str) -> str:
        try:
            return str(spec.handler(args))
        except Exception as exc:  # handler failures are answers too
            self.logger.warning("Command %s failed: %s", spec.name, exc)
            return f"ERROR: {exc}"

    def _post(self, envelope: Envelope, now: int, ref: Optional[int] = None) -> int:
        message_id = self.channel.post(self.name, encode_envelope(envelope), now, envelope)
        self._emit(
            POST,
            now,
            message_id=message_id,
            ref=ref,
            typ=envelope.typ.value,
            cmd=envelope.cmd,
            frm=envelope.frm,
            text=None if envelope.typ is MessageType.REP else envelope.args,
        )
        return message_id

    def _deliver(self, user: str, text: str, now: int, **fields: Any) -> None:
        self.state.front_outbox.append(Delivery(user, text))
        self._emit(DELIVER, now, user=user, text=text, **fields)

    def _emit(self, kind: str, now: int, **fields: Any) -> None:
        payload: Dict[str, Any] = {"tick": now, "kind": kind, "bot": self.name, **fields}
        self.events.dispatch(kind, payload)


def split_command(line: str) -> tuple[str, str]:
    parts = line.strip().split(None, 1)
    if not parts:
        return "", ""
    return parts[0], parts[1].strip() if len(parts) > 1 else ""


__all__ = [
    "BATCH_LIMIT",
    "MalformedHello",
    "BotInfo",
    "PendingRequest",
    "Delivery",
    "BotState",
    "Bot",
    "hello_text",
    "parse_hello",
    "make_frm",
    "split_command",
]
