"""The shared command-and-control channel: ordered store, per-bot cursors, claim-by-delete."""

from __future__ import annotations

import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import requests

from core.wire import Envelope, WireError, decode_envelope

logger = logging.getLogger(__name__)


class InvalidBody(ValueError):
    pass


class BrokerUnavailable(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class ChannelMessage:
    id: int
    author: str
    body: str
    posted_at: int
    envelope: Envelope

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "author": self.author, "body": self.body, "posted_at": self.posted_at}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChannelMessage":
        body = str(data["body"])
        return cls(
            id=int(data["id"]),
            author=str(data["author"]),
            body=body,
            posted_at=int(data["posted_at"]),
            envelope=decode_envelope(body),
        )


@dataclass(slots=True)
class ChannelConfig:
    has_memory: bool = True


@dataclass(slots=True)
class Cursor:
    owner: str
    next_id: int
    # first id this owner may ever see; bounds history scans on memoryless channels
    origin: int = 0


class Channel(ABC):
    config: ChannelConfig

    @abstractmethod
    def attach(self, bot: str, now: Optional[int] = None) -> Cursor:
        """Open a cursor; ``now=None`` means "the current end of the channel"."""

    @abstractmethod
    def post(self, author: str, body: str, now: int, envelope: Optional[Envelope] = None) -> int:
        """Append ``body``; ``envelope`` is its already validated decoding, when the caller has one."""

    @abstractmethod
    def read(self, cursor: Cursor, limit: int) -> List[ChannelMessage]:
        ...

    @abstractmethod
    def try_delete(self, bot: str, message_id: int) -> bool:
        ...

    @abstractmethod
    def history(self, from_id: int = 0) -> List[ChannelMessage]:
        """Every undeleted message with id >= from_id, without moving any cursor."""

    def has_unread(self, cursor: Cursor) -> bool:
        return bool(self.read(Cursor(cursor.owner, cursor.next_id, cursor.origin), 1))


class MemoryChannel(Channel):
    """In-process channel. Deleted messages leave a tombstone so ids never shift."""

    def __init__(self, config: Optional[ChannelConfig] = None) -> None:
        self.config = config or ChannelConfig()
        self._messages: List[Optional[ChannelMessage]] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._messages)

    def attach(self, bot: str, now: Optional[int] = None) -> Cursor:
        with self._lock:
            if self.config.has_memory:
                start = 0
            elif now is None:
                start = len(self._messages)
            else:
                start = next(
                    (
                        index
                        for index, message in enumerate(self._messages)
                        if message is not None and message.posted_at >= now
                    ),
                    len(self._messages),
                )
        return Cursor(owner=bot, next_id=start, origin=start)

    def post(self, author: str, body: str, now: int, envelope: Optional[Envelope] = None) -> int:
        if envelope is None:
            try:
                envelope = decode_envelope(body)
            except WireError as exc:
                raise InvalidBody(f"Rejected post from {author}: {exc}") from exc
        with self._lock:
            message_id = len(self._messages)
            self._messages.append(
                ChannelMessage(id=message_id, author=author, body=body, posted_at=now, envelope=envelope)
            )
        return message_id

    def read(self, cursor: Cursor, limit: int) -> List[ChannelMessage]:
        batch: List[ChannelMessage] = []
        with self._lock:
            position = cursor.next_id
            while position < len(self._messages) and len(batch) < limit:
                message = self._messages[position]
                if message is not None:
                    batch.append(message)
                position += 1
            # skip trailing tombstones too
            while position < len(self._messages) and self._messages[position] is None:
                position += 1
        cursor.next_id = max(cursor.next_id, position)
        return batch

    def try_delete(self, bot: str, message_id: int) -> bool:
        with self._lock:
            if 0 <= message_id < len(self._messages) and self._messages[message_id] is not None:
                self._messages[message_id] = None
                logger.debug("Message %s claimed by %s", message_id, bot)
                return True
        return False

    def history(self, from_id: int = 0) -> List[ChannelMessage]:
        with self._lock:
            return [message for message in self._messages[max(from_id, 0):] if message is not None]

    def has_unread(self, cursor: Cursor) -> bool:
        with self._lock:
            return any(message is not None for message in self._messages[cursor.next_id:])

    def is_deleted(self, message_id: int) -> bool:
        with self._lock:
            return 0 <= message_id < len(self._messages) and self._messages[message_id] is None


class RemoteChannel(Channel):
    """Client for a broker exposed by ``app.create_app`` on another ``fedbot run`` process."""

    def __init__(
        self,
        base_url: str,
        session: Optional[requests.Session] = None,
        timeout: float = 10.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()
        self.timeout = timeout
        self.config = ChannelConfig(has_memory=bool(self._call("get", "/channel").get("has_memory", True)))

    def _call(self, method: str, path: str, **kwargs: Any) -> Dict[str, Any]:
        try:
            response = self.session.request(method, f"{self.base_url}{path}", timeout=self.timeout, **kwargs)
        except requests.exceptions.RequestException as exc:
            raise BrokerUnavailable(f"Broker {self.base_url} unreachable: {exc}") from exc
        if response.status_code == 400:
            raise InvalidBody(response.json().get("detail", "invalid body"))
        if response.status_code >= 400:
            raise BrokerUnavailable(f"Broker answered {response.status_code} for {path}")
        return response.json()

    def attach(self, bot: str, now: Optional[int] = None) -> Cursor:
        data = self._call("post", "/channel/attach", json={"bot": bot})
        return Cursor(owner=bot, next_id=int(data["next_id"]), origin=int(data["origin"]))

    def post(self, author: str, body: str, now: int, envelope: Optional[Envelope] = None) -> int:
        data = self._call("post", "/channel/messages", json={"author": author, "body": body, "now": now})
        return int(data["id"])

    def read(self, cursor: Cursor, limit: int) -> List[ChannelMessage]:
        data = self._call("get", "/channel/messages", params={"next_id": cursor.next_id, "limit": limit})
        cursor.next_id = max(cursor.next_id, int(data["next_id"]))
        return [ChannelMessage.from_dict(item) for item in data["messages"]]

    def try_delete(self, bot: str, message_id: int) -> bool:
        data = self._call("delete", f"/channel/messages/{message_id}", params={"bot": bot})
        return bool(data["claimed"])

    def history(self, from_id: int = 0) -> List[ChannelMessage]:
        data = self._call("get", "/channel/history", params={"from_id": from_id})
        return [ChannelMessage.from_dict(item) for item in data["messages"]]


__all__ = [
    "InvalidBody",
    "BrokerUnavailable",
    "ChannelMessage",
    "ChannelConfig",
    "Cursor",
    "Channel",
    "MemoryChannel",
    "RemoteChannel",
]
