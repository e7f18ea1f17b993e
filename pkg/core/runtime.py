"""Live bot process: one bot, a handoff queue of user lines, and a loop thread."""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import List, Optional, Tuple

from core.botcore import Bot
from core.channel import BrokerUnavailable, Channel, ChannelConfig, MemoryChannel, RemoteChannel
from core.config import AppConfig
from core.events import ANY_EVENT, EventRouter
from core.logging import log_protocol_event
from core.plugins import PluginContext, PluginManager
from core.storage import Storage, create_storage

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class OutboxEntry:
    index: int
    user: str
    text: str

    def to_dict(self) -> dict:
        return {"index": self.index, "user": self.user, "text": self.text}


class BotRuntime:
    """Drives a :class:`Bot` in real time; each loop iteration is one tick."""

    def __init__(
        self,
        config: AppConfig,
        channel: Optional[Channel] = None,
        storage: Optional[Storage] = None,
        manager: Optional[PluginManager] = None,
    ) -> None:
        self.config = config
        self.events = EventRouter()
        self.events.subscribe(ANY_EVENT, log_protocol_event)
        if channel is None:
            if config.broker_url:
                channel = RemoteChannel(config.broker_url)
            else:
                channel = MemoryChannel(ChannelConfig(has_memory=config.channel_memory))
        self.channel = channel
        self.storage = storage or create_storage(
            config.database_url, config.state_dir / f"{config.bot.name}.state"
        )
        if manager is None:
            manager = PluginManager()
            for package in config.plugin_packages:
                manager.discover(package, enabled=config.enabled_plugins)
        self.manager = manager
        self.tick = 0
        self.context: Optional[PluginContext] = None
        self.bot: Optional[Bot] = None
        self.inbox: "queue.Queue[Tuple[str, str]]" = queue.Queue()
        self._outbox: List[OutboxEntry] = []
        self._outbox_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    @property
    def hosts_broker(self) -> bool:
        return isinstance(self.channel, MemoryChannel)

    @property
    def name(self) -> str:
        return self.config.bot.name

    def start(self) -> Bot:
        if self.bot is not None:
            return self.bot
        self.storage.init()
        context = PluginContext(
            config=self.config.bot,
            devices=self.config.devices,
            storage=self.storage,
            event_router=self.events,
            clock=lambda: self.tick,
        )
        self.manager.register_all(context)
        self.manager.startup(context)
        self.context = context
        self.bot = Bot(self.config.bot, context.registry, self.channel, self.events)
        self.bot.start(self.tick)
        logger.info("Bot %s online with commands %s", self.name, ", ".join(context.registry.names()) or "none")
        return self.bot

    def say(self, user: str, text: str) -> None:
        self.inbox.put((user, text))

    def step(self) -> None:
        """One tick: hand queued lines to the bot, poll the channel, expire waits."""

        bot = self.start()
        now = self.tick
        while True:
            try:
                user, text = self.inbox.get_nowait()
            except queue.Empty:
                break
            try:
                bot.submit_user_text(user, text, now)
            except (PermissionError, ValueError, BrokerUnavailable) as exc:
                self._record(user, f"ERROR: {exc}")
        bot.poll_once(now)
        bot.expire_pending(now)
        for delivery in bot.drain_outbox():
            self._record(delivery.user, delivery.text)
        self.tick += 1

    def deliveries(self, user: Optional[str] = None, after: int = 0) -> List[OutboxEntry]:
        with self._outbox_lock:
            return [
                entry
                for entry in self._outbox[max(after, 0):]
                if user is None or entry.user == user
            ]

    def _record(self, user: str, text: str) -> None:
        with self._outbox_lock:
            self._outbox.append(OutboxEntry(len(self._outbox), user, text))

    # ---- Loop thread ----

    def start_loop(self) -> None:
        if self._thread is not None:
            return
        self.start()
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, name=f"bot-{self.name}", daemon=True)
        self._thread.start()

    def _loop(self) -> None:
        while not self._stop.wait(self.config.poll_interval):
            try:
                self.step()
            except BrokerUnavailable as exc:
                logger.warning("Tick %s skipped: %s", self.tick, exc)
            except Exception:  # pragma: no cover - keep the loop alive
                logger.exception("Tick %s failed", self.tick)

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=max(self.config.poll_interval * 2, 1.0))
            self._thread = None
        if self.context is not None:
            self.manager.shutdown(self.context)
        self.storage.close()
        logger.info("Bot %s stopped at tick %s", self.name, self.tick)
