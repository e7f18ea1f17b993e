from __future__ import annotations

import threading
from collections import defaultdict
from typing import Any, Callable, Dict, List, Tuple

EventHandler = Callable[[str, Dict[str, Any]], None]

ANY_EVENT = "*"


class EventRouter:
    """Minimal synchronous pub/sub router for protocol events.

    Handlers subscribed to ``ANY_EVENT`` see every event type.
    """

    def __init__(self) -> None:
        self._subscribers: Dict[str, List[EventHandler]] = defaultdict(list)
        self._listeners: Dict[str, Tuple[EventHandler, ...]] = {}
        self._lock = threading.Lock()

    def subscribe(self, event_type: str, handler: EventHandler) -> None:
        with self._lock:
            self._subscribers[event_type].append(handler)
            self._listeners.clear()

    def dispatch(self, event_type: str, payload: Dict[str, Any]) -> None:
        listeners = self._listeners.get(event_type)
        if listeners is None:
            listeners = tuple(self._subscribers.get(event_type, ())) + tuple(self._subscribers.get(ANY_EVENT, ()))
            self._listeners[event_type] = listeners
        for handler in listeners:
            handler(event_type, payload)
