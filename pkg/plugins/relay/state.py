from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from core.storage import Storage

NAMESPACE = "relay"
STATE_KEY = "on"


class BadArgument(ValueError):
    pass


@dataclass(slots=True)
class RelayState:
    on: bool = False
    persisted: bool = False
    storage: Optional[Storage] = None

    @classmethod
    def load(cls, storage: Optional[Storage], persisted: bool) -> "RelayState":
        state = cls(persisted=persisted and storage is not None, storage=storage)
        if state.persisted:
            assert storage is not None
            state.on = bool(storage.get(NAMESPACE, STATE_KEY))
        return state

    def save(self) -> None:
        if self.persisted and self.storage is not None:
            self.storage.set(NAMESPACE, STATE_KEY, self.on)

    def label(self) -> str:
        return "on" if self.on else "off"


def relay_switch(args: str, state: RelayState) -> str:
    action = args.strip()
    if action == "status":
        return f"relay is {state.label()}"
    if action not in ("on", "off"):
        raise BadArgument(f"Relay understands on, off or status, not {action!r}")
    state.on = action == "on"
    state.save()
    return f"relay is now {state.label()}"
