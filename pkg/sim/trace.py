from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional

FIELD_ORDER = ("tick", "kind", "bot", "message_id", "ref", "typ", "cmd", "frm", "user", "text")


@dataclass(slots=True)
class EventTrace:
    """Totally ordered protocol events of one simulation run."""

    events: List[Dict[str, Any]] = field(default_factory=list)
    # single-target Cmd ids still on the channel when the run ended
    unclaimed: List[int] = field(default_factory=list)

    def record(self, event_type: str, payload: Dict[str, Any]) -> None:
        self.events.append({key: value for key in FIELD_ORDER if (value := payload.get(key)) is not None})

    def __iter__(self) -> Iterator[Dict[str, Any]]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def of_kind(self, kind: str) -> List[Dict[str, Any]]:
        return [event for event in self.events if event["kind"] == kind]

    def count(self, kind: str) -> int:
        return sum(1 for event in self.events if event["kind"] == kind)

    def first(self, kind: str, **fields: Any) -> Optional[Dict[str, Any]]:
        for event in self.events:
            if event["kind"] == kind and all(event.get(key) == value for key, value in fields.items()):
                return event
        return None

    def to_jsonl(self) -> str:
        lines = [json.dumps(event) for event in self.events]
        lines.append(json.dumps({"kind": "Unclaimed", "message_ids": self.unclaimed}))
        return "\n".join(lines) + "\n"
