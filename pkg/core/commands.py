"""Command registry: the named, validated handlers a bot can execute."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional

Validator = Callable[[str], bool]
Handler = Callable[[str], str]

RESERVED_COMMANDS = frozenset({"fw", "listB"})
BROADCAST_PREFIX = "all:"


class DuplicateCommand(ValueError):
    pass


class InvalidCommandName(ValueError):
    pass


def accept_any(args: str) -> bool:
    return True


@dataclass(frozen=True, slots=True)
class CommandSpec:
    name: str
    handler: Handler
    validator: Validator = accept_any
    description: str = ""


class CommandRegistry:
    def __init__(self, specs: Iterable[CommandSpec] = ()) -> None:
        self._specs: Dict[str, CommandSpec] = {}
        for spec in specs:
            self.register_command(spec)

    def register_command(self, spec: CommandSpec) -> None:
        name = spec.name
        if not name or name != name.strip() or any(ch.isspace() for ch in name):
            raise InvalidCommandName(f"Command name {name!r} must be a single word")
        if name in RESERVED_COMMANDS or name.startswith(BROADCAST_PREFIX):
            raise InvalidCommandName(f"Command name {name!r} is reserved")
        if name in self._specs:
            raise DuplicateCommand(f"Command {name!r} already registered")
        self._specs[name] = spec

    def get(self, name: str) -> Optional[CommandSpec]:
        return self._specs.get(name)

    def accepts(self, name: str, args: str) -> bool:
        spec = self._specs.get(name)
        if spec is None:
            return False
        try:
            return bool(spec.validator(args))
        except Exception:
            return False

    def names(self) -> List[str]:
        return list(self._specs)

    def restrict(self, names: Iterable[str]) -> "CommandRegistry":
        """A registry holding only ``names``, in registration order."""

        wanted = set(names)
        unknown = wanted - set(self._specs)
        if unknown:
            raise KeyError("Unknown commands: " + ", ".join(sorted(unknown)))
        return CommandRegistry(spec for spec in self._specs.values() if spec.name in wanted)

    def __contains__(self, name: object) -> bool:
        return name in self._specs

    def __iter__(self) -> Iterator[CommandSpec]:
        return iter(self._specs.values())

    def __len__(self) -> int:
        return len(self._specs)


__all__ = [
    "RESERVED_COMMANDS",
    "BROADCAST_PREFIX",
    "DuplicateCommand",
    "InvalidCommandName",
    "CommandSpec",
    "CommandRegistry",
    "accept_any",
]
