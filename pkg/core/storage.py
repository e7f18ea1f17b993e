"""Storage backends: in-memory, flat state file, and SQLModel (SQLite/Postgres)."""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from sqlalchemy.engine import Engine
from sqlmodel import Field, Session, SQLModel, create_engine

logger = logging.getLogger(__name__)


class Storage:
    def init(self) -> None:
        return None

    def close(self) -> None:
        return None

    def get(self, namespace: str, key: str) -> Any:
        raise NotImplementedError

    def set(self, namespace: str, key: str, value: Any) -> None:
        raise NotImplementedError

    def delete(self, namespace: str, key: str) -> None:
        raise NotImplementedError


class InMemoryStorage(Storage):
    def __init__(self) -> None:
        self._data: Dict[Tuple[str, str], Any] = {}
        self._lock = threading.Lock()

    def get(self, namespace: str, key: str) -> Any:
        with self._lock:
            return self._data.get((namespace, key))

    def set(self, namespace: str, key: str, value: Any) -> None:
        with self._lock:
            self._data[(namespace, key)] = value

    def delete(self, namespace: str, key: str) -> None:
        with self._lock:
            self._data.pop((namespace, key), None)


class FileStorage(InMemoryStorage):
    """One flat ``namespace.key=<json>`` line per entry, rewritten on every change."""

    def __init__(self, path: str | Path) -> None:
        super().__init__()
        self.path = Path(path)

    def init(self) -> None:
        if not self.path.exists():
            return
        with self._lock:
            for number, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                dotted, sep, raw = line.partition("=")
                namespace, dot, key = dotted.strip().partition(".")
                if not sep or not dot:
                    logger.warning("Skipping malformed line %d in %s", number, self.path)
                    continue
                try:
                    self._data[(namespace, key)] = json.loads(raw)
                except json.JSONDecodeError:
                    logger.warning("Skipping undecodable value on line %d in %s", number, self.path)

    def set(self, namespace: str, key: str, value: Any) -> None:
        super().set(namespace, key, value)
        self.flush()

    def delete(self, namespace: str, key: str) -> None:
        super().delete(namespace, key)
        self.flush()

    def close(self) -> None:
        self.flush()

    def flush(self) -> None:
        with self._lock:
            lines = [f"{namespace}.{key}={json.dumps(value)}" for (namespace, key), value in sorted(self._data.items())]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        tmp.replace(self.path)


class KeyValue(SQLModel, table=True):
    namespace: str = Field(primary_key=True)
    key: str = Field(primary_key=True)
    value: str


class SQLModelStorage(Storage):
    def __init__(self, database_url: str) -> None:
        self.database_url = database_url
        self._engine: Optional[Engine] = None
        self._init_lock = threading.Lock()

    def init(self) -> None:
        with self._init_lock:
            if self._engine is not None:
                return
            if not self.database_url:
                raise RuntimeError("DATABASE_URL must be set for SQLModelStorage")
            try:
                self._engine = create_engine(self.database_url)
            except ModuleNotFoundError as exc:  # pragma: no cover
                raise RuntimeError(
                    "Missing database driver for URL '%s'. Install psycopg." % self.database_url
                ) from exc
            SQLModel.metadata.create_all(self._engine)

    def close(self) -> None:
        if self._engine is not None:
            self._engine.dispose()
            self._engine = None

    def _session(self) -> Session:
        if self._engine is None:
            raise RuntimeError("SQLModelStorage not initialised; call init() first")
        return Session(self._engine)

    def get(self, namespace: str, key: str) -> Any:
        with self._session() as session:
            record = session.get(KeyValue, (namespace, key))
            if record is None:
                return None
            return json.loads(record.value)

    def set(self, namespace: str, key: str, value: Any) -> None:
        with self._session() as session:
            payload = json.dumps(value)
            record = session.get(KeyValue, (namespace, key))
            if record is None:
                record = KeyValue(namespace=namespace, key=key, value=payload)
                session.add(record)
            else:
                record.value = payload
            session.commit()

    def delete(self, namespace: str, key: str) -> None:
        with self._session() as session:
            record = session.get(KeyValue, (namespace, key))
            if record is not None:
                session.delete(record)
                session.commit()


def create_storage(database_url: Optional[str], state_path: Path) -> Storage:
    """SQLModel when a database URL is configured, otherwise the flat state file."""

    if database_url:
        return SQLModelStorage(database_url)
    return FileStorage(state_path)
