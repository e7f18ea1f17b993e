from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from dotenv import dotenv_values

from security.validation import parse_name_list, validate_bot_name, validate_location

CONFIG_KEYS = (
    "BOT_NAME",
    "BOT_BACKEND",
    "BOT_ADDRESS",
    "BOT_ADMINS",
    "REPLY_TIMEOUT",
    "SENSOR_LOCATION",
    "CO2_SEED",
    "DHT_SEED",
    "RELAY_PERSIST",
    "PLUGIN_PACKAGES",
    "ENABLED_PLUGINS",
    "BROKER_URL",
    "CHANNEL_MEMORY",
    "HOST",
    "PORT",
    "POLL_INTERVAL",
    "STATE_DIR",
    "DATABASE_URL",
    "LOG_LEVEL",
)


@dataclass(slots=True)
class BotConfig:
    """Identity and front-door policy of one federated bot."""

    name: str
    backend_label: str = "Local"
    address: str = "127.0.0.1"
    admins: List[str] = field(default_factory=list)
    # ticks; None waits forever
    reply_timeout: Optional[int] = None

    def __post_init__(self) -> None:
        self.name = validate_bot_name(self.name)
        if self.reply_timeout is not None and self.reply_timeout < 0:
            raise ValueError("reply_timeout must be >= 0")


@dataclass(slots=True)
class DeviceConfig:
    """Simulated hardware attached to a bot."""

    location: str = "room23"
    co2_seed: int = 0
    dht_seed: int = 0
    co2_pin: Optional[Dict[str, Any]] = None
    dht_pin: Optional[Dict[str, Any]] = None
    persist_relay: bool = False

    def __post_init__(self) -> None:
        self.location = validate_location(self.location)


def _optional_int(raw: Optional[str]) -> Optional[int]:
    if raw is None or not raw.strip() or raw.strip().lower() in {"none", "inf", "infinite"}:
        return None
    return int(raw)


def _flag(raw: Optional[str], default: bool) -> bool:
    if raw is None or not raw.strip():
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


@dataclass(slots=True)
class AppConfig:
    """Runtime configuration for a live bot (``fedbot run``)."""

    bot: BotConfig
    devices: DeviceConfig = field(default_factory=DeviceConfig)
    log_level: str = "INFO"
    plugin_packages: List[str] = field(default_factory=lambda: ["plugins"])
    enabled_plugins: List[str] = field(default_factory=list)
    broker_url: Optional[str] = None
    channel_memory: bool = True
    host: str = "127.0.0.1"
    port: int = 4321
    poll_interval: float = 1.0
    state_dir: Path = Path(".")
    database_url: Optional[str] = None

    @classmethod
    def from_env(cls) -> "AppConfig":
        return cls.from_mapping(os.environ)

    @classmethod
    def from_file(cls, path: str | Path) -> "AppConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file {path} does not exist")
        values = {key: value for key, value in dotenv_values(path).items() if value is not None}
        # the process environment wins over the file
        values.update({key: os.environ[key] for key in CONFIG_KEYS if key in os.environ})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "AppConfig":
        name = values.get("BOT_NAME")
        if not name:
            raise RuntimeError("Missing required configuration: BOT_NAME")

        bot = BotConfig(
            name=name,
            backend_label=values.get("BOT_BACKEND", "Local") or "Local",
            address=values.get("BOT_ADDRESS", "127.0.0.1") or "127.0.0.1",
            admins=parse_name_list(values.get("BOT_ADMINS", "")),
            reply_timeout=_optional_int(values.get("REPLY_TIMEOUT")),
        )
        devices = DeviceConfig(
            location=values.get("SENSOR_LOCATION", "room23") or "room23",
            co2_seed=int(values.get("CO2_SEED", "0") or 0),
            dht_seed=int(values.get("DHT_SEED", "0") or 0),
            persist_relay=_flag(values.get("RELAY_PERSIST"), True),
        )

        plugin_packages = parse_name_list(values.get("PLUGIN_PACKAGES", "plugins")) or ["plugins"]
        enabled_plugins = parse_name_list(values.get("ENABLED_PLUGINS", ""))

        broker_url = (values.get("BROKER_URL") or "").strip() or None
        database_url = (values.get("DATABASE_URL") or "").strip() or None

        return cls(
            bot=bot,
            devices=devices,
            log_level=values.get("LOG_LEVEL", "INFO") or "INFO",
            plugin_packages=plugin_packages,
            enabled_plugins=enabled_plugins,
            broker_url=broker_url,
            channel_memory=_flag(values.get("CHANNEL_MEMORY"), True),
            host=values.get("HOST", "127.0.0.1") or "127.0.0.1",
            port=int(values.get("PORT", "4321") or 4321),
            poll_interval=float(values.get("POLL_INTERVAL", "1.0") or 1.0),
            state_dir=Path(values.get("STATE_DIR", ".") or "."),
            database_url=database_url,
        )
