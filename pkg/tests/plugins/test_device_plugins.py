from core.config import BotConfig, DeviceConfig
from core.plugins import PluginManager, build_registry
from plugins.hello.plugin import hello_cmd


def test_hello_ignores_arguments():
    assert hello_cmd("") == "Hello, world!"
    assert hello_cmd("anything") == "Hello, world!"


def test_bundled_plugins_register_every_command():
    registry = build_registry(BotConfig(name="full"), DeviceConfig()).registry
    assert registry.names() == ["hello", "relay", "co2", "temp", "cam"]


def test_enabled_plugins_filter_discovery():
    manager = PluginManager()
    manager.discover("plugins", enabled=["hello"])
    registry = build_registry(BotConfig(name="small"), DeviceConfig(), manager=manager).registry
    assert registry.names() == ["hello"]


def test_webcam_names_location_and_tick():
    ticks = iter([3, 4])
    context = build_registry(
        BotConfig(name="cam"), DeviceConfig(location="garage"), commands=["cam"], clock=lambda: next(ticks)
    )
    cam = context.registry.get("cam")
    assert cam.handler("") == "image:garage:3"
    assert cam.handler("garage") == "image:garage:4"
    assert not context.registry.accepts("cam", "kitchen")
