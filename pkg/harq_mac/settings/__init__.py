"""
Settings loading.

Settings are Python modules of UPPER_CASE names (see ``base.py``). The module
is resolved in this order:

    1. the ``module`` argument of ``get_settings``
    2. the ``HARQ_MAC_SETTINGS_MODULE`` environment variable
    3. ``[settings] default`` in the closest ``harq.cfg``
    4. ``harq_mac.settings.base``
"""

import os
from collections.abc import Mapping
from configparser import ConfigParser
from importlib import import_module
from pathlib import Path

from harq_mac.exceptions import ConfigurationError

DEFAULT_MODULE = "harq_mac.settings.base"
CONFIG_FILENAME = "harq.cfg"


def closest_config(path="."):
    """Return the closest harq.cfg walking up from ``path``, or None."""
    path = Path(path).resolve()
    for directory in (path, *path.parents):
        candidate = directory / CONFIG_FILENAME
        if candidate.is_file():
            return candidate
    return None


def read_config(path=None):
    parser = ConfigParser()
    path = path or closest_config()
    if path:
        parser.read(path)
    return parser


class Settings(Mapping):
    """Read-only view over a settings module with typed getters."""

    def __init__(self, values, module_name):
        self._values = dict(values)
        self.module_name = module_name

    @classmethod
    def from_module(cls, module_name):
        try:
            module = import_module(module_name)
        except ImportError as error:
            raise ConfigurationError(
                f"Cannot load settings module {module_name!r}: {error}"
            ) from error
        values = {key: getattr(module, key) for key in dir(module) if key.isupper()}
        return cls(values, module_name)

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def getint(self, key, default=0):
        return int(self.get(key, default))

    def getfloat(self, key, default=0.0):
        return float(self.get(key, default))

    def getlist(self, key, default=None):
        value = self.get(key, default or [])
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return list(value)

    def copy_with(self, **overrides):
        values = dict(self._values)
        values.update(overrides)
        return Settings(values, self.module_name)


def get_settings(module=None):
    if module is None:
        module = os.getenv("HARQ_MAC_SETTINGS_MODULE")
    if module is None:
        module = read_config().get("settings", "default", fallback=DEFAULT_MODULE)
    return Settings.from_module(module)
