"""
Policy discovery.

Every module under the packages listed in the POLICY_MODULES setting is
imported and each PolicyMixin subclass defined there is registered under
its ``name``.
"""

import inspect
import pkgutil
from importlib import import_module

from harq_mac.exceptions import ConfigurationError
from harq_mac.mixins import PolicyMixin
from harq_mac.settings import get_settings


def walk_modules(path):
    """Import ``path`` and, when it is a package, every module below it."""
    module = import_module(path)
    modules = [module]
    if hasattr(module, "__path__"):
        for info in pkgutil.walk_packages(module.__path__, prefix=f"{path}."):
            modules.append(import_module(info.name))
    return modules


def iter_policy_classes(module):
    for obj in vars(module).values():
        if (
            inspect.isclass(obj)
            and issubclass(obj, PolicyMixin)
            and obj is not PolicyMixin
            and obj.__module__ == module.__name__
        ):
            yield obj


def load_policies(settings=None):
    settings = settings or get_settings()
    policies = {}
    for path in settings.getlist("POLICY_MODULES", ["harq_mac.policies"]):
        for module in walk_modules(path):
            for cls in iter_policy_classes(module):
                if cls.name in policies and policies[cls.name] is not cls:
                    raise ConfigurationError(
                        f"Policy name {cls.name!r} is defined by both "
                        f"{policies[cls.name].__name__} and {cls.__name__}"
                    )
                policies[cls.name] = cls
    return policies


def get_policy_class(name, settings=None):
    policies = load_policies(settings)
    try:
        return policies[name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown policy {name!r}, expected one of {sorted(policies)}"
        ) from None


def create_policy(name, spec, levels=1, settings=None, config=None, seed=None):
    settings = settings or get_settings()
    cls = get_policy_class(name, settings)
    return cls(spec, levels=levels, settings=settings, config=config, seed=seed)
