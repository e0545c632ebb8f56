"""Package metadata shown by ``pytessindex version``."""

import importlib.metadata as importlib_metadata
import platform
from typing import Dict, List

PACKAGE_NAME = "pytessindex"
UNKNOWN_VERSION = "0.0.0"
RUNTIME_PACKAGES = ("numpy", "typer", "rich", "PyYAML")


def installed_version(package_name: str) -> str:
    """Version of an installed distribution, ``0.0.0`` when it is not installed."""
    try:
        return importlib_metadata.version(package_name)
    except importlib_metadata.PackageNotFoundError:
        return UNKNOWN_VERSION


def package_version(package_name: str = PACKAGE_NAME) -> str:
    return installed_version(package_name)


def package_summary(package_name: str = PACKAGE_NAME) -> List[Dict[str, str]]:
    """Field/value rows for the package, the interpreter and every runtime dependency.

    Args:
        package_name (str): The name of the package. Defaults to "pytessindex".
    """
    info = [
        {"field": "Version", "value": package_version(package_name)},
        {"field": "Package name", "value": package_name},
        {"field": "Python", "value": platform.python_version()},
    ]
    info.extend({"field": name, "value": installed_version(name)} for name in RUNTIME_PACKAGES)
    return info
