import json
import os

import yaml
from rich import print_json

from pytessindex.constants import (
    DEFAULT_ARITY,
    DEFAULT_BENCH_THRESHOLD,
    DEFAULT_BITS,
    DEFAULT_DEPTH,
    DEFAULT_K,
    DEFAULT_KAPPA,
    DEFAULT_N_ITEMS,
    DEFAULT_N_USERS,
    DEFAULT_SEED,
    DEFAULT_TABLES,
    DEFAULT_THRESHOLD,
    METHODS,
    SCHEMES,
    TERNARY_BASE,
    YAML_FILE_CONFIG,
)
from pytessindex.exceptions import (
    YAMLConfigExists,
    YAMLGenericException,
    YAMLValidationError,
)
from pytessindex.logger import get_logger

# section -> key -> (type, minimum)
CONFIG_SCHEMA = {
    "encoding": {"scheme": (str, None), "base": (int, 1), "threshold": (float, 0.0)},
    "query": {"kappa": (int, 1)},
    "baselines": {"bits": (int, 1), "tables": (int, 1), "arity": (int, 2), "depth": (int, 0)},
    "bench": {
        "seed": (int, 0),
        "n_users": (int, 1),
        "n_items": (int, 1),
        "k": (int, 2),
        "threshold": (float, 0.0),
        "methods": (list, None),
        "threads": (int, 0),
    },
}


class YAMLHandler:

    def __init__(self, filename: str = YAML_FILE_CONFIG, logger=None):
        """Reads and validates a pytessindex configuration file.

        Args:
            filename (str, optional): The filename with YAML configuration to be used
            logger (logging, optional): The logger instance to be used. Defaults to get_logger.
        """

        if logger is None:
            logger = get_logger(__name__)
        self.logger = logger
        self.filename = filename
        self.data = {}

    def load_data(self):
        """
        Loads the YAML data from the specified file path.

        Raises:
            YAMLGenericException: If there's an error loading the YAML file.
        """
        try:
            with open(self.filename, "r", encoding="utf-8") as f:
                self.data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise YAMLGenericException(f"Error loading YAML file: {e}")
        if not isinstance(self.data, dict):
            raise YAMLGenericException(f"Top level of {self.filename} must be a mapping")
        self.logger.debug(f"Loaded configuration from {self.filename}")

    def verify_config(self):
        """
        Verifies that every section is present and every value has the expected type and range.

        Raises:
            YAMLValidationError: If there are any validation errors.
        """
        errors = []

        for section, keys in CONFIG_SCHEMA.items():
            if section not in self.data:
                errors.append(f"'{section}' section is missing")
                continue
            if not isinstance(self.data[section], dict):
                errors.append(f"'{section}' section is empty or not a mapping")
                continue
            try:
                self.verify_section(self.data[section], expected_keys=list(keys))
            except YAMLValidationError as ex:
                errors.append(f"'{section}': {ex}")
                continue

            for key, (kind, minimum) in keys.items():
                value = self.data[section][key]
                if kind is float and isinstance(value, int) and not isinstance(value, bool):
                    value = float(value)
                if not isinstance(value, kind) or isinstance(value, bool):
                    errors.append(f"'{section}.{key}' should be of type {kind.__name__}")
                elif minimum is not None and value < minimum:
                    errors.append(f"'{section}.{key}' should be at least {minimum}")

        encoding = self.data.get("encoding")
        if isinstance(encoding, dict) and encoding.get("scheme") not in SCHEMES + [None]:
            errors.append(f"'encoding.scheme' should be one of {SCHEMES}")
        bench = self.data.get("bench")
        if isinstance(bench, dict) and isinstance(bench.get("methods"), list):
            unknown = [method for method in bench["methods"] if method not in METHODS]
            if unknown:
                errors.append(f"'bench.methods' has unknown methods {unknown}, allowed: {METHODS}")

        if errors:
            raise YAMLValidationError("\n" + "\n".join(errors))

    def verify_section(self, section_data, expected_keys):
        """
        Verifies if a section has the expected keys and their values are not None.

        Args:
            section_data: The data of the section to verify.
            expected_keys: A list of expected keys in the section.

        Raises:
            YAMLValidationError: If there are any missing keys or None values.
        """
        missing_keys = [key for key in expected_keys if key not in section_data]
        if missing_keys:
            raise YAMLValidationError(f"Missing keys: {', '.join(missing_keys)}")

        for key, value in section_data.items():
            if value is None:
                raise YAMLValidationError(f"Value for '{key}' cannot be None")

    def setting(self, section: str, key: str, default=None):
        """Value of ``section.key``, or ``default`` when absent."""
        values = self.data.get(section) or {}
        return values.get(key, default)

    def to_console(self):
        """Prints YML config data"""
        print_json(json.dumps(self.data, indent=4))


class YAMLEmptyConfigHandler:

    def generate_empty_config(self, filename: str = YAML_FILE_CONFIG):
        """Generates a YAML configuration file holding every default.

        Args:
            filename (str, optional): The filename with YAML configuration to be created. Defaults to YAML_FILE_CONFIG.

        Raises:
            YAMLConfigExists: raised, if config file already exists
        """

        if os.path.exists(filename):
            raise YAMLConfigExists(f"Found existing config: {filename}")

        config = {
            "encoding": {"scheme": "counter", "base": TERNARY_BASE, "threshold": DEFAULT_THRESHOLD},
            "query": {"kappa": DEFAULT_KAPPA},
            "baselines": {
                "bits": DEFAULT_BITS,
                "tables": DEFAULT_TABLES,
                "arity": DEFAULT_ARITY,
                "depth": DEFAULT_DEPTH,
            },
            "bench": {
                "seed": DEFAULT_SEED,
                "n_users": DEFAULT_N_USERS,
                "n_items": DEFAULT_N_ITEMS,
                "k": DEFAULT_K,
                "threshold": DEFAULT_BENCH_THRESHOLD,
                "methods": list(METHODS),
                "threads": 0,
            },
        }

        with open(filename, "w", encoding="utf-8") as outfile:
            yaml.dump(config, outfile, default_flow_style=False)
