"""Provides module specific exceptions."""


class TessIndexException(Exception):
    """Generic exception for pytessindex."""


class TessDomainError(TessIndexException):
    """Input lies outside the mathematical domain of an operation."""


class TessConfigError(TessIndexException):
    """Invalid or inconsistent configuration."""


class TessInputError(TessIndexException):
    """Invalid data handed to an index or benchmark builder."""


class TessStateError(TessIndexException):
    """Structure used before it was built."""


class TessNotSupported(TessIndexException):
    """Exception for non supported features."""


class TessParseError(TessIndexException):
    """Malformed input file."""

    def __init__(self, message: str, path: str = None, line: int = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
        if line is not None:
            location = f"{location}:{line}" if location else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


class YAMLGenericException(Exception):
    """pytessindex YAML loading error."""


class YAMLValidationError(Exception):
    """pytessindex YAML validation error."""


class YAMLConfigExists(Exception):
    """pytessindex YAML already exists error."""
