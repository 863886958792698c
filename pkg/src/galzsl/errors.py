"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class GalError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class DimensionError(GalError, ValueError):
    exit_code = 3


class InputError(GalError, ValueError):
    exit_code = 3


class FormatError(GalError, ValueError):
    """Malformed file. Carries an optional line number or byte offset."""

    exit_code = 4

    def __init__(self, message, *, path=None, line=None, offset=None):
        parts = [str(path)] if path is not None else []
        if line is not None:
            parts.append(f"line {line}")
        if offset is not None:
            parts.append(f"byte {offset}")
        prefix = ":".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.offset = offset


class StateError(GalError, RuntimeError):
    exit_code = 5


class NumericalError(GalError, FloatingPointError):
    """Non-finite loss or gradient encountered during optimisation."""

    exit_code = 6
