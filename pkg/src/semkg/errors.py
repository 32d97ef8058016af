"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class SemkgError(Exception):
    exit_code = 1


class InputError(SemkgError):
    """Malformed input file or record."""

    exit_code = 3

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ConfigError(SemkgError):
    exit_code = 3


class SamplingError(SemkgError):
    exit_code = 4


class PerturbationError(SemkgError):
    """No eligible target for a perturbation operator."""

    exit_code = 4


class BackendError(SemkgError):
    exit_code = 5


class TransportError(BackendError):
    """Retriable failure talking to a model backend."""


class RetryExhausted(BackendError):
    def __init__(self, attempts, last_error):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"gave up after {attempts} attempt(s): {last_error}")


class CacheMiss(BackendError):
    pass


class PipelineError(SemkgError):
    exit_code = 6
