"""Exception hierarchy. CLI exit codes hang off the three top-level bases."""


class TrajsemError(Exception):
    exit_code = 1


class ConfigError(TrajsemError):
    """Bad configuration, template, or usage. Exit code 1."""

    exit_code = 1


class DataError(TrajsemError):
    """Unreadable or invalid input data. Exit code 2."""

    exit_code = 2


class BackendError(TrajsemError):
    exit_code = 3


class EmptyRegion(DataError):
    def __init__(self, region_id=None):
        super().__init__(f"region {region_id} has no POIs")
        self.region_id = region_id


class EmptyGroup(DataError):
    pass


class EmptyDay(DataError):
    pass


class BackendUnavailable(BackendError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class FixtureMissing(BackendError):
    def __init__(self, request_key: str):
        super().__init__(f"no replay fixture for request key {request_key}")
        self.request_key = request_key


class ParseFailure(TrajsemError):
    exit_code = 2

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text
