"""Shared error type for malformed or inconsistent input documents."""


class InputError(ValueError):
    """An input document could not be parsed or is internally inconsistent.

    ``location`` carries a human-readable position hint (file name, line,
    JSON path) when one is known.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
