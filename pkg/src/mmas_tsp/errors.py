class ParseError(ValueError):
    """Malformed or unsupported TSPLIB input. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    pass


class TourError(ValueError):
    pass


class SelectionError(RuntimeError):
    pass
