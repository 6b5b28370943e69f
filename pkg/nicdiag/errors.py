from __future__ import annotations


class NicDiagError(Exception):
    """Base class for every error the pipeline raises on purpose."""


class TelemetryParseError(NicDiagError, ValueError):
    def __init__(self, path: object, line: int, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class TelemetryValidationError(NicDiagError, ValueError):
    def __init__(self, reason: str, offending: list[str] | None = None):
        self.offending = list(offending or [])
        detail = f" ({', '.join(self.offending)})" if self.offending else ""
        super().__init__(f"{reason}{detail}")


class TrainingError(NicDiagError):
    pass


class ModelConfigurationError(NicDiagError):
    pass


class EmptyLibraryError(NicDiagError):
    def __init__(self):
        super().__init__(
            "normal sample library is empty; populate it with feature vectors "
            "from failure-free jobs (train on a corpus with normal samples or use --extra-normals)"
        )


class UnknownProtocolError(NicDiagError, ValueError):
    pass


class DiagnosisError(NicDiagError, ValueError):
    def __init__(self, reason: str, offending: list[str] | None = None):
        self.offending = list(offending or [])
        detail = f" (pairs: {', '.join(self.offending)})" if self.offending else ""
        super().__init__(f"{reason}{detail}")
