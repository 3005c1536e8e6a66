"""Exception types shared across the package."""


class ModelFormatError(ValueError):
    """Raised on malformed model files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(ValueError):
    """A parsed model violates structural invariants (see diagnostics)."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


class PowerFlowError(RuntimeError):
    """Power flow did not converge; carries the mismatch trace."""

    def __init__(self, message: str, trace=None):
        self.trace = list(trace) if trace is not None else []
        super().__init__(message)


class SingularNetworkError(RuntimeError):
    """The (reduced) admittance matrix cannot be factorized."""


class InitializationError(RuntimeError):
    """Equilibrium initialization failed; names the offending device."""


class EventError(ValueError):
    """An event or command targets something unresolvable."""
