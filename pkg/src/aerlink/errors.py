"""Exception types shared across the package."""


class AerLinkError(Exception):
    """Base class for every error raised by aerlink."""


class ConfigurationError(AerLinkError):
    """Bad model wiring, unknown signal, malformed workload."""


class OscillationError(AerLinkError):
    """Zero-delay reactions did not settle at one timestamp."""


class ProtocolViolation(AerLinkError):
    """A handshake or encoding rule was broken by the model under test."""


class CalibrationError(AerLinkError):
    """Requested timing targets cannot be met by any positive delay profile."""


class SimulationViolation(AerLinkError):
    """A run finished with a safety verdict (contention, protocol) against it."""

    def __init__(self, verdict, excerpt=()):
        super().__init__(verdict)
        self.verdict = verdict
        self.excerpt = list(excerpt)
