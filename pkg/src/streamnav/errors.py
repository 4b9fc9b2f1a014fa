"""Exception hierarchy shared across the package."""


class StreamNavError(Exception):
    """Base class for all streamnav errors."""


class SingularityEvaluation(StreamNavError):
    """Field evaluation requested at (or too close to) an obstacle center."""


class EmptyDomain(StreamNavError):
    """Sampling rectangle is fully covered by exclusion disks."""


class SolverError(StreamNavError):
    """Base class for stream-coordinate inversion failures.

    ``agent_index`` is attached by batch/loop callers so a failure can be
    traced back to the offending agent.
    """

    agent_index: int | None = None


class SingularJacobian(SolverError):
    """Jacobian is numerically singular and damped retries also failed."""


class NonFinite(SolverError):
    """Solver iterates diverged to non-finite values."""


class AgentInsideExclusion(StreamNavError):
    """An agent position lies strictly inside a planned-exclusion disk."""

    def __init__(self, message: str, agent_id=None):
        super().__init__(message)
        self.agent_id = agent_id


class NotApplicable(StreamNavError):
    """A safety check was invoked outside its scope of validity."""


class ConfigInvalid(StreamNavError):
    """Scenario or configuration failed validation; message lists diagnostics."""
