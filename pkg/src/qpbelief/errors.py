"""Exception hierarchy shared by every module of the package."""


class QPBeliefError(Exception):
    """Base class for all errors raised by qpbelief."""


class SchemaError(QPBeliefError):
    """A schema document or schema object violates a structural invariant."""


class LogError(QPBeliefError):
    """A log document references unknown query parts or is malformed."""


class GraphError(QPBeliefError):
    """A graph operation received invalid arguments."""


class ConnectivityError(GraphError):
    """The random walk graph is not strongly connected or has dangling vertices."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConvergenceError(QPBeliefError):
    """Power iteration did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BeliefError(QPBeliefError):
    """A belief vector is invalid or lacks a probability for a requested part."""


class WorkloadError(QPBeliefError):
    """A session template cannot be realized on the given schema."""
