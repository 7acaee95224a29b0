"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical/training failures with 3.
"""


class ConfigError(ValueError):
    """Invalid user-supplied configuration (bad field, unknown key, bad path)."""

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


class GraphError(ValueError):
    """Structurally invalid thermal graph or mismatched graph-sized argument."""


class DivergenceError(RuntimeError):
    """Forward integration produced a non-finite state."""

    def __init__(self, message, step_index=None, node_index=None):
        super().__init__(message)
        self.step_index = step_index
        self.node_index = node_index


class NumericalError(RuntimeError):
    """A linear solve or factorization failed beyond recovery."""


class TrainingFailureError(NumericalError):
    """Training could not proceed (persistent rejected steps, or all runs failed)."""


class MetricError(ValueError):
    """A metric is undefined for the given inputs (e.g. zero-variance series)."""
