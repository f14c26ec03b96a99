"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so raising the right class
matters: ConfigError for bad user configuration, DataError for broken or
mismatched files, InvariantViolation for data that parses but fails a
structural check.
"""


class TrajlensError(Exception):
    """Base class for all package errors."""


class ConfigError(TrajlensError):
    """Invalid environment, training, or pipeline configuration."""


class DataError(TrajlensError):
    """A persisted artifact is malformed, truncated, or mismatched."""


class InvariantViolation(TrajlensError):
    """Loaded data parses fine but violates a structural invariant."""


class EpisodeFinishedError(TrajlensError):
    """step() was called on an episode that already ended."""


class ReplayDivergenceError(DataError):
    """Replaying a trajectory against an environment produced a different
    transition; the trajectory does not belong to this env/config."""

    def __init__(self, step_index: int, detail: str = ""):
        self.step_index = step_index
        msg = f"replay diverged at step {step_index}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class OracleConvergenceError(TrajlensError):
    """Value iteration failed to reach the requested residual."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"value iteration did not converge after {iterations} sweeps "
            f"(residual {residual:.3e})"
        )
