"""Exception classes mapped to CLI exit codes (config=2, convergence=3, internal=4)."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class ConvergenceError(RuntimeError):
    """A quadrature failed its tolerance; carries the achieved accuracy estimate."""

    exit_code = 3

    def __init__(self, message, achieved=None, target=None):
        if achieved is not None:
            message = f"{message} (achieved {achieved:.3e}, target {target:.3e})"
        super().__init__(message)
        self.achieved = achieved
        self.target = target
