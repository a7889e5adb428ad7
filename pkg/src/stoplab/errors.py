"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """A vector argument does not match the declared ambient dimension."""


class CalibrationError(ValueError):
    """A noise model cannot be calibrated to a finite sub-Gaussian certificate."""


class DivergenceError(RuntimeError):
    """An iterate left the trust region during a run.

    Carries the step index at which the guard tripped.
    """

    def __init__(self, step: int, norm: float):
        self.step = step
        self.norm = norm
        super().__init__(f"iterate diverged at step {step} (norm {norm:.3e})")


class ConfigError(ValueError):
    """An experiment configuration failed validation.

    ``problems`` lists every violation found, not just the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
