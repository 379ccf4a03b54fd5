"""Exception types shared across the package."""


class PowerMechError(Exception):
    """Base class for all package errors."""


class InvalidScenario(PowerMechError):
    """Raised when an operation receives a scenario that fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(msg or "invalid scenario")


class Infeasible(PowerMechError):
    """The outcome set (or LP feasible region) is empty."""


class Unbounded(PowerMechError):
    """The LP objective is unbounded above."""


class BudgetExceeded(PowerMechError):
    """A brute-force enumeration would visit more points than allowed."""


class ParseError(PowerMechError):
    """A scenario or report document is malformed."""


class ValidationError(InvalidScenario):
    """A parsed scenario file violates the scenario invariants."""
