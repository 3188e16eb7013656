"""Exception types shared across the package."""


class DomainError(ValueError):
    """A state or argument lies outside the operation's domain."""


class PreconditionError(ValueError):
    """Inputs violate a documented precondition (e.g. mismatched noise)."""


class HorizonUnreachableError(RuntimeError):
    """The driving path was exhausted before the clock reached the horizon."""

    def __init__(self, horizon, attained):
        super().__init__(
            f"horizon unreachable: requested {horizon}, clock attained {attained}"
        )
        self.horizon = horizon
        self.attained = attained


class StepFailureError(RuntimeError):
    """Step rejection budget exhausted near a singular boundary."""

    def __init__(self, t, state):
        super().__init__(f"step failure at t={t} near state {state}")
        self.t = t
        self.state = state


class StepBudgetError(RuntimeError):
    """A simulation exceeded its step budget before its stopping rule fired."""

    def __init__(self, max_steps):
        super().__init__(f"step budget of {max_steps} steps exhausted")
        self.max_steps = max_steps


class ToleranceError(RuntimeError):
    """A quadrature or root-find did not reach the requested tolerance."""

    def __init__(self, requested, achieved):
        super().__init__(
            f"tolerance not reached: requested {requested}, achieved {achieved}"
        )
        self.requested = requested
        self.achieved = achieved
