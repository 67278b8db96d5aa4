"""Exception hierarchy shared by every isskit module."""
from __future__ import annotations


class IssError(Exception):
    """Base class for all domain failures raised by isskit."""


class ModelValidationError(IssError, ValueError):
    """Raised when a raw model description violates a structural constraint.

    ``violations`` lists every problem found, not just the first one.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [str(v) for v in self.violations]
        super().__init__("invalid model:\n  " + "\n  ".join(lines))


class UnknownState(IssError, KeyError):
    pass


class IllegalJointAction(IssError, ValueError):
    pass


class IllegalAction(IssError, ValueError):
    pass


class IncompleteProfile(IssError, KeyError):
    pass


class AlphabetMismatch(IssError, ValueError):
    """A monitor refers to model states or joint actions it was not built for."""


class IllegalTriple(IssError, ValueError):
    pass


class MonitorError(IssError, ValueError):
    """A monitor definition is malformed (non-total, unknown state, ...)."""


class NormUnenforceable(IssError):
    pass


class RegimentationDeadlock(IssError):
    def __init__(self, states):
        self.states = list(states)
        super().__init__(
            "regimentation empties the choice set at: " + ", ".join(self.states)
        )


class InvalidPolicy(IssError, ValueError):
    pass


class BudgetDimensionMismatch(IssError, ValueError):
    pass


class QuerySyntaxError(IssError, ValueError):
    def __init__(self, message: str, column: int, text: str):
        self.column = column
        self.text = text
        super().__init__(f"{message} (column {column})")


class DslError(IssError):
    """Parsing or lowering produced one or more error diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
