"""Exception hierarchy shared by every module."""

from __future__ import annotations


class GbtsError(Exception):
    """Base class for all library errors."""


class BudgetExceeded(GbtsError):
    """A configurable cap (atoms, bags, patterns) was passed."""

    def __init__(self, what: str, cap: int):
        super().__init__(f"{what} budget exceeded (cap={cap})")
        self.what = what
        self.cap = cap


class TriggerNotHomomorphism(GbtsError):
    pass


class InvalidScriptStep(GbtsError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"script step {index}: {reason}")
        self.index = index


class NotGreedy(GbtsError):
    """Raised when a derivation step has no greedy witness."""

    def __init__(self, step: int, detail: str = ""):
        msg = f"derivation is not greedy at step {step}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.step = step


class ArityOverflow(GbtsError):
    pass


class NotFrontierGuarded(GbtsError):
    pass


class BodyCyclic(GbtsError):
    pass


class NotStructurallyEquivalent(GbtsError):
    pass


class ParseError(GbtsError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
