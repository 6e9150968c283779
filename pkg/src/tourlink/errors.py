"""Exception types shared across the package."""

from __future__ import annotations


class InvalidTournament(ValueError):
    """Raised when an orientation matrix is not a tournament."""

    def __init__(self, clause: str, pair: tuple[int, int]):
        self.clause = clause
        self.pair = pair
        super().__init__(f"{clause} violated at pair {pair}")


class HypothesisExhausted(RuntimeError):
    """A best-effort construction could not complete.

    This is a legal outcome whenever the degree or connectivity hypothesis of
    the underlying argument is not met. ``stage`` names the step that gave up.
    """

    def __init__(self, stage: str, detail: str = ""):
        self.stage = stage
        self.detail = detail
        msg = f"hypothesis exhausted at stage {stage!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class BudgetExceeded(RuntimeError):
    """The exhaustive search ran over its node budget."""


class VerificationError(AssertionError):
    """An object failed independent re-verification.

    ``clause`` names the violated invariant.
    """

    def __init__(self, clause: str, detail: str = ""):
        self.clause = clause
        self.detail = detail
        super().__init__(f"{clause}: {detail}" if detail else clause)


class CountViolation(AssertionError):
    """More close branch vertices than the counting bound allows."""


class ClaimViolation(AssertionError):
    """A rerouting claim fails and no improving rewrite applies."""

    def __init__(self, claim: str, index: int, detail: str = ""):
        self.claim = claim
        self.index = index
        super().__init__(f"claim {claim} violated for index {index}: {detail}")


class PotentialError(AssertionError):
    """A rewrite failed to strictly decrease its potential."""
