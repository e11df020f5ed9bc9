"""Exception types shared across the engine.

Every error carries a stable machine-readable ``code`` (its class name) that
the HTTP layer maps onto problem-detail responses and the CLI maps onto exit
codes, so callers never have to parse message strings.
"""

from __future__ import annotations

from typing import Any


class CoplanError(Exception):
    """Base class for all engine errors."""

    http_status: int = 500

    def __init__(self, message: str = "", **details: Any):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details

    @property
    def code(self) -> str:
        return self.__class__.__name__

    def to_problem(self) -> dict[str, Any]:
        """Render as a problem-detail object for the HTTP layer."""
        problem: dict[str, Any] = {
            "title": self.code,
            "status": self.http_status,
            "code": self.code,
            "detail": self.message,
        }
        if self.details:
            problem["context"] = self.details
        return problem


# --- needs memo ------------------------------------------------------------

class EmptyNeed(CoplanError):
    http_status = 400


class DuplicateNeed(CoplanError):
    """Raised when a need's normalized text collides with a live slot.

    ``details["need_id"]`` names the colliding slot.
    """

    http_status = 409


class InvalidCombination(CoplanError):
    http_status = 400


class UnknownNeedId(CoplanError):
    http_status = 404


class AlreadyClarified(CoplanError):
    http_status = 409


class InvalidWant(CoplanError):
    http_status = 400


class ReopenNotSupported(CoplanError):
    """Declined slots stay declined; re-asking them is not supported."""

    http_status = 409


# --- protocol ---------------------------------------------------------------

class MalformedJson(CoplanError):
    http_status = 422


class EmptyRanking(CoplanError):
    """Ranking output parsed but yielded zero usable questions.

    ``details["dropped"]`` lists the questions that were rejected and why.
    """

    http_status = 422


# --- agents -----------------------------------------------------------------

class PolicyViolation(CoplanError):
    http_status = 502


class ProtocolTimeout(CoplanError):
    http_status = 502


# --- backend ----------------------------------------------------------------

class BackendError(CoplanError):
    http_status = 502


class FixtureMiss(BackendError):
    pass


class DigestMismatch(BackendError):
    pass


class StorageError(CoplanError):
    pass


# --- orchestrator / service ---------------------------------------------------

class EmptyQuery(CoplanError):
    http_status = 400


class WrongPhase(CoplanError):
    http_status = 409


class UnknownSession(CoplanError):
    http_status = 404


class DuplicateMilestone(CoplanError):
    http_status = 502


class WriteOutsideDrafting(CoplanError):
    http_status = 409


class GroundingFailure(CoplanError):
    """Solution still cites unknown/declined needs after bounded re-drafts."""

    http_status = 502


# --- cli ----------------------------------------------------------------------

class ConfigError(CoplanError):
    pass


class BindError(CoplanError):
    pass


class ExpectationMismatch(CoplanError):
    pass
