"""Service error hierarchy.

Every error carries a stable ``code`` (its class name) used in the JSON
error envelope ``{"error": code, "detail": str}`` and in USSD error replies.
"""

from __future__ import annotations


class MServiceError(Exception):
    """Base class for all service-level failures."""

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.__class__.__name__)
        self.detail = detail or self.__class__.__name__

    @property
    def code(self) -> str:
        return self.__class__.__name__


# -- domain model ----------------------------------------------------------

class MalformedMsisdn(MServiceError):
    pass


class AlreadyRegistered(MServiceError):
    pass


class UnknownCategory(MServiceError):
    pass


class UnknownSubscriber(MServiceError):
    pass


class ValidationFailed(MServiceError):
    pass


# -- session engine --------------------------------------------------------

class MalformedCode(MServiceError):
    pass


class WrongServiceCode(MServiceError):
    pass


class SessionAlreadyOpen(MServiceError):
    pass


class UnknownSession(MServiceError):
    pass


class ServiceEmpty(MServiceError):
    pass


# -- ad ledger --------------------------------------------------------------

class NoActiveSponsor(MServiceError):
    pass


class NotSubscribed(MServiceError):
    pass


class ConsentRequired(MServiceError):
    pass


class NotALeaf(MServiceError):
    pass


class UnknownCode(MServiceError):
    pass


class ExpiredCode(MServiceError):
    pass


class WrongMsisdn(MServiceError):
    pass


class UnknownSponsor(MServiceError):
    pass


class NonPositiveAmount(MServiceError):
    pass


# -- content catalog ---------------------------------------------------------

class EmptyCategory(MServiceError):
    pass


class NotAuthorized(MServiceError):
    pass


class EmptyText(MServiceError):
    pass


class NotADoctor(MServiceError):
    pass


class UnknownQuestion(MServiceError):
    pass


class AlreadyAnswered(MServiceError):
    pass


# -- gateway ----------------------------------------------------------------

class EmptyMessage(MServiceError):
    pass


# -- admin api ----------------------------------------------------------------

class BadCredentials(MServiceError):
    pass


class Forbidden(MServiceError):
    pass


class UnknownEntity(MServiceError):
    pass


# -- cli / runtime ------------------------------------------------------------

class ConfigInvalid(MServiceError):
    pass


class PortInUse(MServiceError):
    pass


class FixtureInvalid(MServiceError):
    pass


class ExpectationFailed(MServiceError):
    pass
