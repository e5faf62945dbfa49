"""Persistent entity types and their validation rules.

Monetary amounts are integers in Tanzanian shillings (Tsh); balances may
never go negative. MSISDNs are stored canonically as bare digit strings.
Timestamps are Unix epoch seconds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import MalformedMsisdn, ValidationFailed


def validate_msisdn(raw: str) -> str:
    """Canonicalize an E.164-style subscriber number.

    Accepts 9-15 digits with an optional leading '+'; the canonical form
    has no '+'.
    """
    if not isinstance(raw, str):
        raise MalformedMsisdn("msisdn must be a string")
    text = raw.strip()
    if text.startswith("+"):
        text = text[1:]
    if not text.isdigit():
        raise MalformedMsisdn(f"msisdn {raw!r} contains non-digits")
    if not 9 <= len(text) <= 15:
        raise MalformedMsisdn(f"msisdn {raw!r} must have 9-15 digits")
    return text


def validate_amount(amount: int, what: str = "amount") -> int:
    if not isinstance(amount, int) or isinstance(amount, bool):
        raise ValidationFailed(f"{what} must be an integer Tsh value")
    if amount < 0:
        raise ValidationFailed(f"{what} must be non-negative")
    return amount


class SubscriberStatus(str, enum.Enum):
    ACTIVE = "Active"
    UNSUBSCRIBED = "Unsubscribed"


class RoutedAs(str, enum.Enum):
    REGISTRATION = "Registration"
    QUESTION = "Question"
    CONFIRMATION_CODE = "ConfirmationCode"
    UNRECOGNIZED = "Unrecognized"


class QuestionStatus(str, enum.Enum):
    OPEN = "Open"
    ANSWERED = "Answered"


class ConfirmationState(str, enum.Enum):
    PENDING = "Pending"
    REDEEMED = "Redeemed"
    EXPIRED = "Expired"


class LedgerKind(str, enum.Enum):
    IMPRESSION_CHARGE = "ImpressionCharge"
    DEPOSIT = "Deposit"
    REGISTRATION_FEE = "RegistrationFee"


class DeliveryKind(str, enum.Enum):
    AD = "Ad"
    CONTENT = "Content"
    ANSWER = "Answer"
    SYSTEM = "System"


class RequestOrigin(str, enum.Enum):
    SPONSORED = "Sponsored"
    PAID = "Paid"


class IntentKind(str, enum.Enum):
    PAID_ACCESS = "PaidAccess"
    FREE_FALLBACK = "FreeFallback"


# Permission tags grouped by the role they are granted to by default.
ADMIN_PERMISSIONS = frozenset({
    "manage_users", "manage_groups", "manage_sponsors", "manage_ads",
    "manage_categories", "view_reports", "view_subscribers",
})
DOCTOR_PERMISSIONS = frozenset({
    "manage_content", "view_questions", "answer_questions",
})
ALL_PERMISSIONS = ADMIN_PERMISSIONS | DOCTOR_PERMISSIONS


@dataclass
class UserGroup:
    id: int
    name: str
    permissions: frozenset[str]


@dataclass
class User:
    id: int
    username: str
    password_hash: str
    group_id: int
    display_name: str


@dataclass
class Subscriber:
    id: int
    msisdn: str
    registered_at: float
    status: SubscriberStatus
    consent_ads: bool


@dataclass
class Category:
    id: int
    parent_id: int | None
    name_sw: str
    position: int
    active: bool


@dataclass
class ContentItem:
    id: int
    category_id: int
    body_sw: str
    author_id: int
    created_at: float
    active: bool


@dataclass
class Question:
    id: int
    subscriber_id: int
    text: str
    received_at: float
    status: QuestionStatus


@dataclass
class Answer:
    id: int
    question_id: int
    doctor_id: int
    text: str
    answered_at: float


@dataclass
class ReceivedSms:
    id: int
    msisdn: str
    shortcode: str
    text: str
    received_at: float
    routed_as: RoutedAs
    note: str = ""


@dataclass
class Sponsor:
    id: int
    name: str
    contact: str
    balance: int
    active: bool


@dataclass
class Ad:
    id: int
    sponsor_id: int
    body_sw: str
    active: bool
    created_at: float


@dataclass
class PendingConfirmation:
    id: int
    code: str
    msisdn: str
    category_id: int
    ad_id: int
    sponsor_id: int
    issued_at: float
    expires_at: float
    state: ConfirmationState


@dataclass
class LedgerEntry:
    id: int
    sponsor_id: int | None
    amount: int
    kind: LedgerKind
    confirmation_id: int | None
    at: float


@dataclass
class DeliveryRecord:
    id: int
    msisdn: str
    kind: DeliveryKind
    segments: int
    cost: int
    body: str
    at: float
    correlation: str | None = None
    charset_warning: bool = False


@dataclass
class PaymentIntent:
    id: int
    msisdn: str
    category_id: int
    amount: int
    kind: IntentKind
    at: float


@dataclass
class ContentRequest:
    """A request to deliver content for a leaf category.

    Sponsored requests must reference a redeemed confirmation; paid
    requests reference a recorded payment intent (stub transaction).
    """
    msisdn: str
    category_id: int
    origin: RequestOrigin
    at: float
    confirmation_id: int | None = None
    intent_id: int | None = None


@dataclass
class RotationCursor:
    """Position of the sponsor rotation queue.

    ``last_ad_ids`` remembers, per sponsor, the last ad served so ads
    cycle within a sponsor as well. Stale references are skipped lazily.
    """
    last_sponsor_id: int | None = None
    last_ad_ids: dict[int, int] = field(default_factory=dict)
