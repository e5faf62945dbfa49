"""Content catalog and Q&A loop.

Serves a random content item for a chosen leaf category, guards the
sponsored path behind redeemed confirmations, and handles the question
and answer flow between subscribers and doctors.
"""

from __future__ import annotations

import random
from typing import TYPE_CHECKING

from . import texts
from .errors import (
    AlreadyAnswered,
    EmptyCategory,
    EmptyText,
    NotADoctor,
    NotALeaf,
    NotAuthorized,
    NotSubscribed,
    UnknownCategory,
    UnknownEntity,
    UnknownQuestion,
)
from .gateway import SEGMENT_CHARS, segment_message
from .models import (
    Answer,
    ConfirmationState,
    ContentItem,
    ContentRequest,
    DeliveryKind,
    DeliveryRecord,
    IntentKind,
    PendingConfirmation,
    Question,
    QuestionStatus,
    RequestOrigin,
    SubscriberStatus,
    User,
    validate_msisdn,
)

if TYPE_CHECKING:
    from .config import Config
    from .gateway import SmsOutbox
    from .store import Store


class ContentCatalog:
    def __init__(self, store: "Store", config: "Config", outbox: "SmsOutbox",
                 clock, rng: random.Random):
        self._store = store
        self._cfg = config
        self._outbox = outbox
        self._clock = clock
        self._rng = rng

    # -- selection ---------------------------------------------------------------

    def has_content(self, category_id: int) -> bool:
        return bool(self._store.content_for_category(category_id))

    def pick_content(self, category_id: int,
                     rng: random.Random | int | None = None) -> ContentItem:
        """Uniformly random active item; a seeded rng makes the pick reproducible."""
        items = self._store.content_for_category(category_id)
        if not items:
            raise EmptyCategory(f"category {category_id} has no active content")
        if rng is None:
            rng = self._rng
        elif isinstance(rng, int):
            rng = random.Random(rng)
        return items[rng.randrange(len(items))]

    # -- delivery -------------------------------------------------------------------

    def deliver_content(self, request: ContentRequest) -> list[DeliveryRecord]:
        """Send the content SMS for an authorized request."""
        msisdn = validate_msisdn(request.msisdn)
        confirmation = None
        if request.origin is RequestOrigin.SPONSORED:
            confirmation = self._redeemed_confirmation(request)
            correlation = f"confirmation:{confirmation.id}"
        else:
            correlation = f"intent:{request.intent_id}"
        item = self.pick_content(request.category_id)
        body = item.body_sw
        if (self._cfg.content.delivery_mode == "Combined"
                and confirmation is not None):
            ad = self._store.ad(confirmation.ad_id)
            bundled = f"{ad.body_sw}\n{item.body_sw}"
            # bundle only when ad and content still fit one SMS segment
            if len(bundled) <= SEGMENT_CHARS:
                body = bundled
        record = self._outbox.send_sms(msisdn, body, DeliveryKind.CONTENT,
                                       correlation=correlation)
        return [record]

    def _redeemed_confirmation(self, request: ContentRequest) -> PendingConfirmation:
        if request.confirmation_id is None:
            raise NotAuthorized("sponsored delivery requires a redeemed confirmation")
        confirmation = self._store.confirmation(request.confirmation_id)
        if (confirmation.state is not ConfirmationState.REDEEMED
                or confirmation.msisdn != request.msisdn
                or confirmation.category_id != request.category_id):
            raise NotAuthorized("confirmation does not match the request")
        return confirmation

    def deliver_confirmed(self, confirmation: PendingConfirmation) -> list[DeliveryRecord]:
        """Deliver straight from a just-redeemed confirmation."""
        request = ContentRequest(confirmation.msisdn, confirmation.category_id,
                                 RequestOrigin.SPONSORED, self._clock(),
                                 confirmation_id=confirmation.id)
        return self.deliver_content(request)

    def paid_access(self, msisdn: str, category_id: int) -> list[DeliveryRecord]:
        """Stub paid path: record a payment intent and deliver, no real money."""
        return self._intent_delivery(msisdn, category_id,
                                     self._cfg.content.paid_price_tsh,
                                     IntentKind.PAID_ACCESS)

    def deliver_free_fallback(self, msisdn: str, category_id: int) -> list[DeliveryRecord]:
        """Fallback when no sponsor is eligible and policy is deliver_free."""
        return self._intent_delivery(msisdn, category_id, 0, IntentKind.FREE_FALLBACK)

    def _intent_delivery(self, msisdn: str, category_id: int, amount: int,
                         kind: IntentKind) -> list[DeliveryRecord]:
        msisdn = validate_msisdn(msisdn)
        category = self._store.category(category_id)
        if not category.active:
            raise UnknownCategory(f"category {category_id} is not active")
        if not self._store.category_is_leaf(category_id):
            raise NotALeaf(f"category {category_id} has subcategories")
        if not self.has_content(category_id):
            raise EmptyCategory(f"category {category_id} has no active content")
        intent = self._store.create_payment_intent(msisdn, category_id, amount,
                                                   kind, self._clock())
        request = ContentRequest(msisdn, category_id, RequestOrigin.PAID,
                                 self._clock(), intent_id=intent.id)
        return self.deliver_content(request)

    # -- questions & answers ----------------------------------------------------------

    def submit_question(self, msisdn: str, text: str) -> Question:
        msisdn = validate_msisdn(msisdn)
        sub = self._store.subscriber_by_msisdn(msisdn)
        if sub is None or sub.status is not SubscriberStatus.ACTIVE:
            raise NotSubscribed(f"{msisdn} is not a registered subscriber")
        if not text.strip():
            raise EmptyText("question text must be non-empty")
        return self._store.create_question(sub.id, text.strip(), self._clock())

    def answer_question(self, doctor: User, question_id: int, text: str) -> Answer:
        self._require(doctor, "answer_questions")
        if not text.strip():
            raise EmptyText("answer text must be non-empty")
        try:
            question = self._store.question(question_id)
        except UnknownEntity as exc:
            raise UnknownQuestion(f"no question {question_id}") from exc
        if question.status is QuestionStatus.ANSWERED:
            raise AlreadyAnswered(f"question {question_id} is already answered")
        with self._store.transaction():
            answer = self._store.create_answer(question_id, doctor.id, text.strip(),
                                               self._clock())
            self._store.set_question_status(question_id, QuestionStatus.ANSWERED)
        asker = self._store.subscriber(question.subscriber_id)
        self._outbox.send_sms(asker.msisdn, texts.ANSWER_PREFIX + text.strip(),
                              DeliveryKind.ANSWER,
                              correlation=f"question:{question_id}")
        return answer

    # -- authoring ----------------------------------------------------------------------

    def add_content(self, doctor: User, category_id: int,
                    body_sw: str) -> tuple[ContentItem, list[str]]:
        """Store doctor-authored content; returns SMS-length lint warnings."""
        self._require(doctor, "manage_content")
        if not body_sw.strip():
            raise EmptyText("content body must be non-empty")
        category = self._store.category(category_id)
        if not self._store.category_is_leaf(category.id):
            raise NotALeaf(f"category {category_id} has subcategories")
        item = self._store.create_content(category_id, body_sw.strip(), doctor.id,
                                          self._clock())
        warnings = self.lint_warnings(item.body_sw)
        return item, warnings

    def lint_warnings(self, body: str) -> list[str]:
        segments = len(segment_message(body))
        if segments > self._cfg.content.max_segments:
            return [f"body spans {segments} SMS segments"
                    f" (configured maximum {self._cfg.content.max_segments});"
                    f" consider shortening it"]
        return []

    def _require(self, user: User, permission: str) -> None:
        if permission not in self._store.user_permissions(user.id):
            raise NotADoctor(f"user {user.username!r} lacks {permission!r}")
