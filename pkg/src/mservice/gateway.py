"""Simulated telco delivery tier.

Outbound SMS are split into 160-character segments and logged with a
per-segment cost; inbound SMS are routed by shortcode (registration or
questions); USSD traffic is forwarded to the session engine. The real
mobile network is replaced entirely by this simulation, so every send
succeeds and lands in a queryable per-MSISDN inbox.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from . import texts
from .errors import (
    AlreadyRegistered,
    EmptyMessage,
    EmptyText,
    MalformedCode,
    MalformedMsisdn,
    NotSubscribed,
    SessionAlreadyOpen,
    UnknownSession,
    WrongServiceCode,
)
from .models import DeliveryKind, DeliveryRecord, ReceivedSms, RoutedAs, validate_msisdn
from .sessions import parse_ussd_code

if TYPE_CHECKING:
    from .catalog import ContentCatalog
    from .config import Config
    from .registry import SubscriberRegistry
    from .sessions import SessionEngine
    from .store import Store

SEGMENT_CHARS = 160

# GSM 03.38 basic character set; anything outside it gets an advisory flag
# on the delivery record (Swahili text is expected to pass).
_GSM_BASIC = frozenset(
    "@£$¥èéùìòÇ\nØø\rÅåΔ_ΦΓΛΩΠΨΣΘΞÆæßÉ !\"#¤%&'()*+,-./0123456789:;<=>?"
    "¡ABCDEFGHIJKLMNOPQRSTUVWXYZÄÖÑÜ§¿abcdefghijklmnopqrstuvwxyzäöñüà"
)


@dataclass(frozen=True)
class SmsSegment:
    index: int  # 1-based
    total: int
    text: str


def segment_message(text: str) -> list[SmsSegment]:
    """Greedy split into segments of at most 160 characters."""
    if not text:
        raise EmptyMessage("cannot send an empty SMS")
    chunks = [text[i:i + SEGMENT_CHARS] for i in range(0, len(text), SEGMENT_CHARS)]
    return [SmsSegment(i, len(chunks), chunk)
            for i, chunk in enumerate(chunks, start=1)]


def charset_warning(text: str) -> bool:
    return any(ch not in _GSM_BASIC for ch in text)


class SmsOutbox:
    """Outbound SMS dispatch with segmentation and cost accounting."""

    def __init__(self, store: "Store", config: "Config", clock):
        self._store = store
        self._cfg = config
        self._clock = clock

    def send_sms(self, msisdn: str, text: str, kind: DeliveryKind,
                 correlation: str | None = None) -> DeliveryRecord:
        msisdn = validate_msisdn(msisdn)
        segments = segment_message(text)
        cost = len(segments) * self._cfg.sms.unit_cost_tsh
        return self._store.append_delivery(
            msisdn, kind, len(segments), cost, text, self._clock(),
            correlation=correlation, charset_warning=charset_warning(text))

    def inbox(self, msisdn: str) -> list[DeliveryRecord]:
        return self._store.deliveries(msisdn=validate_msisdn(msisdn))

    def cost_report(self, since: float | None = None,
                    until: float | None = None) -> dict:
        records = self._store.deliveries(since=since, until=until)
        by_kind: dict[str, dict[str, int]] = {}
        for rec in records:
            bucket = by_kind.setdefault(rec.kind.value,
                                        {"sms": 0, "segments": 0, "cost": 0})
            bucket["sms"] += 1
            bucket["segments"] += rec.segments
            bucket["cost"] += rec.cost
        return {
            "total_sms": len(records),
            "total_segments": sum(r.segments for r in records),
            "total_cost": sum(r.cost for r in records),
            "by_kind": by_kind,
        }


class TelcoGateway:
    """Wire-facing front: inbound SMS routing and USSD dispatch."""

    def __init__(self, store: "Store", config: "Config",
                 sessions: "SessionEngine", registry: "SubscriberRegistry",
                 catalog: "ContentCatalog", outbox: SmsOutbox, clock):
        self._store = store
        self._cfg = config
        self._sessions = sessions
        self._registry = registry
        self._catalog = catalog
        self._outbox = outbox
        self._clock = clock

    # -- inbound SMS --------------------------------------------------------------

    def receive_sms(self, msisdn: str, shortcode: str, text: str) -> ReceivedSms:
        """Route an inbound SMS; every message is logged, failures included."""
        now = self._clock()
        try:
            canonical = validate_msisdn(msisdn)
        except MalformedMsisdn as exc:
            return self._store.log_received_sms(msisdn, shortcode, text, now,
                                                RoutedAs.UNRECOGNIZED,
                                                note=exc.code)
        if shortcode == self._cfg.sms.registration_shortcode:
            return self._route_registration(canonical, shortcode, text, now)
        if shortcode == self._cfg.sms.question_shortcode:
            return self._route_question(canonical, shortcode, text, now)
        return self._store.log_received_sms(canonical, shortcode, text, now,
                                            RoutedAs.UNRECOGNIZED,
                                            note="unknown shortcode")

    def _route_registration(self, msisdn: str, shortcode: str, text: str,
                            now: float) -> ReceivedSms:
        keyword = self._cfg.sms.registration_keyword.upper()
        if text.strip().upper() != keyword:
            return self._store.log_received_sms(msisdn, shortcode, text, now,
                                                RoutedAs.UNRECOGNIZED,
                                                note="unknown keyword")
        try:
            self._registry.register(msisdn, consent_ads=True)
        except AlreadyRegistered as exc:
            return self._store.log_received_sms(msisdn, shortcode, text, now,
                                                RoutedAs.REGISTRATION,
                                                note=exc.code)
        record = self._store.log_received_sms(msisdn, shortcode, text, now,
                                              RoutedAs.REGISTRATION)
        welcome = texts.WELCOME_SMS.format(service=self._cfg.ussd.service_code)
        fee = self._cfg.sms.registration_fee_tsh
        if fee > 0:
            welcome += texts.WELCOME_FEE_NOTE.format(fee=fee)
        self._outbox.send_sms(msisdn, welcome, DeliveryKind.SYSTEM)
        return record

    def _route_question(self, msisdn: str, shortcode: str, text: str,
                        now: float) -> ReceivedSms:
        try:
            question = self._catalog.submit_question(msisdn, text)
        except (NotSubscribed, EmptyText) as exc:
            return self._store.log_received_sms(msisdn, shortcode, text, now,
                                                RoutedAs.UNRECOGNIZED,
                                                note=exc.code)
        return self._store.log_received_sms(msisdn, shortcode, text, now,
                                            RoutedAs.QUESTION,
                                            note=f"question:{question.id}")

    # -- USSD wire ------------------------------------------------------------------

    def ussd_request(self, msisdn: str, session_token: str | None,
                     text: str) -> dict:
        """Serve one USSD exchange; replies use the wire shape
        ``{"reply", "continue", "session"}``."""
        try:
            canonical = validate_msisdn(msisdn)
        except MalformedMsisdn:
            return _wire_reply(texts.REQUEST_UNKNOWN, False, "")
        self._sessions.expire_sessions(self._clock())
        if session_token:
            try:
                reply = self._sessions.handle_input(session_token, text)
            except UnknownSession:
                return _wire_reply(texts.SESSION_UNKNOWN, False, session_token)
            return _wire_reply(reply.text, not reply.ends, session_token)
        try:
            code = parse_ussd_code(text)
        except MalformedCode:
            return _wire_reply(texts.REQUEST_UNKNOWN, False, "")
        try:
            reply, session_id = self._sessions.begin_session(canonical, code)
        except WrongServiceCode:
            return _wire_reply(texts.WRONG_SERVICE, False, "")
        except SessionAlreadyOpen:
            return _wire_reply(texts.SESSION_BUSY, False, "")
        return _wire_reply(reply.text, not reply.ends, session_id or "")


def _wire_reply(text: str, cont: bool, session: str) -> dict:
    return {"reply": text, "continue": cont, "session": session}
