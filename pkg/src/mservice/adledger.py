"""Sponsor ad ledger.

Decides whether sponsored access is possible, rotates ads across
positive-balance sponsors, charges one impression per ad sent, and
manages the confirmation codes that gate content release. Charges are
taken when the ad SMS is sent; an unredeemed code is not refunded.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from . import texts
from .errors import (
    ConsentRequired,
    ExpiredCode,
    NoActiveSponsor,
    NonPositiveAmount,
    NotALeaf,
    NotSubscribed,
    UnknownCategory,
    UnknownCode,
    WrongMsisdn,
)
from .models import (
    Ad,
    ConfirmationState,
    DeliveryKind,
    LedgerKind,
    PendingConfirmation,
    RotationCursor,
    Sponsor,
    SubscriberStatus,
    validate_msisdn,
)

if TYPE_CHECKING:
    from .config import Config
    from .gateway import SmsOutbox
    from .store import Store


class AdLedger:
    def __init__(self, store: "Store", config: "Config", outbox: "SmsOutbox",
                 clock, rng):
        self._store = store
        self._cfg = config
        self._outbox = outbox
        self._clock = clock
        self._rng = rng

    # -- eligibility & rotation -------------------------------------------------

    def eligible_sponsors(self) -> list[Sponsor]:
        """Active sponsors that can afford one impression and have an active ad,
        in id order."""
        price = self._cfg.ads.unit_price_tsh
        return [s for s in self._store.list_sponsors(active_only=True)
                if s.balance >= price and self._store.ads_for_sponsor(s.id)]

    def ads_exist(self) -> bool:
        return bool(self.eligible_sponsors())

    def next_ad(self, cursor: RotationCursor) -> tuple[Ad, Sponsor, RotationCursor]:
        """Pick the next (ad, sponsor) after the cursor in cyclic id order.

        Pure with respect to the store: the caller persists the returned
        cursor when the pick is committed.
        """
        eligible = self.eligible_sponsors()
        if not eligible:
            raise NoActiveSponsor("no active sponsor can fund an impression")
        sponsor = _cyclic_next(eligible, cursor.last_sponsor_id)
        ads = self._store.ads_for_sponsor(sponsor.id)
        ad = _cyclic_next(ads, cursor.last_ad_ids.get(sponsor.id))
        updated = RotationCursor(sponsor.id, {**cursor.last_ad_ids, sponsor.id: ad.id})
        return ad, sponsor, updated

    # -- the sponsored request ----------------------------------------------------

    def reserve_request(self, msisdn: str, category_id: int) -> PendingConfirmation:
        """Charge a sponsor, issue a confirmation code, and send the ad SMS.

        The selection, charge, ledger append, and cursor advance commit
        atomically; on any failure no SMS is sent and nothing is charged.
        """
        msisdn = validate_msisdn(msisdn)
        with self._store.transaction():
            sub = self._store.subscriber_by_msisdn(msisdn)
            if sub is None or sub.status is not SubscriberStatus.ACTIVE:
                raise NotSubscribed(f"{msisdn} is not a registered subscriber")
            if not sub.consent_ads:
                raise ConsentRequired(f"{msisdn} has not opted in to ads")
            category = self._store.category(category_id)
            if not category.active:
                raise UnknownCategory(f"category {category_id} is not active")
            if not self._store.category_is_leaf(category_id):
                raise NotALeaf(f"category {category_id} has subcategories")
            cursor = self._store.rotation_cursor()
            ad, sponsor, updated = self.next_ad(cursor)
            now = self._clock()
            confirmation = self._store.create_confirmation(
                self._fresh_code(), msisdn, category_id, ad.id, sponsor.id,
                issued_at=now, expires_at=now + self._cfg.ads.confirmation_ttl_s)
            self._store.adjust_sponsor_balance(sponsor.id, -self._cfg.ads.unit_price_tsh)
            self._store.append_ledger(sponsor.id, self._cfg.ads.unit_price_tsh,
                                      LedgerKind.IMPRESSION_CHARGE, now,
                                      confirmation_id=confirmation.id)
            self._store.save_rotation_cursor(updated)
        dial = f"*{self._cfg.ussd.service_code}*{confirmation.code}#"
        self._outbox.send_sms(msisdn, ad.body_sw + texts.AD_CODE_SUFFIX.format(dial=dial),
                              DeliveryKind.AD, correlation=f"confirmation:{confirmation.id}")
        return confirmation

    def redeem_confirmation(self, msisdn: str, code: str) -> PendingConfirmation:
        """Mark a pending code redeemed (single-use) and return it for delivery."""
        msisdn = validate_msisdn(msisdn)
        expired = None
        with self._store.transaction():
            confirmation = self._store.pending_confirmation_by_code(code)
            if confirmation is None:
                raise UnknownCode(f"no pending confirmation for code {code!r}")
            if confirmation.msisdn != msisdn:
                raise WrongMsisdn(f"code {code!r} belongs to another subscriber")
            if self._clock() >= confirmation.expires_at:
                expired = confirmation
            else:
                self._store.set_confirmation_state(confirmation.id,
                                                   ConfirmationState.REDEEMED)
                return self._store.confirmation(confirmation.id)
        self._store.set_confirmation_state(expired.id, ConfirmationState.EXPIRED)
        raise ExpiredCode(f"code {code!r} expired; no refund is made")

    # -- funding & reporting ----------------------------------------------------------

    def deposit(self, sponsor_id: int, amount: int) -> int:
        if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
            raise NonPositiveAmount("deposit amount must be a positive integer")
        with self._store.transaction():
            self._store.sponsor(sponsor_id)
            balance = self._store.adjust_sponsor_balance(sponsor_id, amount)
            self._store.append_ledger(sponsor_id, amount, LedgerKind.DEPOSIT,
                                      self._clock())
            return balance

    def impression_report(self, since: float | None = None,
                          until: float | None = None) -> list[dict]:
        """Per-sponsor impressions, spend, deposits, and remaining balance."""
        rows = []
        for sponsor in self._store.list_sponsors():
            charges = self._store.ledger_entries(
                sponsor.id, LedgerKind.IMPRESSION_CHARGE, since, until)
            deposits = self._store.ledger_entries(
                sponsor.id, LedgerKind.DEPOSIT, since, until)
            rows.append({
                "sponsor_id": sponsor.id,
                "sponsor": sponsor.name,
                "impressions": len(charges),
                "spend": sum(e.amount for e in charges),
                "deposits": sum(e.amount for e in deposits),
                "remaining": sponsor.balance,
            })
        return rows

    def _fresh_code(self) -> str:
        while True:
            code = f"{self._rng.randrange(1_000_000):06d}"
            if self._store.pending_confirmation_by_code(code) is None:
                return code


def _cyclic_next(items, last_id):
    """First item whose id strictly follows ``last_id`` cyclically; the first
    item when the cursor is unset or stale past the end."""
    for item in items:
        if last_id is None or item.id > last_id:
            return item
    return items[0]
