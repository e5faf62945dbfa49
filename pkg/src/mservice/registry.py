"""Subscriber registration."""

from __future__ import annotations

from typing import TYPE_CHECKING

from .models import LedgerKind, Subscriber, validate_msisdn

if TYPE_CHECKING:
    from .config import Config
    from .store import Store


class SubscriberRegistry:
    def __init__(self, store: "Store", config: "Config", clock):
        self._store = store
        self._cfg = config
        self._clock = clock

    def register(self, msisdn: str, consent_ads: bool = True) -> Subscriber:
        """Create (or reactivate) a subscriber; logs the one-time fee if any."""
        msisdn = validate_msisdn(msisdn)
        fee = self._cfg.sms.registration_fee_tsh
        with self._store.transaction():
            subscriber = self._store.upsert_subscriber(msisdn, consent_ads,
                                                       self._clock())
            if fee > 0:
                self._store.append_ledger(None, fee, LedgerKind.REGISTRATION_FEE,
                                          self._clock())
            return subscriber
