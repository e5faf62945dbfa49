"""Service assembly: wires the store and all engines from one Config.

A seeded rng makes confirmation codes, session ids, and content picks
reproducible; an injectable clock keeps time-dependent behavior (code
TTLs, session timeouts, token expiry) testable.
"""

from __future__ import annotations

import random
import time

from .adledger import AdLedger
from .admin import AdminService
from .catalog import ContentCatalog
from .config import Config
from .gateway import SmsOutbox, TelcoGateway
from .registry import SubscriberRegistry
from .sessions import SessionEngine
from .store import Store


class ServiceContext:
    def __init__(self, config: Config | None = None, *,
                 rng_seed: int | None = None, clock=time.time,
                 store: Store | None = None):
        self.config = config or Config()
        self.clock = clock
        self.rng = random.Random(rng_seed)
        self.store = store or Store(self.config.storage.path)
        self.outbox = SmsOutbox(self.store, self.config, clock)
        self.registry = SubscriberRegistry(self.store, self.config, clock)
        self.ledger = AdLedger(self.store, self.config, self.outbox, clock, self.rng)
        self.catalog = ContentCatalog(self.store, self.config, self.outbox,
                                      clock, self.rng)
        self.sessions = SessionEngine(self.store, self.config, self.ledger,
                                      self.catalog, clock, self.rng)
        self.gateway = TelcoGateway(self.store, self.config, self.sessions,
                                    self.registry, self.catalog, self.outbox,
                                    clock)
        self.admin = AdminService(self.store, self.config, self.ledger,
                                  self.catalog, self.outbox, clock)

    def now(self) -> float:
        return self.clock()

    def close(self) -> None:
        self.store.close()
