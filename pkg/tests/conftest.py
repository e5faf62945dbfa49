from __future__ import annotations

import pytest

from mservice.config import Config
from mservice.models import ADMIN_PERMISSIONS, DOCTOR_PERMISSIONS
from mservice.service import ServiceContext

START = 1_700_000_000.0


class FakeClock:
    """Deterministic, manually advanced clock."""

    def __init__(self, start: float = START):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> float:
        self.now += seconds
        return self.now


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def cfg():
    config = Config()
    config.storage.path = ":memory:"
    return config


@pytest.fixture
def ctx(cfg, clock):
    context = ServiceContext(cfg, rng_seed=1234, clock=clock)
    yield context
    context.close()


@pytest.fixture
def staff(ctx):
    """Seed the two role groups plus one admin and one doctor."""
    admin_group = ctx.store.create_user_group("Administrator", ADMIN_PERMISSIONS)
    doctor_group = ctx.store.create_user_group("Doctor", DOCTOR_PERMISSIONS)
    from mservice.admin import hash_password

    admin = ctx.store.create_user("admin", hash_password("admin123"),
                                  admin_group.id, "Administrator")
    doctor = ctx.store.create_user("dr.amani", hash_password("daktari123"),
                                   doctor_group.id, "Dkt. Amani")
    return {"admin": admin, "doctor": doctor,
            "admin_group": admin_group, "doctor_group": doctor_group}


@pytest.fixture
def tree(ctx, staff):
    """Category tree with content:

    Ujauzito            (root, two leaves: Lishe, Dalili)
    Kujifungua          (root, leaf itself -> Maandalizi)
    Msaada              (root, leaf with no content)
    """
    doctor = staff["doctor"]
    store = ctx.store
    root_a = store.create_category("Ujauzito", None, 0)
    leaf_a1 = store.create_category("Lishe", root_a.id, 0)
    leaf_a2 = store.create_category("Dalili", root_a.id, 1)
    root_b = store.create_category("Kujifungua", None, 1)
    leaf_b1 = store.create_category("Maandalizi", root_b.id, 0)
    root_c = store.create_category("Msaada", None, 2)
    ctx.catalog.add_content(doctor, leaf_a1.id, "Kula matunda na mboga kila siku.")
    ctx.catalog.add_content(doctor, leaf_a1.id, "Kunywa maji safi ya kutosha.")
    ctx.catalog.add_content(doctor, leaf_a2.id, "Dalili za hatari: damu, homa kali.")
    ctx.catalog.add_content(doctor, leaf_b1.id, "Andaa mpango wa kujifungua mapema.")
    return {"root_a": root_a, "leaf_a1": leaf_a1, "leaf_a2": leaf_a2,
            "root_b": root_b, "leaf_b1": leaf_b1, "root_c": root_c}


@pytest.fixture
def subscriber(ctx):
    return ctx.registry.register("255712000001", consent_ads=True)


def fund_sponsor(ctx, name: str, balance: int, ads: int = 1):
    sponsor = ctx.store.create_sponsor(name, "")
    for i in range(ads):
        ctx.store.create_ad(sponsor.id, f"Tangazo la {name} namba {i + 1}.",
                            ctx.now())
    if balance:
        ctx.ledger.deposit(sponsor.id, balance)
    return ctx.store.sponsor(sponsor.id)


@pytest.fixture
def sponsor(ctx):
    return fund_sponsor(ctx, "Duka la Dawa", 100)
