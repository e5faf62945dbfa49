import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mservice.errors import (
    ConsentRequired,
    ExpiredCode,
    NoActiveSponsor,
    NonPositiveAmount,
    NotALeaf,
    NotSubscribed,
    UnknownCode,
    UnknownSponsor,
    WrongMsisdn,
)
from mservice.models import ConfirmationState, DeliveryKind, LedgerKind

from conftest import FakeClock, fund_sponsor


def replay_ledger(store, sponsor_id, price):
    """Independent oracle: reconstruct a sponsor's balance from the ledger."""
    deposits = sum(e.amount for e in
                   store.ledger_entries(sponsor_id, LedgerKind.DEPOSIT))
    impressions = store.ledger_entries(sponsor_id, LedgerKind.IMPRESSION_CHARGE)
    assert all(e.amount == price for e in impressions)
    return deposits - len(impressions) * price


class TestAdsExist:
    def test_funded_sponsor_with_ad(self, ctx):
        fund_sponsor(ctx, "A", 100)
        assert ctx.ledger.ads_exist() is True

    def test_zero_balance_sponsor_does_not_count(self, ctx):
        fund_sponsor(ctx, "A", 0)
        assert ctx.ledger.ads_exist() is False

    def test_balance_without_ads_does_not_count(self, ctx):
        fund_sponsor(ctx, "A", 100, ads=0)
        assert ctx.ledger.ads_exist() is False

    def test_balance_below_price_does_not_count(self, ctx):
        fund_sponsor(ctx, "A", ctx.config.ads.unit_price_tsh - 1)
        assert ctx.ledger.ads_exist() is False

    def test_inactive_sponsor_does_not_count(self, ctx):
        sponsor = fund_sponsor(ctx, "A", 100)
        ctx.store.update_sponsor(sponsor.id, active=False)
        assert ctx.ledger.ads_exist() is False


class TestNextAd:
    def test_rotation_skips_zero_balance(self, ctx):
        a = fund_sponsor(ctx, "A", 100)
        fund_sponsor(ctx, "B", 0)
        c = fund_sponsor(ctx, "C", 50)
        cursor = ctx.store.rotation_cursor()
        picks = []
        for _ in range(6):
            _, sponsor, cursor = ctx.ledger.next_ad(cursor)
            picks.append(sponsor.name)
        assert picks == ["A", "C", "A", "C", "A", "C"]
        assert {a.id, c.id} == {s.id for s in ctx.ledger.eligible_sponsors()}

    def test_ads_cycle_within_sponsor(self, ctx):
        sponsor = ctx.store.create_sponsor("A")
        x = ctx.store.create_ad(sponsor.id, "tangazo x", ctx.now())
        y = ctx.store.create_ad(sponsor.id, "tangazo y", ctx.now())
        ctx.ledger.deposit(sponsor.id, 100)
        cursor = ctx.store.rotation_cursor()
        picks = []
        for _ in range(4):
            ad, _, cursor = ctx.ledger.next_ad(cursor)
            picks.append(ad.id)
        assert picks == [x.id, y.id, x.id, y.id]

    def test_no_eligible_sponsor_raises(self, ctx):
        fund_sponsor(ctx, "A", 5)  # below the 10 Tsh price
        with pytest.raises(NoActiveSponsor):
            ctx.ledger.next_ad(ctx.store.rotation_cursor())

    def test_stale_cursor_falls_back_to_first(self, ctx):
        a = fund_sponsor(ctx, "A", 100)
        from mservice.models import RotationCursor

        ad, sponsor, _ = ctx.ledger.next_ad(RotationCursor(last_sponsor_id=999))
        assert sponsor.id == a.id

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(min_value=0, max_value=30),
                              st.integers(min_value=0, max_value=2)),
                    min_size=0, max_size=5))
    def test_ads_exist_iff_next_ad_succeeds(self, specs):
        from mservice.config import Config
        from mservice.service import ServiceContext

        config = Config()
        config.storage.path = ":memory:"
        context = ServiceContext(config, rng_seed=3, clock=FakeClock())
        try:
            for i, (balance, n_ads) in enumerate(specs):
                fund_sponsor(context, f"S{i}", balance, ads=n_ads)
            exists = context.ledger.ads_exist()
            try:
                context.ledger.next_ad(context.store.rotation_cursor())
                succeeded = True
            except NoActiveSponsor:
                succeeded = False
            assert exists == succeeded
        finally:
            context.close()


class TestReserveRequest:
    def test_charges_one_impression(self, ctx, tree, subscriber):
        sponsor = fund_sponsor(ctx, "A", 100)
        leaf = tree["leaf_a1"]
        confirmation = ctx.ledger.reserve_request(subscriber.msisdn, leaf.id)
        assert confirmation.state is ConfirmationState.PENDING
        assert len(confirmation.code) == 6 and confirmation.code.isdigit()
        assert ctx.store.sponsor(sponsor.id).balance == 90
        charges = ctx.store.ledger_entries(sponsor.id, LedgerKind.IMPRESSION_CHARGE)
        assert len(charges) == 1 and charges[0].amount == 10
        assert replay_ledger(ctx.store, sponsor.id, 10) == 90

    def test_sends_ad_sms_with_code(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        confirmation = ctx.ledger.reserve_request(subscriber.msisdn,
                                                  tree["leaf_a1"].id)
        inbox = ctx.outbox.inbox(subscriber.msisdn)
        assert len(inbox) == 1
        assert inbox[0].kind is DeliveryKind.AD
        assert f"*31022*{confirmation.code}#" in inbox[0].body
        assert inbox[0].segments == 1  # ad cap leaves room for the code suffix

    def test_exhausted_sponsors_send_nothing(self, ctx, tree, subscriber):
        with pytest.raises(NoActiveSponsor):
            ctx.ledger.reserve_request(subscriber.msisdn, tree["leaf_a1"].id)
        assert ctx.outbox.inbox(subscriber.msisdn) == []
        assert ctx.store.list_confirmations() == []
        assert ctx.store.ledger_entries() == []

    def test_unregistered_msisdn_rejected(self, ctx, tree):
        fund_sponsor(ctx, "A", 100)
        with pytest.raises(NotSubscribed):
            ctx.ledger.reserve_request("255700000000", tree["leaf_a1"].id)

    def test_no_consent_no_ads(self, ctx, tree):
        fund_sponsor(ctx, "A", 100)
        sub = ctx.registry.register("255712000002", consent_ads=False)
        with pytest.raises(ConsentRequired):
            ctx.ledger.reserve_request(sub.msisdn, tree["leaf_a1"].id)

    def test_non_leaf_rejected(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        with pytest.raises(NotALeaf):
            ctx.ledger.reserve_request(subscriber.msisdn, tree["root_a"].id)

    def test_rotation_alternates_across_requests(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        fund_sponsor(ctx, "B", 100)
        leaf = tree["leaf_a1"].id
        sponsors = [ctx.ledger.reserve_request(subscriber.msisdn, leaf).sponsor_id
                    for _ in range(4)]
        names = [ctx.store.sponsor(s).name for s in sponsors]
        assert names == ["A", "B", "A", "B"]


class TestRedeem:
    def test_happy_path(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        confirmation = ctx.ledger.reserve_request(subscriber.msisdn,
                                                  tree["leaf_a1"].id)
        redeemed = ctx.ledger.redeem_confirmation(subscriber.msisdn,
                                                  confirmation.code)
        assert redeemed.category_id == tree["leaf_a1"].id
        assert redeemed.state is ConfirmationState.REDEEMED

    def test_double_redemption_fails_second_time(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        confirmation = ctx.ledger.reserve_request(subscriber.msisdn,
                                                  tree["leaf_a1"].id)
        ctx.ledger.redeem_confirmation(subscriber.msisdn, confirmation.code)
        with pytest.raises(UnknownCode):
            ctx.ledger.redeem_confirmation(subscriber.msisdn, confirmation.code)

    def test_expired_code_rejected_and_not_refunded(self, ctx, tree, subscriber,
                                                    clock):
        sponsor = fund_sponsor(ctx, "A", 100)
        confirmation = ctx.ledger.reserve_request(subscriber.msisdn,
                                                  tree["leaf_a1"].id)
        clock.advance(ctx.config.ads.confirmation_ttl_s + 1)
        with pytest.raises(ExpiredCode):
            ctx.ledger.redeem_confirmation(subscriber.msisdn, confirmation.code)
        assert (ctx.store.confirmation(confirmation.id).state
                is ConfirmationState.EXPIRED)
        assert ctx.store.sponsor(sponsor.id).balance == 90  # charge stands

    def test_wrong_msisdn_rejected(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        other = ctx.registry.register("255712000002")
        confirmation = ctx.ledger.reserve_request(subscriber.msisdn,
                                                  tree["leaf_a1"].id)
        with pytest.raises(WrongMsisdn):
            ctx.ledger.redeem_confirmation(other.msisdn, confirmation.code)
        # still pending for the rightful owner
        redeemed = ctx.ledger.redeem_confirmation(subscriber.msisdn,
                                                  confirmation.code)
        assert redeemed.state is ConfirmationState.REDEEMED

    def test_unknown_code(self, ctx, subscriber):
        with pytest.raises(UnknownCode):
            ctx.ledger.redeem_confirmation(subscriber.msisdn, "000000")

    def test_concurrent_redemption_single_use(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        confirmation = ctx.ledger.reserve_request(subscriber.msisdn,
                                                  tree["leaf_a1"].id)
        outcomes = []

        def attempt():
            try:
                ctx.ledger.redeem_confirmation(subscriber.msisdn,
                                               confirmation.code)
                outcomes.append("ok")
            except UnknownCode:
                outcomes.append("used")

        threads = [threading.Thread(target=attempt) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert outcomes.count("ok") == 1
        assert outcomes.count("used") == 7


class TestDeposit:
    def test_from_zero(self, ctx):
        sponsor = ctx.store.create_sponsor("A")
        assert ctx.ledger.deposit(sponsor.id, 500) == 500

    def test_additive(self, ctx):
        sponsor = ctx.store.create_sponsor("A")
        ctx.ledger.deposit(sponsor.id, 100)
        assert ctx.ledger.deposit(sponsor.id, 250) == 350

    def test_zero_amount_rejected(self, ctx):
        sponsor = ctx.store.create_sponsor("A")
        with pytest.raises(NonPositiveAmount):
            ctx.ledger.deposit(sponsor.id, 0)

    def test_unknown_sponsor(self, ctx):
        with pytest.raises(UnknownSponsor):
            ctx.ledger.deposit(99, 100)


class TestImpressionReport:
    def test_three_impressions(self, ctx, tree, subscriber):
        sponsor = fund_sponsor(ctx, "A", 100)
        for _ in range(3):
            ctx.ledger.reserve_request(subscriber.msisdn, tree["leaf_a1"].id)
        (row,) = ctx.ledger.impression_report()
        assert row == {"sponsor_id": sponsor.id, "sponsor": "A",
                       "impressions": 3, "spend": 30, "deposits": 100,
                       "remaining": 70}

    def test_no_activity_zeros(self, ctx):
        ctx.store.create_sponsor("A")
        (row,) = ctx.ledger.impression_report()
        assert row["impressions"] == 0 and row["spend"] == 0
        assert row["remaining"] == 0

    def test_rows_cross_foot(self, ctx, tree, subscriber):
        fund_sponsor(ctx, "A", 100)
        fund_sponsor(ctx, "B", 40)
        for _ in range(5):
            ctx.ledger.reserve_request(subscriber.msisdn, tree["leaf_a1"].id)
        rows = ctx.ledger.impression_report()
        for row in rows:
            assert row["spend"] + row["remaining"] == row["deposits"]
        total_spend = sum(r["spend"] for r in rows)
        assert total_spend == 5 * ctx.config.ads.unit_price_tsh


class TestRotationFairness:
    def test_each_eligible_sponsor_selected_equally(self, ctx, tree, subscriber):
        # static eligibility: every sponsor can afford the whole run
        for name in ("A", "B", "C"):
            fund_sponsor(ctx, name, 1000)
        rounds = 12
        picks = [ctx.store.sponsor(
            ctx.ledger.reserve_request(subscriber.msisdn,
                                       tree["leaf_a1"].id).sponsor_id).name
            for _ in range(rounds * 3)]
        assert picks.count("A") == picks.count("B") == picks.count("C") == rounds


class TestConservation:
    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(1, 40)),
                    min_size=1, max_size=60),
           st.integers(0, 2**16))
    def test_random_workload_conserves_money(self, ops, seed):
        from mservice.config import Config
        from mservice.service import ServiceContext

        config = Config()
        config.storage.path = ":memory:"
        context = ServiceContext(config, rng_seed=5, clock=FakeClock())
        rng = random.Random(seed)
        price = config.ads.unit_price_tsh
        try:
            doctor_group = context.store.create_user_group("Doctor",
                                                           {"manage_content"})
            doctor = context.store.create_user("d", "x", doctor_group.id, "d")
            leaf = context.store.create_category("Mada", None, 0)
            context.store.create_content(leaf.id, "taarifa", doctor.id,
                                         context.now())
            sub = context.registry.register("255712000001")
            sponsors = [fund_sponsor(context, f"S{i}", 0) for i in range(3)]
            expected = {s.id: 0 for s in sponsors}
            for action, amount in ops:
                if action == 0:  # deposit
                    target = rng.choice(sponsors)
                    context.ledger.deposit(target.id, amount)
                    expected[target.id] += amount
                else:  # sponsored request; may legitimately fail
                    try:
                        confirmation = context.ledger.reserve_request(
                            sub.msisdn, leaf.id)
                        expected[confirmation.sponsor_id] -= price
                    except NoActiveSponsor:
                        assert all(balance < price
                                   for balance in expected.values())
            for sponsor in sponsors:
                stored = context.store.sponsor(sponsor.id).balance
                assert stored == expected[sponsor.id]
                assert stored == replay_ledger(context.store, sponsor.id, price)
                assert stored >= 0
        finally:
            context.close()


class TestConcurrencyAtomicity:
    def test_concurrent_reserves_never_overspend(self, ctx, tree, subscriber):
        budget_impressions = 5
        price = ctx.config.ads.unit_price_tsh
        sponsor = fund_sponsor(ctx, "A", budget_impressions * price)
        results = {"ok": 0, "denied": 0}
        lock = threading.Lock()

        def worker():
            try:
                ctx.ledger.reserve_request(subscriber.msisdn, tree["leaf_a1"].id)
                with lock:
                    results["ok"] += 1
            except NoActiveSponsor:
                with lock:
                    results["denied"] += 1

        threads = [threading.Thread(target=worker) for _ in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results["ok"] == budget_impressions
        assert results["denied"] == 16 - budget_impressions
        assert ctx.store.sponsor(sponsor.id).balance == 0
        charges = ctx.store.ledger_entries(sponsor.id,
                                           LedgerKind.IMPRESSION_CHARGE)
        assert len(charges) == budget_impressions
