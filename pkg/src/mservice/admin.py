"""Staff-facing service: authentication, role-gated CRUD, reports.

Administrators manage users, sponsors, ads, categories, and reports;
doctors manage content and answer questions. Every mutation is written
to the audit log with a payload snapshot, so replaying the log against a
fresh store converges to the same entity state.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from typing import TYPE_CHECKING, Any

from .errors import BadCredentials, Forbidden, ValidationFailed
from .models import (
    ALL_PERMISSIONS,
    Ad,
    Category,
    ContentItem,
    LedgerKind,
    Sponsor,
    User,
    UserGroup,
)

if TYPE_CHECKING:
    from .adledger import AdLedger
    from .catalog import ContentCatalog
    from .config import Config
    from .gateway import SmsOutbox
    from .store import Store

_PBKDF2_ITERATIONS = 60_000


def hash_password(password: str, salt: str | None = None) -> str:
    if salt is None:
        salt = secrets.token_hex(8)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), bytes.fromhex(salt),
                                 _PBKDF2_ITERATIONS)
    return f"pbkdf2${_PBKDF2_ITERATIONS}${salt}${digest.hex()}"


def verify_password(stored: str, password: str) -> bool:
    try:
        _, iterations, salt, expected = stored.split("$")
        digest = hashlib.pbkdf2_hmac("sha256", password.encode(),
                                     bytes.fromhex(salt), int(iterations))
    except (ValueError, TypeError):
        return False
    return hmac.compare_digest(digest.hex(), expected)


class AdminService:
    def __init__(self, store: "Store", config: "Config", ledger: "AdLedger",
                 catalog: "ContentCatalog", outbox: "SmsOutbox", clock):
        self._store = store
        self._cfg = config
        self._ledger = ledger
        self._catalog = catalog
        self._outbox = outbox
        self._clock = clock

    # -- authentication ----------------------------------------------------------

    def login(self, username: str, password: str) -> dict[str, Any]:
        user = self._store.user_by_username(username)
        # uniform failure for unknown user and wrong password
        stored = user.password_hash if user else hash_password("invalid")
        if not verify_password(stored, password) or user is None:
            raise BadCredentials("unknown username or wrong password")
        token = secrets.token_hex(16)
        now = self._clock()
        expires = now + self._cfg.admin.token_ttl_s
        self._store.create_token(token, user.id, now, expires)
        group = self._store.user_group(user.group_id)
        return {
            "token": token,
            "expires_at": expires,
            "username": user.username,
            "display_name": user.display_name,
            "group": group.name,
            "permissions": sorted(group.permissions),
        }

    def authenticate(self, token: str | None) -> User:
        if not token:
            raise BadCredentials("missing bearer token")
        found = self._store.token(token)
        if found is None:
            raise BadCredentials("unknown token")
        user_id, expires_at = found
        if self._clock() >= expires_at:
            raise BadCredentials("token expired")
        return self._store.user(user_id)

    def require(self, user: User, permission: str) -> None:
        if permission not in self._store.user_permissions(user.id):
            raise Forbidden(f"{user.username!r} lacks {permission!r}")

    # -- user & group management -----------------------------------------------------

    def create_user_group(self, actor: User, name: str,
                          permissions: list[str]) -> UserGroup:
        self.require(actor, "manage_groups")
        unknown = set(permissions) - ALL_PERMISSIONS
        if unknown:
            raise ValidationFailed(f"unknown permissions: {sorted(unknown)}")
        group = self._store.create_user_group(name, set(permissions))
        self._audit(actor, "create", "user_group", group.id,
                    {"id": group.id, "name": name,
                     "permissions": sorted(permissions)})
        return group

    def create_user(self, actor: User, username: str, password: str,
                    group_name: str, display_name: str = "") -> User:
        self.require(actor, "manage_users")
        group = self._store.user_group_by_name(group_name)
        if group is None:
            raise ValidationFailed(f"unknown group {group_name!r}")
        user = self._store.create_user(username, hash_password(password),
                                       group.id, display_name or username)
        self._audit(actor, "create", "user", user.id,
                    {"id": user.id, "username": username,
                     "password_hash": user.password_hash,
                     "group_id": group.id, "display_name": user.display_name})
        return user

    # -- sponsors & ads ------------------------------------------------------------------

    def create_sponsor(self, actor: User, name: str, contact: str = "",
                       balance: int = 0) -> Sponsor:
        self.require(actor, "manage_sponsors")
        if not isinstance(balance, int) or isinstance(balance, bool) or balance < 0:
            raise ValidationFailed("initial balance must be a non-negative integer")
        with self._store.transaction():
            sponsor = self._store.create_sponsor(name, contact, balance=0)
            if balance > 0:
                # seed funding goes through the ledger so conservation holds
                self._ledger.deposit(sponsor.id, balance)
                sponsor = self._store.sponsor(sponsor.id)
        self._audit(actor, "create", "sponsor", sponsor.id,
                    {"id": sponsor.id, "name": name, "contact": contact,
                     "balance": balance, "at": self._clock()})
        return sponsor

    def update_sponsor(self, actor: User, sponsor_id: int, *,
                       name: str | None = None, contact: str | None = None,
                       active: bool | None = None) -> Sponsor:
        self.require(actor, "manage_sponsors")
        sponsor = self._store.update_sponsor(sponsor_id, name=name,
                                             contact=contact, active=active)
        self._audit(actor, "update", "sponsor", sponsor_id,
                    {"id": sponsor_id, "name": sponsor.name,
                     "contact": sponsor.contact, "active": sponsor.active})
        return sponsor

    def deactivate_sponsor(self, actor: User, sponsor_id: int) -> Sponsor:
        return self.update_sponsor(actor, sponsor_id, active=False)

    def deposit(self, actor: User, sponsor_id: int, amount: int) -> int:
        self.require(actor, "manage_sponsors")
        balance = self._ledger.deposit(sponsor_id, amount)
        self._audit(actor, "deposit", "sponsor", sponsor_id,
                    {"sponsor_id": sponsor_id, "amount": amount,
                     "at": self._clock()})
        return balance

    def create_ad(self, actor: User, sponsor_id: int, body_sw: str) -> Ad:
        self.require(actor, "manage_ads")
        limit = self._cfg.ads.max_body_chars
        if len(body_sw) > limit:
            raise ValidationFailed(
                f"ad body is {len(body_sw)} chars; maximum {limit} leaves room"
                f" for the confirmation code in one SMS segment")
        ad = self._store.create_ad(sponsor_id, body_sw, self._clock())
        self._audit(actor, "create", "ad", ad.id,
                    {"id": ad.id, "sponsor_id": sponsor_id, "body_sw": body_sw,
                     "created_at": ad.created_at})
        return ad

    def update_ad(self, actor: User, ad_id: int, *, body_sw: str | None = None,
                  active: bool | None = None) -> Ad:
        self.require(actor, "manage_ads")
        if body_sw is not None and len(body_sw) > self._cfg.ads.max_body_chars:
            raise ValidationFailed(f"ad body exceeds {self._cfg.ads.max_body_chars} chars")
        ad = self._store.update_ad(ad_id, body_sw=body_sw, active=active)
        self._audit(actor, "update", "ad", ad_id,
                    {"id": ad_id, "body_sw": ad.body_sw, "active": ad.active})
        return ad

    # -- categories --------------------------------------------------------------------------

    def create_category(self, actor: User, name_sw: str,
                        parent_id: int | None = None, position: int = 0) -> Category:
        self.require(actor, "manage_categories")
        category = self._store.create_category(name_sw, parent_id, position)
        self._audit(actor, "create", "category", category.id,
                    {"id": category.id, "name_sw": name_sw,
                     "parent_id": parent_id, "position": position})
        return category

    def update_category(self, actor: User, category_id: int, **fields) -> Category:
        self.require(actor, "manage_categories")
        category = self._store.update_category(category_id, **fields)
        self._audit(actor, "update", "category", category_id,
                    {"id": category_id, "name_sw": category.name_sw,
                     "parent_id": category.parent_id,
                     "position": category.position, "active": category.active})
        return category

    # -- doctor surface -----------------------------------------------------------------------

    def add_content(self, actor: User, category_id: int,
                    body_sw: str) -> tuple[ContentItem, list[str]]:
        item, warnings = self._catalog.add_content(actor, category_id, body_sw)
        self._audit(actor, "create", "content", item.id,
                    {"id": item.id, "category_id": category_id,
                     "body_sw": item.body_sw, "author_id": actor.id,
                     "created_at": item.created_at})
        return item, warnings

    def answer_question(self, actor: User, question_id: int, text: str):
        answer = self._catalog.answer_question(actor, question_id, text)
        self._audit(actor, "create", "answer", answer.id,
                    {"id": answer.id, "question_id": question_id,
                     "doctor_id": actor.id, "text": text,
                     "answered_at": answer.answered_at})
        return answer

    # -- reports -------------------------------------------------------------------------------

    def dashboard(self, actor: User) -> dict[str, Any]:
        self.require(actor, "view_reports")
        impressions = self._ledger.impression_report()
        costs = self._outbox.cost_report()
        return {
            "subscribers": self._store.count_subscribers(),
            "open_questions": self._store.count_open_questions(),
            "sponsors": [{"id": r["sponsor_id"], "name": r["sponsor"],
                          "balance": r["remaining"],
                          "impressions": r["impressions"], "spend": r["spend"]}
                         for r in impressions],
            "impressions": sum(r["impressions"] for r in impressions),
            "sms_cost": costs["total_cost"],
        }

    def _audit(self, actor: User, action: str, entity: str, entity_id: int,
               payload: dict[str, Any]) -> None:
        self._store.append_audit(actor.username, action, entity, entity_id,
                                 payload, self._clock())


def replay_audit_entry(store: "Store", ledger: "AdLedger",
                       entry: dict[str, Any]) -> None:
    """Re-apply one audit entry against a fresh store (id-preserving).

    Supports the mutation vocabulary written by AdminService; used to
    verify that the audit log fully determines entity state.
    """
    action, entity, payload = entry["action"], entry["entity"], entry["payload"]
    key = (action, entity)
    if key == ("create", "user_group"):
        store.create_user_group(payload["name"], set(payload["permissions"]),
                                id=payload["id"])
    elif key == ("create", "user"):
        store.create_user(payload["username"], payload["password_hash"],
                          payload["group_id"], payload["display_name"],
                          id=payload["id"])
    elif key == ("create", "sponsor"):
        store.create_sponsor(payload["name"], payload["contact"], balance=0,
                             id=payload["id"])
        if payload["balance"] > 0:
            store.adjust_sponsor_balance(payload["id"], payload["balance"])
            store.append_ledger(payload["id"], payload["balance"],
                                LedgerKind.DEPOSIT, payload["at"])
    elif key == ("update", "sponsor"):
        store.update_sponsor(payload["id"], name=payload["name"],
                             contact=payload["contact"], active=payload["active"])
    elif key == ("deposit", "sponsor"):
        store.adjust_sponsor_balance(payload["sponsor_id"], payload["amount"])
        store.append_ledger(payload["sponsor_id"], payload["amount"],
                            LedgerKind.DEPOSIT, payload["at"])
    elif key == ("create", "ad"):
        store.create_ad(payload["sponsor_id"], payload["body_sw"],
                        payload["created_at"], id=payload["id"])
    elif key == ("update", "ad"):
        store.update_ad(payload["id"], body_sw=payload["body_sw"],
                        active=payload["active"])
    elif key == ("create", "category"):
        store.create_category(payload["name_sw"], payload["parent_id"],
                              payload["position"], id=payload["id"])
    elif key == ("update", "category"):
        store.update_category(payload["id"], name_sw=payload["name_sw"],
                              parent_id=payload["parent_id"],
                              position=payload["position"],
                              active=payload["active"])
    elif key == ("create", "content"):
        store.create_content(payload["category_id"], payload["body_sw"],
                             payload["author_id"], payload["created_at"],
                             id=payload["id"])
    else:
        raise ValidationFailed(f"cannot replay audit entry {key}")
