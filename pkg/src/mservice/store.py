"""Embedded relational store.

SQLite behind a narrow interface; one connection guarded by a reentrant
lock so every operation (and every multi-step ``transaction()`` block) is
atomic and serializable. Entity tables map 1:1 to the conceptual model.
Deletions are soft: rows carry an ``active`` flag and are never removed,
which keeps the ledger and delivery log auditable.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from contextlib import contextmanager
from typing import Any, Iterator

from .errors import (
    AlreadyRegistered,
    UnknownCategory,
    UnknownEntity,
    UnknownSponsor,
    ValidationFailed,
)
from .models import (
    Ad,
    Answer,
    Category,
    ConfirmationState,
    ContentItem,
    DeliveryKind,
    DeliveryRecord,
    IntentKind,
    LedgerEntry,
    LedgerKind,
    PaymentIntent,
    PendingConfirmation,
    Question,
    QuestionStatus,
    ReceivedSms,
    RotationCursor,
    RoutedAs,
    Sponsor,
    Subscriber,
    SubscriberStatus,
    User,
    UserGroup,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS user_groups (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE,
    permissions TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS users (
    id INTEGER PRIMARY KEY,
    username TEXT NOT NULL UNIQUE,
    password_hash TEXT NOT NULL,
    group_id INTEGER NOT NULL REFERENCES user_groups(id),
    display_name TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS subscribers (
    id INTEGER PRIMARY KEY,
    msisdn TEXT NOT NULL UNIQUE,
    registered_at REAL NOT NULL,
    status TEXT NOT NULL,
    consent_ads INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS categories (
    id INTEGER PRIMARY KEY,
    parent_id INTEGER REFERENCES categories(id),
    name_sw TEXT NOT NULL,
    position INTEGER NOT NULL,
    active INTEGER NOT NULL DEFAULT 1
);
CREATE TABLE IF NOT EXISTS content (
    id INTEGER PRIMARY KEY,
    category_id INTEGER NOT NULL REFERENCES categories(id),
    body_sw TEXT NOT NULL,
    author_id INTEGER NOT NULL REFERENCES users(id),
    created_at REAL NOT NULL,
    active INTEGER NOT NULL DEFAULT 1
);
CREATE TABLE IF NOT EXISTS questions (
    id INTEGER PRIMARY KEY,
    subscriber_id INTEGER NOT NULL REFERENCES subscribers(id),
    text TEXT NOT NULL,
    received_at REAL NOT NULL,
    status TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS answers (
    id INTEGER PRIMARY KEY,
    question_id INTEGER NOT NULL REFERENCES questions(id),
    doctor_id INTEGER NOT NULL REFERENCES users(id),
    text TEXT NOT NULL,
    answered_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS received_sms (
    id INTEGER PRIMARY KEY,
    msisdn TEXT NOT NULL,
    shortcode TEXT NOT NULL,
    text TEXT NOT NULL,
    received_at REAL NOT NULL,
    routed_as TEXT NOT NULL,
    note TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS sponsors (
    id INTEGER PRIMARY KEY,
    name TEXT NOT NULL UNIQUE,
    contact TEXT NOT NULL DEFAULT '',
    balance INTEGER NOT NULL DEFAULT 0 CHECK (balance >= 0),
    active INTEGER NOT NULL DEFAULT 1
);
CREATE TABLE IF NOT EXISTS ads (
    id INTEGER PRIMARY KEY,
    sponsor_id INTEGER NOT NULL REFERENCES sponsors(id),
    body_sw TEXT NOT NULL,
    active INTEGER NOT NULL DEFAULT 1,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS confirmations (
    id INTEGER PRIMARY KEY,
    code TEXT NOT NULL,
    msisdn TEXT NOT NULL,
    category_id INTEGER NOT NULL REFERENCES categories(id),
    ad_id INTEGER NOT NULL REFERENCES ads(id),
    sponsor_id INTEGER NOT NULL REFERENCES sponsors(id),
    issued_at REAL NOT NULL,
    expires_at REAL NOT NULL,
    state TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS ledger (
    id INTEGER PRIMARY KEY,
    sponsor_id INTEGER REFERENCES sponsors(id),
    amount INTEGER NOT NULL CHECK (amount >= 0),
    kind TEXT NOT NULL,
    confirmation_id INTEGER REFERENCES confirmations(id),
    at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS deliveries (
    id INTEGER PRIMARY KEY,
    msisdn TEXT NOT NULL,
    kind TEXT NOT NULL,
    segments INTEGER NOT NULL,
    cost INTEGER NOT NULL,
    body TEXT NOT NULL,
    at REAL NOT NULL,
    correlation TEXT,
    charset_warning INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS payment_intents (
    id INTEGER PRIMARY KEY,
    msisdn TEXT NOT NULL,
    category_id INTEGER NOT NULL REFERENCES categories(id),
    amount INTEGER NOT NULL CHECK (amount >= 0),
    kind TEXT NOT NULL,
    at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS rotation (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    last_sponsor_id INTEGER,
    last_ad_ids TEXT NOT NULL DEFAULT '{}'
);
CREATE TABLE IF NOT EXISTS tokens (
    token TEXT PRIMARY KEY,
    user_id INTEGER NOT NULL REFERENCES users(id),
    issued_at REAL NOT NULL,
    expires_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS audit_log (
    id INTEGER PRIMARY KEY,
    actor TEXT NOT NULL,
    at REAL NOT NULL,
    action TEXT NOT NULL,
    entity TEXT NOT NULL,
    entity_id INTEGER,
    payload TEXT NOT NULL DEFAULT '{}'
);
"""


class Store:
    """Thread-safe persistence for all service entities."""

    def __init__(self, path: str = ":memory:"):
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(path, check_same_thread=False,
                                     isolation_level=None)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA foreign_keys = ON")
        if path != ":memory:":
            self._conn.execute("PRAGMA journal_mode = WAL")
            self._conn.execute("PRAGMA synchronous = NORMAL")
        with self.transaction():
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    @contextmanager
    def transaction(self) -> Iterator[None]:
        """Serialize a multi-step mutation; rolls back on any exception."""
        with self._lock:
            outer = not self._conn.in_transaction
            if outer:
                self._conn.execute("BEGIN IMMEDIATE")
            try:
                yield
            except BaseException:
                if outer and self._conn.in_transaction:
                    self._conn.execute("ROLLBACK")
                raise
            else:
                if outer and self._conn.in_transaction:
                    self._conn.execute("COMMIT")

    def _run(self, sql: str, params: tuple = ()) -> sqlite3.Cursor:
        with self._lock:
            return self._conn.execute(sql, params)

    def _write(self, sql: str, params: tuple = ()) -> sqlite3.Cursor:
        with self.transaction():
            return self._conn.execute(sql, params)

    def _one(self, sql: str, params: tuple = ()) -> sqlite3.Row | None:
        return self._run(sql, params).fetchone()

    def _all(self, sql: str, params: tuple = ()) -> list[sqlite3.Row]:
        return self._run(sql, params).fetchall()

    # -- user groups & users -------------------------------------------------

    def create_user_group(self, name: str, permissions: set[str] | frozenset[str],
                          *, id: int | None = None) -> UserGroup:
        if not name:
            raise ValidationFailed("group name must be non-empty")
        if not permissions:
            raise ValidationFailed("group permission set must be non-empty")
        if self._one("SELECT id FROM user_groups WHERE name = ?", (name,)):
            raise ValidationFailed(f"group name {name!r} already exists")
        cur = self._write(
            "INSERT INTO user_groups (id, name, permissions) VALUES (?, ?, ?)",
            (id, name, json.dumps(sorted(permissions))))
        return UserGroup(cur.lastrowid, name, frozenset(permissions))

    def user_group(self, group_id: int) -> UserGroup:
        row = self._one("SELECT * FROM user_groups WHERE id = ?", (group_id,))
        if row is None:
            raise UnknownEntity(f"no user group {group_id}")
        return _group(row)

    def user_group_by_name(self, name: str) -> UserGroup | None:
        row = self._one("SELECT * FROM user_groups WHERE name = ?", (name,))
        return _group(row) if row else None

    def list_user_groups(self) -> list[UserGroup]:
        return [_group(r) for r in self._all("SELECT * FROM user_groups ORDER BY id")]

    def create_user(self, username: str, password_hash: str, group_id: int,
                    display_name: str, *, id: int | None = None) -> User:
        if not username:
            raise ValidationFailed("username must be non-empty")
        if self._one("SELECT id FROM users WHERE username = ?", (username,)):
            raise ValidationFailed(f"username {username!r} already exists")
        self.user_group(group_id)  # must resolve
        cur = self._write(
            "INSERT INTO users (id, username, password_hash, group_id, display_name)"
            " VALUES (?, ?, ?, ?, ?)",
            (id, username, password_hash, group_id, display_name))
        return User(cur.lastrowid, username, password_hash, group_id, display_name)

    def user(self, user_id: int) -> User:
        row = self._one("SELECT * FROM users WHERE id = ?", (user_id,))
        if row is None:
            raise UnknownEntity(f"no user {user_id}")
        return _user(row)

    def user_by_username(self, username: str) -> User | None:
        row = self._one("SELECT * FROM users WHERE username = ?", (username,))
        return _user(row) if row else None

    def list_users(self) -> list[User]:
        return [_user(r) for r in self._all("SELECT * FROM users ORDER BY id")]

    def user_permissions(self, user_id: int) -> frozenset[str]:
        return self.user_group(self.user(user_id).group_id).permissions

    # -- subscribers -----------------------------------------------------------

    def subscriber_by_msisdn(self, msisdn: str) -> Subscriber | None:
        row = self._one("SELECT * FROM subscribers WHERE msisdn = ?", (msisdn,))
        return _subscriber(row) if row else None

    def subscriber(self, subscriber_id: int) -> Subscriber:
        row = self._one("SELECT * FROM subscribers WHERE id = ?", (subscriber_id,))
        if row is None:
            raise UnknownEntity(f"no subscriber {subscriber_id}")
        return _subscriber(row)

    def upsert_subscriber(self, msisdn: str, consent_ads: bool, at: float) -> Subscriber:
        """Register a new subscriber or reactivate an unsubscribed one."""
        with self.transaction():
            existing = self.subscriber_by_msisdn(msisdn)
            if existing is not None:
                if existing.status is SubscriberStatus.ACTIVE:
                    raise AlreadyRegistered(f"{msisdn} is already registered")
                self._run(
                    "UPDATE subscribers SET status = ?, consent_ads = ?, registered_at = ?"
                    " WHERE id = ?",
                    (SubscriberStatus.ACTIVE.value, int(consent_ads), at, existing.id))
                return self.subscriber(existing.id)
            cur = self._run(
                "INSERT INTO subscribers (msisdn, registered_at, status, consent_ads)"
                " VALUES (?, ?, ?, ?)",
                (msisdn, at, SubscriberStatus.ACTIVE.value, int(consent_ads)))
            return self.subscriber(cur.lastrowid)

    def set_subscriber_status(self, subscriber_id: int, status: SubscriberStatus) -> None:
        self.subscriber(subscriber_id)
        self._write("UPDATE subscribers SET status = ? WHERE id = ?",
                    (status.value, subscriber_id))

    def list_subscribers(self, offset: int = 0, limit: int = 100) -> list[Subscriber]:
        rows = self._all("SELECT * FROM subscribers ORDER BY id LIMIT ? OFFSET ?",
                         (limit, offset))
        return [_subscriber(r) for r in rows]

    def count_subscribers(self) -> int:
        return self._one("SELECT COUNT(*) AS n FROM subscribers WHERE status = ?",
                         (SubscriberStatus.ACTIVE.value,))["n"]

    # -- categories -------------------------------------------------------------

    def create_category(self, name_sw: str, parent_id: int | None = None,
                        position: int = 0, active: bool = True,
                        *, id: int | None = None) -> Category:
        if not name_sw:
            raise ValidationFailed("category name_sw must be non-empty")
        with self.transaction():
            if parent_id is not None:
                parent = self.category(parent_id)
                if self._one("SELECT id FROM content WHERE category_id = ? AND active = 1",
                             (parent.id,)):
                    raise ValidationFailed(
                        "cannot add a subcategory under a category that holds content")
            self._check_sibling_position(parent_id, position, exclude_id=None)
            cur = self._run(
                "INSERT INTO categories (id, parent_id, name_sw, position, active)"
                " VALUES (?, ?, ?, ?, ?)",
                (id, parent_id, name_sw, position, int(active)))
            return self.category(cur.lastrowid)

    def _check_sibling_position(self, parent_id: int | None, position: int,
                                exclude_id: int | None) -> None:
        sql = ("SELECT id FROM categories WHERE position = ? AND parent_id IS ?"
               if parent_id is None else
               "SELECT id FROM categories WHERE position = ? AND parent_id = ?")
        for row in self._all(sql, (position, parent_id)):
            if row["id"] != exclude_id:
                raise ValidationFailed(
                    f"sibling position {position} already taken under parent {parent_id}")

    def category(self, category_id: int) -> Category:
        row = self._one("SELECT * FROM categories WHERE id = ?", (category_id,))
        if row is None:
            raise UnknownCategory(f"no category {category_id}")
        return _category(row)

    def update_category(self, category_id: int, *, name_sw: str | None = None,
                        parent_id: int | None | str = "keep",
                        position: int | None = None,
                        active: bool | None = None) -> Category:
        with self.transaction():
            cat = self.category(category_id)
            new_parent = cat.parent_id if parent_id == "keep" else parent_id
            if new_parent is not None:
                self.category(new_parent)
                self._check_no_cycle(category_id, new_parent)
            new_pos = cat.position if position is None else position
            if new_parent != cat.parent_id or new_pos != cat.position:
                self._check_sibling_position(new_parent, new_pos, exclude_id=category_id)
            self._run(
                "UPDATE categories SET name_sw = ?, parent_id = ?, position = ?, active = ?"
                " WHERE id = ?",
                (name_sw if name_sw is not None else cat.name_sw,
                 new_parent, new_pos,
                 int(active if active is not None else cat.active),
                 category_id))
            return self.category(category_id)

    def _check_no_cycle(self, category_id: int, new_parent: int) -> None:
        seen = {category_id}
        cursor: int | None = new_parent
        while cursor is not None:
            if cursor in seen:
                raise ValidationFailed("category parents must form a forest (cycle)")
            seen.add(cursor)
            cursor = self.category(cursor).parent_id

    def category_children(self, parent_id: int | None,
                          active_only: bool = True) -> list[Category]:
        if parent_id is not None:
            self.category(parent_id)  # must resolve
        base = ("SELECT * FROM categories WHERE parent_id IS ?"
                if parent_id is None else
                "SELECT * FROM categories WHERE parent_id = ?")
        if active_only:
            base += " AND active = 1"
        rows = self._all(base + " ORDER BY position", (parent_id,))
        return [_category(r) for r in rows]

    def category_is_leaf(self, category_id: int) -> bool:
        return not self.category_children(category_id, active_only=True)

    def list_categories(self) -> list[Category]:
        return [_category(r) for r in
                self._all("SELECT * FROM categories ORDER BY id")]

    # -- content ------------------------------------------------------------------

    def create_content(self, category_id: int, body_sw: str, author_id: int,
                       at: float, active: bool = True,
                       *, id: int | None = None) -> ContentItem:
        cur = self._write(
            "INSERT INTO content (id, category_id, body_sw, author_id, created_at, active)"
            " VALUES (?, ?, ?, ?, ?, ?)",
            (id, category_id, body_sw, author_id, at, int(active)))
        return self.content(cur.lastrowid)

    def content(self, content_id: int) -> ContentItem:
        row = self._one("SELECT * FROM content WHERE id = ?", (content_id,))
        if row is None:
            raise UnknownEntity(f"no content {content_id}")
        return _content(row)

    def content_for_category(self, category_id: int,
                             active_only: bool = True) -> list[ContentItem]:
        sql = "SELECT * FROM content WHERE category_id = ?"
        if active_only:
            sql += " AND active = 1"
        return [_content(r) for r in self._all(sql + " ORDER BY id", (category_id,))]

    def list_content(self) -> list[ContentItem]:
        return [_content(r) for r in self._all("SELECT * FROM content ORDER BY id")]

    def update_content(self, content_id: int, *, body_sw: str | None = None,
                       active: bool | None = None) -> ContentItem:
        with self.transaction():
            item = self.content(content_id)
            self._run("UPDATE content SET body_sw = ?, active = ? WHERE id = ?",
                      (body_sw if body_sw is not None else item.body_sw,
                       int(active if active is not None else item.active),
                       content_id))
            return self.content(content_id)

    # -- questions & answers ---------------------------------------------------------

    def create_question(self, subscriber_id: int, text: str, at: float) -> Question:
        self.subscriber(subscriber_id)
        cur = self._write(
            "INSERT INTO questions (subscriber_id, text, received_at, status)"
            " VALUES (?, ?, ?, ?)",
            (subscriber_id, text, at, QuestionStatus.OPEN.value))
        return self.question(cur.lastrowid)

    def question(self, question_id: int) -> Question:
        row = self._one("SELECT * FROM questions WHERE id = ?", (question_id,))
        if row is None:
            raise UnknownEntity(f"no question {question_id}")
        return _question(row)

    def list_questions(self, status: QuestionStatus | None = None) -> list[Question]:
        if status is None:
            rows = self._all("SELECT * FROM questions ORDER BY id")
        else:
            rows = self._all("SELECT * FROM questions WHERE status = ? ORDER BY id",
                             (status.value,))
        return [_question(r) for r in rows]

    def count_open_questions(self) -> int:
        return self._one("SELECT COUNT(*) AS n FROM questions WHERE status = ?",
                         (QuestionStatus.OPEN.value,))["n"]

    def set_question_status(self, question_id: int, status: QuestionStatus) -> None:
        self.question(question_id)
        self._write("UPDATE questions SET status = ? WHERE id = ?",
                    (status.value, question_id))

    def create_answer(self, question_id: int, doctor_id: int, text: str,
                      at: float) -> Answer:
        cur = self._write(
            "INSERT INTO answers (question_id, doctor_id, text, answered_at)"
            " VALUES (?, ?, ?, ?)",
            (question_id, doctor_id, text, at))
        row = self._one("SELECT * FROM answers WHERE id = ?", (cur.lastrowid,))
        return Answer(row["id"], row["question_id"], row["doctor_id"],
                      row["text"], row["answered_at"])

    def answers_for_question(self, question_id: int) -> list[Answer]:
        rows = self._all("SELECT * FROM answers WHERE question_id = ? ORDER BY id",
                         (question_id,))
        return [Answer(r["id"], r["question_id"], r["doctor_id"], r["text"],
                       r["answered_at"]) for r in rows]

    # -- inbound sms log --------------------------------------------------------------

    def log_received_sms(self, msisdn: str, shortcode: str, text: str, at: float,
                         routed_as: RoutedAs, note: str = "") -> ReceivedSms:
        cur = self._write(
            "INSERT INTO received_sms (msisdn, shortcode, text, received_at, routed_as, note)"
            " VALUES (?, ?, ?, ?, ?, ?)",
            (msisdn, shortcode, text, at, routed_as.value, note))
        row = self._one("SELECT * FROM received_sms WHERE id = ?", (cur.lastrowid,))
        return _received(row)

    def received_sms_log(self) -> list[ReceivedSms]:
        return [_received(r) for r in
                self._all("SELECT * FROM received_sms ORDER BY id")]

    # -- sponsors & ads ------------------------------------------------------------------

    def create_sponsor(self, name: str, contact: str = "", balance: int = 0,
                       active: bool = True, *, id: int | None = None) -> Sponsor:
        if not name:
            raise ValidationFailed("sponsor name must be non-empty")
        if balance < 0:
            raise ValidationFailed("sponsor balance must be non-negative")
        if self._one("SELECT id FROM sponsors WHERE name = ?", (name,)):
            raise ValidationFailed(f"sponsor name {name!r} already exists")
        cur = self._write(
            "INSERT INTO sponsors (id, name, contact, balance, active)"
            " VALUES (?, ?, ?, ?, ?)",
            (id, name, contact, balance, int(active)))
        return self.sponsor(cur.lastrowid)

    def sponsor(self, sponsor_id: int) -> Sponsor:
        row = self._one("SELECT * FROM sponsors WHERE id = ?", (sponsor_id,))
        if row is None:
            raise UnknownSponsor(f"no sponsor {sponsor_id}")
        return _sponsor(row)

    def sponsor_by_name(self, name: str) -> Sponsor | None:
        row = self._one("SELECT * FROM sponsors WHERE name = ?", (name,))
        return _sponsor(row) if row else None

    def list_sponsors(self, active_only: bool = False) -> list[Sponsor]:
        sql = "SELECT * FROM sponsors"
        if active_only:
            sql += " WHERE active = 1"
        return [_sponsor(r) for r in self._all(sql + " ORDER BY id")]

    def update_sponsor(self, sponsor_id: int, *, name: str | None = None,
                       contact: str | None = None,
                       active: bool | None = None) -> Sponsor:
        with self.transaction():
            sp = self.sponsor(sponsor_id)
            self._run("UPDATE sponsors SET name = ?, contact = ?, active = ? WHERE id = ?",
                      (name if name is not None else sp.name,
                       contact if contact is not None else sp.contact,
                       int(active if active is not None else sp.active),
                       sponsor_id))
            return self.sponsor(sponsor_id)

    def adjust_sponsor_balance(self, sponsor_id: int, delta: int) -> int:
        """Atomically apply a balance change; rejects results below zero."""
        with self.transaction():
            sp = self.sponsor(sponsor_id)
            new_balance = sp.balance + delta
            if new_balance < 0:
                raise ValidationFailed(
                    f"sponsor {sponsor_id} balance may not go negative")
            self._run("UPDATE sponsors SET balance = ? WHERE id = ?",
                      (new_balance, sponsor_id))
            return new_balance

    def create_ad(self, sponsor_id: int, body_sw: str, at: float,
                  active: bool = True, *, id: int | None = None) -> Ad:
        if not body_sw:
            raise ValidationFailed("ad body_sw must be non-empty")
        self.sponsor(sponsor_id)
        cur = self._write(
            "INSERT INTO ads (id, sponsor_id, body_sw, active, created_at)"
            " VALUES (?, ?, ?, ?, ?)",
            (id, sponsor_id, body_sw, int(active), at))
        return self.ad(cur.lastrowid)

    def ad(self, ad_id: int) -> Ad:
        row = self._one("SELECT * FROM ads WHERE id = ?", (ad_id,))
        if row is None:
            raise UnknownEntity(f"no ad {ad_id}")
        return _ad(row)

    def ads_for_sponsor(self, sponsor_id: int, active_only: bool = True) -> list[Ad]:
        sql = "SELECT * FROM ads WHERE sponsor_id = ?"
        if active_only:
            sql += " AND active = 1"
        return [_ad(r) for r in self._all(sql + " ORDER BY id", (sponsor_id,))]

    def list_ads(self) -> list[Ad]:
        return [_ad(r) for r in self._all("SELECT * FROM ads ORDER BY id")]

    def update_ad(self, ad_id: int, *, body_sw: str | None = None,
                  active: bool | None = None) -> Ad:
        with self.transaction():
            ad = self.ad(ad_id)
            self._run("UPDATE ads SET body_sw = ?, active = ? WHERE id = ?",
                      (body_sw if body_sw is not None else ad.body_sw,
                       int(active if active is not None else ad.active), ad_id))
            return self.ad(ad_id)

    # -- confirmations ----------------------------------------------------------------------

    def create_confirmation(self, code: str, msisdn: str, category_id: int,
                            ad_id: int, sponsor_id: int, issued_at: float,
                            expires_at: float) -> PendingConfirmation:
        cur = self._write(
            "INSERT INTO confirmations (code, msisdn, category_id, ad_id, sponsor_id,"
            " issued_at, expires_at, state) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
            (code, msisdn, category_id, ad_id, sponsor_id, issued_at, expires_at,
             ConfirmationState.PENDING.value))
        return self.confirmation(cur.lastrowid)

    def confirmation(self, confirmation_id: int) -> PendingConfirmation:
        row = self._one("SELECT * FROM confirmations WHERE id = ?", (confirmation_id,))
        if row is None:
            raise UnknownEntity(f"no confirmation {confirmation_id}")
        return _confirmation(row)

    def pending_confirmation_by_code(self, code: str) -> PendingConfirmation | None:
        row = self._one("SELECT * FROM confirmations WHERE code = ? AND state = ?",
                        (code, ConfirmationState.PENDING.value))
        return _confirmation(row) if row else None

    def set_confirmation_state(self, confirmation_id: int,
                               state: ConfirmationState) -> None:
        self.confirmation(confirmation_id)
        self._write("UPDATE confirmations SET state = ? WHERE id = ?",
                    (state.value, confirmation_id))

    def list_confirmations(self) -> list[PendingConfirmation]:
        return [_confirmation(r) for r in
                self._all("SELECT * FROM confirmations ORDER BY id")]

    # -- ledger ---------------------------------------------------------------------------------

    def append_ledger(self, sponsor_id: int | None, amount: int, kind: LedgerKind,
                      at: float, confirmation_id: int | None = None) -> LedgerEntry:
        cur = self._write(
            "INSERT INTO ledger (sponsor_id, amount, kind, confirmation_id, at)"
            " VALUES (?, ?, ?, ?, ?)",
            (sponsor_id, amount, kind.value, confirmation_id, at))
        row = self._one("SELECT * FROM ledger WHERE id = ?", (cur.lastrowid,))
        return _ledger(row)

    def ledger_entries(self, sponsor_id: int | None = None,
                       kind: LedgerKind | None = None,
                       since: float | None = None,
                       until: float | None = None) -> list[LedgerEntry]:
        sql, params = "SELECT * FROM ledger WHERE 1=1", []
        if sponsor_id is not None:
            sql += " AND sponsor_id = ?"
            params.append(sponsor_id)
        if kind is not None:
            sql += " AND kind = ?"
            params.append(kind.value)
        if since is not None:
            sql += " AND at >= ?"
            params.append(since)
        if until is not None:
            sql += " AND at <= ?"
            params.append(until)
        return [_ledger(r) for r in self._all(sql + " ORDER BY id", tuple(params))]

    # -- deliveries ---------------------------------------------------------------------------------

    def append_delivery(self, msisdn: str, kind: DeliveryKind, segments: int,
                        cost: int, body: str, at: float,
                        correlation: str | None = None,
                        charset_warning: bool = False) -> DeliveryRecord:
        cur = self._write(
            "INSERT INTO deliveries (msisdn, kind, segments, cost, body, at,"
            " correlation, charset_warning) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
            (msisdn, kind.value, segments, cost, body, at, correlation,
             int(charset_warning)))
        row = self._one("SELECT * FROM deliveries WHERE id = ?", (cur.lastrowid,))
        return _delivery(row)

    def deliveries(self, msisdn: str | None = None,
                   kind: DeliveryKind | None = None,
                   since: float | None = None,
                   until: float | None = None) -> list[DeliveryRecord]:
        sql, params = "SELECT * FROM deliveries WHERE 1=1", []
        if msisdn is not None:
            sql += " AND msisdn = ?"
            params.append(msisdn)
        if kind is not None:
            sql += " AND kind = ?"
            params.append(kind.value)
        if since is not None:
            sql += " AND at >= ?"
            params.append(since)
        if until is not None:
            sql += " AND at <= ?"
            params.append(until)
        return [_delivery(r) for r in self._all(sql + " ORDER BY id", tuple(params))]

    # -- payment intents -------------------------------------------------------------------------------

    def create_payment_intent(self, msisdn: str, category_id: int, amount: int,
                              kind: IntentKind, at: float) -> PaymentIntent:
        cur = self._write(
            "INSERT INTO payment_intents (msisdn, category_id, amount, kind, at)"
            " VALUES (?, ?, ?, ?, ?)",
            (msisdn, category_id, amount, kind.value, at))
        row = self._one("SELECT * FROM payment_intents WHERE id = ?", (cur.lastrowid,))
        return PaymentIntent(row["id"], row["msisdn"], row["category_id"],
                             row["amount"], IntentKind(row["kind"]), row["at"])

    def list_payment_intents(self) -> list[PaymentIntent]:
        return [PaymentIntent(r["id"], r["msisdn"], r["category_id"], r["amount"],
                              IntentKind(r["kind"]), r["at"])
                for r in self._all("SELECT * FROM payment_intents ORDER BY id")]

    # -- rotation cursor ----------------------------------------------------------------------------------

    def rotation_cursor(self) -> RotationCursor:
        row = self._one("SELECT * FROM rotation WHERE id = 1")
        if row is None:
            return RotationCursor()
        last_ads = {int(k): v for k, v in json.loads(row["last_ad_ids"]).items()}
        return RotationCursor(row["last_sponsor_id"], last_ads)

    def save_rotation_cursor(self, cursor: RotationCursor) -> None:
        self._write(
            "INSERT INTO rotation (id, last_sponsor_id, last_ad_ids) VALUES (1, ?, ?)"
            " ON CONFLICT(id) DO UPDATE SET last_sponsor_id = excluded.last_sponsor_id,"
            " last_ad_ids = excluded.last_ad_ids",
            (cursor.last_sponsor_id,
             json.dumps({str(k): v for k, v in cursor.last_ad_ids.items()})))

    # -- auth tokens ---------------------------------------------------------------------------------------

    def create_token(self, token: str, user_id: int, issued_at: float,
                     expires_at: float) -> None:
        self._write(
            "INSERT INTO tokens (token, user_id, issued_at, expires_at)"
            " VALUES (?, ?, ?, ?)", (token, user_id, issued_at, expires_at))

    def token(self, token: str) -> tuple[int, float] | None:
        """Return (user_id, expires_at) for a token, if present."""
        row = self._one("SELECT * FROM tokens WHERE token = ?", (token,))
        return (row["user_id"], row["expires_at"]) if row else None

    # -- audit log ------------------------------------------------------------------------------------------

    def append_audit(self, actor: str, action: str, entity: str,
                     entity_id: int | None, payload: dict[str, Any],
                     at: float) -> None:
        self._write(
            "INSERT INTO audit_log (actor, at, action, entity, entity_id, payload)"
            " VALUES (?, ?, ?, ?, ?, ?)",
            (actor, at, action, entity, entity_id, json.dumps(payload, sort_keys=True)))

    def audit_entries(self) -> list[dict[str, Any]]:
        return [{"id": r["id"], "actor": r["actor"], "at": r["at"],
                 "action": r["action"], "entity": r["entity"],
                 "entity_id": r["entity_id"], "payload": json.loads(r["payload"])}
                for r in self._all("SELECT * FROM audit_log ORDER BY id")]


# -- row mappers ------------------------------------------------------------

def _group(row: sqlite3.Row) -> UserGroup:
    return UserGroup(row["id"], row["name"], frozenset(json.loads(row["permissions"])))


def _user(row: sqlite3.Row) -> User:
    return User(row["id"], row["username"], row["password_hash"],
                row["group_id"], row["display_name"])


def _subscriber(row: sqlite3.Row) -> Subscriber:
    return Subscriber(row["id"], row["msisdn"], row["registered_at"],
                      SubscriberStatus(row["status"]), bool(row["consent_ads"]))


def _category(row: sqlite3.Row) -> Category:
    return Category(row["id"], row["parent_id"], row["name_sw"],
                    row["position"], bool(row["active"]))


def _content(row: sqlite3.Row) -> ContentItem:
    return ContentItem(row["id"], row["category_id"], row["body_sw"],
                       row["author_id"], row["created_at"], bool(row["active"]))


def _question(row: sqlite3.Row) -> Question:
    return Question(row["id"], row["subscriber_id"], row["text"],
                    row["received_at"], QuestionStatus(row["status"]))


def _received(row: sqlite3.Row) -> ReceivedSms:
    return ReceivedSms(row["id"], row["msisdn"], row["shortcode"], row["text"],
                       row["received_at"], RoutedAs(row["routed_as"]), row["note"])


def _sponsor(row: sqlite3.Row) -> Sponsor:
    return Sponsor(row["id"], row["name"], row["contact"], row["balance"],
                   bool(row["active"]))


def _ad(row: sqlite3.Row) -> Ad:
    return Ad(row["id"], row["sponsor_id"], row["body_sw"], bool(row["active"]),
              row["created_at"])


def _confirmation(row: sqlite3.Row) -> PendingConfirmation:
    return PendingConfirmation(row["id"], row["code"], row["msisdn"],
                               row["category_id"], row["ad_id"], row["sponsor_id"],
                               row["issued_at"], row["expires_at"],
                               ConfirmationState(row["state"]))


def _ledger(row: sqlite3.Row) -> LedgerEntry:
    return LedgerEntry(row["id"], row["sponsor_id"], row["amount"],
                       LedgerKind(row["kind"]), row["confirmation_id"], row["at"])


def _delivery(row: sqlite3.Row) -> DeliveryRecord:
    return DeliveryRecord(row["id"], row["msisdn"], DeliveryKind(row["kind"]),
                          row["segments"], row["cost"], row["body"], row["at"],
                          row["correlation"], bool(row["charset_warning"]))
