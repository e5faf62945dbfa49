"""Seed fixture loading.

Fixtures are JSON documents upserted by natural key (group/user/sponsor
names, category names, subscriber MSISDNs), so seeding is idempotent:
running it twice leaves the store unchanged. Category names must be
unique across the whole tree because content and ads reference them by
name.

Schema (all sections optional)::

    {
      "user_groups": [{"name": str, "permissions": [str, ...]}],
      "users":       [{"username": str, "password": str, "group": str,
                       "display_name": str?}],
      "categories":  [{"name": str, "parent": str|null, "position": int?}],
      "content":     [{"category": str, "body": str, "author": str}],
      "sponsors":    [{"name": str, "contact": str?, "balance": int?}],
      "ads":         [{"sponsor": str, "body": str}],
      "subscribers": [{"msisdn": str, "consent_ads": bool?}]
    }
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .admin import hash_password
from .errors import FixtureInvalid, MalformedMsisdn
from .models import LedgerKind, validate_msisdn

_SECTIONS = ("user_groups", "users", "categories", "content", "sponsors",
             "ads", "subscribers")


def load_fixture(path: str | Path) -> dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise FixtureInvalid(f"fixture file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FixtureInvalid(f"fixture is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FixtureInvalid("fixture root must be an object")
    for key in data:
        if key not in _SECTIONS:
            raise FixtureInvalid(f"unknown fixture section {key!r}")
    return data


def apply_fixture(ctx, data: dict[str, Any]) -> dict[str, int]:
    """Upsert fixture entities; returns per-section created counts."""
    counts = {key: 0 for key in _SECTIONS}
    store = ctx.store
    with store.transaction():
        for i, row in enumerate(data.get("user_groups", [])):
            name = _need(row, "name", f"user_groups[{i}]")
            perms = _need(row, "permissions", f"user_groups[{i}]")
            if store.user_group_by_name(name) is None:
                store.create_user_group(name, set(perms))
                counts["user_groups"] += 1
        for i, row in enumerate(data.get("users", [])):
            username = _need(row, "username", f"users[{i}]")
            if store.user_by_username(username) is not None:
                continue
            group = store.user_group_by_name(_need(row, "group", f"users[{i}]"))
            if group is None:
                raise FixtureInvalid(f"users[{i}]: unknown group {row['group']!r}")
            store.create_user(username,
                              hash_password(_need(row, "password", f"users[{i}]")),
                              group.id, row.get("display_name", username))
            counts["users"] += 1
        counts["categories"] = _apply_categories(store, data.get("categories", []))
        for i, row in enumerate(data.get("sponsors", [])):
            name = _need(row, "name", f"sponsors[{i}]")
            if store.sponsor_by_name(name) is not None:
                continue
            balance = row.get("balance", 0)
            if not isinstance(balance, int) or balance < 0:
                raise FixtureInvalid(f"sponsors[{i}].balance must be a"
                                     f" non-negative integer")
            sponsor = store.create_sponsor(name, row.get("contact", ""), balance=0)
            if balance > 0:
                store.adjust_sponsor_balance(sponsor.id, balance)
                store.append_ledger(sponsor.id, balance, LedgerKind.DEPOSIT,
                                    ctx.now())
            counts["sponsors"] += 1
        for i, row in enumerate(data.get("ads", [])):
            sponsor = store.sponsor_by_name(_need(row, "sponsor", f"ads[{i}]"))
            if sponsor is None:
                raise FixtureInvalid(f"ads[{i}]: unknown sponsor {row['sponsor']!r}")
            body = _need(row, "body", f"ads[{i}]")
            if len(body) > ctx.config.ads.max_body_chars:
                raise FixtureInvalid(
                    f"ads[{i}].body exceeds {ctx.config.ads.max_body_chars} chars")
            if any(ad.body_sw == body for ad in
                   store.ads_for_sponsor(sponsor.id, active_only=False)):
                continue
            store.create_ad(sponsor.id, body, ctx.now())
            counts["ads"] += 1
        for i, row in enumerate(data.get("content", [])):
            counts["content"] += _apply_content(ctx, store, row, i)
        for i, row in enumerate(data.get("subscribers", [])):
            raw = _need(row, "msisdn", f"subscribers[{i}]")
            try:
                msisdn = validate_msisdn(raw)
            except MalformedMsisdn as exc:
                raise FixtureInvalid(f"subscribers[{i}].msisdn: {exc.detail}") from exc
            if store.subscriber_by_msisdn(msisdn) is None:
                store.upsert_subscriber(msisdn, bool(row.get("consent_ads", True)),
                                        ctx.now())
                counts["subscribers"] += 1
    return counts


def _apply_categories(store, rows: list[dict]) -> int:
    created = 0
    by_name: dict[str, dict] = {}
    for i, row in enumerate(rows):
        name = _need(row, "name", f"categories[{i}]")
        if name in by_name:
            raise FixtureInvalid(f"categories[{i}]: duplicate name {name!r}")
        by_name[name] = row
    # run parent chains to reject cycles before touching the store
    for name, row in by_name.items():
        seen = {name}
        parent = row.get("parent")
        while parent is not None:
            if parent in seen:
                raise FixtureInvalid(f"categories: cycle through {parent!r}")
            seen.add(parent)
            if parent not in by_name:
                break  # parent must already exist in the store
            parent = by_name[parent].get("parent")

    existing = {c.name_sw: c for c in store.list_categories()}
    pending = dict(by_name)
    while pending:
        progressed = False
        for name in list(pending):
            row = pending[name]
            parent_name = row.get("parent")
            if parent_name is not None and parent_name not in existing:
                continue
            if name not in existing:
                parent_id = existing[parent_name].id if parent_name else None
                position = row.get("position", _next_position(store, parent_id))
                cat = store.create_category(name, parent_id, position)
                existing[name] = cat
                created += 1
            del pending[name]
            progressed = True
        if not progressed:
            missing = sorted(pending)
            raise FixtureInvalid(f"categories: unresolved parents for {missing}")
    return created


def _next_position(store, parent_id) -> int:
    siblings = store.category_children(parent_id, active_only=False)
    return max((c.position for c in siblings), default=-1) + 1


def _apply_content(ctx, store, row: dict, i: int) -> int:
    category_name = _need(row, "category", f"content[{i}]")
    category = next((c for c in store.list_categories()
                     if c.name_sw == category_name), None)
    if category is None:
        raise FixtureInvalid(f"content[{i}]: unknown category {category_name!r}")
    if not store.category_is_leaf(category.id):
        raise FixtureInvalid(f"content[{i}]: category {category_name!r} is not a leaf")
    author = store.user_by_username(_need(row, "author", f"content[{i}]"))
    if author is None:
        raise FixtureInvalid(f"content[{i}]: unknown author {row['author']!r}")
    if "manage_content" not in store.user_permissions(author.id):
        raise FixtureInvalid(f"content[{i}]: author {row['author']!r} is not a doctor")
    body = _need(row, "body", f"content[{i}]")
    if any(c.body_sw == body for c in
           store.content_for_category(category.id, active_only=False)):
        return 0
    store.create_content(category.id, body, author.id, ctx.now())
    return 1


def _need(row: dict, key: str, where: str):
    if not isinstance(row, dict) or key not in row:
        raise FixtureInvalid(f"{where}: missing field {key!r}")
    return row[key]
