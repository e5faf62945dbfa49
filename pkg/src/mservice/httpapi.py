"""HTTP surface: the simulated telco wire under /sim and the staff API
under /api/v1. All payloads are UTF-8 JSON; errors share the envelope
``{"error": <code>, "detail": <text>}``.
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    AlreadyAnswered,
    AlreadyRegistered,
    BadCredentials,
    Forbidden,
    MServiceError,
    NotADoctor,
    UnknownCategory,
    UnknownEntity,
    UnknownQuestion,
    UnknownSponsor,
)
from .models import QuestionStatus, User
from .service import ServiceContext

_STATUS = {
    BadCredentials: 401,
    Forbidden: 403,
    NotADoctor: 403,
    UnknownEntity: 404,
    UnknownSponsor: 404,
    UnknownCategory: 404,
    UnknownQuestion: 404,
    AlreadyRegistered: 409,
    AlreadyAnswered: 409,
}


def _status_for(exc: MServiceError) -> int:
    return _STATUS.get(type(exc), 400)


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat(timespec="seconds")


def _parse_ts(raw: str | None) -> float | None:
    """Accept epoch seconds or ISO-8601."""
    if raw is None or raw == "":
        return None
    try:
        return float(raw)
    except ValueError:
        return datetime.fromisoformat(raw).timestamp()


class UssdRequest(BaseModel):
    msisdn: str
    session: str | None = None
    text: str


class SmsRequest(BaseModel):
    msisdn: str
    shortcode: str
    text: str


class LoginRequest(BaseModel):
    username: str
    password: str


class GroupCreate(BaseModel):
    name: str
    permissions: list[str]


class UserCreate(BaseModel):
    username: str
    password: str
    group: str
    display_name: str = ""


class SponsorCreate(BaseModel):
    name: str
    contact: str = ""
    balance: int = 0


class SponsorPatch(BaseModel):
    name: str | None = None
    contact: str | None = None
    active: bool | None = None


class DepositRequest(BaseModel):
    amount: int


class AdCreate(BaseModel):
    sponsor_id: int
    body_sw: str


class AdPatch(BaseModel):
    body_sw: str | None = None
    active: bool | None = None


class CategoryCreate(BaseModel):
    name_sw: str
    parent_id: int | None = None
    position: int = 0


class CategoryPatch(BaseModel):
    name_sw: str | None = None
    position: int | None = None
    active: bool | None = None


class ContentCreate(BaseModel):
    category_id: int
    body_sw: str


class AnswerCreate(BaseModel):
    text: str


def create_app(ctx: ServiceContext, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="mservice", docs_url=None, redoc_url=None)

    @app.exception_handler(MServiceError)
    async def service_error(_: Request, exc: MServiceError):
        return JSONResponse(status_code=_status_for(exc),
                            content={"error": exc.code, "detail": exc.detail})

    def current_user(authorization: str | None = Header(default=None)) -> User:
        token = None
        if authorization and authorization.startswith("Bearer "):
            token = authorization.removeprefix("Bearer ")
        return ctx.admin.authenticate(token)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    # -- simulated telco wire -----------------------------------------------------

    @app.post("/sim/ussd")
    def sim_ussd(req: UssdRequest):
        return ctx.gateway.ussd_request(req.msisdn, req.session, req.text)

    @app.post("/sim/sms")
    def sim_sms(req: SmsRequest):
        record = ctx.gateway.receive_sms(req.msisdn, req.shortcode, req.text)
        return {"status": "ok", "routed_as": record.routed_as.value}

    @app.get("/sim/inbox/{msisdn}")
    def sim_inbox(msisdn: str):
        messages = [{"id": r.id, "kind": r.kind.value, "body": r.body,
                     "segments": r.segments, "at": _iso(r.at)}
                    for r in ctx.outbox.inbox(msisdn)]
        return {"messages": messages}

    @app.get("/sim/deliveries")
    def sim_deliveries(from_: str | None = Query(default=None, alias="from"),
                       to: str | None = Query(default=None)):
        return ctx.outbox.cost_report(_parse_ts(from_), _parse_ts(to))

    # -- staff api -------------------------------------------------------------------

    @app.post("/api/v1/auth/login")
    def login(req: LoginRequest):
        return ctx.admin.login(req.username, req.password)

    @app.get("/api/v1/user-groups")
    def list_groups(user: User = Depends(current_user)):
        ctx.admin.require(user, "manage_groups")
        return [{"id": g.id, "name": g.name, "permissions": sorted(g.permissions)}
                for g in ctx.store.list_user_groups()]

    @app.post("/api/v1/user-groups", status_code=201)
    def create_group(req: GroupCreate, user: User = Depends(current_user)):
        group = ctx.admin.create_user_group(user, req.name, req.permissions)
        return {"id": group.id, "name": group.name,
                "permissions": sorted(group.permissions)}

    @app.get("/api/v1/users")
    def list_users(user: User = Depends(current_user)):
        ctx.admin.require(user, "manage_users")
        groups = {g.id: g.name for g in ctx.store.list_user_groups()}
        return [{"id": u.id, "username": u.username,
                 "display_name": u.display_name, "group": groups[u.group_id]}
                for u in ctx.store.list_users()]

    @app.post("/api/v1/users", status_code=201)
    def create_user(req: UserCreate, user: User = Depends(current_user)):
        created = ctx.admin.create_user(user, req.username, req.password,
                                        req.group, req.display_name)
        return {"id": created.id, "username": created.username,
                "display_name": created.display_name, "group": req.group}

    @app.get("/api/v1/sponsors")
    def list_sponsors(user: User = Depends(current_user)):
        ctx.admin.require(user, "manage_sponsors")
        return [_sponsor_json(s) for s in ctx.store.list_sponsors()]

    @app.post("/api/v1/sponsors", status_code=201)
    def create_sponsor(req: SponsorCreate, user: User = Depends(current_user)):
        return _sponsor_json(ctx.admin.create_sponsor(user, req.name, req.contact,
                                                      req.balance))

    @app.patch("/api/v1/sponsors/{sponsor_id}")
    def patch_sponsor(sponsor_id: int, req: SponsorPatch,
                      user: User = Depends(current_user)):
        return _sponsor_json(ctx.admin.update_sponsor(
            user, sponsor_id, name=req.name, contact=req.contact,
            active=req.active))

    @app.delete("/api/v1/sponsors/{sponsor_id}")
    def delete_sponsor(sponsor_id: int, user: User = Depends(current_user)):
        return _sponsor_json(ctx.admin.deactivate_sponsor(user, sponsor_id))

    @app.post("/api/v1/sponsors/{sponsor_id}/deposit")
    def deposit(sponsor_id: int, req: DepositRequest,
                user: User = Depends(current_user)):
        balance = ctx.admin.deposit(user, sponsor_id, req.amount)
        return {"sponsor_id": sponsor_id, "balance": balance}

    @app.get("/api/v1/ads")
    def list_ads(user: User = Depends(current_user)):
        ctx.admin.require(user, "manage_ads")
        return [{"id": a.id, "sponsor_id": a.sponsor_id, "body_sw": a.body_sw,
                 "active": a.active} for a in ctx.store.list_ads()]

    @app.post("/api/v1/ads", status_code=201)
    def create_ad(req: AdCreate, user: User = Depends(current_user)):
        ad = ctx.admin.create_ad(user, req.sponsor_id, req.body_sw)
        return {"id": ad.id, "sponsor_id": ad.sponsor_id, "body_sw": ad.body_sw,
                "active": ad.active}

    @app.patch("/api/v1/ads/{ad_id}")
    def patch_ad(ad_id: int, req: AdPatch, user: User = Depends(current_user)):
        ad = ctx.admin.update_ad(user, ad_id, body_sw=req.body_sw,
                                 active=req.active)
        return {"id": ad.id, "sponsor_id": ad.sponsor_id, "body_sw": ad.body_sw,
                "active": ad.active}

    @app.get("/api/v1/categories")
    def list_categories(user: User = Depends(current_user)):
        ctx.admin.require(user, "manage_categories")
        return [_category_json(c) for c in ctx.store.list_categories()]

    @app.post("/api/v1/categories", status_code=201)
    def create_category(req: CategoryCreate, user: User = Depends(current_user)):
        return _category_json(ctx.admin.create_category(user, req.name_sw,
                                                        req.parent_id,
                                                        req.position))

    @app.patch("/api/v1/categories/{category_id}")
    def patch_category(category_id: int, req: CategoryPatch,
                       user: User = Depends(current_user)):
        fields = {k: v for k, v in (("name_sw", req.name_sw),
                                    ("position", req.position),
                                    ("active", req.active)) if v is not None}
        return _category_json(ctx.admin.update_category(user, category_id,
                                                        **fields))

    @app.get("/api/v1/content")
    def list_content(user: User = Depends(current_user)):
        ctx.admin.require(user, "manage_content")
        return [{"id": c.id, "category_id": c.category_id, "body_sw": c.body_sw,
                 "author_id": c.author_id, "active": c.active}
                for c in ctx.store.list_content()]

    @app.post("/api/v1/content", status_code=201)
    def create_content(req: ContentCreate, user: User = Depends(current_user)):
        item, warnings = ctx.admin.add_content(user, req.category_id, req.body_sw)
        return {"id": item.id, "category_id": item.category_id,
                "body_sw": item.body_sw, "warnings": warnings}

    @app.get("/api/v1/questions")
    def list_questions(status: str | None = None,
                       user: User = Depends(current_user)):
        ctx.admin.require(user, "view_questions")
        wanted = QuestionStatus(status) if status else None
        subscribers = {s.id: s.msisdn for s in
                       ctx.store.list_subscribers(limit=1_000_000)}
        return [{"id": q.id, "msisdn": subscribers.get(q.subscriber_id, ""),
                 "text": q.text, "status": q.status.value,
                 "received_at": _iso(q.received_at)}
                for q in ctx.store.list_questions(wanted)]

    @app.post("/api/v1/questions/{question_id}/answer", status_code=201)
    def answer_question(question_id: int, req: AnswerCreate,
                        user: User = Depends(current_user)):
        answer = ctx.admin.answer_question(user, question_id, req.text)
        return {"id": answer.id, "question_id": answer.question_id,
                "text": answer.text}

    @app.get("/api/v1/subscribers")
    def list_subscribers(offset: int = 0, limit: int = 100,
                         user: User = Depends(current_user)):
        ctx.admin.require(user, "view_subscribers")
        return [{"id": s.id, "msisdn": s.msisdn, "status": s.status.value,
                 "consent_ads": s.consent_ads,
                 "registered_at": _iso(s.registered_at)}
                for s in ctx.store.list_subscribers(offset, limit)]

    @app.get("/api/v1/reports/dashboard")
    def dashboard(user: User = Depends(current_user)):
        return ctx.admin.dashboard(user)

    @app.get("/api/v1/reports/impressions")
    def impressions(from_: str | None = Query(default=None, alias="from"),
                    to: str | None = Query(default=None),
                    user: User = Depends(current_user)):
        ctx.admin.require(user, "view_reports")
        return ctx.ledger.impression_report(_parse_ts(from_), _parse_ts(to))

    @app.get("/api/v1/reports/sms-costs")
    def sms_costs(from_: str | None = Query(default=None, alias="from"),
                  to: str | None = Query(default=None),
                  user: User = Depends(current_user)):
        ctx.admin.require(user, "view_reports")
        return ctx.outbox.cost_report(_parse_ts(from_), _parse_ts(to))

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="console")

    return app


def _sponsor_json(s) -> dict:
    return {"id": s.id, "name": s.name, "contact": s.contact,
            "balance": s.balance, "active": s.active}


def _category_json(c) -> dict:
    return {"id": c.id, "name_sw": c.name_sw, "parent_id": c.parent_id,
            "position": c.position, "active": c.active}
