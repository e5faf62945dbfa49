"""USSD session state machine.

A dial like ``*31022#`` opens an interactive session that walks the
category tree: consent gate, paginated menus, leaf selection handing off
to the sponsor ledger. Parameterized dials (``*31022*847261#``) redeem a
confirmation code without opening a session; ``*31022*99*<category>#`` is
the paid-access stub.

State transitions (anything else re-renders with an error line and keeps
the session alive):

    AwaitConsent  --"1"--> Browsing          --"2"--> Ended
    Browsing      --option--> Browsing (descend) | Ended (leaf hand-off)
    Browsing      --"0"--> next page   --"9"--> previous page / parent
    AwaitRegistration and Ended accept no input (dialog closed).
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from . import texts
from .errors import (
    ConsentRequired,
    EmptyCategory,
    ExpiredCode,
    MalformedCode,
    NoActiveSponsor,
    NotALeaf,
    ServiceEmpty,
    SessionAlreadyOpen,
    UnknownCategory,
    UnknownCode,
    UnknownSession,
    WrongMsisdn,
    WrongServiceCode,
)
from .models import Category, SubscriberStatus

if TYPE_CHECKING:
    from .adledger import AdLedger
    from .catalog import ContentCatalog
    from .config import Config
    from .store import Store


@dataclass(frozen=True)
class UssdCode:
    """Parsed USSD dial string: service code plus optional digit arguments."""
    service: str
    args: tuple[str, ...] = ()

    def render(self) -> str:
        return "*" + "*".join((self.service,) + self.args) + "#"


def parse_ussd_code(raw: str) -> UssdCode:
    """Parse ``*<digits>(*<digits>)*#`` into its segments."""
    text = raw.strip()
    if not text.startswith("*") or not text.endswith("#") or len(text) < 3:
        raise MalformedCode(f"USSD code {raw!r} must match *<digits>#")
    segments = text[1:-1].split("*")
    for seg in segments:
        if not seg or not seg.isdigit():
            raise MalformedCode(f"USSD code segment {seg!r} must be non-empty digits")
    return UssdCode(segments[0], tuple(segments[1:]))


class SessionState(str, enum.Enum):
    AWAIT_REGISTRATION = "AwaitRegistration"
    AWAIT_CONSENT = "AwaitConsent"
    BROWSING = "Browsing"
    ENDED = "Ended"


class Disposition(str, enum.Enum):
    CONTINUE = "Continue"
    END = "End"


@dataclass
class UssdReply:
    text: str
    disposition: Disposition

    @property
    def ends(self) -> bool:
        return self.disposition is Disposition.END


@dataclass
class UssdSession:
    session_id: str
    msisdn: str
    state: SessionState
    started_at: float
    last_activity: float
    category_path: list[int] = field(default_factory=list)
    page: int = 0


class SessionEngine:
    """Holds live sessions in memory; one open session per MSISDN."""

    def __init__(self, store: "Store", config: "Config", ledger: "AdLedger",
                 catalog: "ContentCatalog", clock, rng):
        self._store = store
        self._cfg = config
        self._ledger = ledger
        self._catalog = catalog
        self._clock = clock
        self._rng = rng
        self._lock = threading.RLock()
        self._sessions: dict[str, UssdSession] = {}
        self._open_by_msisdn: dict[str, str] = {}

    # -- lifecycle -----------------------------------------------------------

    def begin_session(self, msisdn: str, code: UssdCode) -> tuple[UssdReply, str | None]:
        """Handle a fresh dial; returns the reply and the session id, if any."""
        if code.service != self._cfg.ussd.service_code:
            raise WrongServiceCode(f"service code {code.service!r} is not served here")
        if code.args:
            return self._parameterized_dial(msisdn, code.args), None
        with self._lock:
            self.expire_sessions(self._clock())
            sub = self._store.subscriber_by_msisdn(msisdn)
            if sub is None or sub.status is not SubscriberStatus.ACTIVE:
                session = self._new_session(msisdn, SessionState.AWAIT_REGISTRATION)
                self._end(session)
                text = texts.REGISTER_FIRST.format(
                    keyword=self._cfg.sms.registration_keyword,
                    shortcode=self._cfg.sms.registration_shortcode)
                return self._reply(text, end=True), session.session_id
            if msisdn in self._open_by_msisdn:
                raise SessionAlreadyOpen(f"an open session exists for {msisdn}")
            session = self._new_session(msisdn, SessionState.AWAIT_CONSENT)
            self._open_by_msisdn[msisdn] = session.session_id
            return self._reply(self._consent_text(), end=False), session.session_id

    def handle_input(self, session_id: str, user_input: str) -> UssdReply:
        """Advance an open session with one menu input."""
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None or session.state is SessionState.ENDED:
                raise UnknownSession(f"no open session {session_id!r}")
            now = self._clock()
            if now - session.last_activity > self._cfg.ussd.session_timeout_s:
                self._end(session)
                raise UnknownSession(f"session {session_id!r} expired")
            session.last_activity = now
            choice = user_input.strip()
            if session.state is SessionState.AWAIT_CONSENT:
                reply = self._consent_input(session, choice)
            else:
                reply = self._browse_input(session, choice)
            if reply.ends:
                self._end(session)
            return reply

    def expire_sessions(self, now: float) -> int:
        """End sessions idle past the configured timeout; returns the count."""
        with self._lock:
            expired = 0
            for session in self._sessions.values():
                if session.state is SessionState.ENDED:
                    continue
                if now - session.last_activity > self._cfg.ussd.session_timeout_s:
                    self._end(session)
                    expired += 1
            return expired

    def session(self, session_id: str) -> UssdSession | None:
        with self._lock:
            return self._sessions.get(session_id)

    def open_session_for(self, msisdn: str) -> UssdSession | None:
        with self._lock:
            sid = self._open_by_msisdn.get(msisdn)
            return self._sessions.get(sid) if sid else None

    # -- menu rendering ----------------------------------------------------------

    def render_menu(self, category_path: list[int], page: int) -> str:
        """Numbered menu for the node at ``category_path``, one page at a time."""
        parent = category_path[-1] if category_path else None
        children = self._store.category_children(parent, active_only=True)
        if parent is None and not children:
            raise ServiceEmpty("no active categories to serve")
        pages = self._paginate(children)
        if pages:
            page = min(page, len(pages) - 1)
            lines = [f"{i}. {child.name_sw}" for i, child in enumerate(pages[page], 1)]
        else:
            page, lines = 0, []
        if page + 1 < len(pages):
            lines.append(texts.MORE_LABEL)
        if page > 0 or category_path:
            lines.append(texts.BACK_LABEL)
        return "\n".join(lines)

    def _paginate(self, children: list[Category]) -> list[list[Category]]:
        """Split children into pages of at most page_size entries that fit the
        reply budget (navigation lines and the error prefix stay reserved)."""
        notice = max(len(texts.INVALID_CHOICE), len(texts.CATEGORY_EMPTY))
        reserved = notice + 1 + len(texts.MORE_LABEL) + 1 + len(texts.BACK_LABEL) + 1
        capacity = max(self._cfg.ussd.reply_max_chars - reserved, 8)
        pages: list[list[Category]] = []
        current: list[Category] = []
        used = 0
        for child in children:
            line_len = 3 + len(child.name_sw)  # "N. " prefix, single-digit N
            extra = line_len + (1 if current else 0)
            if current and (len(current) >= self._cfg.ussd.page_size
                            or used + extra > capacity):
                pages.append(current)
                current, used = [], 0
                extra = line_len
            current.append(child)
            used += extra
        if current:
            pages.append(current)
        return pages

    def _page_entries(self, session: UssdSession) -> tuple[list[Category], int]:
        parent = session.category_path[-1] if session.category_path else None
        children = self._store.category_children(parent, active_only=True)
        pages = self._paginate(children)
        if not pages:
            return [], 0
        session.page = min(session.page, len(pages) - 1)
        return pages[session.page], len(pages)

    # -- transitions ------------------------------------------------------------

    def _consent_input(self, session: UssdSession, choice: str) -> UssdReply:
        if choice == "1":
            try:
                menu = self.render_menu([], 0)
            except ServiceEmpty:
                return self._reply(texts.SERVICE_EMPTY, end=True)
            session.state = SessionState.BROWSING
            session.category_path = []
            session.page = 0
            return self._reply(menu, end=False)
        if choice == "2":
            return self._reply(texts.FAREWELL, end=True)
        return self._invalid(self._consent_text())

    def _browse_input(self, session: UssdSession, choice: str) -> UssdReply:
        try:
            entries, npages = self._page_entries(session)
            menu = self.render_menu(session.category_path, session.page)
        except ServiceEmpty:
            return self._reply(texts.SERVICE_EMPTY, end=True)
        if choice == "0":
            if session.page + 1 < npages:
                session.page += 1
                return self._reply(self.render_menu(session.category_path,
                                                    session.page), end=False)
            return self._invalid(menu)
        if choice == "9":
            if session.page > 0:
                session.page -= 1
            elif session.category_path:
                session.category_path.pop()
                session.page = 0
            else:
                return self._invalid(menu)
            return self._reply(self.render_menu(session.category_path,
                                                session.page), end=False)
        if choice.isdigit() and 1 <= int(choice) <= len(entries):
            chosen = entries[int(choice) - 1]
            if not self._store.category_is_leaf(chosen.id):
                session.category_path.append(chosen.id)
                session.page = 0
                return self._reply(self.render_menu(session.category_path, 0),
                                   end=False)
            return self._leaf_selected(session, chosen)
        return self._invalid(menu)

    def _leaf_selected(self, session: UssdSession, leaf: Category) -> UssdReply:
        if not self._catalog.has_content(leaf.id):
            menu = self.render_menu(session.category_path, session.page)
            return self._invalid(menu, notice=texts.CATEGORY_EMPTY)
        try:
            self._ledger.reserve_request(session.msisdn, leaf.id)
        except NoActiveSponsor:
            return self._no_sponsor_reply(session.msisdn, leaf)
        except ConsentRequired:
            return self._reply(texts.CONSENT_DENIED, end=True)
        return self._reply(texts.INFO_WILL_BE_SENT, end=True)

    def _no_sponsor_reply(self, msisdn: str, leaf: Category) -> UssdReply:
        if self._cfg.ads.fallback_policy == "deliver_free":
            self._catalog.deliver_free_fallback(msisdn, leaf.id)
            return self._reply(texts.INFO_WILL_BE_SENT, end=True)
        dial = f"*{self._cfg.ussd.service_code}*99*{leaf.id}#"
        text = texts.NO_SPONSOR_PAID_HINT.format(
            price=self._cfg.content.paid_price_tsh, dial=dial)
        return self._reply(text, end=True)

    # -- parameterized dials -----------------------------------------------------

    def _parameterized_dial(self, msisdn: str, args: tuple[str, ...]) -> UssdReply:
        if len(args) == 1 and len(args[0]) == 6:
            return self._redeem_dial(msisdn, args[0])
        if len(args) == 2 and args[0] == "99":
            return self._paid_dial(msisdn, args[1])
        return self._reply(texts.REQUEST_UNKNOWN, end=True)

    def _redeem_dial(self, msisdn: str, code: str) -> UssdReply:
        try:
            confirmation = self._ledger.redeem_confirmation(msisdn, code)
        except (UnknownCode, WrongMsisdn):
            return self._reply(texts.CODE_UNKNOWN, end=True)
        except ExpiredCode:
            return self._reply(texts.CODE_EXPIRED, end=True)
        try:
            self._catalog.deliver_confirmed(confirmation)
        except EmptyCategory:
            return self._reply(texts.CATEGORY_EMPTY, end=True)
        return self._reply(texts.CONTENT_SENT, end=True)

    def _paid_dial(self, msisdn: str, category_arg: str) -> UssdReply:
        sub = self._store.subscriber_by_msisdn(msisdn)
        if sub is None or sub.status is not SubscriberStatus.ACTIVE:
            text = texts.REGISTER_FIRST.format(
                keyword=self._cfg.sms.registration_keyword,
                shortcode=self._cfg.sms.registration_shortcode)
            return self._reply(text, end=True)
        try:
            self._catalog.paid_access(msisdn, int(category_arg))
        except EmptyCategory:
            return self._reply(texts.CATEGORY_EMPTY, end=True)
        except (UnknownCategory, NotALeaf):
            return self._reply(texts.REQUEST_UNKNOWN, end=True)
        price = self._cfg.content.paid_price_tsh
        return self._reply(texts.PAID_CONFIRMED.format(price=price), end=True)

    # -- helpers ---------------------------------------------------------------------

    def _consent_text(self) -> str:
        return "\n".join((texts.CONSENT_NOTICE, texts.CONSENT_PROCEED,
                          texts.CONSENT_QUIT))

    def _invalid(self, menu: str, notice: str = texts.INVALID_CHOICE) -> UssdReply:
        return self._reply(f"{notice}\n{menu}", end=False)

    def _reply(self, text: str, end: bool) -> UssdReply:
        limit = self._cfg.ussd.reply_max_chars
        if len(text) > limit:  # rendering reserves space; this is a hard stop
            text = text[:limit]
        return UssdReply(text, Disposition.END if end else Disposition.CONTINUE)

    def _new_session(self, msisdn: str, state: SessionState) -> UssdSession:
        now = self._clock()
        sid = f"{self._rng.getrandbits(64):016x}"
        while sid in self._sessions:
            sid = f"{self._rng.getrandbits(64):016x}"
        session = UssdSession(sid, msisdn, state, now, now)
        self._sessions[sid] = session
        return session

    def _end(self, session: UssdSession) -> None:
        session.state = SessionState.ENDED
        if self._open_by_msisdn.get(session.msisdn) == session.session_id:
            del self._open_by_msisdn[session.msisdn]
