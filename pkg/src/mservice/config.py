"""Service configuration.

A single TOML or JSON file with dotted sections, every key optional.
Environment variables override individual keys: ``MSERVICE_ADS_UNIT_PRICE_TSH=5``
maps to ``ads.unit_price_tsh`` (prefix, section, key).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

try:
    import tomllib  # Python 3.11+
except ImportError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigInvalid

ENV_PREFIX = "MSERVICE_"


@dataclass
class StorageConfig:
    path: str = "mservice.db"


@dataclass
class UssdConfig:
    service_code: str = "31022"
    page_size: int = 6
    session_timeout_s: int = 90
    reply_max_chars: int = 160


@dataclass
class AdsConfig:
    unit_price_tsh: int = 10
    confirmation_ttl_s: int = 1800
    fallback_policy: str = "deny_with_paid_hint"  # or "deliver_free"
    max_body_chars: int = 120


@dataclass
class SmsConfig:
    unit_cost_tsh: int = 25
    registration_shortcode: str = "15050"
    question_shortcode: str = "15051"
    registration_keyword: str = "JIUNGE"
    registration_fee_tsh: int = 0


@dataclass
class ContentConfig:
    max_segments: int = 2
    delivery_mode: str = "Separate"  # or "Combined"
    paid_price_tsh: int = 250


@dataclass
class AdminConfig:
    token_ttl_s: int = 43200


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8031


@dataclass
class Config:
    storage: StorageConfig = field(default_factory=StorageConfig)
    ussd: UssdConfig = field(default_factory=UssdConfig)
    ads: AdsConfig = field(default_factory=AdsConfig)
    sms: SmsConfig = field(default_factory=SmsConfig)
    content: ContentConfig = field(default_factory=ContentConfig)
    admin: AdminConfig = field(default_factory=AdminConfig)
    server: ServerConfig = field(default_factory=ServerConfig)

    def validate(self) -> "Config":
        if self.ussd.page_size < 1 or self.ussd.page_size > 8:
            raise ConfigInvalid("ussd.page_size must be in 1..8")
        if self.ussd.reply_max_chars < 40:
            raise ConfigInvalid("ussd.reply_max_chars must be >= 40")
        if not self.ussd.service_code.isdigit():
            raise ConfigInvalid("ussd.service_code must be digits")
        if self.ads.unit_price_tsh < 1:
            raise ConfigInvalid("ads.unit_price_tsh must be positive")
        if self.ads.fallback_policy not in ("deny_with_paid_hint", "deliver_free"):
            raise ConfigInvalid("ads.fallback_policy must be deny_with_paid_hint or deliver_free")
        if self.content.delivery_mode not in ("Separate", "Combined"):
            raise ConfigInvalid("content.delivery_mode must be Separate or Combined")
        for key, value in (("sms.unit_cost_tsh", self.sms.unit_cost_tsh),
                           ("sms.registration_fee_tsh", self.sms.registration_fee_tsh),
                           ("content.paid_price_tsh", self.content.paid_price_tsh)):
            if value < 0:
                raise ConfigInvalid(f"{key} must be non-negative")
        return self


_SECTIONS = {
    "storage": StorageConfig,
    "ussd": UssdConfig,
    "ads": AdsConfig,
    "sms": SmsConfig,
    "content": ContentConfig,
    "admin": AdminConfig,
    "server": ServerConfig,
}


def _coerce(section: str, key: str, raw: Any, target: type) -> Any:
    if isinstance(raw, bool) and target is not bool:
        raise ConfigInvalid(f"{section}.{key} must be {target.__name__}")
    if target is int:
        if isinstance(raw, int):
            return raw
        if isinstance(raw, str) and raw.lstrip("-").isdigit():
            return int(raw)
        raise ConfigInvalid(f"{section}.{key} must be an integer")
    if target is str:
        if isinstance(raw, str):
            return raw
        raise ConfigInvalid(f"{section}.{key} must be a string")
    return raw


def _apply(cfg: Config, data: dict[str, Any]) -> None:
    for section, values in data.items():
        if section not in _SECTIONS:
            raise ConfigInvalid(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigInvalid(f"section {section!r} must be a table")
        target = getattr(cfg, section)
        valid = {f.name: f.type for f in fields(target)}
        for key, raw in values.items():
            if key not in valid:
                raise ConfigInvalid(f"unknown config key {section}.{key}")
            current = getattr(target, key)
            setattr(target, key, _coerce(section, key, raw, type(current)))


def _apply_env(cfg: Config, environ: dict[str, str]) -> None:
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        if section not in _SECTIONS:
            raise ConfigInvalid(f"unknown config section in env var {name}")
        target = getattr(cfg, section)
        valid = {f.name for f in fields(target)}
        if key not in valid:
            raise ConfigInvalid(f"unknown config key in env var {name}")
        current = getattr(target, key)
        setattr(target, key, _coerce(section, key, raw, type(current)))


def load_config(path: str | Path | None = None,
                environ: dict[str, str] | None = None) -> Config:
    """Build a Config from an optional TOML/JSON file plus env overrides."""
    cfg = Config()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigInvalid(f"config file not found: {p}")
        try:
            if p.suffix == ".json":
                data = json.loads(p.read_text(encoding="utf-8"))
            else:
                with open(p, "rb") as fh:
                    data = tomllib.load(fh)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ConfigInvalid(f"cannot parse {p}: {exc}") from exc
        _apply(cfg, data)
    _apply_env(cfg, environ if environ is not None else dict(os.environ))
    return cfg.validate()
