"""Scripted end-to-end session scenarios.

A script is a JSON list of steps executed in order against the wire
protocol::

    {"steps": [
      {"actor": "255712000001", "action": "dial",  "payload": "*31022#",
       "expect": "Endelea"},
      {"actor": "255712000001", "action": "sms",   "payload": "JIUNGE",
       "shortcode": "15050"},
      {"actor": "255712000001", "action": "input", "payload": "1"}
    ]}

``dial`` opens a new USSD exchange, ``input`` continues the actor's open
session, ``sms`` posts an inbound SMS (shortcode defaults to the
registration shortcode). ``expect`` is a substring match against the
step's observable output: the reply (or routing outcome) plus any SMS
that arrived during the step. ``{code}`` in a payload is replaced with
the confirmation code captured from the actor's latest ad SMS, and
``{service}`` with the configured service code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import FixtureInvalid

_CODE_RE = re.compile(r"\*\d+\*(\d{6})#")
_ACTIONS = ("dial", "input", "sms")


@dataclass
class ScenarioStep:
    actor: str
    action: str
    payload: str
    expect: str | None = None
    shortcode: str | None = None


def load_script(path: str | Path) -> list[ScenarioStep]:
    p = Path(path)
    if not p.exists():
        raise FixtureInvalid(f"script file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FixtureInvalid(f"script is not valid JSON: {exc}") from exc
    rows = data.get("steps") if isinstance(data, dict) else None
    if not isinstance(rows, list) or not rows:
        raise FixtureInvalid("script must contain a non-empty 'steps' list")
    steps = []
    for i, row in enumerate(rows):
        for field in ("actor", "action", "payload"):
            if field not in row:
                raise FixtureInvalid(f"steps[{i}]: missing field {field!r}")
        if row["action"] not in _ACTIONS:
            raise FixtureInvalid(f"steps[{i}]: action must be one of {_ACTIONS}")
        steps.append(ScenarioStep(row["actor"], row["action"], row["payload"],
                                  row.get("expect"), row.get("shortcode")))
    return steps


class ScenarioRunner:
    """Drives a script against an HTTP client (embedded TestClient or a
    remote httpx.Client); produces a deterministic transcript."""

    def __init__(self, client, config):
        self._client = client
        self._cfg = config
        self._open_sessions: dict[str, str] = {}
        self._seen_inbox: dict[str, int] = {}
        self._last_code: dict[str, str] = {}
        self.lines: list[str] = []
        self.failures: list[str] = []

    def run(self, steps: list[ScenarioStep]) -> bool:
        for index, step in enumerate(steps, start=1):
            output = self._execute(index, step)
            if step.expect is not None and step.expect not in output:
                failure = (f"step {index}: expected {step.expect!r}"
                           f" in output, got:\n{output}")
                self.failures.append(failure)
                self._emit(f"FAIL {failure}")
                break
            self._emit(f"ok {index}")
        status = "PASS" if not self.failures else "FAIL"
        self._emit(f"{status} {index - len(self.failures)}/{len(steps)} steps")
        return not self.failures

    @property
    def transcript(self) -> str:
        return "\n".join(self.lines) + "\n"

    # -- execution ------------------------------------------------------------

    def _execute(self, index: int, step: ScenarioStep) -> str:
        payload = (step.payload
                   .replace("{code}", self._last_code.get(step.actor, "{code}"))
                   .replace("{service}", self._cfg.ussd.service_code))
        parts: list[str] = []
        if step.action == "sms":
            shortcode = step.shortcode or self._cfg.sms.registration_shortcode
            self._emit(f"== step {index}: sms {step.actor} {shortcode} {payload}")
            reply = self._post("/sim/sms", {"msisdn": step.actor,
                                            "shortcode": shortcode,
                                            "text": payload})
            line = f"routed: {reply['routed_as']}"
            self._emit(line)
            parts.append(line)
        else:
            self._emit(f"== step {index}: {step.action} {step.actor} {payload}")
            session = None
            if step.action == "input":
                session = self._open_sessions.get(step.actor)
            reply = self._post("/sim/ussd", {"msisdn": step.actor,
                                             "session": session,
                                             "text": payload})
            if reply["continue"]:
                self._open_sessions[step.actor] = reply["session"]
            else:
                self._open_sessions.pop(step.actor, None)
            flag = "cont" if reply["continue"] else "end"
            line = f"reply({flag}): {reply['reply']}"
            self._emit(line)
            parts.append(line)
        parts.extend(self._drain_inbox(step.actor))
        return "\n".join(parts)

    def _drain_inbox(self, actor: str) -> list[str]:
        data = self._get(f"/sim/inbox/{actor}")
        seen = self._seen_inbox.get(actor, 0)
        lines = []
        for message in data["messages"]:
            if message["id"] <= seen:
                continue
            seen = message["id"]
            line = f"sms({message['kind']}): {message['body']}"
            self._emit(line)
            lines.append(line)
            found = _CODE_RE.search(message["body"])
            if found:
                self._last_code[actor] = found.group(1)
        self._seen_inbox[actor] = seen
        return lines

    def _post(self, path: str, body: dict) -> dict:
        response = self._client.post(path, json=body)
        response.raise_for_status()
        return response.json()

    def _get(self, path: str) -> dict:
        response = self._client.get(path)
        response.raise_for_status()
        return response.json()

    def _emit(self, line: str) -> None:
        self.lines.append(line)


def run_script(client, config, steps: list[ScenarioStep]) -> tuple[str, bool]:
    runner = ScenarioRunner(client, config)
    ok = runner.run(steps)
    return runner.transcript, ok
