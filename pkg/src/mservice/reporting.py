"""Operational reports: delimited files plus rendered figures.

The report path writes CSVs (deliveries, per-sponsor impressions) next to
PNG charts so operators can eyeball SMS spend and sponsor burn-down
without extra tooling.
"""

from __future__ import annotations

import csv
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

if TYPE_CHECKING:
    from .service import ServiceContext


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat(timespec="seconds")


def write_deliveries_csv(ctx: "ServiceContext", path: Path,
                         since: float | None, until: float | None) -> int:
    records = ctx.store.deliveries(since=since, until=until)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "at", "msisdn", "kind", "segments", "cost",
                         "charset_warning"])
        for rec in records:
            writer.writerow([rec.id, _iso(rec.at), rec.msisdn, rec.kind.value,
                             rec.segments, rec.cost, int(rec.charset_warning)])
    return len(records)


def write_impressions_csv(ctx: "ServiceContext", path: Path,
                          since: float | None, until: float | None) -> int:
    rows = ctx.ledger.impression_report(since, until)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sponsor_id", "sponsor", "impressions", "spend",
                         "deposits", "remaining"])
        for row in rows:
            writer.writerow([row["sponsor_id"], row["sponsor"],
                             row["impressions"], row["spend"],
                             row["deposits"], row["remaining"]])
    return len(rows)


def render_figures(ctx: "ServiceContext", out_dir: Path,
                   since: float | None, until: float | None) -> list[Path]:
    """Bar charts of SMS cost by kind and per-sponsor impressions/spend."""
    out = []
    costs = ctx.outbox.cost_report(since, until)
    fig, ax = plt.subplots(figsize=(6, 4))
    kinds = sorted(costs["by_kind"])
    ax.bar(kinds, [costs["by_kind"][k]["cost"] for k in kinds], color="#3572b0")
    ax.set_ylabel("cost (Tsh)")
    ax.set_title("SMS cost by message kind")
    fig.tight_layout()
    path = out_dir / "sms_cost_by_kind.png"
    fig.savefig(path)
    plt.close(fig)
    out.append(path)

    rows = ctx.ledger.impression_report(since, until)
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [row["sponsor"] for row in rows]
    ax.bar(names, [row["spend"] for row in rows], label="spend", color="#d04437")
    ax.bar(names, [row["remaining"] for row in rows],
           bottom=[row["spend"] for row in rows], label="remaining",
           color="#67ab49")
    ax.set_ylabel("Tsh")
    ax.set_title("Sponsor spend and remaining balance")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "sponsor_spend.png"
    fig.savefig(path)
    plt.close(fig)
    out.append(path)
    return out


def write_reports(ctx: "ServiceContext", out_dir: str | Path,
                  since: float | None = None,
                  until: float | None = None) -> dict:
    """Write CSVs and figures; returns a summary of what was produced."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    deliveries = write_deliveries_csv(ctx, out / "deliveries.csv", since, until)
    sponsors = write_impressions_csv(ctx, out / "impressions.csv", since, until)
    figures = render_figures(ctx, out, since, until)
    return {
        "deliveries_rows": deliveries,
        "sponsor_rows": sponsors,
        "files": [str(out / "deliveries.csv"), str(out / "impressions.csv")]
                 + [str(p) for p in figures],
    }
