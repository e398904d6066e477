"""Ingest per-target backlink aggregates reported by an external link
index. The index reports http and https variants of one URL separately, so
variants are merged onto the canonical URL: page and site counts add up,
flow scores (0-100 prestige scales) take the maximum observed.

Summed site counts across protocol variants are an upper bound (referring
domains may overlap between variants, which aggregates cannot reveal);
merged aggregates carry websites_is_upper_bound so reports can say so.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .mention_ingest import CorpusIndex
from .urls import canonicalize_url


class LinkValidationError(ValueError):
    """A raw link record with counts or flow metrics outside their domain."""


@dataclass(frozen=True)
class RawLinkRecord:
    """One row as reported: protocol-bearing target plus its link metrics."""

    target_url: str
    mentioning_webpages: int
    mentioning_websites: int
    citation_flow: int
    trust_flow: int
    window_start: date | None = None
    window_end: date | None = None

    def validate(self) -> None:
        if not self.target_url.strip():
            raise LinkValidationError("record with empty target_url")
        for name in ("citation_flow", "trust_flow"):
            value = getattr(self, name)
            if not 0 <= value <= 100:
                raise LinkValidationError(f"{self.target_url}: {name}={value} outside 0-100")
        if self.mentioning_webpages < 0 or self.mentioning_websites < 0:
            raise LinkValidationError(f"{self.target_url}: negative mention count")
        if self.mentioning_websites > self.mentioning_webpages:
            raise LinkValidationError(
                f"{self.target_url}: websites ({self.mentioning_websites}) exceed "
                f"webpages ({self.mentioning_webpages})"
            )


@dataclass
class BacklinkAggregate:
    """Per-canonical-URL link evidence after protocol merging."""

    target: str
    mentioning_webpages: int
    mentioning_websites: int
    citation_flow: int
    trust_flow: int
    window_start: date | None = None
    window_end: date | None = None
    sources: list[RawLinkRecord] = field(default_factory=list)
    websites_is_upper_bound: bool = False


def merge_protocol_variants(records) -> list[BacklinkAggregate]:
    """Group raw records by canonical target and merge the variants.

    Webpage and website counts are summed; citation and trust flow take the
    maximum across variants; the reporting window becomes the union. Output
    is sorted by target. Invalid records raise LinkValidationError.
    """
    groups: dict[str, list[RawLinkRecord]] = {}
    for record in records:
        record.validate()
        canonical = canonicalize_url(record.target_url)
        groups.setdefault(canonical, []).append(record)

    merged: list[BacklinkAggregate] = []
    for target in sorted(groups):
        rows = groups[target]
        starts = [r.window_start for r in rows if r.window_start is not None]
        ends = [r.window_end for r in rows if r.window_end is not None]
        merged.append(BacklinkAggregate(
            target=target,
            mentioning_webpages=sum(r.mentioning_webpages for r in rows),
            mentioning_websites=sum(r.mentioning_websites for r in rows),
            citation_flow=max(r.citation_flow for r in rows),
            trust_flow=max(r.trust_flow for r in rows),
            window_start=min(starts) if starts else None,
            window_end=max(ends) if ends else None,
            sources=list(rows),
            websites_is_upper_bound=len(rows) > 1,
        ))
    return merged


def _combine(a: BacklinkAggregate, b: BacklinkAggregate, target: str) -> BacklinkAggregate:
    starts = [d for d in (a.window_start, b.window_start) if d is not None]
    ends = [d for d in (a.window_end, b.window_end) if d is not None]
    return BacklinkAggregate(
        target=target,
        mentioning_webpages=a.mentioning_webpages + b.mentioning_webpages,
        mentioning_websites=a.mentioning_websites + b.mentioning_websites,
        citation_flow=max(a.citation_flow, b.citation_flow),
        trust_flow=max(a.trust_flow, b.trust_flow),
        window_start=min(starts) if starts else None,
        window_end=max(ends) if ends else None,
        sources=a.sources + b.sources,
        websites_is_upper_bound=a.websites_is_upper_bound or b.websites_is_upper_bound,
    )


@dataclass
class LinkCoverage:
    attached: dict[str, BacklinkAggregate] = field(default_factory=dict)
    outdated: list[str] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)


def link_coverage_index(aggregates, index: CorpusIndex) -> LinkCoverage:
    """Attach aggregates to corpus releases by canonical target.

    Targets under the corpus fold that match no release are outdated URLs;
    off-fold targets are rejected. Several aggregates landing on one
    release (distinct sub-pages) combine under that release.
    """
    out = LinkCoverage()
    for agg in aggregates:
        release_id = index.get(agg.target)
        if release_id is not None:
            existing = out.attached.get(release_id)
            out.attached[release_id] = _combine(existing, agg, existing.target) if existing else agg
        elif index.in_fold(agg.target):
            out.outdated.append(agg.target)
        else:
            out.rejected.append(agg.target)
    return out


def read_raw_links_csv(path: str | Path) -> list[RawLinkRecord]:
    """target_url,mentioning_webpages,mentioning_websites,citation_flow,
    trust_flow,window_start,window_end"""
    rows: list[RawLinkRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(RawLinkRecord(
                target_url=row["target_url"].strip(),
                mentioning_webpages=int(row["mentioning_webpages"]),
                mentioning_websites=int(row["mentioning_websites"]),
                citation_flow=int(row["citation_flow"]),
                trust_flow=int(row["trust_flow"]),
                window_start=date.fromisoformat(row["window_start"]) if row.get("window_start") else None,
                window_end=date.fromisoformat(row["window_end"]) if row.get("window_end") else None,
            ))
    return rows


def aggregate_to_dict(release_id: str, agg: BacklinkAggregate) -> dict:
    return {
        "release_id": release_id,
        "target": agg.target,
        "mentioning_webpages": agg.mentioning_webpages,
        "mentioning_websites": agg.mentioning_websites,
        "citation_flow": agg.citation_flow,
        "trust_flow": agg.trust_flow,
        "window_start": agg.window_start.isoformat() if agg.window_start else None,
        "window_end": agg.window_end.isoformat() if agg.window_end else None,
        "websites_is_upper_bound": agg.websites_is_upper_bound,
        "merged_from": len(agg.sources),
    }


def aggregate_to_json(release_id: str, agg: BacklinkAggregate) -> str:
    return json.dumps(aggregate_to_dict(release_id, agg), ensure_ascii=False)
