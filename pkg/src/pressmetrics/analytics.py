"""Descriptive statistics over the harvested corpus: output series, type,
keyword and region distributions, the keyword co-occurrence network, PIO
rankings, mention series, and the per-year mention-coverage table.

Every operation is a pure single pass over an iterable of releases, so
callers can stream a corpus file without materializing it. All rankings
break count ties lexicographically on the entity name, and all percentages
round half-up at the precision their report prints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from itertools import combinations

from .backlink_ingest import LinkCoverage
from .release_parser import PressRelease, PressType, Region, normalize_institution
from .rounding import percentage, ratio


def _year_eligible(release: PressRelease, include_anomalous: bool) -> bool:
    return include_anomalous or not release.date_anomaly


def output_series(corpus, granularity: str = "yearly",
                  include_anomalous: bool = False) -> list[tuple[int | date, int]]:
    """Publication counts per year (or per day), buckets sorted ascending.

    Date-anomalous releases are excluded from year-bucketed output by
    default; they still count toward corpus totals elsewhere.
    """
    if granularity not in ("yearly", "daily"):
        raise ValueError(f"unknown granularity {granularity!r}")
    counts: dict = {}
    for release in corpus:
        if not _year_eligible(release, include_anomalous):
            continue
        bucket = release.metadata.date.year if granularity == "yearly" else release.metadata.date
        counts[bucket] = counts.get(bucket, 0) + 1
    return sorted(counts.items())


def peak_bucket(series: list[tuple]) -> tuple | None:
    """Bucket with the highest count; earliest bucket wins a tie (the
    series is bucket-sorted and max keeps the first maximum)."""
    if not series:
        return None
    return max(series, key=lambda item: item[1])


def distribution_percentages(counts: dict, places: int = 1) -> dict:
    """Attach half-up percentages to a count mapping; the denominator is
    the mapping's own total."""
    total = sum(counts.values())
    return {key: (n, percentage(n, total, places) if total else 0.0)
            for key, n in counts.items()}


def type_distribution(corpus) -> dict[PressType, tuple[int, float]]:
    """Counts and one-decimal shares per press type, over the releases that
    carry a type value."""
    counts: dict[PressType, int] = {}
    for release in corpus:
        press_type = release.metadata.type
        if press_type is None:
            continue
        counts[press_type] = counts.get(press_type, 0) + 1
    return distribution_percentages(counts)


def keyword_frequency(corpus) -> list[tuple[str, int]]:
    """Keywords ranked by the number of releases using them (a release
    counts once per keyword no matter how often it repeats one)."""
    counts: dict[str, int] = {}
    for release in corpus:
        for keyword in set(release.metadata.keywords):
            counts[keyword] = counts.get(keyword, 0) + 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


@dataclass
class CoGraph:
    """Keyword co-occurrence network.

    nodes map keywords to occurrence counts; edges map unordered keyword
    pairs to the number of releases using both; link_strength sums each
    keyword's incident edge weights.
    """

    nodes: dict[str, int] = field(default_factory=dict)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    link_strength: dict[str, int] = field(default_factory=dict)

    def total_weight(self) -> int:
        return sum(self.edges.values())


def cooccurrence_graph(corpus) -> CoGraph:
    """For each release with k distinct keywords, every one of the C(k,2)
    unordered pairs gains weight 1. No self-edges can arise."""
    graph = CoGraph()
    for release in corpus:
        keywords = sorted(set(release.metadata.keywords))
        for keyword in keywords:
            graph.nodes[keyword] = graph.nodes.get(keyword, 0) + 1
        for pair in combinations(keywords, 2):
            graph.edges[pair] = graph.edges.get(pair, 0) + 1
    strength = {keyword: 0 for keyword in graph.nodes}
    for (a, b), weight in graph.edges.items():
        strength[a] += weight
        strength[b] += weight
    graph.link_strength = strength
    return graph


def cograph_to_json_dict(graph: CoGraph) -> dict:
    """Network JSON for co-occurrence map viewers: nodes carry occurrence
    counts and link strength, links carry pair weights."""
    order = {keyword: i + 1 for i, keyword in enumerate(sorted(graph.nodes))}
    nodes = [
        {"id": order[k], "label": k, "occurrences": graph.nodes[k],
         "link_strength": graph.link_strength.get(k, 0)}
        for k in sorted(graph.nodes)
    ]
    links = [
        {"source": order[a], "target": order[b], "weight": w}
        for (a, b), w in sorted(graph.edges.items())
    ]
    return {"nodes": nodes, "links": links}


def region_distribution(corpus) -> dict[Region, tuple[int, float]]:
    """Counts and one-decimal shares per PIO region, over the releases that
    carry region metadata."""
    counts: dict[Region, int] = {}
    for release in corpus:
        region = release.metadata.region
        if region is Region.UNKNOWN:
            continue
        counts[region] = counts.get(region, 0) + 1
    return distribution_percentages(counts)


def pio_ranking(corpus, alias_table: dict[str, str] | None = None) -> list[tuple[str, int]]:
    """Submitting institutions ranked by output, internal units merged
    through the alias table; ties break on the name."""
    alias_table = alias_table or {}
    counts: dict[str, int] = {}
    for release in corpus:
        if not release.metadata.institution:
            continue
        name = normalize_institution(release.metadata.institution, alias_table)
        counts[name] = counts.get(name, 0) + 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


def mention_series(mentions) -> list[tuple[int, int]]:
    """Tweet mentions per tweet-publication year."""
    counts: dict[int, int] = {}
    for mention in mentions:
        year = mention.created_at.year
        counts[year] = counts.get(year, 0) + 1
    return sorted(counts.items())


def tweets_per_release(corpus, mentions) -> dict[int, float]:
    """Tweets over releases for pairs published the same year, two-decimal.

    The numerator counts tweets from year Y that link at least one release
    also published in Y; years without published releases are omitted.
    """
    published: dict[int, int] = {}
    year_of_release: dict[str, int] = {}
    for release in corpus:
        if release.date_anomaly:
            continue
        year = release.metadata.date.year
        published[year] = published.get(year, 0) + 1
        year_of_release[release.id] = year

    same_year_tweets: dict[int, int] = {}
    for mention in mentions:
        year = mention.created_at.year
        if any(year_of_release.get(rid) == year for rid in mention.matched_release_ids()):
            same_year_tweets[year] = same_year_tweets.get(year, 0) + 1

    return {year: ratio(same_year_tweets.get(year, 0), n, 2)
            for year, n in sorted(published.items())}


@dataclass
class CoverageRow:
    """One release-publication year of the mention-coverage table."""

    year: int
    published: int
    tweeted: int
    pct_tweeted: float
    web_linked: int
    pct_web: float


def coverage_table(corpus, mentions, backlinks) -> list[CoverageRow]:
    """Share of each year's releases mentioned at least once.

    A release counts as tweeted (web-linked) when at least one matched
    mention (attached backlink aggregate) points at it, regardless of the
    mention's own year. Outdated URLs never match, so they are excluded by
    construction. Percentages print at two decimals for tweets and one for
    web links.
    """
    published: dict[int, int] = {}
    year_of_release: dict[str, int] = {}
    for release in corpus:
        if release.date_anomaly:
            continue
        year = release.metadata.date.year
        published[year] = published.get(year, 0) + 1
        year_of_release[release.id] = year

    tweeted_releases: set[str] = set()
    for mention in mentions:
        tweeted_releases.update(mention.matched_release_ids())

    if isinstance(backlinks, LinkCoverage):
        linked_releases = set(backlinks.attached)
    else:
        linked_releases = set(backlinks)

    tweeted_by_year: dict[int, int] = {}
    linked_by_year: dict[int, int] = {}
    for release_id, year in year_of_release.items():
        if release_id in tweeted_releases:
            tweeted_by_year[year] = tweeted_by_year.get(year, 0) + 1
        if release_id in linked_releases:
            linked_by_year[year] = linked_by_year.get(year, 0) + 1

    rows = []
    for year, count in sorted(published.items()):
        tweeted = tweeted_by_year.get(year, 0)
        linked = linked_by_year.get(year, 0)
        rows.append(CoverageRow(
            year=year,
            published=count,
            tweeted=tweeted,
            pct_tweeted=percentage(tweeted, count, 2),
            web_linked=linked,
            pct_web=percentage(linked, count, 1),
        ))
    return rows
