"""Command-line pipeline binding all stages together.

Stages: crawl -> parse -> ingest-tweets / ingest-links -> couple -> analyze
-> report. Each stage reads the previous stage's files, writes its own
atomically, and appends a run manifest to the run log. In fixtures mode
(--fixtures) fetching and unshortening come from recorded files and a
deterministic clock, so complete runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import analytics, backlink_ingest, coupling, harvester, mention_ingest, store
from .release_parser import (
    ParseError,
    load_alias_table,
    load_rewrite_table,
    parse_release,
    release_from_dict,
    release_to_json,
)
from .urls import url_digest

COMMANDS = ("crawl", "parse", "ingest-tweets", "ingest-links", "couple", "analyze", "report")


class PipelineError(Exception):
    """Stage-level failure with an actionable, stage-named message."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    seed_path: str = ""
    allowed_hosts: tuple[str, ...] = ()
    rate_limit: float = 1.0
    corpus_dir: Path = Path("corpus")
    report_dir: Path = Path("reports")
    fixtures_dir: Path | None = None
    max_depth: int = 5
    granularity: str = "yearly"
    scheme: str = "https"
    alias_institutions: Path | None = None
    alias_journals: Path | None = None
    doi_rewrites: Path | None = None
    doi_journals: Path | None = None
    external_counts: Path | None = None
    tweets_file: Path | None = None
    backlinks_file: Path | None = None
    resolver_file: Path | None = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    # stage file layout
    @property
    def pages_dir(self) -> Path:
        return self.corpus_dir / "pages"

    @property
    def crawl_manifest(self) -> Path:
        return self.corpus_dir / "crawl_manifest.jsonl"

    @property
    def corpus_file(self) -> Path:
        return self.corpus_dir / "corpus.jsonl"

    @property
    def mentions_file(self) -> Path:
        return self.corpus_dir / "mentions.jsonl"

    @property
    def backlinks_attached(self) -> Path:
        return self.corpus_dir / "backlinks.jsonl"

    @property
    def backlinks_outdated(self) -> Path:
        return self.corpus_dir / "backlinks_outdated.jsonl"

    @property
    def run_log(self) -> Path:
        return self.corpus_dir / "run_log.jsonl"


_PATH_KEYS = {"corpus_dir", "report_dir", "fixtures_dir", "alias_institutions",
              "alias_journals", "doi_rewrites", "doi_journals", "external_counts",
              "tweets_file", "backlinks_file", "resolver_file"}


def load_config_file(path: str | Path) -> dict:
    """Flat key=value file; blank lines and # comments ignored."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def build_config(file_values: dict, overrides: dict) -> PipelineConfig:
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    kwargs: dict = {}
    for key, value in merged.items():
        if key == "allowed_hosts":
            kwargs[key] = tuple(h.strip() for h in str(value).split(",") if h.strip())
        elif key == "rate_limit":
            kwargs[key] = float(value)
        elif key == "max_depth":
            kwargs[key] = int(value)
        elif key in _PATH_KEYS:
            kwargs[key] = Path(value) if value not in (None, "") else None
        elif key in PipelineConfig.__dataclass_fields__:
            kwargs[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return PipelineConfig(**kwargs)


@dataclass
class RunManifest:
    command: str
    started_at: str
    finished_at: str = ""
    input_digests: dict = field(default_factory=dict)
    output_digests: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, ensure_ascii=False, sort_keys=True)


def _require(stage: str, path: Path | None, what: str) -> Path:
    if path is None:
        raise PipelineError(stage, f"{what} not configured")
    if not Path(path).exists():
        raise PipelineError(stage, f"missing prerequisite: {what} at {path} "
                                    f"(run the producing stage first)")
    return Path(path)


def _digests(paths) -> dict:
    return {str(p): store.file_digest(p) for p in paths if Path(p).is_file()}


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_crawl(cfg: PipelineConfig, manifest: RunManifest) -> None:
    if not cfg.seed_path:
        raise PipelineError("crawl", "seed_path not configured")
    scope = harvester.CrawlScope(cfg.seed_path, frozenset(cfg.allowed_hosts), cfg.rate_limit)
    if cfg.fixtures_dir is not None:
        fetcher = harvester.DirectoryFetcher(_require("crawl", cfg.fixtures_dir, "fixtures_dir"))
        clock = harvester.VirtualClock()
    else:
        fetcher = harvester.HttpFetcher(force_scheme=None if cfg.scheme == "https" else cfg.scheme)
        clock = harvester.SystemClock()
    result = harvester.crawl(scope, fetcher, clock=clock)

    cfg.pages_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    outputs = []
    for record, page_class in result.entries:
        body_path = cfg.pages_dir / (url_digest(record.url) + ".body")
        store.atomic_write_bytes(body_path, record.body)
        outputs.append(body_path)
        lines.append(json.dumps({
            "url": record.url,
            "status": record.status,
            "digest": record.body_digest,
            "fetched_at": record.fetched_at.isoformat().replace("+00:00", "Z"),
            "class": page_class.label,
        }, ensure_ascii=False))
    store.write_jsonl(cfg.crawl_manifest, lines)
    outputs.append(cfg.crawl_manifest)
    manifest.output_digests.update(_digests(outputs))
    manifest.counts.update(result.stats)


def stage_parse(cfg: PipelineConfig, manifest: RunManifest) -> None:
    crawl_manifest = _require("parse", cfg.crawl_manifest, "crawl manifest")
    manifest.input_digests.update(_digests([crawl_manifest]))
    rewrite_table = load_rewrite_table(cfg.doi_rewrites) if cfg.doi_rewrites else ()
    unshorten = None
    if cfg.resolver_file and Path(cfg.resolver_file).exists():
        resolver = mention_ingest.CsvResolver.from_csv(cfg.resolver_file)
        unshorten = {
            url: mention_ingest.resolve_chain(url, resolver, cfg.max_depth).final
            for url in resolver.known_urls()
        }

    stats: dict = {"parsed": 0, "parse_errors": 0, "skipped_non_content": 0}
    lines = []
    for entry in store.read_jsonl(crawl_manifest):
        if entry["class"] != "press_release":
            stats["skipped_non_content"] += 1
            continue
        body = (cfg.pages_dir / (url_digest(entry["url"]) + ".body")).read_bytes()
        try:
            release = parse_release(entry["url"], body, rewrite_table=rewrite_table,
                                    unshorten=unshorten, stats=stats)
        except ParseError as err:
            stats["parse_errors"] += 1
            stats[f"parse_errors_{err.field_name}"] = stats.get(f"parse_errors_{err.field_name}", 0) + 1
            continue
        stats["parsed"] += 1
        lines.append(release_to_json(release))
    store.write_jsonl(cfg.corpus_file, lines)
    manifest.output_digests.update(_digests([cfg.corpus_file]))
    manifest.counts.update(stats)


def _read_corpus(cfg: PipelineConfig):
    for record in store.read_jsonl(cfg.corpus_file):
        yield release_from_dict(record)


def _corpus_index(cfg: PipelineConfig, stage: str) -> mention_ingest.CorpusIndex:
    _require(stage, cfg.corpus_file, "parsed corpus")
    if not cfg.seed_path:
        raise PipelineError(stage, "seed_path not configured")
    return mention_ingest.CorpusIndex.from_releases(_read_corpus(cfg), cfg.seed_path)


def stage_ingest_tweets(cfg: PipelineConfig, manifest: RunManifest) -> None:
    tweets_path = _require("ingest-tweets", cfg.tweets_file, "tweet archive")
    index = _corpus_index(cfg, "ingest-tweets")
    if cfg.resolver_file:
        resolver = mention_ingest.CsvResolver.from_csv(
            _require("ingest-tweets", cfg.resolver_file, "resolver fixture"))
    else:
        resolver = lambda url: None  # no recorded redirects: every URL is terminal
    manifest.input_digests.update(_digests(filter(None, [tweets_path, cfg.resolver_file,
                                                         cfg.corpus_file])))
    stats: dict = {}
    mentions = mention_ingest.ingest_tweets(
        store.read_jsonl(tweets_path), resolver, index, max_depth=cfg.max_depth, stats=stats)
    store.write_jsonl(cfg.mentions_file, [mention_ingest.mention_to_json(m) for m in mentions])
    manifest.output_digests.update(_digests([cfg.mentions_file]))
    stats["mentions_kept"] = len(mentions)
    manifest.counts.update(stats)


def stage_ingest_links(cfg: PipelineConfig, manifest: RunManifest) -> None:
    links_path = _require("ingest-links", cfg.backlinks_file, "backlink CSV")
    index = _corpus_index(cfg, "ingest-links")
    manifest.input_digests.update(_digests([links_path, cfg.corpus_file]))
    records = backlink_ingest.read_raw_links_csv(links_path)
    try:
        aggregates = backlink_ingest.merge_protocol_variants(records)
    except backlink_ingest.LinkValidationError as err:
        raise PipelineError("ingest-links", str(err)) from err
    coverage = backlink_ingest.link_coverage_index(aggregates, index)
    attached_lines = [
        backlink_ingest.aggregate_to_json(rid, coverage.attached[rid])
        for rid in sorted(coverage.attached)
    ]
    store.write_jsonl(cfg.backlinks_attached, attached_lines)
    store.write_jsonl(cfg.backlinks_outdated,
                      [json.dumps({"target": t}) for t in sorted(coverage.outdated)])
    manifest.output_digests.update(_digests([cfg.backlinks_attached, cfg.backlinks_outdated]))
    manifest.counts.update({
        "raw_records": len(records),
        "aggregates": len(aggregates),
        "attached": len(coverage.attached),
        "outdated": len(coverage.outdated),
        "rejected": len(coverage.rejected),
    })


def _fmt(value: float, places: int) -> str:
    return f"{value:.{places}f}"


def stage_couple(cfg: PipelineConfig, manifest: RunManifest) -> None:
    _require("couple", cfg.corpus_file, "parsed corpus")
    counts_path = _require("couple", cfg.external_counts, "external counts CSV")
    manifest.input_digests.update(_digests(filter(None, [cfg.corpus_file, counts_path,
                                                         cfg.alias_journals])))
    aliases = load_alias_table(cfg.alias_journals) if cfg.alias_journals else {}
    doi_journals = coupling.load_doi_journals(cfg.doi_journals) if cfg.doi_journals else None

    edges = coupling.build_coupling_graph(_read_corpus(cfg), doi_journals)
    stats: dict = {}
    rows = coupling.journal_coverage(_read_corpus(cfg),
                                     coupling.load_external_counts(counts_path),
                                     alias_table=aliases, stats=stats)
    cfg.report_dir.mkdir(parents=True, exist_ok=True)
    store.write_csv(cfg.report_dir / "coupling_edges.csv",
                    ["release_id", "doi", "journal"],
                    [[e.release_id, e.doi, e.journal or ""] for e in edges])
    store.write_csv(cfg.report_dir / "journal_coverage.csv",
                    ["journal", "publications_with_doi", "press_release_count", "coverage_pct"],
                    [[r.journal, r.publications_with_doi, r.press_release_count,
                      "" if r.coverage_pct is None else _fmt(r.coverage_pct, 1)]
                     for r in rows])
    manifest.output_digests.update(_digests([cfg.report_dir / "coupling_edges.csv",
                                             cfg.report_dir / "journal_coverage.csv"]))
    manifest.counts.update({"edges": len(edges), "journals": len(rows), **stats})


def stage_analyze(cfg: PipelineConfig, manifest: RunManifest) -> None:
    _require("analyze", cfg.corpus_file, "parsed corpus")
    manifest.input_digests.update(_digests([cfg.corpus_file]))
    aliases = load_alias_table(cfg.alias_institutions) if cfg.alias_institutions else {}
    report = cfg.report_dir
    report.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []
    populations: dict = {}

    total = anomalous = 0
    for release in _read_corpus(cfg):
        total += 1
        anomalous += release.date_anomaly
    populations["corpus_total"] = total
    populations["date_anomalous_excluded_from_series"] = anomalous

    series = analytics.output_series(_read_corpus(cfg), cfg.granularity)
    header = ["year" if cfg.granularity == "yearly" else "date", "count"]
    store.write_csv(report / "annual_output.csv", header,
                    [[str(b), n] for b, n in series])
    outputs.append(report / "annual_output.csv")
    populations["annual_output"] = sum(n for _, n in series)
    if cfg.granularity == "daily":
        peak = analytics.peak_bucket(series)
        if peak is not None:
            populations["peak_day"] = str(peak[0])
            populations["peak_day_count"] = peak[1]

    types = analytics.type_distribution(_read_corpus(cfg))
    store.write_csv(report / "type_distribution.csv", ["type", "count", "pct"],
                    [[t.value, n, _fmt(p, 1)]
                     for t, (n, p) in sorted(types.items(), key=lambda kv: (-kv[1][0], kv[0].value))])
    outputs.append(report / "type_distribution.csv")
    populations["type_distribution"] = sum(n for n, _ in types.values())

    keywords = analytics.keyword_frequency(_read_corpus(cfg))
    store.write_csv(report / "keyword_frequency.csv", ["keyword", "occurrences"],
                    [[k, n] for k, n in keywords])
    outputs.append(report / "keyword_frequency.csv")

    graph = analytics.cooccurrence_graph(_read_corpus(cfg))
    store.write_json(report / "cooccurrence_graph.json", analytics.cograph_to_json_dict(graph))
    outputs.append(report / "cooccurrence_graph.json")

    regions = analytics.region_distribution(_read_corpus(cfg))
    store.write_csv(report / "region_distribution.csv", ["region", "count", "pct"],
                    [[r.value, n, _fmt(p, 1)]
                     for r, (n, p) in sorted(regions.items(), key=lambda kv: (-kv[1][0], kv[0].value))])
    outputs.append(report / "region_distribution.csv")
    populations["region_distribution"] = sum(n for n, _ in regions.values())

    pios = analytics.pio_ranking(_read_corpus(cfg), aliases)
    store.write_csv(report / "pio_ranking.csv", ["institution", "count"],
                    [[name, n] for name, n in pios])
    outputs.append(report / "pio_ranking.csv")

    mentions = None
    if cfg.mentions_file.exists():
        mentions = [mention_ingest.mention_from_dict(r) for r in store.read_jsonl(cfg.mentions_file)]
        populations["mentions"] = len(mentions)
        store.write_csv(report / "mention_series.csv", ["year", "count"],
                        [[y, n] for y, n in analytics.mention_series(mentions)])
        outputs.append(report / "mention_series.csv")
        ratios = analytics.tweets_per_release(_read_corpus(cfg), mentions)
        store.write_csv(report / "tweets_per_release.csv", ["year", "tweets_per_release"],
                        [[y, _fmt(v, 2)] for y, v in ratios.items()])
        outputs.append(report / "tweets_per_release.csv")

    linked: dict[str, dict] = {}
    if cfg.backlinks_attached.exists():
        linked = {r["release_id"]: r for r in store.read_jsonl(cfg.backlinks_attached)}
        windows = [r["window_start"] for r in linked.values() if r.get("window_start")]
        if windows:
            populations["backlink_window_start"] = min(windows)
            populations["backlink_window_end"] = max(
                r["window_end"] for r in linked.values() if r.get("window_end"))

    if mentions is not None and cfg.backlinks_attached.exists():
        rows = analytics.coverage_table(_read_corpus(cfg), mentions, set(linked))
        store.write_csv(report / "coverage_table.csv",
                        ["year", "published", "tweeted", "pct_tweeted", "web_linked", "pct_web"],
                        [[r.year, r.published, r.tweeted, _fmt(r.pct_tweeted, 2),
                          r.web_linked, _fmt(r.pct_web, 1)] for r in rows])
        outputs.append(report / "coverage_table.csv")
        populations["coverage_table"] = sum(r.published for r in rows)

    store.write_json(report / "summary.json", populations)
    outputs.append(report / "summary.json")
    manifest.output_digests.update(_digests(outputs))
    manifest.counts.update(populations)


def stage_report(cfg: PipelineConfig, manifest: RunManifest) -> None:
    summary = _require("report", cfg.report_dir / "summary.json", "analyze output")
    report_files = sorted(p for p in cfg.report_dir.iterdir()
                          if p.is_file() and p.name != "report_manifest.json")
    manifest.input_digests.update(_digests([summary]))
    payload = {
        "reports": {p.name: store.file_digest(p) for p in report_files},
        "populations": json.loads(summary.read_text(encoding="utf-8")),
    }
    store.write_json(cfg.report_dir / "report_manifest.json", payload)
    manifest.output_digests.update(_digests([cfg.report_dir / "report_manifest.json"]))
    manifest.counts["report_files"] = len(report_files)


_STAGES = {
    "crawl": stage_crawl,
    "parse": stage_parse,
    "ingest-tweets": stage_ingest_tweets,
    "ingest-links": stage_ingest_links,
    "couple": stage_couple,
    "analyze": stage_analyze,
    "report": stage_report,
}


def run(command: str, cfg: PipelineConfig) -> RunManifest:
    """Execute one pipeline stage under the output-directory lock and
    append its manifest to the run log."""
    if command not in _STAGES:
        raise PipelineError(command, f"unknown command; expected one of {', '.join(COMMANDS)}")
    manifest = RunManifest(command=command,
                           started_at=datetime.now(timezone.utc).isoformat())
    cfg.corpus_dir.mkdir(parents=True, exist_ok=True)
    with store.DirectoryLock(cfg.corpus_dir):
        _STAGES[command](cfg, manifest)
        manifest.finished_at = datetime.now(timezone.utc).isoformat()
        with open(cfg.run_log, "a", encoding="utf-8") as fh:
            fh.write(manifest.to_json() + "\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pressmetrics",
        description="Harvest press releases and compute mention, backlink, and coupling analytics.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--corpus-dir", dest="corpus_dir")
    parser.add_argument("--report-dir", dest="report_dir")
    parser.add_argument("--rate-limit", dest="rate_limit", type=float)
    parser.add_argument("--max-depth", dest="max_depth", type=int)
    parser.add_argument("--fixtures", dest="fixtures_dir",
                        help="recorded-response directory; enables fixtures mode")
    parser.add_argument("--granularity", choices=("yearly", "daily"))
    parser.add_argument("--seed-path", dest="seed_path")
    args = parser.parse_args(argv)

    try:
        file_values = load_config_file(args.config) if args.config else {}
        overrides = {k: getattr(args, k) for k in
                     ("corpus_dir", "report_dir", "rate_limit", "max_depth",
                      "fixtures_dir", "granularity", "seed_path")}
        cfg = build_config(file_values, overrides)
        manifest = run(args.command, cfg)
    except (PipelineError, ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"{args.command}: ok {json.dumps(manifest.counts, default=str)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
