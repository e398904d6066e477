"""Polite scoped crawler: fetch pages under one URL fold, rate-limited per
host, and classify each payload as press-release content or discardable
non-content.

The crawl frontier only ever holds canonical URLs under the configured seed
fold, so every downstream join key is minted here. Politeness is a shared
per-host limiter that serializes request release times; with the default
limit no host sees more than one request per second.
"""

from __future__ import annotations

import hashlib
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from urllib.parse import urljoin

import requests

from .pagescan import scan_page
from .urls import canonicalize_url, normalize_fold, under_fold, url_host, url_path


class ScopeViolation(Exception):
    """URL outside the configured crawl fold."""


class FetchRetryError(Exception):
    """Network-level failure that survived all retry attempts."""

    def __init__(self, url: str, attempts: int, cause: Exception | None = None):
        super().__init__(f"fetch failed after {attempts} attempts: {url}")
        self.url = url
        self.attempts = attempts
        self.cause = cause


@dataclass(frozen=True)
class CrawlScope:
    """Scoped URL space: a host+path fold, allowed hosts, and politeness rate."""

    seed_path: str
    allowed_hosts: frozenset[str] = frozenset()
    rate_limit: float = 1.0

    def __post_init__(self):
        if not self.seed_path.strip():
            raise ValueError("seed_path must be non-empty")
        if self.rate_limit < 0:
            raise ValueError("rate_limit must be >= 0")
        fold = normalize_fold(self.seed_path)
        object.__setattr__(self, "seed_path", fold)
        hosts = frozenset(h.lower() for h in self.allowed_hosts)
        if not hosts:
            hosts = frozenset({fold.split("/", 1)[0]})
        object.__setattr__(self, "allowed_hosts", hosts)

    @property
    def seed_url(self) -> str:
        return canonicalize_url("https://" + self.seed_path)

    def contains(self, canonical: str) -> bool:
        return url_host(canonical) in self.allowed_hosts and under_fold(canonical, self.seed_path)


@dataclass
class FetchRecord:
    """One completed request: payload, digest, status, and completion time."""

    url: str
    status: int
    body_digest: str
    fetched_at: datetime | None
    body: bytes

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


class NonContentReason(str, Enum):
    SITEMAP = "sitemap"
    FORM = "form"
    SERVER_MESSAGE = "server_message"
    EMPTY = "empty"
    OTHER = "other"


@dataclass(frozen=True)
class PageClass:
    """Exactly one of: press-release content, or non-content with a reason."""

    press_release: bool
    reason: NonContentReason | None = None

    def __post_init__(self):
        if self.press_release == (self.reason is not None):
            raise ValueError("reason must be set iff the page is non-content")

    @property
    def label(self) -> str:
        return "press_release" if self.press_release else self.reason.value

    @classmethod
    def press(cls) -> "PageClass":
        return cls(press_release=True)

    @classmethod
    def non_content(cls, reason: NonContentReason) -> "PageClass":
        return cls(press_release=False, reason=reason)


# ---------------------------------------------------------------------------
# Clocks and rate limiting
# ---------------------------------------------------------------------------

class SystemClock:
    """Wall clock; monotonic() feeds the limiter, utcnow() stamps records."""

    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def utcnow(self) -> datetime:
        return datetime.now(timezone.utc)


class VirtualClock:
    """Deterministic clock for fixture runs: sleep() advances time exactly.

    utcnow() maps virtual seconds onto a fixed epoch so recorded timestamps
    are byte-identical across reruns.
    """

    def __init__(self, epoch: datetime | None = None):
        self._now = 0.0
        self._epoch = epoch or datetime(1970, 1, 1, tzinfo=timezone.utc)

    def monotonic(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self._now += seconds

    def utcnow(self) -> datetime:
        return self._epoch + timedelta(seconds=self._now)


class RateLimiter:
    """Shared per-host limiter serializing request release times.

    acquire() blocks until at least ``rate_limit`` seconds have passed since
    the previous grant for the same host, then records the grant on the
    trace. Grants are re-checked against actual clock readings, so recorded
    spacings are >= rate_limit even under scheduling jitter or concurrency.
    """

    def __init__(self, rate_limit: float, clock=None):
        if rate_limit < 0:
            raise ValueError("rate_limit must be >= 0")
        self.rate_limit = rate_limit
        self.clock = clock or SystemClock()
        self.trace: list[tuple[str, float]] = []
        self._next_allowed: dict[str, float] = {}
        self._lock = threading.Lock()

    def acquire(self, host: str) -> float:
        while True:
            with self._lock:
                now = self.clock.monotonic()
                wait = self._next_allowed.get(host, float("-inf")) - now
                if wait <= 0:
                    self._next_allowed[host] = now + self.rate_limit
                    self.trace.append((host, now))
                    return now
            self.clock.sleep(wait)

    def spacings(self, host: str) -> list[float]:
        grants = [t for h, t in self.trace if h == host]
        return [b - a for a, b in zip(grants, grants[1:])]


# ---------------------------------------------------------------------------
# Fetchers
# ---------------------------------------------------------------------------

class HttpFetcher:
    """Live fetcher. force_scheme lets tests hit a plain-http fixture server
    while identities stay canonical (https)."""

    def __init__(self, timeout: float = 30.0, force_scheme: str | None = None):
        self.timeout = timeout
        self.force_scheme = force_scheme
        self.session = requests.Session()

    def fetch(self, canonical_url: str) -> tuple[int, bytes]:
        url = canonical_url
        if self.force_scheme:
            url = self.force_scheme + "://" + url.split("://", 1)[1]
        resp = self.session.get(url, timeout=self.timeout)
        return resp.status_code, resp.content


class DirectoryFetcher:
    """Recorded-response fetcher for fixtures mode: root/<host>/<path>.

    Directory URLs map onto their index.html; anything absent is a 404, so
    fixture runs are fully network-free.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch(self, canonical_url: str) -> tuple[int, bytes]:
        path = url_path(canonical_url)
        if path.endswith("/"):
            path += "index.html"
        candidate = self.root / url_host(canonical_url) / path.lstrip("/")
        if candidate.is_dir():
            candidate = candidate / "index.html"
        if not candidate.is_file():
            return 404, b""
        return 200, candidate.read_bytes()


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def fetch_page(url, scope, fetcher, limiter=None, clock=None, retries: int = 3) -> FetchRecord:
    """Fetch one in-scope URL politely.

    Blocks on the shared limiter until the previous request to the same host
    is at least ``scope.rate_limit`` seconds old. Network failures retry up
    to ``retries`` attempts with doubling backoff starting at the rate
    limit; non-success statuses are recorded, never raised.
    """
    clock = clock or SystemClock()
    canonical = canonicalize_url(url)
    if not scope.contains(canonical):
        raise ScopeViolation(f"{canonical} is outside fold {scope.seed_path}")
    if limiter is None:
        limiter = RateLimiter(scope.rate_limit, clock=clock)
    host = url_host(canonical)

    backoff = scope.rate_limit
    last_error: Exception | None = None
    for attempt in range(1, retries + 1):
        limiter.acquire(host)
        try:
            status, body = fetcher.fetch(canonical)
        except Exception as exc:  # network-level only; HTTP errors come back as statuses
            last_error = exc
            if attempt < retries:
                clock.sleep(backoff)
                backoff = backoff * 2 if backoff > 0 else 0.0
            continue
        return FetchRecord(
            url=canonical,
            status=status,
            body_digest=hashlib.sha256(body).hexdigest(),
            fetched_at=clock.utcnow(),
            body=body,
        )
    raise FetchRetryError(canonical, retries, last_error)


def expand_frontier(record: FetchRecord, scope: CrawlScope, seen: set[str],
                    stats: dict | None = None) -> list[str]:
    """New in-scope canonical URLs linked from a fetched page.

    Non-hypertext payloads expand to nothing. Output preserves document
    order, is duplicate-free, and excludes everything in ``seen``;
    malformed or non-http links are skipped and counted in ``stats``.
    """
    if stats is None:
        stats = {}
    scan = scan_page(record.body)
    if not scan.is_html:
        return []
    out: list[str] = []
    emitted: set[str] = set()
    for href in scan.anchors:
        try:
            canonical = canonicalize_url(urljoin(record.url, href.strip()))
        except ValueError:
            stats["malformed_links"] = stats.get("malformed_links", 0) + 1
            continue
        if not scope.contains(canonical):
            stats["offscope_links"] = stats.get("offscope_links", 0) + 1
            continue
        if canonical in seen or canonical in emitted:
            continue
        emitted.add(canonical)
        out.append(canonical)
    return out


_SERVER_MESSAGE = re.compile(
    r"\b(error|not found|forbidden|unavailable|maintenance|access denied|bad gateway)\b",
    re.IGNORECASE,
)


def classify_page(body: bytes) -> PageClass:
    """Press-release content iff the machine-readable metadata block is
    present (date and type fields); otherwise non-content with the
    best-matching reason."""
    if not body or not body.strip():
        return PageClass.non_content(NonContentReason.EMPTY)
    scan = scan_page(body)
    if scan.xml_root in ("urlset", "sitemapindex"):
        return PageClass.non_content(NonContentReason.SITEMAP)
    if scan.meta.get("date") and scan.meta.get("type"):
        return PageClass.press()
    if _SERVER_MESSAGE.search(scan.title):
        return PageClass.non_content(NonContentReason.SERVER_MESSAGE)
    if scan.has_form:
        return PageClass.non_content(NonContentReason.FORM)
    return PageClass.non_content(NonContentReason.OTHER)


@dataclass
class CrawlResult:
    entries: list[tuple[FetchRecord, PageClass]] = field(default_factory=list)
    failures: list[tuple[str, int]] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def crawl(scope: CrawlScope, fetcher, clock=None, limiter=None, retries: int = 3) -> CrawlResult:
    """Breadth-first crawl of the whole fold, each URL fetched exactly once.

    The frontier seeds from the fold root; only press-release pages and the
    other in-scope documents they link (directly or transitively) are
    visited. Failed URLs land in ``failures`` and never produce records.
    """
    clock = clock or SystemClock()
    if limiter is None:
        limiter = RateLimiter(scope.rate_limit, clock=clock)
    result = CrawlResult()
    seed = scope.seed_url
    frontier: deque[str] = deque([seed])
    seen: set[str] = {seed}
    while frontier:
        url = frontier.popleft()
        try:
            record = fetch_page(url, scope, fetcher, limiter=limiter, clock=clock, retries=retries)
        except FetchRetryError as err:
            result.failures.append((url, err.attempts))
            continue
        page_class = classify_page(record.body)
        result.entries.append((record, page_class))
        if record.ok:
            for new_url in expand_frontier(record, scope, seen, stats=result.stats):
                seen.add(new_url)
                frontier.append(new_url)
    result.stats["fetched"] = len(result.entries)
    result.stats["failed"] = len(result.failures)
    result.stats["press_releases"] = sum(1 for _, c in result.entries if c.press_release)
    return result
