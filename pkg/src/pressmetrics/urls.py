"""URL canonicalization shared by every stage.

One press release has one identity: scheme is folded to https, the host is
lowercased, query strings and fragments are dropped, and duplicate slashes
in the path collapse. All cross-stage joins (crawl manifest, corpus index,
tweet matching, backlink merging) happen on these canonical forms.
"""

from __future__ import annotations

import hashlib
import posixpath
import re
from urllib.parse import urlsplit, urlunsplit

_DUP_SLASH = re.compile(r"/{2,}")


def canonicalize_url(url: str) -> str:
    """Return the canonical form of ``url``.

    http and https variants of one URL canonicalize identically. Raises
    ValueError for non-http(s) schemes (mailto:, javascript:, ...) or
    host-less URLs.
    """
    url = url.strip()
    parts = urlsplit(url)
    if not parts.scheme:
        parts = urlsplit("https://" + url)
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https"):
        raise ValueError(f"not an http(s) URL: {url!r}")
    try:
        host = (parts.hostname or "").lower()
        port = parts.port
    except ValueError:
        raise ValueError(f"unparseable host in URL: {url!r}") from None
    if not host:
        raise ValueError(f"URL has no host: {url!r}")
    if port is not None:
        host = f"{host}:{port}"
    path = _DUP_SLASH.sub("/", parts.path) or "/"
    return urlunsplit(("https", host, path, "", ""))


def url_host(canonical_url: str) -> str:
    return urlsplit(canonical_url).netloc


def url_path(canonical_url: str) -> str:
    return urlsplit(canonical_url).path


def strip_scheme(canonical_url: str) -> str:
    return canonical_url.split("://", 1)[1]


def normalize_fold(seed_path: str) -> str:
    """Normalize a host+path prefix ("host.example/releases/") for matching."""
    fold = seed_path.strip()
    if "://" in fold:
        fold = fold.split("://", 1)[1]
    if "/" in fold:
        host, _, rest = fold.partition("/")
        return host.lower() + "/" + _DUP_SLASH.sub("/", rest)
    return fold.lower()


def under_fold(canonical_url: str, seed_path: str) -> bool:
    """True when the canonical URL lies under the host+path prefix."""
    return strip_scheme(canonical_url).startswith(normalize_fold(seed_path))


def release_id_from_url(canonical_url: str) -> str:
    """Terminal path segment without its file extension; the corpus join key."""
    tail = posixpath.basename(url_path(canonical_url).rstrip("/"))
    stem, _ = posixpath.splitext(tail)
    return stem or tail


def url_digest(canonical_url: str) -> str:
    return hashlib.sha256(canonical_url.encode("utf-8")).hexdigest()
