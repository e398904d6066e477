"""Batch toolkit for harvesting science press releases and computing their
online-impact analytics: metadata and DOI extraction, tweet-mention and
backlink ingestion, co-occurrence networks, and coverage tables."""

__version__ = "0.1.0"
