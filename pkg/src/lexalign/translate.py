"""Translation clients and round-trip dictionary construction.

The HTTP client speaks a small JSON protocol: POST {"q": word, "source":
from_lang, "target": to_lang} to one endpoint URL, optionally with a bearer
token, and expect {"translation": "..."} back. Every successful lookup is
appended to an on-disk cache, one line per entry:

    word<TAB>from_lang<TAB>to_lang<TAB>translation

ReplayClient serves the same cache without touching the network, so reruns
and tests are fully offline.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import requests

from .dictionary import DictionaryPairs
from .errors import DataError, TranslationError

logger = logging.getLogger(__name__)

API_KEY_ENV = "LEXALIGN_TRANSLATE_KEY"


class TranslationClient(Protocol):
    def translate(self, word: str, from_lang: str, to_lang: str) -> str: ...


def load_cache(path) -> dict:
    """Read a cache file into a {(word, from, to): translation} table."""
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t", 3)
            if len(cols) != 4:
                logger.warning("ignoring malformed cache line %r", line)
                continue
            word, src, tgt, translation = cols
            table[(word, src, tgt)] = translation
    return table


def append_cache(path, word: str, from_lang: str, to_lang: str, translation: str) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{word}\t{from_lang}\t{to_lang}\t{translation}\n")


class ReplayClient:
    """Serves translations from a cache only; anything missing fails."""

    def __init__(self, cache):
        if isinstance(cache, (str, os.PathLike)):
            self.table = load_cache(cache)
        else:
            self.table = dict(cache)

    def translate(self, word: str, from_lang: str, to_lang: str) -> str:
        try:
            return self.table[(word, from_lang, to_lang)]
        except KeyError:
            raise TranslationError(
                f"no cached translation for {word!r} {from_lang}->{to_lang}") from None


class HttpTranslationClient:
    """JSON-over-HTTP client with bounded retries, an optional requests-per-
    second cap, and a write-through cache.

    Retries cover connection failures, 5xx responses and 429; other 4xx
    statuses fail immediately. The session, sleep and clock are injectable so
    tests run without a network or a wall clock. The API key falls back to
    the LEXALIGN_TRANSLATE_KEY environment variable.
    """

    def __init__(self, endpoint: str, api_key: str | None = None, rps: float | None = None,
                 cache_path=None, max_retries: int = 3, backoff: float = 0.5,
                 timeout: float = 30.0, session=None, sleep=time.sleep,
                 clock=time.monotonic):
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if rps is not None and rps <= 0:
            raise ValueError("rps must be positive")
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.rps = rps
        self.cache_path = cache_path
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self._next_slot = 0.0
        self._cache = {}
        if cache_path is not None and os.path.exists(cache_path):
            self._cache = load_cache(cache_path)

    def _throttle(self) -> None:
        if not self.rps:
            return
        with self._lock:
            now = self._clock()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + 1.0 / self.rps
        if wait > 0:
            self._sleep(wait)

    def translate(self, word: str, from_lang: str, to_lang: str) -> str:
        key = (word, from_lang, to_lang)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"q": word, "source": from_lang, "target": to_lang}
        last_error = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            self._throttle()
            try:
                resp = self._session.post(self.endpoint, json=payload,
                                          headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 200:
                try:
                    translation = resp.json()["translation"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise TranslationError(f"malformed response for {word!r}: {exc}")
                # keep the cache file format valid
                translation = str(translation).replace("\t", " ").replace("\n", " ")
                with self._lock:
                    self._cache[key] = translation
                    if self.cache_path is not None:
                        append_cache(self.cache_path, word, from_lang, to_lang, translation)
                return translation
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = TranslationError(f"HTTP {resp.status_code}")
                continue
            raise TranslationError(
                f"HTTP {resp.status_code} translating {word!r} {from_lang}->{to_lang}")
        raise TranslationError(f"giving up on {word!r} {from_lang}->{to_lang} after "
                               f"{self.max_retries + 1} attempts: {last_error}")


@dataclass
class TranslateSummary:
    requested: int = 0
    kept: int = 0
    dropped_multi_token: int = 0
    dropped_empty: int = 0
    failed: list[str] = field(default_factory=list)


@dataclass
class ReverseSummary:
    checked: int = 0
    kept: int = 0
    mismatched: int = 0
    failed: list[str] = field(default_factory=list)


def _translate_many(client, jobs, workers: int):
    """Run (word, from, to) jobs, returning (ok, value_or_message) in input order."""
    def one(job):
        try:
            return True, client.translate(*job)
        except TranslationError as exc:
            return False, str(exc)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, jobs))
    return [one(job) for job in jobs]


def translate_wordlist(client, words, src_lang: str, tgt_lang: str, workers: int = 1):
    """Translate every word src->tgt, keeping non-empty single-token results.

    Returns (pairs, summary). Lookup failures never abort the run: the word
    lands in summary.failed and processing continues. Multi-token and empty
    translations are dropped and counted.
    """
    words = list(words)
    if not words:
        raise DataError("empty word list")
    for w in words:
        if not _word_ok(w):
            raise DataError(f"word list entries must be single tokens, got {w!r}")
    summary = TranslateSummary(requested=len(words))
    results = _translate_many(client, [(w, src_lang, tgt_lang) for w in words], workers)
    pairs = []
    for word, (ok, value) in zip(words, results):
        if not ok:
            summary.failed.append(word)
            continue
        translation = value.strip()
        if not translation:
            summary.dropped_empty += 1
        elif len(translation.split()) != 1:
            summary.dropped_multi_token += 1
        else:
            pairs.append((word, translation))
    summary.kept = len(pairs)
    logger.info("translate %s->%s: requested=%d kept=%d multi_token=%d empty=%d failed=%d",
                src_lang, tgt_lang, summary.requested, summary.kept,
                summary.dropped_multi_token, summary.dropped_empty, len(summary.failed))
    return DictionaryPairs(src_lang, tgt_lang, tuple(pairs),
                           provenance="translated"), summary


def reverse_filter(client, d: DictionaryPairs, fold_case: bool = False, workers: int = 1):
    """Keep (s, t) only when t translates back to exactly s.

    Returns (pairs, summary). A failed back-translation drops the pair and is
    counted apart from genuine mismatches.
    """
    results = _translate_many(client, [(t, d.tgt_lang, d.src_lang) for _, t in d.pairs],
                              workers)
    summary = ReverseSummary(checked=len(d.pairs))
    kept = []
    for (s, t), (ok, value) in zip(d.pairs, results):
        if not ok:
            summary.failed.append(t)
            continue
        back = value.strip()
        match = back.casefold() == s.casefold() if fold_case else back == s
        if match:
            kept.append((s, t))
        else:
            summary.mismatched += 1
    summary.kept = len(kept)
    logger.info("reverse filter %s->%s: checked=%d kept=%d mismatched=%d failed=%d",
                d.src_lang, d.tgt_lang, summary.checked, summary.kept,
                summary.mismatched, len(summary.failed))
    return DictionaryPairs(d.src_lang, d.tgt_lang, tuple(kept),
                           provenance="round-trip"), summary


def _word_ok(word: str) -> bool:
    return bool(word) and word.split() == [word]
