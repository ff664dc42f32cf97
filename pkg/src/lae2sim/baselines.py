"""Rule-based replacement policies: FIFO, K-LRU and (windowed) LFU.

Tie-breaking is fixed so that runs are reproducible: LFU falls back to the
least recent access and then to the smallest id; FIFO and K-LRU never tie
because every request occupies its own timeslot.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .cache import CacheState, Policy

__all__ = [
    "KLruConfig",
    "LfuConfig",
    "fifo_evict",
    "klru_evict",
    "lfu_evict",
    "FifoPolicy",
    "KLruPolicy",
    "LruPolicy",
    "LfuPolicy",
]


@dataclass(frozen=True)
class KLruConfig:
    k_hits: int = 2

    def __post_init__(self):
        if self.k_hits < 1:
            raise ValueError("k_hits must be >= 1")


@dataclass(frozen=True)
class LfuConfig:
    window: Optional[int] = None

    def __post_init__(self):
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")


def fifo_evict(cache: CacheState) -> int:
    """The cached id inserted earliest."""
    inserted = cache.inserted
    return min(inserted, key=inserted.__getitem__)


def klru_evict(cached: Iterable[int], history: Mapping[int, deque], k_hits: int) -> int:
    """Evict the id whose ``k_hits``-th most recent access is oldest.

    ``history[i]`` holds at most the last ``k_hits`` access times of ``i``,
    oldest first. Ids with a shorter history rank before every fully observed
    id, ordered by their oldest known access.
    """

    def key(i):
        h = history[i]
        return (len(h) >= k_hits, h[0], i)

    return min(cached, key=key)


def lfu_evict(cached: Iterable[int], counts: Mapping[int, int], last_access: Mapping[int, int]) -> int:
    """Fewest requests, then least recently accessed, then smallest id."""
    return min(cached, key=lambda i: (counts.get(i, 0), last_access[i], i))


class FifoPolicy(Policy):
    name = "fifo"

    def choose_eviction(self, t, content, cache):
        return fifo_evict(cache)


class KLruPolicy(Policy):
    """LRU-K: access history is retained across evictions."""

    def __init__(self, cfg: KLruConfig = KLruConfig()):
        self.cfg = cfg
        self.name = f"klru{cfg.k_hits}"
        self._history: dict[int, deque] = {}

    def on_request(self, t, content, cache):
        h = self._history.get(content)
        if h is None:
            h = self._history[content] = deque(maxlen=self.cfg.k_hits)
        h.append(t)

    def choose_eviction(self, t, content, cache):
        return klru_evict(cache, self._history, self.cfg.k_hits)


class LruPolicy(KLruPolicy):
    def __init__(self):
        super().__init__(KLruConfig(1))
        self.name = "lru"


class LfuPolicy(Policy):
    """LFU with request counts over the last ``window`` requests (or all time)."""

    def __init__(self, cfg: LfuConfig = LfuConfig()):
        self.cfg = cfg
        self.name = "lfu" if cfg.window is None else f"lfu{cfg.window}"
        self._counts: dict[int, int] = {}
        self._recent: deque = deque()

    def on_request(self, t, content, cache):
        counts = self._counts
        counts[content] = counts.get(content, 0) + 1
        if self.cfg.window is not None:
            self._recent.append(content)
            if len(self._recent) > self.cfg.window:
                old = self._recent.popleft()
                counts[old] -= 1

    def choose_eviction(self, t, content, cache):
        return lfu_evict(cache, self._counts, cache.last_access)
