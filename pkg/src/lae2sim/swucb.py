"""Sliding-window UCB scoring for eviction.

For content ``i`` at timeslot ``t`` with window ``tau`` and discount ``gamma``::

    popularity(i) = (1/tau) * sum_{s=t-tau+1..t} gamma**(t-s) * [R_s == i]
    evictions(i)  = sum_{s=t-tau+1..t} [e_s == i]
    score(i)      = popularity(i) + B * sqrt(log(min(t, tau)) / evictions(i))

with ``B < 0``; the content with the smallest score is evicted. A content
with no eviction in the window (or any content at ``t == 0``) gets the
bounded padding ``B * padding_cap`` instead of an infinite one.

Both windows are the half-open interval ``(t - tau, t]``. Aggregates are
maintained incrementally so a query costs O(1).
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

__all__ = ["BanditConfig", "SlidingWindowUCB", "e2_evict"]


@dataclass(frozen=True)
class BanditConfig:
    gamma: float = 0.99
    tau: int = 1000
    B: float = -1.0
    padding_cap: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if not self.B < 0:
            raise ValueError("B must be negative")
        if not self.padding_cap > 0:
            raise ValueError("padding_cap must be positive")


class SlidingWindowUCB:
    """Request and eviction logs over the last ``tau`` timeslots.

    ``_disc[i] = [value, stamp]`` stores ``sum gamma**(stamp - s)`` over the
    in-window requests of ``i``; it is brought forward to ``t`` lazily.
    """

    def __init__(self, cfg: BanditConfig = BanditConfig(), debug: bool = False):
        self.cfg = cfg
        self.t = 0
        self._requests: deque = deque()
        self._req_count: dict[int, int] = {}
        self._disc: dict[int, list] = {}
        self._evictions: deque = deque()
        self._evict_count: dict[int, int] = {}
        self.debug_rows: Optional[list] = [] if debug else None

    def advance(self, t: int) -> None:
        """Move the clock to ``t`` and drop entries at or before ``t - tau``."""
        if t < self.t:
            raise ValueError("time cannot go backwards")
        self.t = t
        horizon = t - self.cfg.tau
        reqs = self._requests
        gamma = self.cfg.gamma
        while reqs and reqs[0][0] <= horizon:
            s, i = reqs.popleft()
            n = self._req_count[i] - 1
            if n:
                self._req_count[i] = n
                entry = self._disc[i]
                entry[0] -= gamma ** (entry[1] - s)
            else:
                del self._req_count[i]
                del self._disc[i]
        evs = self._evictions
        while evs and evs[0][0] <= horizon:
            _, i = evs.popleft()
            n = self._evict_count[i] - 1
            if n:
                self._evict_count[i] = n
            else:
                del self._evict_count[i]

    def record_request(self, t: int, content: int) -> None:
        self.advance(t)
        self._requests.append((t, content))
        self._req_count[content] = self._req_count.get(content, 0) + 1
        entry = self._disc.get(content)
        if entry is None:
            self._disc[content] = [1.0, t]
        else:
            entry[0] = entry[0] * self.cfg.gamma ** (t - entry[1]) + 1.0
            entry[1] = t

    def record_eviction(self, t: int, content: int) -> None:
        self.advance(t)
        self._evictions.append((t, content))
        self._evict_count[content] = self._evict_count.get(content, 0) + 1

    def empirical_popularity(self, content: int) -> float:
        entry = self._disc.get(content)
        if entry is None:
            return 0.0
        return entry[0] * self.cfg.gamma ** (self.t - entry[1]) / self.cfg.tau

    def eviction_count(self, content: int) -> int:
        return self._evict_count.get(content, 0)

    def padding(self, evictions: int) -> float:
        cfg = self.cfg
        horizon = min(self.t, cfg.tau)
        if evictions == 0 or horizon < 1:
            return cfg.B * cfg.padding_cap
        return cfg.B * math.sqrt(math.log(horizon) / evictions)

    def ucb_score(self, content: int) -> float:
        return self.empirical_popularity(content) + self.padding(self.eviction_count(content))

    def select(self, candidates: Sequence[int]) -> int:
        """Candidate with the lowest score; ties prefer more evictions, then smaller id."""
        if not candidates:
            raise ValueError("no eviction candidates")
        cfg = self.cfg
        t = self.t
        gamma, tau = cfg.gamma, cfg.tau
        capped = cfg.B * cfg.padding_cap
        horizon = min(t, tau)
        log_h = math.log(horizon) if horizon >= 1 else 0.0
        disc = self._disc
        counts = self._evict_count
        best = None
        best_key = None
        rows = []
        for i in candidates:
            n = counts.get(i, 0)
            entry = disc.get(i)
            x = 0.0 if entry is None else entry[0] * gamma ** (t - entry[1]) / tau
            if n == 0 or horizon < 1:
                score = x + capped
            else:
                score = x + cfg.B * math.sqrt(log_h / n)
            key = (score, -n, i)
            if best_key is None or key < best_key:
                best, best_key = i, key
            if self.debug_rows is not None:
                rows.append([t, i, x, n, score])
        if self.debug_rows is not None:
            self.debug_rows.extend(r + [int(r[1] == best)] for r in rows)
        return best

    def request_log(self) -> list[tuple[int, int]]:
        return list(self._requests)

    def eviction_log(self) -> list[tuple[int, int]]:
        return list(self._evictions)

    def write_debug_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "candidate", "popularity", "evictions", "score", "chosen"])
        for t, i, x, n, score, chosen in self.debug_rows or ():
            w.writerow([t, i, repr(x), n, repr(score), chosen])


def e2_evict(bandit: SlidingWindowUCB, candidates: Sequence[int]) -> int:
    return bandit.select(candidates)

