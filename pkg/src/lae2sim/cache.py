"""Trace-driven simulation of a single unit-size cache."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping, NamedTuple, Optional, TextIO

import numpy as np

from .trace import Trace

__all__ = [
    "CacheState",
    "Policy",
    "PolicyDecision",
    "DecisionKind",
    "MetricsSeries",
    "SimulationResult",
    "PolicyContractError",
    "UndefinedRateError",
    "simulate",
    "hit_rate",
    "decisions",
]

DEFAULT_WINDOW = 1000
DEFAULT_STRIDE = 100


class PolicyContractError(RuntimeError):
    """A policy named a victim that is not in the cache."""

    def __init__(self, t: int, victim):
        super().__init__(f"t={t}: policy chose {victim!r}, which is not cached")
        self.t = t
        self.victim = victim


class UndefinedRateError(ValueError):
    pass


class CacheState:
    """Cached ids with their insertion and last-access timeslots.

    Policies receive this object as a read-only view: ``inserted`` and
    ``last_access`` are live mapping proxies, only the engine mutates them.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._inserted: dict[int, int] = {}
        self._last_access: dict[int, int] = {}
        self.inserted: Mapping[int, int] = MappingProxyType(self._inserted)
        self.last_access: Mapping[int, int] = MappingProxyType(self._last_access)

    def __contains__(self, content) -> bool:
        return content in self._inserted

    def __len__(self) -> int:
        return len(self._inserted)

    def __iter__(self):
        return iter(self._inserted)

    @property
    def full(self) -> bool:
        return len(self._inserted) >= self.capacity

    def contents(self) -> list[int]:
        return sorted(self._inserted)


class Policy:
    """Base class for replacement policies.

    The engine calls :meth:`on_request` for every request before resolving it,
    :meth:`choose_eviction` only on misses against a full cache, and
    :meth:`on_eviction` after removing the victim.
    """

    name = "policy"

    def on_request(self, t: int, content: int, cache: CacheState) -> None:
        pass

    def choose_eviction(self, t: int, content: int, cache: CacheState) -> int:
        raise NotImplementedError

    def on_eviction(self, t: int, evicted: int) -> None:
        pass


class DecisionKind(Enum):
    HIT = "hit"
    MISS_INSERT = "miss_insert"
    MISS_EVICT = "miss_evict"


class PolicyDecision(NamedTuple):
    kind: DecisionKind
    evicted: Optional[int] = None


@dataclass
class MetricsSeries:
    """Per-request hit flags plus the sampling parameters for the rate series."""

    hits: np.ndarray
    window: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE

    @property
    def total_requests(self) -> int:
        return int(self.hits.size)

    @property
    def total_hits(self) -> int:
        return int(np.count_nonzero(self.hits))

    def sample_points(self) -> np.ndarray:
        T = self.total_requests
        if T == 0:
            return np.empty(0, dtype=np.int64)
        pts = np.arange(self.stride - 1, T, self.stride, dtype=np.int64)
        if pts.size == 0 or pts[-1] != T - 1:
            pts = np.append(pts, T - 1)
        return pts

    def cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """Cumulative hit rate after request ``t`` at every sample point."""
        pts = self.sample_points()
        csum = np.cumsum(self.hits, dtype=np.int64)
        return pts, csum[pts] / (pts + 1)

    def windowed(self) -> tuple[np.ndarray, np.ndarray]:
        """Hit rate over the last ``window`` requests (fewer at the start)."""
        pts = self.sample_points()
        csum = np.concatenate([[0], np.cumsum(self.hits, dtype=np.int64)])
        lo = np.maximum(pts + 1 - self.window, 0)
        return pts, (csum[pts + 1] - csum[lo]) / (pts + 1 - lo)

    def write_csv(self, fh: TextIO) -> None:
        t, cum = self.cumulative()
        _, win = self.windowed()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "cumulative_hit_rate", "windowed_hit_rate"])
        for row in zip(t.tolist(), cum.tolist(), win.tolist()):
            w.writerow([row[0], repr(row[1]), repr(row[2])])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


@dataclass
class SimulationResult:
    metrics: MetricsSeries
    evictions: list[tuple[int, int]] = field(default_factory=list)

    @property
    def hit_rate(self) -> float:
        return hit_rate(self.metrics)


def hit_rate(metrics: MetricsSeries) -> float:
    if metrics.total_requests == 0:
        raise UndefinedRateError("hit rate of an empty trace is undefined")
    return metrics.total_hits / metrics.total_requests


def simulate(
    trace: Trace,
    capacity: int,
    policy: Policy,
    *,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
    debug: bool = False,
) -> SimulationResult:
    """Replay ``trace`` through a cache of ``capacity`` items managed by ``policy``.

    Misses are always admitted; on a full cache the policy names the victim
    first. With ``debug`` the capacity invariant is asserted after each step.
    """
    cache = CacheState(capacity)
    inserted = cache._inserted
    last = cache._last_access
    hits = bytearray(trace.length)
    evictions: list[tuple[int, int]] = []
    on_request = policy.on_request
    choose = policy.choose_eviction
    on_eviction = policy.on_eviction

    for t, c in enumerate(trace.contents.tolist()):
        on_request(t, c, cache)
        if c in inserted:
            hits[t] = 1
            last[c] = t
            continue
        if len(inserted) >= capacity:
            victim = choose(t, c, cache)
            if victim not in inserted:
                raise PolicyContractError(t, victim)
            del inserted[victim]
            del last[victim]
            evictions.append((t, victim))
            on_eviction(t, victim)
        inserted[c] = t
        last[c] = t
        if debug and len(inserted) > capacity:
            raise AssertionError(f"t={t}: capacity exceeded")

    flags = np.frombuffer(bytes(hits), dtype=np.uint8)
    return SimulationResult(MetricsSeries(flags, window, stride), evictions)


def decisions(result: SimulationResult) -> list[PolicyDecision]:
    """Expand a run into one :class:`PolicyDecision` per request."""
    evicted_at = dict(result.evictions)
    out = []
    for t, hit in enumerate(result.metrics.hits.tolist()):
        if hit:
            out.append(PolicyDecision(DecisionKind.HIT))
        elif t in evicted_at:
            out.append(PolicyDecision(DecisionKind.MISS_EVICT, evicted_at[t]))
        else:
            out.append(PolicyDecision(DecisionKind.MISS_INSERT))
    return out
