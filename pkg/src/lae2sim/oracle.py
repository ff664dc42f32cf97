"""Offline optimal replacement (Belady's MIN) and top-k containment analysis."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, TextIO

import numpy as np

from .cache import Policy, hit_rate, simulate
from .predictor import topk_candidates
from .trace import Trace

__all__ = [
    "next_use_index",
    "belady_evict",
    "BeladyPolicy",
    "optimal_hit_rate",
    "ContainmentHistogram",
    "topk_containment",
]


def next_use_index(trace: Trace) -> np.ndarray:
    """``out[t]`` is the next timeslot after ``t`` requesting the same id, or ``T``.

    ``T`` stands in for "never again"; it compares greater than any real use.
    """
    contents = trace.contents.tolist()
    T = len(contents)
    out = np.empty(T, dtype=np.int64)
    upcoming: dict[int, int] = {}
    for t in range(T - 1, -1, -1):
        c = contents[t]
        out[t] = upcoming.get(c, T)
        upcoming[c] = t
    return out


def belady_evict(cached: Iterable[int], next_use: Mapping[int, int]) -> int:
    """The cached id used farthest in the future; ties go to the smallest id."""
    return max(cached, key=lambda i: (next_use[i], -i))


class BeladyPolicy(Policy):
    name = "belady"

    def __init__(self, trace: Trace):
        self._index = next_use_index(trace).tolist()
        self._next: dict[int, int] = {}

    def on_request(self, t, content, cache):
        self._next[content] = self._index[t]

    def choose_eviction(self, t, content, cache):
        return belady_evict(cache, self._next)


def optimal_hit_rate(trace: Trace, capacity: int) -> float:
    return hit_rate(simulate(trace, capacity, BeladyPolicy(trace)).metrics)


@dataclass
class ContainmentHistogram:
    """``fractions[k - 1]``: share of Belady evictions whose victim is among
    the predictor's ``k`` least popular cached ids."""

    fractions: np.ndarray
    events: int

    @property
    def capacity(self) -> int:
        return int(self.fractions.size)

    def at(self, k: int) -> float:
        return float(self.fractions[min(k, self.capacity) - 1])

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "containment_fraction"])
        for k, frac in enumerate(self.fractions.tolist(), start=1):
            w.writerow([k, repr(frac)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


class _ContainmentProbe(BeladyPolicy):
    def __init__(self, trace, predictor):
        super().__init__(trace)
        self.predictor = predictor
        self.ranks: list[int] = []

    def on_request(self, t, content, cache):
        super().on_request(t, content, cache)
        self.predictor.observe(t, content)

    def choose_eviction(self, t, content, cache):
        victim = super().choose_eviction(t, content, cache)
        order = topk_candidates(self.predictor.forecast(), cache, len(cache))
        self.ranks.append(order.index(victim))
        return victim


def topk_containment(trace: Trace, capacity: int, predictor) -> ContainmentHistogram:
    """Replay Belady over ``trace`` while ``predictor`` observes every request.

    At each eviction the optimal victim's position in the predictor's
    ascending-popularity order of the cache is recorded.
    """
    probe = _ContainmentProbe(trace, predictor)
    simulate(trace, capacity, probe)
    ranks = np.asarray(probe.ranks, dtype=np.int64)
    counts = np.bincount(ranks, minlength=capacity)[:capacity]
    if ranks.size == 0:
        fractions = np.ones(capacity)
    else:
        fractions = np.cumsum(counts) / ranks.size
    return ContainmentHistogram(fractions, int(ranks.size))
