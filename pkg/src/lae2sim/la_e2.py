"""The fused learning-aided exploration-exploitation policy.

Per request the bandit logs are updated and the predictor sees the request
(retraining itself every ``update_interval`` requests). On an eviction the
predictor's ``top_k`` least popular cached ids form the candidate set and the
sliding-window UCB picks the victim among them.

Modes:

* ``full`` -- predictor shortlist, bandit decides.
* ``prediction`` -- evict the least popular cached id (shortlist of one).
* ``e2`` -- bandit over the whole cache, predictor unused.

``warmup_requests`` makes ``full`` behave like ``prediction`` before that
timeslot.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .cache import CacheState, Policy
from .predictor import Predictor, PredictorConfig, make_predictor, topk_candidates
from .swucb import BanditConfig, SlidingWindowUCB

__all__ = ["MODES", "LaE2Config", "LaE2Policy"]

MODES = ("full", "prediction", "e2")


@dataclass(frozen=True)
class LaE2Config:
    top_k: int = 5
    mode: str = "full"
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    bandit: BanditConfig = field(default_factory=BanditConfig)
    warmup_requests: int = 0

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.warmup_requests < 0:
            raise ValueError("warmup_requests must be >= 0")


class LaE2Policy(Policy):
    def __init__(self, catalog_size: int, cfg: LaE2Config = LaE2Config(),
                 predictor: Optional[Predictor] = None, debug: bool = False):
        self.cfg = cfg
        self.name = {"full": f"lae2_k{cfg.top_k}", "prediction": "prediction_only",
                     "e2": "e2_only"}[cfg.mode]
        self.bandit = SlidingWindowUCB(cfg.bandit, debug=debug)
        self.predictor = None
        if cfg.mode != "e2":
            self.predictor = predictor or make_predictor(catalog_size, cfg.predictor)
        self.requests_seen = 0

    def on_request(self, t: int, content: int, cache: CacheState) -> None:
        self.requests_seen += 1
        self.bandit.record_request(t, content)
        if self.predictor is not None:
            self.predictor.observe(t, content)

    def candidates(self, t: int, cache: CacheState) -> list[int]:
        """The eviction shortlist for the current state."""
        mode = self.cfg.mode
        if mode == "e2":
            return list(cache)
        k = self.cfg.top_k
        if mode == "prediction" or t < self.cfg.warmup_requests:
            k = 1
        return topk_candidates(self.predictor.forecast_list(), cache, k)

    def choose_eviction(self, t: int, content: int, cache: CacheState) -> int:
        shortlist = self.candidates(t, cache)
        if len(shortlist) == 1:
            return shortlist[0]
        return self.bandit.select(shortlist)

    def on_eviction(self, t: int, evicted: int) -> None:
        self.bandit.record_eviction(t, evicted)

    def report(self) -> dict:
        b = self.cfg.bandit
        out = {
            "policy": self.name,
            "mode": self.cfg.mode,
            "top_k": self.cfg.top_k,
            "warmup_requests": self.cfg.warmup_requests,
            "gamma": b.gamma,
            "tau": b.tau,
            "B": b.B,
            "padding_cap": b.padding_cap,
            "requests_seen": self.requests_seen,
        }
        if self.predictor is not None:
            out["predictor"] = self.predictor.report()
        return out
