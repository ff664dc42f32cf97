"""Trace-driven cache replacement simulation with a predictor-shortlisted
sliding-window UCB eviction policy, rule-based baselines and Belady's MIN."""

from .baselines import FifoPolicy, KLruConfig, KLruPolicy, LfuConfig, LfuPolicy, LruPolicy
from .cache import CacheState, MetricsSeries, Policy, SimulationResult, hit_rate, simulate
from .la_e2 import LaE2Config, LaE2Policy
from .oracle import BeladyPolicy, optimal_hit_rate, topk_containment
from .predictor import (
    DecayedFrequencyPredictor,
    LstmConfig,
    LstmPredictor,
    PredictorConfig,
    make_predictor,
    topk_candidates,
)
from .swucb import BanditConfig, SlidingWindowUCB
from .trace import SyntheticSpec, Trace, generate_synthetic, load_trace, write_trace, zipf_pmf

__all__ = [
    "BanditConfig",
    "BeladyPolicy",
    "CacheState",
    "DecayedFrequencyPredictor",
    "FifoPolicy",
    "KLruConfig",
    "KLruPolicy",
    "LaE2Config",
    "LaE2Policy",
    "LfuConfig",
    "LfuPolicy",
    "LruPolicy",
    "LstmConfig",
    "LstmPredictor",
    "MetricsSeries",
    "Policy",
    "PredictorConfig",
    "SimulationResult",
    "SlidingWindowUCB",
    "SyntheticSpec",
    "Trace",
    "generate_synthetic",
    "hit_rate",
    "load_trace",
    "make_predictor",
    "optimal_hit_rate",
    "simulate",
    "topk_candidates",
    "topk_containment",
    "write_trace",
    "zipf_pmf",
]

__version__ = "0.1.0"
