"""Flat ``key = value`` experiment configuration.

Example::

    seed = 7
    cache_sizes = 10, 20
    trace.catalog_size = 500
    trace.length = 200000
    trace.zipf_exponent = 0.8
    trace.shift_period = 5000
    trace.shift_fraction = 0.1
    policy.0.kind = fifo
    policy.1.kind = klru
    policy.1.k_hits = 2
    policy.2.kind = lae2
    policy.2.top_k_fraction = 0.5
    topk_sweep = 1, 2, 5, 10
    ablation.warmup = 30000

``trace.path`` replaces the synthetic ``trace.*`` keys. Policy kinds are
``fifo``, ``lru``, ``klru``, ``lfu``, ``lae2`` (modes ``full``, ``prediction``,
``e2``) and ``belady``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from .baselines import FifoPolicy, KLruConfig, KLruPolicy, LfuConfig, LfuPolicy, LruPolicy
from .cache import DEFAULT_STRIDE, DEFAULT_WINDOW, Policy
from .la_e2 import LaE2Config, LaE2Policy
from .oracle import BeladyPolicy
from .predictor import LstmConfig, PredictorConfig
from .swucb import BanditConfig
from .trace import SyntheticSpec, Trace, generate_synthetic, load_trace

__all__ = ["ConfigError", "ExperimentConfig", "PolicySpec", "parse_config", "load_config"]


class ConfigError(ValueError):
    pass


_TRACE_KEYS = {"path", "catalog_size", "length", "zipf_exponent", "shift_period",
               "shift_fraction", "seed"}
_TOP_KEYS = {"seed", "cache_sizes", "topk_sweep", "ablation.warmup", "ablation.top_k",
             "ablation.top_k_fraction", "metrics.window", "metrics.stride"}
_POLICY_KEYS = {
    "kind", "label", "k_hits", "window", "mode", "top_k", "top_k_fraction", "warmup",
    "predictor", "update_interval", "history_window", "decay",
    "gamma", "tau", "B", "padding_cap",
}
_LSTM_FIELDS = {f for f in LstmConfig.__dataclass_fields__}


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    params: tuple = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    @property
    def label(self) -> str:
        label = self.get("label")
        if label:
            return label
        if self.kind == "klru":
            return f"klru{self.get('k_hits', '2')}"
        if self.kind == "lae2":
            mode = self.get("mode", "full")
            return {"full": "lae2", "prediction": "prediction_only", "e2": "e2_only"}[mode]
        return self.kind

    def with_params(self, **updates) -> "PolicySpec":
        merged = dict(self.params)
        merged.update({k: str(v) for k, v in updates.items()})
        return PolicySpec(self.kind, tuple(sorted(merged.items())))


@dataclass(frozen=True)
class ExperimentConfig:
    cache_sizes: tuple
    policies: tuple
    trace_path: Optional[str] = None
    synthetic: Optional[SyntheticSpec] = None
    topk_sweep: tuple = ()
    warmup: int = 0
    ablation_top_k: Optional[int] = None
    ablation_top_k_fraction: Optional[float] = None
    window: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE
    seed: int = 0
    resolved: tuple = field(default=(), compare=False)

    def load_trace(self) -> Trace:
        if self.trace_path is not None:
            return load_trace(self.trace_path)
        return generate_synthetic(self.synthetic)

    def describe(self) -> str:
        """One-line rendering of every resolved key, used in CSV headers."""
        return "; ".join(f"{k}={v}" for k, v in self.resolved)

    def lae2_base(self) -> PolicySpec:
        for spec in self.policies:
            if spec.kind == "lae2":
                return spec
        return PolicySpec("lae2")


def _int(key, value) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _float(key, value) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _int_list(key, value) -> tuple:
    return tuple(_int(key, v.strip()) for v in value.split(",") if v.strip())


def parse_config(text: str, *, seed: Optional[int] = None, base_dir: Union[str, Path, None] = None) -> ExperimentConfig:
    """Parse config text; ``seed`` overrides the file's ``seed`` key."""
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        raw[key.strip()] = value.strip()
    if seed is not None:
        raw["seed"] = str(seed)
    raw.setdefault("seed", "0")

    trace_kv: dict[str, str] = {}
    policy_kv: dict[int, dict[str, str]] = {}
    for key, value in raw.items():
        if key.startswith("trace."):
            sub = key[len("trace."):]
            if sub not in _TRACE_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            trace_kv[sub] = value
        elif key.startswith("policy."):
            parts = key.split(".", 2)
            if len(parts) != 3:
                raise ConfigError(f"malformed policy key {key!r}")
            idx = _int(key, parts[1])
            sub = parts[2]
            if sub not in _POLICY_KEYS and not (
                sub.startswith("lstm.") and sub[len("lstm."):] in _LSTM_FIELDS
            ):
                raise ConfigError(f"unknown key {key!r}")
            policy_kv.setdefault(idx, {})[sub] = value
        elif key not in _TOP_KEYS:
            raise ConfigError(f"unknown key {key!r}")

    seed_value = _int("seed", raw["seed"])
    cache_sizes = _int_list("cache_sizes", raw.get("cache_sizes", ""))
    if not cache_sizes or min(cache_sizes) < 1:
        raise ConfigError("cache_sizes must list positive integers")
    policies = []
    for idx in sorted(policy_kv):
        kv = policy_kv[idx]
        if "kind" not in kv:
            raise ConfigError(f"policy.{idx}.kind missing")
        spec = PolicySpec(kv.pop("kind"), tuple(sorted(kv.items())))
        build_policy(spec, catalog_size=max(cache_sizes), capacity=min(cache_sizes), seed=seed_value,
                     validate_only=True)
        policies.append(spec)
    if not policies:
        raise ConfigError("at least one policy.<i>.kind is required")

    trace_path = None
    synthetic = None
    if "path" in trace_kv:
        path = Path(trace_kv["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        trace_path = str(path)
    else:
        try:
            period = trace_kv.get("shift_period", "none")
            synthetic = SyntheticSpec(
                catalog_size=_int("trace.catalog_size", trace_kv.get("catalog_size", "")),
                length=_int("trace.length", trace_kv.get("length", "")),
                zipf_exponent=_float("trace.zipf_exponent", trace_kv.get("zipf_exponent", "0.8")),
                shift_period=None if period.lower() == "none" else _int("trace.shift_period", period),
                shift_fraction=_float("trace.shift_fraction", trace_kv.get("shift_fraction", "0.1")),
                rng_seed=_int("trace.seed", trace_kv.get("seed", str(seed_value))),
            )
        except ValueError as exc:
            raise ConfigError(f"trace: {exc}") from None

    resolved = dict(raw)
    if synthetic is not None:
        resolved["trace.seed"] = str(synthetic.rng_seed)
    kf = raw.get("ablation.top_k_fraction")
    cfg = ExperimentConfig(
        cache_sizes=cache_sizes,
        policies=tuple(policies),
        trace_path=trace_path,
        synthetic=synthetic,
        topk_sweep=_int_list("topk_sweep", raw.get("topk_sweep", "")),
        warmup=_int("ablation.warmup", raw.get("ablation.warmup", "0")),
        ablation_top_k=_int("ablation.top_k", raw["ablation.top_k"]) if "ablation.top_k" in raw else None,
        ablation_top_k_fraction=_float("ablation.top_k_fraction", kf) if kf is not None else None,
        window=_int("metrics.window", raw.get("metrics.window", str(DEFAULT_WINDOW))),
        stride=_int("metrics.stride", raw.get("metrics.stride", str(DEFAULT_STRIDE))),
        seed=seed_value,
        resolved=tuple(sorted(resolved.items())),
    )
    if cfg.window < 1 or cfg.stride < 1:
        raise ConfigError("metrics.window and metrics.stride must be positive")
    if any(k < 1 for k in cfg.topk_sweep):
        raise ConfigError("topk_sweep entries must be positive")
    return cfg


def load_config(path: Union[str, Path], *, seed: Optional[int] = None) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), seed=seed, base_dir=path.parent)


def resolve_top_k(spec: PolicySpec, capacity: int) -> int:
    if spec.get("top_k") is not None:
        return _int("top_k", spec.get("top_k"))
    frac = spec.get("top_k_fraction")
    if frac is not None:
        return max(1, round(_float("top_k_fraction", frac) * capacity))
    return max(1, capacity // 2)


def lae2_config(spec: PolicySpec, capacity: int, seed: int) -> LaE2Config:
    p = dict(spec.params)
    lstm_kw = {}
    for key, value in p.items():
        if key.startswith("lstm."):
            name = key[len("lstm."):]
            lstm_kw[name] = _float(key, value) if name in ("learning_rate", "clip_norm") else _int(key, value)
    lstm_kw.setdefault("seed", seed)
    predictor = PredictorConfig(
        kind=p.get("predictor", "decayed"),
        update_interval=_int("update_interval", p.get("update_interval", "1000")),
        history_window=_int("history_window", p["history_window"]) if "history_window" in p else None,
        decay=_float("decay", p.get("decay", "1.0")),
        lstm=LstmConfig(**lstm_kw),
    )
    bandit = BanditConfig(
        gamma=_float("gamma", p.get("gamma", "0.99")),
        tau=_int("tau", p.get("tau", "1000")),
        B=_float("B", p.get("B", "-1")),
        padding_cap=_float("padding_cap", p.get("padding_cap", "10")),
    )
    return LaE2Config(
        top_k=resolve_top_k(spec, capacity),
        mode=p.get("mode", "full"),
        predictor=predictor,
        bandit=bandit,
        warmup_requests=_int("warmup", p.get("warmup", "0")),
    )


def build_policy(spec: PolicySpec, *, catalog_size: int, capacity: int, seed: int = 0,
                 trace: Optional[Trace] = None, validate_only: bool = False) -> Optional[Policy]:
    """Instantiate the policy described by ``spec`` for one simulation cell."""
    try:
        kind = spec.kind
        if kind == "fifo":
            policy = FifoPolicy()
        elif kind == "lru":
            policy = LruPolicy()
        elif kind == "klru":
            policy = KLruPolicy(KLruConfig(_int("k_hits", spec.get("k_hits", "2"))))
        elif kind == "lfu":
            window = spec.get("window", "none")
            policy = LfuPolicy(LfuConfig(None if window.lower() == "none" else _int("window", window)))
        elif kind == "lae2":
            cfg = lae2_config(spec, capacity, seed)
            if validate_only:
                return None
            policy = LaE2Policy(catalog_size, cfg)
        elif kind == "belady":
            if validate_only:
                return None
            if trace is None:
                raise ConfigError("belady needs the trace")
            policy = BeladyPolicy(trace)
        else:
            raise ConfigError(f"unknown policy kind {kind!r}")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"policy {spec.label}: {exc}") from None
    return None if validate_only else policy


def with_mode(spec: PolicySpec, mode: str, **extra) -> PolicySpec:
    return replace(spec.with_params(mode=mode, **extra), kind="lae2")
