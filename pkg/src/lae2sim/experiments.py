"""Experiment grids: policy comparison, top-k sweep, ablation, containment.

Each runner simulates independent cells (optionally in worker processes),
collects them keyed by cell and writes deterministic CSV files whose first
line is a ``#`` comment carrying the resolved configuration.
"""
from __future__ import annotations

import csv
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .cache import simulate
from .config import ExperimentConfig, PolicySpec, build_policy, lae2_config, with_mode
from .oracle import topk_containment
from .predictor import make_predictor
from .trace import Trace, write_trace

__all__ = [
    "Outcome",
    "run_comparison",
    "run_topk_sweep",
    "run_ablation",
    "run_containment",
    "gen_trace",
]

log = logging.getLogger(__name__)

ABLATION_ARMS = ("e2_only", "prediction_only", "lae2")


@dataclass
class Outcome:
    table: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    files: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _cell(trace: Trace, spec: PolicySpec, capacity: int, seed: int, window: int, stride: int,
          keep_series: bool = False):
    try:
        policy = build_policy(spec, catalog_size=trace.catalog_size, capacity=capacity,
                              seed=seed, trace=trace)
        result = simulate(trace, capacity, policy, window=window, stride=stride)
        report = policy.report() if hasattr(policy, "report") else {"policy": spec.label}
        return {
            "hit_rate": result.hit_rate,
            "report": report,
            "metrics": result.metrics if keep_series else None,
            "evictions": len(result.evictions),
        }
    except Exception as exc:  # recorded per cell, the grid keeps going
        return {"error": f"{type(exc).__name__}: {exc}", "trace": traceback.format_exc()}


def _run_cells(cells: dict, threads: int) -> dict:
    """Evaluate ``{key: args}`` and return ``{key: result}``."""
    if threads <= 1 or len(cells) <= 1:
        return {key: _cell(*args) for key, args in cells.items()}
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = {key: pool.submit(_cell, *args) for key, args in cells.items()}
        return {key: fut.result() for key, fut in futures.items()}


def _header(cfg: ExperimentConfig) -> str:
    return f"# config: {cfg.describe()}\n"


def _write_rows(path: Path, cfg: ExperimentConfig, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _failure(outcome: Outcome, key, result) -> None:
    outcome.failures.append((key, result["error"]))
    log.error("cell %s failed: %s", key, result["error"])


def run_comparison(cfg: ExperimentConfig, out_dir, threads: int = 1, trace: Optional[Trace] = None) -> Outcome:
    """Hit rate of every policy (plus Belady) at every cache size."""
    trace = trace if trace is not None else cfg.load_trace()
    specs = list(cfg.policies)
    if not any(s.kind == "belady" for s in specs):
        specs.append(PolicySpec("belady"))
    cells = {(s.label, K): (trace, s, K, cfg.seed, cfg.window, cfg.stride)
             for s in specs for K in cfg.cache_sizes}
    results = _run_cells(cells, threads)
    outcome = Outcome()
    rows, reports = [], []
    for (label, K), res in sorted(results.items()):
        if "error" in res:
            _failure(outcome, (label, K), res)
            rows.append([label, K, "", res["error"]])
            continue
        outcome.table[(label, K)] = res["hit_rate"]
        rows.append([label, K, res["hit_rate"], ""])
        reports.append({"policy": label, "cache_size": K, "hit_rate": res["hit_rate"],
                        "evictions": res["evictions"], "report": res["report"]})
    out = Path(out_dir)
    outcome.files.append(_write_rows(out / "comparison.csv", cfg,
                                     ["policy", "cache_size", "hit_rate", "error"], rows))
    outcome.files.append(_write_json(out / "comparison_report.json",
                                     {"config": dict(cfg.resolved), "cells": reports}))
    return outcome


def run_topk_sweep(cfg: ExperimentConfig, out_dir, threads: int = 1, trace: Optional[Trace] = None) -> Outcome:
    """Full-mode hit rate for every ``k`` in ``topk_sweep`` at every cache size."""
    trace = trace if trace is not None else cfg.load_trace()
    base = cfg.lae2_base()
    ks = cfg.topk_sweep or (1,)
    cells = {}
    for K in cfg.cache_sizes:
        for k in ks:
            spec = with_mode(base, "full", top_k=k, label=f"lae2_k{k}")
            cells[(K, k)] = (trace, spec, K, cfg.seed, cfg.window, cfg.stride)
    results = _run_cells(cells, threads)
    outcome = Outcome()
    rows = []
    for (K, k), res in sorted(results.items()):
        if "error" in res:
            _failure(outcome, (K, k), res)
            rows.append([K, k, "", res["error"]])
            continue
        outcome.table[(K, k)] = res["hit_rate"]
        rows.append([K, k, res["hit_rate"], ""])
    outcome.files.append(_write_rows(Path(out_dir) / "topk.csv", cfg,
                                     ["cache_size", "k", "hit_rate", "error"], rows))
    return outcome


def ablation_specs(cfg: ExperimentConfig, capacity: int) -> dict:
    base = cfg.lae2_base()
    if cfg.ablation_top_k is not None:
        base = base.with_params(top_k=cfg.ablation_top_k)
    elif cfg.ablation_top_k_fraction is not None:
        base = base.with_params(top_k=max(1, round(cfg.ablation_top_k_fraction * capacity)))
    return {
        "e2_only": with_mode(base, "e2", label="e2_only"),
        "prediction_only": with_mode(base, "prediction", label="prediction_only"),
        "lae2": with_mode(base, "full", warmup=cfg.warmup, label="lae2"),
    }


def run_ablation(cfg: ExperimentConfig, out_dir, threads: int = 1, trace: Optional[Trace] = None) -> Outcome:
    """E2-only, prediction-only and fused arms on a shared trace and seed.

    The fused arm runs prediction-only until ``ablation.warmup``.
    """
    trace = trace if trace is not None else cfg.load_trace()
    cells = {}
    for K in cfg.cache_sizes:
        for arm, spec in ablation_specs(cfg, K).items():
            cells[(K, arm)] = (trace, spec, K, cfg.seed, cfg.window, cfg.stride, True)
    results = _run_cells(cells, threads)
    outcome = Outcome()
    series_rows, summary = [], []
    for K in cfg.cache_sizes:
        for arm in ABLATION_ARMS:
            res = results[(K, arm)]
            if "error" in res:
                _failure(outcome, (K, arm), res)
                summary.append([K, arm, "", res["error"]])
                continue
            m = res["metrics"]
            t, cum = m.cumulative()
            _, win = m.windowed()
            outcome.table[(K, arm)] = {"hit_rate": res["hit_rate"], "t": t, "cumulative": cum,
                                       "windowed": win}
            for row in zip(t.tolist(), cum.tolist(), win.tolist()):
                series_rows.append([K, row[0], arm, row[1], row[2]])
            summary.append([K, arm, res["hit_rate"], ""])
    out = Path(out_dir)
    outcome.files.append(_write_rows(
        out / "ablation.csv", cfg,
        ["cache_size", "t", "arm", "cumulative_hit_rate", "windowed_hit_rate"], series_rows))
    outcome.files.append(_write_rows(out / "ablation_summary.csv", cfg,
                                     ["cache_size", "arm", "hit_rate", "error"], summary))
    return outcome


def _containment_cell(trace, spec, K, seed):
    try:
        cfg = lae2_config(spec, K, seed)
        hist = topk_containment(trace, K, make_predictor(trace.catalog_size, cfg.predictor))
        return {"histogram": hist}
    except Exception as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def run_containment(cfg: ExperimentConfig, out_dir, threads: int = 1, trace: Optional[Trace] = None) -> Outcome:
    """Where Belady's victim falls in the predictor's ranking, per cache size."""
    trace = trace if trace is not None else cfg.load_trace()
    base = cfg.lae2_base()
    outcome = Outcome()
    args = {K: (trace, base, K, cfg.seed) for K in cfg.cache_sizes}
    if threads > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futs = {K: pool.submit(_containment_cell, *a) for K, a in args.items()}
            results = {K: f.result() for K, f in futs.items()}
    else:
        results = {K: _containment_cell(*a) for K, a in args.items()}
    for K in cfg.cache_sizes:
        res = results[K]
        if "error" in res:
            _failure(outcome, K, res)
            continue
        hist = res["histogram"]
        outcome.table[K] = hist
        rows = [[k, frac] for k, frac in enumerate(hist.fractions.tolist(), start=1)]
        outcome.files.append(_write_rows(Path(out_dir) / f"containment_K{K}.csv", cfg,
                                         ["k", "containment_fraction"], rows))
    return outcome


def gen_trace(cfg: ExperimentConfig, out_dir) -> Outcome:
    """Materialize the configured trace in the canonical text format."""
    trace = cfg.load_trace()
    path = Path(out_dir) / "trace.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_trace(trace, path)
    return Outcome(table={"length": trace.length, "catalog_size": trace.catalog_size}, files=[path])
