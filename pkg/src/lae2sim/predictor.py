"""Popularity predictors refreshed on a coarse timescale, and top-k filtering.

Two predictors share one interface (:class:`Predictor`): every request is fed
to :meth:`Predictor.observe`, and after each ``update_interval`` requests the
model is retrained on the recent history and a new forecast snapshot is
published. Between updates :meth:`Predictor.forecast` returns the same frozen
array.

* :class:`DecayedFrequencyPredictor` -- exponentially decayed request counts,
  cheap and deterministic.
* :class:`LstmPredictor` -- an embedding + stacked LSTM + softmax next-request
  model trained with cross-entropy, written directly against numpy.
"""
from __future__ import annotations

import csv
import io
import logging
import struct
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "LstmConfig",
    "PredictorConfig",
    "Predictor",
    "DecayedFrequencyPredictor",
    "LstmModel",
    "LstmPredictor",
    "NonFiniteError",
    "make_predictor",
    "softmax",
    "topk_candidates",
    "save_checkpoint",
    "load_checkpoint",
]

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"LAE2LSTM"
CHECKPOINT_VERSION = 1


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class LstmConfig:
    layers: int = 1
    hidden_units: int = 32
    embed_dim: int = 16
    input_window: int = 8
    learning_rate: float = 0.5
    epochs_per_update: int = 2
    batch_size: int = 32
    clip_norm: float = 5.0
    vocab_cap: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("layers", "hidden_units", "embed_dim", "input_window",
                     "epochs_per_update", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ValueError("learning_rate and clip_norm must be positive")
        if self.vocab_cap is not None and self.vocab_cap < 1:
            raise ValueError("vocab_cap must be positive")

    @classmethod
    def full_size(cls, **overrides) -> "LstmConfig":
        """Three layers of 128 units, the large configuration."""
        return cls(**{"layers": 3, "hidden_units": 128, "embed_dim": 64, **overrides})


@dataclass(frozen=True)
class PredictorConfig:
    kind: str = "decayed"
    update_interval: int = 1000
    history_window: Optional[int] = None
    decay: float = 1.0
    lstm: LstmConfig = field(default_factory=LstmConfig)

    def __post_init__(self):
        if self.kind not in ("decayed", "lstm"):
            raise ValueError(f"unknown predictor kind {self.kind!r}")
        if self.update_interval < 1:
            raise ValueError("update_interval must be >= 1")
        if self.history_window is not None and self.history_window < 1:
            raise ValueError("history_window must be >= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")

    @property
    def window(self) -> int:
        return self.history_window or self.update_interval


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def topk_candidates(forecast: Sequence[float], cached: Iterable[int], k: int) -> list[int]:
    """The ``min(k, |cache|)`` cached ids with the lowest forecast, ascending.

    Equal scores are ordered by id.
    """
    order = sorted(cached, key=lambda i: (forecast[i], i))
    return order[:k]


class Predictor:
    """Shared update cadence and history buffer."""

    kind = "base"

    def __init__(self, catalog_size: int, config: PredictorConfig):
        self.catalog_size = catalog_size
        self.config = config
        self._history: deque = deque(maxlen=self._history_len())
        self._seen = 0
        self.update_count = 0
        self.failed_updates = 0
        self.loss_log: list[tuple[int, float]] = []
        self._publish(np.full(catalog_size, 1.0 / catalog_size))

    def _history_len(self) -> int:
        return self.config.window

    def _publish(self, scores: np.ndarray) -> None:
        scores = np.asarray(scores, dtype=np.float64)
        scores.setflags(write=False)
        self._forecast = scores
        self._forecast_list = scores.tolist()

    def observe(self, t: int, content: int) -> bool:
        """Record a request; returns True when it triggered a model update."""
        self._history.append(content)
        self._seen += 1
        if self._seen % self.config.update_interval:
            return False
        return self.update()

    def update(self) -> bool:
        history = np.fromiter(self._history, dtype=np.int64, count=len(self._history))
        if not self._ready(history):
            return False
        try:
            scores = self.train_update(history)
        except NonFiniteError as exc:
            self.failed_updates += 1
            log.warning("predictor update %d discarded: %s", self.update_count + 1, exc)
            return False
        self.update_count += 1
        self._publish(scores)
        return True

    def _ready(self, history: np.ndarray) -> bool:
        return history.size > 0

    def train_update(self, history: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def forecast(self) -> np.ndarray:
        """Read-only popularity snapshot from the latest update (uniform before any)."""
        return self._forecast

    def forecast_list(self) -> list[float]:
        return self._forecast_list

    def write_loss_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["update_index", "mean_loss"])
        for idx, loss in self.loss_log:
            w.writerow([idx, repr(loss)])

    def report(self) -> dict:
        return {
            "kind": self.kind,
            "update_interval": self.config.update_interval,
            "history_window": self.config.window,
            "update_count": self.update_count,
            "failed_updates": self.failed_updates,
        }


class DecayedFrequencyPredictor(Predictor):
    """Normalized request counts with weight ``decay**age`` (age 0 = newest)."""

    kind = "decayed"

    def train_update(self, history: np.ndarray) -> np.ndarray:
        weights = self.config.decay ** np.arange(history.size - 1, -1, -1, dtype=np.float64)
        counts = np.bincount(history, weights=weights, minlength=self.catalog_size)
        return counts / counts.sum()

    def report(self) -> dict:
        return {**super().report(), "decay": self.config.decay}


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class LstmModel:
    """Embedding -> stacked LSTM -> linear -> softmax over the catalog.

    Parameters live in :attr:`params`, keyed by name in :meth:`param_names`
    order. Gate blocks inside each ``Wx``/``Wh``/``b`` are ordered input,
    forget, output, candidate. Ids at or above ``vocab_cap`` share the final
    (out-of-vocabulary) embedding row.
    """

    def __init__(self, catalog_size: int, config: LstmConfig, rng: Optional[np.random.Generator] = None):
        self.catalog_size = catalog_size
        self.config = config
        self.vocab_cap = min(config.vocab_cap or catalog_size, catalog_size)
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        H, D = config.hidden_units, config.embed_dim
        p = {"embed": rng.normal(0.0, 0.1, size=(self.vocab_cap + 1, D))}
        for layer in range(config.layers):
            n_in = D if layer == 0 else H
            s = 1.0 / np.sqrt(H)
            p[f"Wx{layer}"] = rng.uniform(-s, s, size=(n_in, 4 * H))
            p[f"Wh{layer}"] = rng.uniform(-s, s, size=(H, 4 * H))
            b = np.zeros(4 * H)
            b[H:2 * H] = 1.0
            p[f"b{layer}"] = b
        p["Wy"] = rng.uniform(-1.0 / np.sqrt(H), 1.0 / np.sqrt(H), size=(H, catalog_size))
        p["by"] = np.zeros(catalog_size)
        self.params = p

    def param_names(self) -> list[str]:
        names = ["embed"]
        for layer in range(self.config.layers):
            names += [f"Wx{layer}", f"Wh{layer}", f"b{layer}"]
        return names + ["Wy", "by"]

    def encode(self, ids: np.ndarray) -> np.ndarray:
        return np.minimum(ids, self.vocab_cap)

    def forward(self, windows: np.ndarray):
        """Logits for the request following each row of ``windows`` (B, W)."""
        p = self.params
        H = self.config.hidden_units
        rows = self.encode(np.asarray(windows))
        B, W = rows.shape
        xs = p["embed"][rows.T]  # (W, B, D)
        caches = []
        for layer in range(self.config.layers):
            Wx, Wh, b = p[f"Wx{layer}"], p[f"Wh{layer}"], p[f"b{layer}"]
            h = np.zeros((B, H))
            c = np.zeros((B, H))
            hs, cs, gates = [h], [c], []
            for t in range(W):
                z = xs[t] @ Wx + h @ Wh + b
                i = _sigmoid(z[:, :H])
                f = _sigmoid(z[:, H:2 * H])
                o = _sigmoid(z[:, 2 * H:3 * H])
                g = np.tanh(z[:, 3 * H:])
                c = f * c + i * g
                h = o * np.tanh(c)
                hs.append(h)
                cs.append(c)
                gates.append((i, f, o, g))
            caches.append((xs, hs, cs, gates))
            xs = np.stack(hs[1:])
        logits = h @ p["Wy"] + p["by"]
        return logits, (rows, caches, h)

    def loss_and_grads(self, windows: np.ndarray, targets: np.ndarray):
        """Mean cross-entropy of ``targets`` and its gradient for every parameter."""
        p = self.params
        H = self.config.hidden_units
        logits, (rows, caches, h_top) = self.forward(windows)
        B = logits.shape[0]
        probs = softmax(logits)
        picked = probs[np.arange(B), targets]
        loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))

        grads = {}
        dlogits = probs
        dlogits[np.arange(B), targets] -= 1.0
        dlogits /= B
        grads["Wy"] = h_top.T @ dlogits
        grads["by"] = dlogits.sum(axis=0)

        W = rows.shape[1]
        dh_out = np.zeros((W, B, H))
        dh_out[-1] = dlogits @ p["Wy"].T
        for layer in range(self.config.layers - 1, -1, -1):
            xs, hs, cs, gates = caches[layer]
            Wx, Wh = p[f"Wx{layer}"], p[f"Wh{layer}"]
            dWx = np.zeros_like(Wx)
            dWh = np.zeros_like(Wh)
            db = np.zeros(4 * H)
            dxs = np.zeros(xs.shape)
            dh_next = np.zeros((B, H))
            dc_next = np.zeros((B, H))
            for t in range(W - 1, -1, -1):
                i, f, o, g = gates[t]
                tc = np.tanh(cs[t + 1])
                dh = dh_out[t] + dh_next
                dc = dh * o * (1.0 - tc * tc) + dc_next
                dz = np.concatenate([
                    dc * g * i * (1.0 - i),
                    dc * cs[t] * f * (1.0 - f),
                    dh * tc * o * (1.0 - o),
                    dc * i * (1.0 - g * g),
                ], axis=1)
                dWx += xs[t].T @ dz
                dWh += hs[t].T @ dz
                db += dz.sum(axis=0)
                dxs[t] = dz @ Wx.T
                dh_next = dz @ Wh.T
                dc_next = dc * f
            grads[f"Wx{layer}"] = dWx
            grads[f"Wh{layer}"] = dWh
            grads[f"b{layer}"] = db
            dh_out = dxs
        dembed = np.zeros_like(p["embed"])
        np.add.at(dembed, rows.T.reshape(-1), dh_out.reshape(-1, dh_out.shape[-1]))
        grads["embed"] = dembed
        return loss, grads

    def predict(self, window: Sequence[int]) -> np.ndarray:
        logits, _ = self.forward(np.asarray(window, dtype=np.int64)[None, :])
        return softmax(logits)[0]

    def cross_entropy(self, windows: np.ndarray, targets: np.ndarray) -> float:
        logits, _ = self.forward(windows)
        z = logits - logits.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return float(-logp[np.arange(len(targets)), targets].mean())

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


def _windows(seq: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    view = np.lib.stride_tricks.sliding_window_view(seq, width + 1)
    return view[:, :width], view[:, width]


class LstmPredictor(Predictor):
    """Next-request LSTM retrained by clipped mini-batch gradient descent."""

    kind = "lstm"

    def __init__(self, catalog_size: int, config: PredictorConfig):
        self.model = LstmModel(catalog_size, config.lstm)
        self._rng = np.random.default_rng(config.lstm.seed + 1)
        super().__init__(catalog_size, config)

    def _history_len(self) -> int:
        return max(self.config.window, self.config.lstm.input_window + 1)

    def _ready(self, history: np.ndarray) -> bool:
        return history.size >= self.config.lstm.input_window + 1

    def train_update(self, history: np.ndarray) -> np.ndarray:
        cfg = self.config.lstm
        X, y = _windows(history, cfg.input_window)
        saved = self.model.copy_params()
        losses = []
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            try:
                for _ in range(cfg.epochs_per_update):
                    order = self._rng.permutation(len(y))
                    for start in range(0, len(y), cfg.batch_size):
                        idx = order[start:start + cfg.batch_size]
                        loss, grads = self.model.loss_and_grads(X[idx], y[idx])
                        if not np.isfinite(loss):
                            raise NonFiniteError(f"loss {loss}")
                        self._step(grads)
                        losses.append(loss)
                scores = self.model.predict(history[-cfg.input_window:])
            except FloatingPointError as exc:
                self.model.params = saved
                raise NonFiniteError(str(exc)) from exc
        if not all(np.all(np.isfinite(v)) for v in self.model.params.values()):
            self.model.params = saved
            raise NonFiniteError("non-finite parameters")
        self.loss_log.append((self.update_count + 1, float(np.mean(losses))))
        return scores

    def _step(self, grads: dict) -> None:
        cfg = self.config.lstm
        norm = np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
        scale = cfg.learning_rate * min(1.0, cfg.clip_norm / norm) if norm > 0 else 0.0
        for name, g in grads.items():
            self.model.params[name] -= scale * g

    def evaluate(self, requests: Sequence[int]) -> float:
        """Mean next-request cross-entropy of the current model over ``requests``."""
        X, y = _windows(np.asarray(requests, dtype=np.int64), self.config.lstm.input_window)
        return self.model.cross_entropy(X, y)

    def report(self) -> dict:
        lc = self.config.lstm
        return {
            **super().report(),
            "layers": lc.layers,
            "hidden_units": lc.hidden_units,
            "embed_dim": lc.embed_dim,
            "input_window": lc.input_window,
            "learning_rate": lc.learning_rate,
            "epochs_per_update": lc.epochs_per_update,
            "vocab_cap": self.model.vocab_cap,
            "last_loss": self.loss_log[-1][1] if self.loss_log else None,
        }


def make_predictor(catalog_size: int, config: PredictorConfig) -> Predictor:
    if config.kind == "lstm":
        return LstmPredictor(catalog_size, config)
    return DecayedFrequencyPredictor(catalog_size, config)


# Checkpoint layout (little endian):
#   8 bytes magic, uint32 version, uint32 x 7 dims
#   (layers, hidden_units, embed_dim, input_window, vocab_cap, catalog_size, reserved=0),
#   then every parameter as row-major float64 in LstmModel.param_names() order.
_HEADER = struct.Struct("<8sI7I")


def save_checkpoint(model: LstmModel, path: Union[str, Path]) -> None:
    c = model.config
    header = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, c.layers, c.hidden_units,
                          c.embed_dim, c.input_window, model.vocab_cap, model.catalog_size, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        for name in model.param_names():
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())


def load_checkpoint(path: Union[str, Path], config: Optional[LstmConfig] = None) -> LstmModel:
    """Rebuild a model; training hyperparameters come from ``config`` if given."""
    data = Path(path).read_bytes()
    magic, version, layers, hidden, embed, window, vocab, n, _ = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC or version != CHECKPOINT_VERSION:
        raise ValueError("not an LSTM checkpoint")
    base = config or LstmConfig()
    cfg = replace(base, layers=layers, hidden_units=hidden, embed_dim=embed,
                  input_window=window, vocab_cap=vocab)
    model = LstmModel(n, cfg, rng=np.random.default_rng(0))
    offset = _HEADER.size
    for name in model.param_names():
        shape = model.params[name].shape
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        model.params[name] = arr.astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise ValueError("checkpoint size does not match its header")
    return model


def loss_log_csv(predictor: Predictor) -> str:
    buf = io.StringIO()
    predictor.write_loss_csv(buf)
    return buf.getvalue()
