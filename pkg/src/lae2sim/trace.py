"""Request traces: data model, canonical text format and Zipf workload synthesis.

Trace file format::

    N=<catalog_size>
    # comment lines are ignored
    <content id>
    <content id>
    ...

Content ids are 0-based integers in ``[0, N)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

__all__ = [
    "Request",
    "Trace",
    "SyntheticSpec",
    "TraceFormatError",
    "TraceValidationError",
    "load_trace",
    "write_trace",
    "format_trace",
    "generate_synthetic",
    "zipf_pmf",
]

PathLike = Union[str, Path]


class TraceFormatError(ValueError):
    """A trace file line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TraceValidationError(TraceFormatError):
    """A trace file line parsed but violates the catalog bound."""


class Request(NamedTuple):
    timeslot: int
    content: int


@dataclass(frozen=True, eq=False)
class Trace:
    """An ordered request sequence over a catalog of ``catalog_size`` contents.

    The request ids are stored as a read-only ``int64`` array; timeslots are
    implicit (request ``t`` happens at timeslot ``t``).
    """

    catalog_size: int
    contents: np.ndarray

    def __post_init__(self):
        if self.catalog_size < 1:
            raise ValueError("catalog_size must be positive")
        arr = np.array(self.contents, dtype=np.int64, copy=True).reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= self.catalog_size):
            raise ValueError("content ids must lie in [0, catalog_size)")
        arr.setflags(write=False)
        object.__setattr__(self, "contents", arr)

    @property
    def length(self) -> int:
        return int(self.contents.size)

    def __len__(self) -> int:
        return self.length

    @property
    def requests(self) -> list[Request]:
        return [Request(t, c) for t, c in enumerate(self.contents.tolist())]

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return self.catalog_size == other.catalog_size and np.array_equal(
            self.contents, other.contents
        )

    def __hash__(self):
        return hash((self.catalog_size, self.contents.tobytes()))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic Zipf workload with popularity regime shifts.

    Every ``shift_period`` requests the ``ceil(shift_fraction * N)`` hottest
    ranks trade places with ids drawn uniformly from the colder half of the
    catalog.
    """

    catalog_size: int
    length: int
    zipf_exponent: float = 0.8
    shift_period: Optional[int] = None
    shift_fraction: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.catalog_size < 1:
            raise ValueError("catalog_size must be positive")
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be >= 0")
        if not 0.0 <= self.shift_fraction <= 1.0:
            raise ValueError("shift_fraction must lie in [0, 1]")
        if self.shift_period is not None:
            if self.shift_period < 1:
                raise ValueError("shift_period must be positive")
            if self.shift_period > max(self.length, 1):
                raise ValueError("shift_period must not exceed length")


def zipf_pmf(alpha: float, n: int) -> np.ndarray:
    """Zipf probabilities ``r**-alpha / sum_j j**-alpha`` for ranks ``r = 1..n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    weights = np.arange(1, n + 1, dtype=np.float64) ** (-float(alpha))
    return weights / math.fsum(weights)


def _shift(perm: np.ndarray, fraction: float, rng: np.random.Generator) -> None:
    n = perm.size
    n_hot = min(math.ceil(fraction * n), n // 2)
    if n_hot == 0:
        return
    cold_start = n - n // 2
    cold_ranks = cold_start + rng.choice(n // 2, size=n_hot, replace=False)
    hot_ranks = np.arange(n_hot)
    perm[hot_ranks], perm[cold_ranks] = perm[cold_ranks].copy(), perm[hot_ranks].copy()


def generate_synthetic(spec: SyntheticSpec) -> Trace:
    """Draw an i.i.d. Zipf request sequence, reshuffling the hot set periodically.

    The result is a pure function of ``spec``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    n, total = spec.catalog_size, spec.length
    pmf = zipf_pmf(spec.zipf_exponent, n)
    perm = rng.permutation(n)
    period = spec.shift_period or max(total, 1)
    out = np.empty(total, dtype=np.int64)
    start = 0
    while start < total:
        stop = min(start + period, total)
        ranks = rng.choice(n, size=stop - start, p=pmf)
        out[start:stop] = perm[ranks]
        start = stop
        if spec.shift_period is not None and start < total:
            _shift(perm, spec.shift_fraction, rng)
    return Trace(n, out)


def _parse_header(line: str) -> int:
    key, sep, value = line.partition("=")
    if sep != "=" or key.strip() != "N":
        raise TraceFormatError(1, f"expected header 'N=<int>', got {line!r}")
    try:
        n = int(value.strip())
    except ValueError:
        raise TraceFormatError(1, f"bad catalog size {value.strip()!r}") from None
    if n < 1:
        raise TraceFormatError(1, "catalog size must be positive")
    return n


def load_trace(path: PathLike) -> Trace:
    """Read a trace file; raises :class:`TraceFormatError` naming the bad line."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header_seen = False
    n = 0
    ids: list[int] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            n = _parse_header(line)
            header_seen = True
            continue
        try:
            cid = int(line)
        except ValueError:
            raise TraceFormatError(line_no, f"not an integer content id: {line!r}") from None
        if cid < 0 or cid >= n:
            raise TraceValidationError(line_no, f"content id {cid} outside [0, {n})")
        ids.append(cid)
    if not header_seen:
        raise TraceFormatError(1, "missing 'N=<int>' header")
    return Trace(n, np.asarray(ids, dtype=np.int64))


def format_trace(trace: Trace, comments: Sequence[str] = ()) -> str:
    parts = [f"N={trace.catalog_size}"]
    parts.extend(f"# {c}" for c in comments)
    parts.extend(map(str, trace.contents.tolist()))
    return "\n".join(parts) + "\n"


def write_trace(trace: Trace, path: PathLike, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trace(trace, comments))
