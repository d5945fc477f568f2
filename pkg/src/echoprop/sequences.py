"""Finite windows onto left- and bi-infinite input sequences.

A window stores entries by logical time: the past block covers
``t = -B+1, ..., 0`` and the future block ``t = 1, ..., H``. All operations
are pure and return new windows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

InputMetric = Callable[[np.ndarray, np.ndarray], np.ndarray]


class HorizonError(ValueError):
    """A window does not hold the entries an operation needs."""


def euclidean_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean distance between (n, m) arrays."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if diff.shape[-1] == 1:
        return np.abs(diff[..., 0])
    # hypot-style scaling keeps tiny differences from underflowing to zero
    scale = np.max(np.abs(diff), axis=-1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(np.sum((diff / safe[..., None]) ** 2, axis=-1))


def _freeze(arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError("input entries must be finite")
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class InputWindow:
    """Inputs at times ``-B+1..0`` (``past``) and ``1..H`` (``future``), one row per time."""

    past: np.ndarray
    future: np.ndarray

    def __post_init__(self):
        past = np.asarray(self.past, dtype=np.float64)
        future = np.asarray(self.future, dtype=np.float64)
        dims = [a.shape[1] for a in (past, future) if a.ndim == 2 and a.shape[0]]
        dim = dims[0] if dims else next((a.shape[1] for a in (past, future) if a.ndim == 2), 1)
        if any(d != dim for d in dims):
            raise ValueError("past and future blocks disagree on the input dimension")
        if past.ndim > 2 or future.ndim > 2:
            raise ValueError("input blocks must be at most 2-D")
        object.__setattr__(self, "past", _freeze(past.reshape(-1, dim)))
        object.__setattr__(self, "future", _freeze(future.reshape(-1, dim)))

    @classmethod
    def from_arrays(cls, past=(), future=(), input_dim: int = 1) -> "InputWindow":
        past = np.asarray(past, dtype=np.float64).reshape(-1, input_dim)
        future = np.asarray(future, dtype=np.float64).reshape(-1, input_dim)
        return cls(past, future)

    @property
    def past_horizon(self) -> int:
        return self.past.shape[0]

    @property
    def future_horizon(self) -> int:
        return self.future.shape[0]

    @property
    def input_dim(self) -> int:
        return self.past.shape[1]

    @property
    def first_time(self) -> int:
        return -self.past_horizon + 1

    @property
    def last_time(self) -> int:
        return self.future_horizon

    def times(self) -> np.ndarray:
        return np.arange(self.first_time, self.last_time + 1)

    def entry(self, t: int) -> np.ndarray:
        """The input at logical time ``t``."""
        if not self.first_time <= t <= self.last_time:
            raise HorizonError(f"time {t} outside [{self.first_time}, {self.last_time}]")
        if t <= 0:
            return self.past[self.past_horizon - 1 + t]
        return self.future[t - 1]

    def block(self, t0: int, t1: int) -> np.ndarray:
        """Rows for times ``t0..t1`` inclusive, shape (t1 - t0 + 1, m)."""
        if t1 < t0:
            return np.empty((0, self.input_dim))
        if t0 < self.first_time or t1 > self.last_time:
            raise HorizonError(
                f"times [{t0}, {t1}] not inside [{self.first_time}, {self.last_time}]"
            )
        full = np.concatenate([self.past, self.future]) if self.future_horizon else self.past
        offset = self.past_horizon - 1
        return full[t0 + offset: t1 + offset + 1]

    def all_entries(self) -> np.ndarray:
        return self.block(self.first_time, self.last_time)

    def __eq__(self, other):
        if not isinstance(other, InputWindow):
            return NotImplemented
        return (
            self.past.shape == other.past.shape
            and self.future.shape == other.future.shape
            and np.array_equal(self.past, other.past)
            and np.array_equal(self.future, other.future)
        )

    def __repr__(self):
        return f"InputWindow(B={self.past_horizon}, H={self.future_horizon}, dim={self.input_dim})"


def shift_window(w: InputWindow, k: int) -> InputWindow:
    """Re-index ``w`` so the entry at time ``t`` is ``w``'s entry at ``t + k``.

    ``k > 0`` advances the sequence (future entries move into the past block),
    ``k < 0`` delays it. Nothing is fabricated: the valid time range moves by
    ``-k`` and the horizons follow.
    """
    k = int(k)
    B, H = w.past_horizon, w.future_horizon
    if B + k < 0 or H - k < 0:
        raise HorizonError(f"shift by {k} exhausts a window with B={B}, H={H}")
    full = w.all_entries()
    split = B + k
    return InputWindow(full[:split], full[split:])


def truncate_past(w: InputWindow) -> InputWindow:
    """Drop the future block."""
    if w.future_horizon == 0:
        return w
    return InputWindow(w.past, np.empty((0, w.input_dim)))


def concat_gamma(n: int, w_old: InputWindow, w_new: InputWindow) -> InputWindow:
    """Keep the last ``n`` past entries of ``w_new`` and graft ``w_old``'s past before them.

    ``w_old``'s time-0 entry lands at time ``-n``. Future blocks are ignored.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if w_new.past_horizon < n:
        raise HorizonError(f"w_new has past horizon {w_new.past_horizon} < {n}")
    if w_old.past_horizon and w_old.input_dim != w_new.input_dim:
        raise ValueError("windows disagree on the input dimension")
    recent = w_new.past[w_new.past_horizon - n:]
    return InputWindow(np.concatenate([w_old.past, recent]), np.empty((0, w_new.input_dim)))


def product_distance(
    w1: InputWindow, w2: InputWindow, metric: Optional[InputMetric] = None
) -> float:
    """``max_t 2**t * min(1, d(w1_t, w2_t))`` over the shared past ``t = -B+1..0``.

    The sup over times before ``-B+1`` is not seen; it is at most ``2**-B``
    (see :func:`truncation_bound`).
    """
    if w1.past_horizon != w2.past_horizon:
        raise HorizonError(
            f"past horizons differ: {w1.past_horizon} vs {w2.past_horizon}"
        )
    B = w1.past_horizon
    if B == 0:
        return 0.0
    metric = metric or euclidean_rows
    d = np.minimum(1.0, np.asarray(metric(w1.past, w2.past), dtype=np.float64))
    t = np.arange(-B + 1, 1)
    return float(np.max(np.ldexp(d, t)))


def truncation_bound(past_horizon: int) -> float:
    """Largest contribution the product metric can get from times ``t <= -B``."""
    return float(np.ldexp(1.0, -int(past_horizon)))


# -- structured text ---------------------------------------------------------

def window_to_literal(w: InputWindow) -> dict:
    return {
        "past_horizon": w.past_horizon,
        "future_horizon": w.future_horizon,
        "input_dim": w.input_dim,
        "entries": [[int(t), [float(v) for v in w.entry(int(t))]] for t in w.times()],
    }


def window_from_literal(lit: dict) -> InputWindow:
    B = int(lit["past_horizon"])
    H = int(lit["future_horizon"])
    if B < 0 or H < 0:
        raise ValueError("horizons must be nonnegative")
    entries = {int(t): v for t, v in lit["entries"]}
    expected = set(range(-B + 1, H + 1))
    if set(entries) != expected:
        missing = sorted(expected - set(entries))
        extra = sorted(set(entries) - expected)
        raise ValueError(f"window literal mismatch: missing times {missing[:5]}, extra {extra[:5]}")
    dim = int(lit.get("input_dim", np.size(next(iter(entries.values()), [0.0]))))
    rows = [np.atleast_1d(np.asarray(entries[t], dtype=np.float64)) for t in range(-B + 1, H + 1)]
    data = np.array(rows).reshape(-1, dim) if rows else np.empty((0, dim))
    return InputWindow(data[:B].reshape(-1, dim), data[B:].reshape(-1, dim))


def load_window(path) -> InputWindow:
    path = Path(path)
    try:
        return window_from_literal(json.loads(path.read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ValueError(f"cannot read window literal from {path}: {exc}") from exc


def dump_window(w: InputWindow, path) -> None:
    Path(path).write_text(json.dumps(window_to_literal(w), indent=2, sort_keys=True) + "\n")
