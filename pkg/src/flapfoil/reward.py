"""Efficiency rewards over sliding beat windows, plus episode-level analytics.

The per-step reward is the efficiency of the last ``k`` tail-beats,
(sum of useful work) / (sum of expended work), with the pre-episode
warm-up beats serving as padding for the first windows.  Cumulative
(discounted) sums of that reward are what the learner maximizes; the
long-term efficiency of the whole episode is what one actually wants.
The two do not rank episodes identically — ``mismatch_analysis``
quantifies how far apart they are.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .hydro import DegeneratePower, LedgerEntry

log = logging.getLogger(__name__)

__all__ = [
    "RewardConfig",
    "EpisodeLedger",
    "kwindow_reward",
    "cumulative_reward",
    "long_term_efficiency",
    "normalize_performance",
    "MismatchResult",
    "mismatch_analysis",
]


@dataclass(frozen=True)
class RewardConfig:
    k: int = 1
    gamma: float = 0.999
    floor: float = 0.0  # reward when a window's power sum is not positive

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"window length must be >= 1, got {self.k}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class EpisodeLedger:
    """Per-beat work record; the first ``warmup_len`` entries are warm-up."""

    w: np.ndarray
    p: np.ndarray
    warmup_len: int = 0

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.w.shape != self.p.shape or self.w.ndim != 1:
            raise ValueError("w and p must be 1-d arrays of equal length")
        if len(self.w) == 0:
            raise ValueError("ledger must be nonempty")
        if not 0 <= self.warmup_len <= len(self.w):
            raise ValueError("warmup_len out of range")

    @classmethod
    def from_entries(cls, entries: Iterable[LedgerEntry], warmup_len: int = 0
                     ) -> "EpisodeLedger":
        es = list(entries)
        return cls(
            w=np.array([e.w_useful for e in es]),
            p=np.array([e.p_expended for e in es]),
            warmup_len=warmup_len,
        )

    def __len__(self) -> int:
        return len(self.w)

    @property
    def episode_len(self) -> int:
        return len(self.w) - self.warmup_len


def kwindow_reward(ledger: EpisodeLedger, t: int, k: int,
                   floor: float = 0.0) -> float:
    """Efficiency of the ``k`` beats ending at episode step ``t``.

    Windows reaching before step 0 draw on the warm-up prefix; if even
    that is not enough the window is truncated at the earliest recorded
    beat.  A window whose power sum is not positive yields ``floor``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    at = ledger.warmup_len + t
    if t < 0 or at >= len(ledger):
        raise IndexError(f"step {t} outside episode of {ledger.episode_len}")
    lo = max(0, at - k + 1)
    w_sum = float(np.sum(ledger.w[lo:at + 1]))
    p_sum = float(np.sum(ledger.p[lo:at + 1]))
    if p_sum <= 0.0:
        log.warning("window power sum %g <= 0 at step %d; reward floored", p_sum, t)
        return floor
    return w_sum / p_sum


def cumulative_reward(ledger: EpisodeLedger, k: int, gamma: float,
                      floor: float = 0.0) -> float:
    """Discounted sum of window rewards over the whole episode.

    Starts at the first step whose window fits entirely inside the
    episode (t = k-1), matching the undiscounted sliding-window sum
    when gamma = 1.
    """
    t_len = ledger.episode_len
    if t_len < k:
        raise ValueError(f"episode length {t_len} shorter than window {k}")
    total = 0.0
    for t in range(k - 1, t_len):
        total += gamma ** (t - k + 1) * kwindow_reward(ledger, t, k, floor)
    return total


def long_term_efficiency(ledger: EpisodeLedger) -> float:
    """Whole-episode efficiency over the non-warm-up beats."""
    w_sum = float(np.sum(ledger.w[ledger.warmup_len:]))
    p_sum = float(np.sum(ledger.p[ledger.warmup_len:]))
    if p_sum <= 0.0:
        raise DegeneratePower(f"episode power sum {p_sum} is not positive")
    return w_sum / p_sum


def normalize_performance(eta: float) -> float:
    """Affine rescale putting 4% efficiency at 0 and 16% at 1; unclamped."""
    return (eta - 0.04) / (0.16 - 0.04)


@dataclass
class MismatchResult:
    """Per-k comparison of normalized cumulative reward vs long-term eta."""

    k_list: tuple
    episode_ids: tuple
    long_term_eta: np.ndarray           # (n_records,)
    cum_norm: dict = field(default_factory=dict)   # k -> (n_records,)
    r_squared: dict = field(default_factory=dict)  # k -> float
    degenerate: dict = field(default_factory=dict)  # k -> bool

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "episode_id", "cum_reward_norm",
                         "long_term_eta", "r_squared"])
            for k in self.k_list:
                for i, eid in enumerate(self.episode_ids):
                    wr.writerow([k, eid, repr(float(self.cum_norm[k][i])),
                                 repr(float(self.long_term_eta[i])), ""])
                wr.writerow([k, "summary", "", "",
                             repr(float(self.r_squared[k]))])


def _r_squared(x: np.ndarray, y: np.ndarray) -> float:
    # univariate least-squares fit y = a + b x
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 0.0
    vx = float(np.sum((x - x.mean()) ** 2))
    if vx == 0.0:
        return 0.0
    b = float(np.sum((x - x.mean()) * (y - y.mean()))) / vx
    resid = y - y.mean() - b * (x - x.mean())
    return 1.0 - float(np.sum(resid ** 2)) / ss_tot


def mismatch_analysis(records: Sequence, k_list: Sequence[int]) -> MismatchResult:
    """How well does cumulative reward predict long-term efficiency?

    For each window length the per-record cumulative rewards (gamma = 1)
    are min-max normalized to [0, 1] and regressed against the records'
    long-term efficiencies.  Accepts RunRecord-like objects (anything
    with a ``.ledger``) or bare ledgers.
    """
    if len(records) < 2:
        raise ValueError("mismatch analysis needs at least 2 records")
    ledgers = [getattr(r, "ledger", r) for r in records]
    ids = tuple(getattr(r, "episode", i) for i, r in enumerate(records))
    eta = np.array([long_term_efficiency(ld) for ld in ledgers])
    out = MismatchResult(tuple(k_list), ids, eta)
    for k in k_list:
        cum = np.array([cumulative_reward(ld, k, gamma=1.0) for ld in ledgers])
        span = float(cum.max() - cum.min())
        if span == 0.0 or not math.isfinite(span):
            log.warning("all cumulative rewards equal at k=%d; R^2 degenerate", k)
            out.cum_norm[k] = np.zeros_like(cum)
            out.r_squared[k] = 0.0
            out.degenerate[k] = True
            continue
        norm = (cum - cum.min()) / span
        out.cum_norm[k] = norm
        out.r_squared[k] = _r_squared(eta, norm)
        out.degenerate[k] = False
    return out
