"""Tail-beat decision environment over the hydrodynamic surrogate.

One step = one tail-beat.  Actions arrive as a raw pair in [-1, 1]^2 and
are mapped onto the admissible gait box: amplitude linearly over
[7 deg, 20 deg], frequency linearly between the two frequencies that put
the Strouhal number at 0.2 and 0.8 for that amplitude.  The observable
state is the normalized motion history of the last ``n_history`` beats
(no flow sensing); the wake memory lives inside the environment.

Episodes run a fixed wall-time horizon (default 60 s).  A reset zeroes
the wake (the between-episode pause), performs the nominal mid-range
beat ``warmup_repeats`` times to warm the flow up, and pre-fills the
history with that same nominal action.  Warm-up loads are kept on a
prefix ledger: they pad the first reward windows but are excluded from
episode totals.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import hydro
from .hydro import (
    AMP_MAX,
    AMP_MIN,
    BeatPlan,
    FlowConditions,
    FoilGeometry,
    LedgerEntry,
    LoadSeries,
    SurrogateParams,
    WakeState,
    plan_tailbeat,
    simulate_beat,
    strouhal,
)
from .reward import EpisodeLedger, kwindow_reward

log = logging.getLogger(__name__)

ST_LO = 0.2
ST_HI = 0.8
AMP_MIN_DEG = 7.0
AMP_MAX_DEG = 20.0
FLOW_PASSES = 5.0  # wake memory horizon, in chord travel times

__all__ = [
    "ST_LO", "ST_HI", "AMP_MIN_DEG", "AMP_MAX_DEG",
    "EnvironmentFault", "ActionSpec", "EnvState", "EpisodeConfig",
    "compute_n_history", "freq_bounds", "FlapEnv", "BeatRow", "RunRecord",
    "rollout_random", "records_to_csv",
]


class EnvironmentFault(RuntimeError):
    """Raised when an episode must be aborted (non-finite action, etc.)."""


def freq_bounds(amp_rad: float, flow: FlowConditions | None = None,
                geom: FoilGeometry | None = None) -> tuple[float, float]:
    """Frequencies placing the Strouhal number at 0.2 and 0.8 for this amp."""
    flow = flow or FlowConditions()
    geom = geom or FoilGeometry()
    denom = 2.0 * geom.te_arm * math.sin(amp_rad)
    return ST_LO * flow.u_inf / denom, ST_HI * flow.u_inf / denom


@dataclass(frozen=True)
class ActionSpec:
    """A gait command: raw action pair plus its physical realization."""

    raw: tuple[float, float]
    amp_deg: float
    freq_hz: float
    st: float

    @property
    def amp_rad(self) -> float:
        return math.radians(self.amp_deg)

    @classmethod
    def from_raw(cls, raw: Sequence[float],
                 flow: FlowConditions | None = None,
                 geom: FoilGeometry | None = None) -> "ActionSpec":
        """Map a raw pair onto the admissible (amp, freq) box, clamping."""
        flow = flow or FlowConditions()
        geom = geom or FoilGeometry()
        r1 = min(max(float(raw[0]), -1.0), 1.0)
        r2 = min(max(float(raw[1]), -1.0), 1.0)
        amp_deg = AMP_MIN_DEG + (AMP_MAX_DEG - AMP_MIN_DEG) * (r1 + 1.0) / 2.0
        f_lo, f_hi = freq_bounds(math.radians(amp_deg), flow, geom)
        freq = f_lo + (f_hi - f_lo) * (r2 + 1.0) / 2.0
        st = strouhal(math.radians(amp_deg), freq, flow, geom)
        return cls(raw=(r1, r2), amp_deg=amp_deg, freq_hz=freq, st=st)


@dataclass
class EnvState:
    """Observable state: per-beat feature rows, oldest first.

    Each row is (normalized amp, normalized freq, side reached), all
    in [-1, 1].
    """

    history: np.ndarray
    side: int
    elapsed: float

    def features(self) -> np.ndarray:
        return self.history.copy()


def compute_n_history(k: int, geom: FoilGeometry | None = None,
                      flow: FlowConditions | None = None) -> int:
    """History length: enough beats to span five chord-travel times.

    The shortest admissible beat is the one at minimum amplitude and
    St = 0.8; dividing the flow-memory horizon by that duration bounds
    how many beats the wake can remember.  Reward windows of length k
    additionally require 2k beats of context.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    geom = geom or FoilGeometry()
    flow = flow or FlowConditions()
    _, f_max = freq_bounds(AMP_MIN, flow, geom)
    d_min = 1.0 / (2.0 * f_max)
    markov = math.ceil((FLOW_PASSES * geom.chord / flow.u_inf) / d_min)
    return max(markov, 2 * k)


def _default_initial_action() -> ActionSpec:
    return ActionSpec.from_raw((0.0, 0.0))


@dataclass(frozen=True)
class EpisodeConfig:
    horizon_s: float = 60.0
    n_history: int = 42
    warmup_repeats: int = 2
    initial_action: ActionSpec = field(default_factory=_default_initial_action)
    k_window: int = 1

    def __post_init__(self):
        if self.horizon_s <= 0:
            raise ValueError("horizon_s must be positive")
        if self.n_history < 1 or self.warmup_repeats < 0 or self.k_window < 1:
            raise ValueError("invalid episode configuration")

    @classmethod
    def for_k(cls, k: int, geom: FoilGeometry | None = None,
              flow: FlowConditions | None = None, **over) -> "EpisodeConfig":
        return cls(n_history=compute_n_history(k, geom, flow),
                   k_window=k, **over)


@dataclass(frozen=True)
class BeatRow:
    """Per-beat metadata row, one per environment step."""

    step: int
    amp_deg: float
    freq_hz: float
    st: float
    duration_s: float
    w_j: float
    p_j: float
    reward: float


class FlapEnv:
    """Single-stream environment instance (mutable wake + history)."""

    def __init__(self, cfg: EpisodeConfig | None = None,
                 params: SurrogateParams | None = None,
                 flow: FlowConditions | None = None,
                 geom: FoilGeometry | None = None,
                 record_loads: bool = False):
        self.cfg = cfg or EpisodeConfig()
        self.params = params or SurrogateParams()
        self.flow = flow or FlowConditions()
        self.geom = geom or FoilGeometry()
        self.record_loads = record_loads
        self._state: EnvState | None = None

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed=None) -> EnvState:
        """Zero the wake, run warm-up beats, pre-fill history."""
        self._rng = np.random.default_rng(seed)
        self._wake = WakeState(0.0)
        self._entries: list[LedgerEntry] = []
        self._rows: list[BeatRow] = []
        self._loads: list[tuple[BeatPlan, LoadSeries]] = []
        self._aborted = False

        act = self.cfg.initial_action
        self._theta = act.amp_rad  # warm-up starts at the positive extreme
        for _ in range(self.cfg.warmup_repeats):
            plan = plan_tailbeat(self._theta, act.amp_rad, act.freq_hz)
            series, entry, self._wake = simulate_beat(
                plan, self._wake, self.params, self.flow, self.geom, self._rng)
            self._entries.append(entry)
            if self.record_loads:
                self._loads.append((plan, series))
            self._theta = -math.copysign(act.amp_rad, self._theta)

        side = int(math.copysign(1.0, self._theta))
        n = self.cfg.n_history
        hist = np.empty((n, 3))
        hist[:, 0] = act.raw[0]
        hist[:, 1] = act.raw[1]
        # most recent entry carries the side we now sit on, alternating back
        for j in range(n):
            hist[j, 2] = side if (n - 1 - j) % 2 == 0 else -side
        self._state = EnvState(history=hist, side=side, elapsed=0.0)
        return self._state

    def step(self, raw: Sequence[float]
             ) -> tuple[EnvState, float, bool, LedgerEntry]:
        """Execute one tail-beat; reward is the k-window efficiency."""
        if self._state is None:
            raise RuntimeError("step before reset")
        r1, r2 = float(raw[0]), float(raw[1])
        if not (math.isfinite(r1) and math.isfinite(r2)):
            self._aborted = True
            log.error("non-finite action (%r, %r); episode aborted", r1, r2)
            raise EnvironmentFault(f"non-finite action ({r1!r}, {r2!r})")
        act = ActionSpec.from_raw((r1, r2), self.flow, self.geom)

        plan = plan_tailbeat(self._theta, act.amp_rad, act.freq_hz)
        series, entry, self._wake = simulate_beat(
            plan, self._wake, self.params, self.flow, self.geom, self._rng)
        self._entries.append(entry)
        if self.record_loads:
            self._loads.append((plan, series))

        t = len(self._entries) - 1 - self.cfg.warmup_repeats
        reward = kwindow_reward(self.ledger(), t, self.cfg.k_window)

        self._theta = -math.copysign(act.amp_rad, self._theta)
        side = int(math.copysign(1.0, self._theta))
        hist = self._state.history
        hist[:-1] = hist[1:]
        hist[-1] = (act.raw[0], act.raw[1], side)
        elapsed = self._state.elapsed + plan.duration
        self._state = EnvState(history=hist, side=side, elapsed=elapsed)
        done = elapsed >= self.cfg.horizon_s

        self._rows.append(BeatRow(
            step=t, amp_deg=act.amp_deg, freq_hz=act.freq_hz, st=act.st,
            duration_s=plan.duration, w_j=entry.w_useful,
            p_j=entry.p_expended, reward=reward,
        ))
        return self._state, reward, done, entry

    # -- episode products ----------------------------------------------------

    def ledger(self) -> EpisodeLedger:
        return EpisodeLedger.from_entries(self._entries,
                                          self.cfg.warmup_repeats)

    @property
    def rows(self) -> list[BeatRow]:
        return list(self._rows)

    @property
    def loads(self) -> list[tuple[BeatPlan, LoadSeries]]:
        return list(self._loads)

    @property
    def wake(self) -> WakeState:
        return self._wake

    @property
    def theta_start(self) -> float:
        return self._theta


@dataclass
class RunRecord:
    """One episode's beat rows, ledger, and (optionally) load samples."""

    episode: int
    seed: object
    rows: list[BeatRow]
    ledger: EpisodeLedger
    loads: list[tuple[BeatPlan, LoadSeries]] = field(default_factory=list)

    def to_csv(self, path) -> None:
        records_to_csv([self], path)

    def loads_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["episode", "step", "sample", "t_s", "theta_rad",
                         "omega_rad_s", "thrust_clean_n", "thrust_meas_n",
                         "torque_clean_nm", "torque_meas_nm"])
            for step, (plan, series) in enumerate(self.loads):
                for i in range(len(plan)):
                    wr.writerow([
                        self.episode, step, i, repr(float(plan.t[i])),
                        repr(float(plan.theta[i])), repr(float(plan.omega[i])),
                        repr(float(series.thrust_clean[i])),
                        repr(float(series.thrust_meas[i])),
                        repr(float(series.torque_clean[i])),
                        repr(float(series.torque_meas[i])),
                    ])


CSV_HEADER = ["episode", "step", "amp_deg", "freq_hz", "st",
              "duration_s", "w_j", "p_j", "reward"]


def records_to_csv(records: Sequence[RunRecord], path) -> None:
    """Write per-beat rows for one or more episodes; floats round-trip."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_HEADER)
        for rec in records:
            for r in rec.rows:
                wr.writerow([rec.episode, r.step, repr(r.amp_deg),
                             repr(r.freq_hz), repr(r.st), repr(r.duration_s),
                             repr(r.w_j), repr(r.p_j), repr(r.reward)])


def rollout_random(cfg: EpisodeConfig, seed, duration_s: float,
                   params: SurrogateParams | None = None,
                   flow: FlowConditions | None = None,
                   geom: FoilGeometry | None = None,
                   record_loads: bool = False,
                   episode: int = 0) -> RunRecord:
    """Run one episode of uniform-random raw actions for duration_s."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    noise_ss, action_ss = ss.spawn(2)
    cfg = dataclasses.replace(cfg, horizon_s=duration_s)
    env = FlapEnv(cfg, params, flow, geom, record_loads=record_loads)
    env.reset(noise_ss)
    arng = np.random.default_rng(action_ss)
    done = False
    while not done:
        _, _, done, _ = env.step(arng.uniform(-1.0, 1.0, size=2))
    return RunRecord(episode=episode, seed=seed, rows=env.rows,
                     ledger=env.ledger(), loads=env.loads)
