"""Experiment orchestration: training suites, gait sweeps, path statistics.

Three experiment drivers sit here, one per headline figure of the study:

* :func:`run_training_suite` — the k-sweep learning experiment (several
  reward-window sizes x several seeds, aggregated learning curves);
* :func:`run_sinusoidal_sweep` — the open-loop gait map (constant-action
  episodes over an (amplitude, Strouhal) grid, thrust/efficiency table);
* :func:`learning_path_stats` / :func:`final_gait_summary` — boxplot
  statistics of the actions visited while learning, and the learned gait.

Every run writes a self-contained directory so any logged episode can be
re-executed bit-exactly later (see :func:`replay_episode`):

    <out_dir>/suite_summary.csv                  aggregated learning curves
    <out_dir>/runs/<run_id>/config.json          full config snapshot
    <out_dir>/runs/<run_id>/episodes.csv         episode, eta, performance
    <out_dir>/runs/<run_id>/beats.csv            per-beat action table
    <out_dir>/runs/<run_id>/checkpoints/ep####.npz

CSV floats are serialized with repr() — the shortest digit string that
round-trips (up to 17 significant digits) — so replay comparisons can
demand exact equality after parsing.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from .agent import EpisodeLog, Hyperparams, resume_train, train
from .hydro import (DegeneratePower, FlowConditions, FoilGeometry,
                    SurrogateParams, compute_ct, strouhal)
from .mdp import ActionSpec, BeatRow, EpisodeConfig, FlapEnv, freq_bounds
from .reward import long_term_efficiency

log = logging.getLogger(__name__)

# Seed-derivation tags 0/1/2 belong to the agent (init / env noise /
# exploration); the harness claims the next two for its own streams.
TAG_SWEEP = 3
TAG_MISMATCH = 4

SMOOTH_WINDOW = 10  # trailing-mean window for learning curves
CHUNK_EPISODES = 50  # boxplot pooling interval

EPISODES_HEADER = ["episode", "eta", "performance"]
BEATS_HEADER = ["episode", "step", "amp_deg", "freq_hz", "st",
                "duration_s", "w_j", "p_j", "reward"]
CURVE_HEADER = ["k", "episode", "perf_mean", "perf_std",
                "perf_mean_smooth", "perf_std_smooth"]
SWEEP_HEADER = ["amp_deg", "st", "freq_hz", "c_t", "eta", "degenerate"]
STATS_HEADER = ["chunk", "episode_lo", "episode_hi", "metric", "median",
                "q1", "q3", "whisker_lo", "whisker_hi", "outliers"]
SUMMARY_HEADER = ["run_id", "median_amp_deg", "median_freq_hz", "st"]


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxStats:
    """Tukey box geometry: quartiles, 1.5*IQR whiskers clipped to the data,
    and the points beyond the whiskers."""

    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]


def box_stats(values: Sequence[float]) -> BoxStats:
    """Boxplot statistics with linear-interpolation quartiles."""
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValueError("box_stats needs at least one value")
    q1, med, q3 = np.percentile(data, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = data[(data >= lo_fence) & (data <= hi_fence)]
    whisker_lo = float(inside.min())
    whisker_hi = float(inside.max())
    outliers = tuple(sorted(float(v) for v in data
                            if v < lo_fence or v > hi_fence))
    return BoxStats(float(med), float(q1), float(q3),
                    whisker_lo, whisker_hi, outliers)


def trailing_mean(values: Sequence[float],
                  window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Mean of the last `window` entries at each position (truncated start)."""
    x = np.asarray(values, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        out[i] = x[max(0, i - window + 1):i + 1].mean()
    return out


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """One training run's artifacts: ordered episode rows plus provenance.

    `config` is snapshotted (deep-copied and wrapped read-only) at
    construction; `rows` must be strictly ordered by episode index.
    """

    run_id: str
    seed: int              # suite master seed
    run_idx: int           # seed-stream index within the suite
    config: Mapping
    rows: list[EpisodeLog]
    checkpoints: list[str] = field(default_factory=list)
    failed: bool = False
    error: str = ""

    def __post_init__(self):
        eps = [r.episode for r in self.rows]
        if any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValueError("rows must be strictly ordered by episode")
        self.config = MappingProxyType(copy.deepcopy(dict(self.config)))

    # MappingProxyType cannot cross a pickle boundary (worker processes);
    # ship the plain dict and re-wrap on arrival.
    def __getstate__(self):
        state = self.__dict__.copy()
        state["config"] = dict(self.config)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.config = MappingProxyType(self.__dict__["config"])


def save_run_record(record: RunRecord, run_dir) -> None:
    """Write config.json, episodes.csv, and beats.csv for one run."""
    os.makedirs(run_dir, exist_ok=True)
    cfg = dict(record.config)
    cfg["run_id"] = record.run_id
    cfg["master_seed"] = record.seed
    cfg["run_idx"] = record.run_idx
    cfg["failed"] = record.failed
    if record.error:
        cfg["error"] = record.error
    with open(os.path.join(run_dir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(run_dir, "episodes.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(EPISODES_HEADER)
        for row in record.rows:
            wr.writerow([row.episode, repr(row.eta), repr(row.performance)])
    with open(os.path.join(run_dir, "beats.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(BEATS_HEADER)
        for row in record.rows:
            for b in row.rows:
                wr.writerow([row.episode, b.step, repr(b.amp_deg),
                             repr(b.freq_hz), repr(b.st), repr(b.duration_s),
                             repr(b.w_j), repr(b.p_j), repr(b.reward)])


def load_run(run_dir) -> RunRecord:
    """Rebuild a RunRecord from a run directory written by the suite."""
    with open(os.path.join(run_dir, "config.json")) as fh:
        cfg = json.load(fh)
    beats: dict[int, list[BeatRow]] = {}
    with open(os.path.join(run_dir, "beats.csv"), newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != BEATS_HEADER:
            raise ValueError(f"unexpected beats.csv header in {run_dir}")
        for rec in rd:
            ep = int(rec[0])
            beats.setdefault(ep, []).append(BeatRow(
                step=int(rec[1]), amp_deg=float(rec[2]),
                freq_hz=float(rec[3]), st=float(rec[4]),
                duration_s=float(rec[5]), w_j=float(rec[6]),
                p_j=float(rec[7]), reward=float(rec[8])))
    rows = []
    with open(os.path.join(run_dir, "episodes.csv"), newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != EPISODES_HEADER:
            raise ValueError(f"unexpected episodes.csv header in {run_dir}")
        for rec in rd:
            ep = int(rec[0])
            rows.append(EpisodeLog(ep, float(rec[1]), float(rec[2]),
                                   beats.get(ep, [])))
    ckpt_dir = os.path.join(run_dir, "checkpoints")
    ckpts = []
    if os.path.isdir(ckpt_dir):
        ckpts = sorted(os.path.join("checkpoints", f)
                       for f in os.listdir(ckpt_dir) if f.endswith(".npz"))
    return RunRecord(
        run_id=cfg.get("run_id", os.path.basename(str(run_dir))),
        seed=cfg.get("master_seed", 0), run_idx=cfg.get("run_idx", 0),
        config=cfg, rows=rows, checkpoints=ckpts,
        failed=cfg.get("failed", False), error=cfg.get("error", ""))


# ---------------------------------------------------------------------------
# training suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _RunTask:
    """Everything a worker process needs to execute one training run."""

    run_id: str
    k: int
    run_idx: int
    master_seed: int
    episodes: int
    hyper: Hyperparams
    params: SurrogateParams
    flow: FlowConditions
    geom: FoilGeometry
    run_dir: str | None
    env_factory: Callable[[EpisodeConfig], object] | None
    env_overrides: tuple = ()  # extra EpisodeConfig.for_k keyword pairs

    def episode_config(self) -> EpisodeConfig:
        return EpisodeConfig.for_k(self.k, self.geom, self.flow,
                                   **dict(self.env_overrides))


@dataclass
class CurvePoint:
    """One aggregated learning-curve sample (mean/std over seeds)."""

    k: int
    episode: int
    perf_mean: float
    perf_std: float
    perf_mean_smooth: float
    perf_std_smooth: float


@dataclass
class SuiteResult:
    records: list[RunRecord]
    curve: list[CurvePoint]
    out_dir: str | None = None


def _task_config_snapshot(task: _RunTask, cfg: EpisodeConfig) -> dict:
    return {
        "k": task.k,
        "episodes": task.episodes,
        "env": {
            "horizon_s": cfg.horizon_s,
            "n_history": cfg.n_history,
            "warmup_repeats": cfg.warmup_repeats,
            "initial_action_raw": list(cfg.initial_action.raw),
            "k_window": cfg.k_window,
        },
        "hyper": dataclasses.asdict(task.hyper),
        "surrogate": dataclasses.asdict(task.params),
        "flow": dataclasses.asdict(task.flow),
        "geom": dataclasses.asdict(task.geom),
    }


def _execute_run(task: _RunTask) -> RunRecord:
    """Run one (k, seed) training cell; never raises — failures are
    recorded so an unattended suite keeps going."""
    cfg = task.episode_config()
    snapshot = _task_config_snapshot(task, cfg)
    if task.env_factory is not None:
        make_env = lambda: task.env_factory(cfg)  # noqa: E731
    else:
        make_env = lambda: FlapEnv(cfg, task.params, task.flow,  # noqa: E731
                                   task.geom)
    record = RunRecord(task.run_id, task.master_seed, task.run_idx,
                       snapshot, rows=[])
    try:
        if task.episodes > 0:
            res = train(make_env, task.hyper, task.episodes,
                        seed=task.master_seed, run_idx=task.run_idx,
                        out_dir=task.run_dir)
            record.rows = res.logs
            if task.run_dir is not None:
                record.checkpoints = [
                    os.path.relpath(p, task.run_dir) for p in res.checkpoints]
    except Exception:
        record.failed = True
        record.error = traceback.format_exc(limit=20)
        log.error("run %s failed:\n%s", task.run_id, record.error)
    if task.run_dir is not None:
        save_run_record(record, task.run_dir)
    return record


def aggregate_curves(records: Sequence[RunRecord],
                     k_values: Sequence[int]) -> list[CurvePoint]:
    """Per-(k, episode) mean/std of normalized performance over seeds,
    with a trailing-mean smoothed copy of each curve."""
    curve: list[CurvePoint] = []
    for k in k_values:
        runs = [r for r in records
                if r.config["k"] == k and not r.failed and r.rows]
        if not runs:
            continue
        perf = np.array([[row.performance for row in r.rows] for r in runs])
        mean = np.nanmean(perf, axis=0)
        std = np.nanstd(perf, axis=0)
        mean_s = trailing_mean(mean)
        std_s = trailing_mean(std)
        for ep in range(perf.shape[1]):
            curve.append(CurvePoint(k, ep, float(mean[ep]), float(std[ep]),
                                    float(mean_s[ep]), float(std_s[ep])))
    return curve


def write_curve_csv(curve: Sequence[CurvePoint], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CURVE_HEADER)
        for p in curve:
            wr.writerow([p.k, p.episode, repr(p.perf_mean), repr(p.perf_std),
                         repr(p.perf_mean_smooth), repr(p.perf_std_smooth)])


def run_training_suite(k_values: Sequence[int], n_seeds: int = 5,
                       episodes: int = 400, *, master_seed: int = 0,
                       out_dir=None, hyper: Hyperparams | None = None,
                       params: SurrogateParams | None = None,
                       flow: FlowConditions | None = None,
                       geom: FoilGeometry | None = None,
                       env_factory=None, workers: int = 1,
                       env_overrides: Mapping | None = None) -> SuiteResult:
    """Train n_seeds independent agents for every reward-window size k.

    All runs share initial weights (seeded from master_seed alone) and run
    index i of every k uses the same noise/exploration streams — common
    random numbers across the k arms. A crashed run is recorded as failed
    and the suite continues. With workers > 1 runs execute in separate
    processes; aggregation order is the task order either way, so outputs
    are identical for any worker count.
    """
    if n_seeds < 1 or episodes < 0 or workers < 1:
        raise ValueError("n_seeds >= 1, episodes >= 0, workers >= 1")
    hyper = hyper or Hyperparams()
    params = params or SurrogateParams()
    flow = flow or FlowConditions()
    geom = geom or FoilGeometry()
    tasks = []
    for k in k_values:
        for s in range(n_seeds):
            run_id = f"k{k:02d}_s{s}"
            run_dir = None if out_dir is None else \
                os.path.join(str(out_dir), "runs", run_id)
            tasks.append(_RunTask(run_id, k, s, master_seed, episodes,
                                  hyper, params, flow, geom, run_dir,
                                  env_factory,
                                  tuple(sorted((env_overrides or {})
                                               .items()))))
    if workers == 1:
        records = [_execute_run(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_execute_run, t) for t in tasks]
            records = []
            for t, fut in zip(tasks, futures):
                try:
                    records.append(fut.result())
                except Exception:
                    err = traceback.format_exc(limit=20)
                    log.error("run %s worker died:\n%s", t.run_id, err)
                    records.append(RunRecord(
                        t.run_id, t.master_seed, t.run_idx,
                        _task_config_snapshot(t, t.episode_config()),
                        rows=[], failed=True, error=err))
    curve = aggregate_curves(records, k_values)
    if out_dir is not None:
        os.makedirs(str(out_dir), exist_ok=True)
        write_curve_csv(curve, os.path.join(str(out_dir),
                                            "suite_summary.csv"))
    return SuiteResult(records, curve, None if out_dir is None
                       else str(out_dir))


# ---------------------------------------------------------------------------
# sinusoidal sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    """Averaged thrust coefficient and efficiency of one constant gait."""

    amp_deg: float
    st: float
    freq_hz: float
    c_t: float
    eta: float
    degenerate: bool


def default_amp_grid() -> np.ndarray:
    return np.linspace(7.0, 20.0, 14)


def default_st_grid() -> np.ndarray:
    return np.linspace(0.2, 0.8, 13)


def _point_action(amp_deg: float, st: float, flow: FlowConditions,
                  geom: FoilGeometry) -> ActionSpec:
    amp_rad = math.radians(amp_deg)
    f = st * flow.u_inf / (2.0 * geom.te_arm * math.sin(amp_rad))
    f_lo, f_hi = freq_bounds(amp_rad, flow, geom)
    raw = (2.0 * (amp_deg - 7.0) / 13.0 - 1.0,
           2.0 * (f - f_lo) / (f_hi - f_lo) - 1.0)
    return ActionSpec.from_raw(raw, flow, geom)


def sweep_point(amp_deg: float, st: float, seed, duration_s: float = 60.0,
                params: SurrogateParams | None = None,
                flow: FlowConditions | None = None,
                geom: FoilGeometry | None = None,
                warmup_repeats: int = 2) -> tuple[float, float, bool]:
    """One constant-(amp, St) episode; returns (C_T, eta, degenerate).

    Runs through the ordinary environment (warm-up beats, then identical
    alternating tail-beats until the horizon), so a sweep entry is the
    same computation as a constant-action policy episode.
    """
    params = params or SurrogateParams()
    flow = flow or FlowConditions()
    geom = geom or FoilGeometry()
    act = _point_action(amp_deg, st, flow, geom)
    cfg = EpisodeConfig(horizon_s=duration_s, n_history=1,
                        warmup_repeats=warmup_repeats, initial_action=act,
                        k_window=1)
    env = FlapEnv(cfg, params, flow, geom)
    env.reset(seed)
    done = False
    while not done:
        _, _, done, _ = env.step(act.raw)
    ledger = env.ledger()
    total_dur = sum(b.duration_s for b in env.rows)
    mean_thrust = float(np.sum(ledger.w[ledger.warmup_len:])) \
        / (flow.u_inf * total_dur)
    ct = compute_ct(mean_thrust, flow, geom)
    try:
        eta = long_term_efficiency(ledger)
        degenerate = False
    except DegeneratePower:
        log.warning("degenerate power at amp=%g deg, St=%g", amp_deg, st)
        eta, degenerate = float("nan"), True
    return ct, eta, degenerate


def _collapsing_mean(vals) -> float:
    # anchored at the first value so identical noise-off repeats average
    # to exactly that value instead of picking up a division rounding
    head = vals[0]
    return float(head + sum(v - head for v in vals) / len(vals))


def run_sinusoidal_sweep(amp_values=None, st_values=None, repeats: int = 5,
                         duration_s: float = 60.0, *, master_seed: int = 0,
                         params: SurrogateParams | None = None,
                         flow: FlowConditions | None = None,
                         geom: FoilGeometry | None = None,
                         out_path=None) -> list[SweepPoint]:
    """Map the constant-gait family: C_T and eta on an (amp, St) grid,
    each point averaged over `repeats` independently seeded episodes."""
    if repeats < 1 or duration_s <= 0:
        raise ValueError("repeats >= 1 and duration_s > 0 required")
    amps = default_amp_grid() if amp_values is None \
        else np.asarray(amp_values, dtype=float)
    sts = default_st_grid() if st_values is None \
        else np.asarray(st_values, dtype=float)
    tol = 1e-9
    for a in amps:
        if not 7.0 - tol <= a <= 20.0 + tol:
            raise ValueError(f"amplitude {a} deg outside [7, 20]")
    for s in sts:
        if not 0.2 - tol <= s <= 0.8 + tol:
            raise ValueError(f"Strouhal {s} outside [0.2, 0.8]")
    flow = flow or FlowConditions()
    geom = geom or FoilGeometry()
    points = []
    for i, a in enumerate(amps):
        for j, s in enumerate(sts):
            cts, etas, flags = [], [], []
            for rep in range(repeats):
                seed = np.random.SeedSequence(
                    [master_seed, TAG_SWEEP, i, j, rep])
                ct, eta, degen = sweep_point(float(a), float(s), seed,
                                             duration_s, params, flow, geom)
                cts.append(ct)
                etas.append(eta)
                flags.append(degen)
            degenerate = any(flags)
            eta_mean = _collapsing_mean(
                [e for e in etas if not math.isnan(e)]) \
                if not all(flags) else float("nan")
            points.append(SweepPoint(
                float(a), float(s),
                _point_action(float(a), float(s), flow, geom).freq_hz,
                _collapsing_mean(cts), eta_mean, degenerate))
    if out_path is not None:
        write_sweep_csv(points, out_path)
    return points


def write_sweep_csv(points: Sequence[SweepPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SWEEP_HEADER)
        for p in points:
            wr.writerow([repr(p.amp_deg), repr(p.st), repr(p.freq_hz),
                         repr(p.c_t), repr(p.eta), int(p.degenerate)])


# ---------------------------------------------------------------------------
# learning-path statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChunkStats:
    """Boxplot statistics of all tail-beats in one block of episodes."""

    chunk: int
    episode_lo: int
    episode_hi: int
    amp: BoxStats
    freq: BoxStats


def learning_path_stats(record: RunRecord,
                        chunk: int = CHUNK_EPISODES) -> list[ChunkStats]:
    """Pool the actions of every `chunk` consecutive episodes into boxplot
    statistics for amplitude and frequency (the gait-contraction view)."""
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    if not record.rows:
        raise ValueError("record has no episodes")
    pools: dict[int, tuple[list[float], list[float]]] = {}
    for row in record.rows:
        amp_pool, freq_pool = pools.setdefault(row.episode // chunk,
                                               ([], []))
        for b in row.rows:
            amp_pool.append(b.amp_deg)
            freq_pool.append(b.freq_hz)
    out = []
    for c in sorted(pools):
        amp_pool, freq_pool = pools[c]
        if not amp_pool:
            continue
        out.append(ChunkStats(c, c * chunk, (c + 1) * chunk - 1,
                              box_stats(amp_pool), box_stats(freq_pool)))
    return out


def write_stats_csv(chunks: Sequence[ChunkStats], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(STATS_HEADER)
        for ch in chunks:
            for metric, bs in (("amp_deg", ch.amp), ("freq_hz", ch.freq)):
                wr.writerow([ch.chunk, ch.episode_lo, ch.episode_hi, metric,
                             repr(bs.median), repr(bs.q1), repr(bs.q3),
                             repr(bs.whisker_lo), repr(bs.whisker_hi),
                             ";".join(repr(v) for v in bs.outliers)])


@dataclass(frozen=True)
class GaitSummary:
    """Median gait of a run's final episode."""

    run_id: str
    median_amp_deg: float
    median_freq_hz: float
    st: float


def final_gait_summary(records: Sequence[RunRecord]) -> list[GaitSummary]:
    """Median amplitude/frequency over each run's final episode, with the
    implied Strouhal number. Failed or empty runs are skipped."""
    out = []
    for rec in records:
        if rec.failed or not rec.rows or not rec.rows[-1].rows:
            continue
        flow = FlowConditions(**rec.config["flow"]) \
            if "flow" in rec.config else FlowConditions()
        geom = FoilGeometry(**rec.config["geom"]) \
            if "geom" in rec.config else FoilGeometry()
        beats = rec.rows[-1].rows
        amp = float(np.median([b.amp_deg for b in beats]))
        freq = float(np.median([b.freq_hz for b in beats]))
        out.append(GaitSummary(rec.run_id, amp, freq,
                               strouhal(math.radians(amp), freq, flow,
                                        geom)))
    return out


def write_summary_csv(summaries: Sequence[GaitSummary], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SUMMARY_HEADER)
        for s in summaries:
            wr.writerow([s.run_id, repr(s.median_amp_deg),
                         repr(s.median_freq_hz), repr(s.st)])


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def replay_episode(run_dir, episode: int) -> tuple[bool, str]:
    """Re-execute a logged episode from the nearest checkpoint at or below
    it and compare every beat against beats.csv. Returns (match, detail);
    a mismatch names the first diverging field.
    """
    record = load_run(run_dir)
    logged = {row.episode: row for row in record.rows}
    if episode not in logged:
        return False, f"episode {episode} not in run log"
    starts = []
    for rel in record.checkpoints:
        name = os.path.basename(rel)
        n = int(name[2:6])
        if n <= episode:
            starts.append((n, os.path.join(str(run_dir), rel)))
    if not starts:
        return False, f"no checkpoint at or below episode {episode}"
    start, path = max(starts)

    env_cfg = record.config["env"]
    cfg = EpisodeConfig(
        horizon_s=env_cfg["horizon_s"], n_history=env_cfg["n_history"],
        warmup_repeats=env_cfg["warmup_repeats"],
        initial_action=ActionSpec.from_raw(
            tuple(env_cfg["initial_action_raw"])),
        k_window=env_cfg["k_window"])
    params = SurrogateParams(**record.config["surrogate"])
    flow = FlowConditions(**record.config["flow"])
    geom = FoilGeometry(**record.config["geom"])
    logs, _ = resume_train(path, lambda: FlapEnv(cfg, params, flow, geom),
                           episodes=episode + 1)
    got = logs[-1]
    want = logged[episode]
    if len(got.rows) != len(want.rows):
        return False, (f"episode {episode}: beat count "
                       f"{len(got.rows)} != {len(want.rows)}")
    for i, (g, w) in enumerate(zip(got.rows, want.rows)):
        for fname in ("step", "amp_deg", "freq_hz", "st", "duration_s",
                      "w_j", "p_j", "reward"):
            gv, wv = getattr(g, fname), getattr(w, fname)
            if gv != wv:
                return False, (f"episode {episode} beat {i} field {fname}: "
                               f"replayed {gv!r} != logged {wv!r}")
    return True, f"episode {episode}: {len(got.rows)} beats match " \
                 f"(from checkpoint ep{start:04d})"
