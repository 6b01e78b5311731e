"""Command-line entry point: train, sweep, mismatch, stats, replay.

Configuration is a JSON file mirroring the dataclass tree (all keys
optional; unknown keys are rejected), plus dotted-path ``--set`` overrides
and a few dedicated flags. Precedence, lowest to highest:

    built-in defaults < config file < FLAPFOIL_SEED / FLAPFOIL_OUT
                      < --set key=value < dedicated flags

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
No command writes outside its output directory (or, for stats/replay, the
run directory it is pointed at).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import harness
from .agent import Hyperparams
from .hydro import FlowConditions, FoilGeometry, SurrogateParams
from .mdp import EpisodeConfig, rollout_random
from .reward import mismatch_analysis

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid configuration; reported with the offending dotted path."""


# ---------------------------------------------------------------------------
# configuration tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvSpec:
    horizon_s: float = 60.0
    warmup_repeats: int = 2

    def __post_init__(self):
        if self.horizon_s <= 0 or self.warmup_repeats < 0:
            raise ValueError("env.horizon_s > 0 and env.warmup_repeats >= 0")


@dataclass(frozen=True)
class RewardSpec:
    k: int | None = None     # None: train every k in suite.k_values
    gamma: float = 0.999     # discount, shared with the agent

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("reward.k must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("reward.gamma must lie in [0, 1)")


@dataclass(frozen=True)
class SuiteSpec:
    k_values: tuple = (1, 2, 8, 16)
    seeds: int = 5
    episodes: int = 400

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        if not ks or any(k < 1 for k in ks):
            raise ValueError("suite.k_values must be positive integers")
        object.__setattr__(self, "k_values", ks)
        if self.seeds < 1 or self.episodes < 0:
            raise ValueError("suite.seeds >= 1 and suite.episodes >= 0")


@dataclass(frozen=True)
class SweepSpec:
    amp_values: tuple | None = None   # None: the default 14-amplitude grid
    st_values: tuple | None = None    # None: the default 13-Strouhal grid
    repeats: int = 5
    duration_s: float = 60.0
    noise: bool = True

    def __post_init__(self):
        if self.repeats < 1 or self.duration_s <= 0:
            raise ValueError("sweep.repeats >= 1 and sweep.duration_s > 0")
        for name in ("amp_values", "st_values"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in v))


@dataclass(frozen=True)
class MismatchSpec:
    k_list: tuple = (1, 8, 16)
    episodes: int = 10
    duration_s: float = 60.0

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_list)
        if not ks or any(k < 1 for k in ks):
            raise ValueError("mismatch.k_list must be positive integers")
        object.__setattr__(self, "k_list", ks)
        if self.duration_s <= 0:
            raise ValueError("mismatch.duration_s must be positive")


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 0
    out_dir: str = "out"
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    flow: FlowConditions = field(default_factory=FlowConditions)
    geom: FoilGeometry = field(default_factory=FoilGeometry)
    env: EnvSpec = field(default_factory=EnvSpec)
    reward: RewardSpec = field(default_factory=RewardSpec)
    agent: Hyperparams = field(default_factory=Hyperparams)
    suite: SuiteSpec = field(default_factory=SuiteSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    mismatch: MismatchSpec = field(default_factory=MismatchSpec)

    def train_k_values(self) -> tuple:
        """reward.k, when set, narrows the suite to that single window."""
        if self.reward.k is not None:
            return (self.reward.k,)
        return self.suite.k_values

    def sweep_params(self) -> SurrogateParams:
        if self.sweep.noise:
            return self.surrogate
        return dataclasses.replace(self.surrogate, sigma_t=0.0, sigma_m=0.0,
                                   sigma_u=0.0)


_SECTION_TYPES = {
    "surrogate": SurrogateParams,
    "flow": FlowConditions,
    "geom": FoilGeometry,
    "env": EnvSpec,
    "reward": RewardSpec,
    "agent": Hyperparams,
    "suite": SuiteSpec,
    "sweep": SweepSpec,
    "mismatch": MismatchSpec,
}
def _default_tree() -> dict:
    tree: dict = {"master_seed": 0, "out_dir": "out"}
    for name, typ in _SECTION_TYPES.items():
        tree[name] = {f.name: f.default
                      if f.default is not dataclasses.MISSING
                      else dataclasses.asdict(typ())[f.name]
                      for f in dataclasses.fields(typ)}
    # the discount lives at reward.gamma; agent.gamma would shadow it
    del tree["agent"]["gamma"]
    return tree


def _merge_tree(tree: dict, user: dict, prefix: str = "") -> None:
    """Overlay `user` onto `tree`, rejecting keys the schema lacks."""
    if not isinstance(user, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    for key, value in user.items():
        dotted = f"{prefix}{key}"
        if key not in tree:
            raise ConfigError(f"unknown config key {dotted!r}")
        if isinstance(tree[key], dict):
            _merge_tree(tree[key], value, dotted + ".")
        else:
            tree[key] = value


def _apply_set(tree: dict, expr: str) -> None:
    path, sep, raw = expr.partition("=")
    if not sep or not path:
        raise ConfigError(f"--set expects key=value, got {expr!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare string, e.g. --set out_dir=results
    node: dict = tree
    keys = path.split(".")
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"unknown config key {path!r}")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key {path!r}")
    if isinstance(node[keys[-1]], dict):
        raise ConfigError(f"{path!r} is a section, not a value")
    node[keys[-1]] = value


def build_config(config_path=None, sets=(), *, seed=None, out=None,
                 env=os.environ) -> RunConfig:
    """Assemble and fully validate a RunConfig before anything runs."""
    tree = _default_tree()
    if config_path is not None:
        try:
            with open(config_path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{config_path}:{exc.lineno}:{exc.colno}: {exc.msg}"
            ) from exc
        _merge_tree(tree, user)
    if "FLAPFOIL_SEED" in env:
        try:
            tree["master_seed"] = int(env["FLAPFOIL_SEED"])
        except ValueError as exc:
            raise ConfigError(f"FLAPFOIL_SEED: {exc}") from exc
    if "FLAPFOIL_OUT" in env:
        tree["out_dir"] = env["FLAPFOIL_OUT"]
    for expr in sets:
        _apply_set(tree, expr)
    if seed is not None:
        tree["master_seed"] = seed
    if out is not None:
        tree["out_dir"] = out

    agent_tree = dict(tree["agent"])
    # the discount's single source of truth is reward.gamma
    agent_tree["gamma"] = tree["reward"]["gamma"]
    kwargs = {"master_seed": int(tree["master_seed"]),
              "out_dir": str(tree["out_dir"])}
    try:
        for name, typ in _SECTION_TYPES.items():
            src = agent_tree if name == "agent" else tree[name]
            kwargs[name] = typ(**src)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    return RunConfig(**kwargs)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(cfg: RunConfig, workers: int) -> int:
    res = harness.run_training_suite(
        cfg.train_k_values(), n_seeds=cfg.suite.seeds,
        episodes=cfg.suite.episodes, master_seed=cfg.master_seed,
        out_dir=cfg.out_dir, hyper=cfg.agent, params=cfg.surrogate,
        flow=cfg.flow, geom=cfg.geom, workers=workers,
        env_overrides={"horizon_s": cfg.env.horizon_s,
                       "warmup_repeats": cfg.env.warmup_repeats})
    ok = 0
    for rec in res.records:
        if rec.failed:
            print(f"{rec.run_id}: FAILED", file=sys.stderr)
        else:
            ok += 1
            print(f"{rec.run_id}: {len(rec.rows)} episodes")
    summaries = harness.final_gait_summary(res.records)
    if summaries:
        harness.write_summary_csv(
            summaries, os.path.join(cfg.out_dir, "gait_summary.csv"))
    print(f"{ok}/{len(res.records)} runs succeeded -> {cfg.out_dir}")
    return 0 if ok else 1


def cmd_sweep(cfg: RunConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "sweep.csv")
    points = harness.run_sinusoidal_sweep(
        cfg.sweep.amp_values, cfg.sweep.st_values,
        repeats=cfg.sweep.repeats, duration_s=cfg.sweep.duration_s,
        master_seed=cfg.master_seed, params=cfg.sweep_params(),
        flow=cfg.flow, geom=cfg.geom, out_path=path)
    best = max(points, key=lambda p: (p.eta if not p.degenerate
                                      else float("-inf")))
    print(f"{len(points)} grid points -> {path}")
    print(f"best: amp={best.amp_deg:g} deg St={best.st:g} "
          f"eta={best.eta:.4f} C_T={best.c_t:.4f}")
    return 0


def cmd_mismatch(cfg: RunConfig) -> int:
    spec = cfg.mismatch
    episode_cfg = EpisodeConfig(horizon_s=spec.duration_s, n_history=1,
                                warmup_repeats=cfg.env.warmup_repeats,
                                k_window=1)
    records = [
        rollout_random(
            episode_cfg,
            [cfg.master_seed, harness.TAG_MISMATCH, ep],
            spec.duration_s, cfg.surrogate, cfg.flow, cfg.geom, episode=ep)
        for ep in range(spec.episodes)
    ]
    result = mismatch_analysis(records, spec.k_list)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "mismatch.csv")
    result.to_csv(path)
    for k in spec.k_list:
        flag = " (degenerate)" if result.degenerate[k] else ""
        print(f"k={k}: R^2 = {result.r_squared[k]:.4f}{flag}")
    print(f"{spec.episodes} episodes x {len(spec.k_list)} windows -> {path}")
    return 0


def cmd_stats(run_dir: str) -> int:
    try:
        record = harness.load_run(run_dir)
        chunks = harness.learning_path_stats(record)
    except (OSError, ValueError) as exc:
        print(f"cannot read run records: {exc}", file=sys.stderr)
        return 1
    harness.write_stats_csv(chunks, os.path.join(run_dir, "path_stats.csv"))
    summaries = harness.final_gait_summary([record])
    harness.write_summary_csv(
        summaries, os.path.join(run_dir, "gait_summary.csv"))
    for ch in chunks:
        print(f"episodes {ch.episode_lo:4d}-{ch.episode_hi:4d}: "
              f"amp IQR [{ch.amp.q1:6.2f}, {ch.amp.q3:6.2f}] deg, "
              f"freq IQR [{ch.freq.q1:6.3f}, {ch.freq.q3:6.3f}] Hz")
    for s in summaries:
        print(f"final gait: amp={s.median_amp_deg:.2f} deg "
              f"freq={s.median_freq_hz:.3f} Hz St={s.st:.3f}")
    return 0


def cmd_replay(run_dir: str, episode: int) -> int:
    try:
        match, detail = harness.replay_episode(run_dir, episode)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot replay: {exc}", file=sys.stderr)
        return 1
    print(("MATCH " if match else "MISMATCH ") + detail)
    return 0 if match else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH",
                   help="JSON configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                   help="dotted-path override, e.g. --set reward.k=8")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--out", help="output directory override")


def _parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flapfoil",
        description="Gait-learning workbench for a pitching foil.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the k-sweep training suite")
    _add_config_flags(p)
    p.add_argument("--seeds", type=int, help="independent runs per k")
    p.add_argument("--episodes", type=int, help="episodes per run")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel runs (default 1, exact reproducibility)")

    p = sub.add_parser("sweep", help="map the constant-gait family")
    _add_config_flags(p)
    p.add_argument("--amps", metavar="LIST",
                   help="comma-separated amplitudes in degrees")
    p.add_argument("--st", metavar="LIST",
                   help="comma-separated Strouhal numbers")
    p.add_argument("--repeats", type=int, help="episodes per grid point")
    p.add_argument("--duration", type=float, help="episode length, seconds")
    p.add_argument("--no-noise", action="store_true",
                   help="disable measurement noise")

    p = sub.add_parser("mismatch",
                       help="reward/objective mismatch analysis")
    _add_config_flags(p)
    p.add_argument("--episodes", type=int, help="random episodes (>= 2)")
    p.add_argument("--k", metavar="LIST", help="comma-separated window sizes")
    p.add_argument("--duration", type=float, help="episode length, seconds")

    p = sub.add_parser("stats", help="learning-path statistics for a run")
    p.add_argument("run_dir", help="run directory (runs/<run_id>)")

    p = sub.add_parser("replay",
                       help="re-execute a logged episode and verify it")
    p.add_argument("run_dir", help="run directory (runs/<run_id>)")
    p.add_argument("episode", type=int, help="episode index to replay")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    sets = list(args.set)
    if args.command == "train":
        if args.seeds is not None:
            sets.append(f"suite.seeds={args.seeds}")
        if args.episodes is not None:
            sets.append(f"suite.episodes={args.episodes}")
    elif args.command == "sweep":
        if args.amps is not None:
            sets.append("sweep.amp_values="
                        + json.dumps(_parse_float_list(args.amps)))
        if args.st is not None:
            sets.append("sweep.st_values="
                        + json.dumps(_parse_float_list(args.st)))
        if args.repeats is not None:
            sets.append(f"sweep.repeats={args.repeats}")
        if args.duration is not None:
            sets.append(f"sweep.duration_s={args.duration}")
        if args.no_noise:
            sets.append("sweep.noise=false")
    elif args.command == "mismatch":
        if args.episodes is not None:
            sets.append(f"mismatch.episodes={args.episodes}")
        if args.k is not None:
            sets.append("mismatch.k_list="
                        + json.dumps([int(v) for v in args.k.split(",")
                                      if v]))
        if args.duration is not None:
            sets.append(f"mismatch.duration_s={args.duration}")
    return build_config(args.config, sets, seed=args.seed, out=args.out)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    if args.command == "stats":
        return cmd_stats(args.run_dir)
    if args.command == "replay":
        return cmd_replay(args.run_dir, args.episode)
    try:
        cfg = _config_from_args(args)
        if args.command == "mismatch" and cfg.mismatch.episodes < 2:
            raise ConfigError("mismatch.episodes must be >= 2")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "train":
            return cmd_train(cfg, args.workers)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_mismatch(cfg)
    except ValueError as exc:
        # pre-run validation that only triggers inside an operation,
        # e.g. an out-of-bounds sweep grid point
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
