"""Versioned training checkpoints (.npz) and deterministic resume.

Layout of a checkpoint archive (format version 1):

  meta               JSON string: format version, architecture tag,
                     hyperparameters, master seed, run index, episode /
                     phase counters, Adam step counters, history length,
                     initial action, warm-up side, buffer sizes
  pi:<param>         policy parameter arrays, declared order (see nets)
  v:<param>          value parameter arrays
  adam_pi_m:<param>, adam_pi_v:<param>   policy Adam moments
  adam_v_m:<param>,  adam_v_v:<param>    value Adam moments
  phase<i>:u/rewards/logp/values         episodes awaiting the next
                                         phase update (windows are
                                         rebuilt from actions on load)
  replay<i>:u/vtarg                      auxiliary-phase replay entries

Because exploration and environment noise are seeded per episode, a
checkpoint plus the master seed regenerates the subsequent training
trajectory bit for bit; that is what the episode replay verifier uses.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from .nets import Adam
from .ppg import (
    CompactEpisode,
    Hyperparams,
    Trajectory,
    _TrainState,
    build_nets,
    windows_from_actions,
)

FORMAT_VERSION = 1
ARCH_TAG = "lstm-gauss-tanh/v1"


def checkpoint_path(out_dir, episodes_completed: int) -> str:
    return os.path.join(str(out_dir), "checkpoints",
                        f"ep{episodes_completed:04d}.npz")


def save_checkpoint(out_dir, state: _TrainState,
                    episodes_completed: int) -> str:
    path = checkpoint_path(out_dir, episodes_completed)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "arch": ARCH_TAG,
        "hyper": dataclasses.asdict(state.hyper),
        "seed": state.seed,
        "run_idx": state.run_idx,
        "episodes_completed": episodes_completed,
        "phase_count": state.phase_count,
        "adam_t_pi": state.opt_pi.t,
        "adam_t_v": state.opt_v.t,
        "n_history": state.n_history,
        "initial_raw": list(state.initial_raw),
        "side0": state.side0,
        "n_phase_buf": len(state.phase_buf),
        "n_replay_buf": len(state.replay_buf),
    }
    arrays: dict[str, np.ndarray] = {}
    for name, p in state.policy.params.items():
        arrays[f"pi:{name}"] = p.data
        arrays[f"adam_pi_m:{name}"] = state.opt_pi.m[name]
        arrays[f"adam_pi_v:{name}"] = state.opt_pi.v[name]
    for name, p in state.value.params.items():
        arrays[f"v:{name}"] = p.data
        arrays[f"adam_v_m:{name}"] = state.opt_v.m[name]
        arrays[f"adam_v_v:{name}"] = state.opt_v.v[name]
    for i, tr in enumerate(state.phase_buf):
        arrays[f"phase{i}:u"] = tr.u
        arrays[f"phase{i}:rewards"] = tr.rewards
        arrays[f"phase{i}:logp"] = tr.logp
        arrays[f"phase{i}:values"] = tr.values
    for i, ce in enumerate(state.replay_buf):
        arrays[f"replay{i}:u"] = ce.u
        arrays[f"replay{i}:vtarg"] = ce.vtarg
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)
    return path


def load_checkpoint(path) -> tuple[_TrainState, dict]:
    with np.load(path, allow_pickle=False) as zf:
        meta = json.loads(str(zf["meta"]))
        if meta["format_version"] != FORMAT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {meta['format_version']}")
        if meta["arch"] != ARCH_TAG:
            raise ValueError(f"unexpected architecture {meta['arch']!r}")
        hyper = Hyperparams(**meta["hyper"])
        policy, value = build_nets(hyper, meta["seed"])
        opt_pi = Adam(policy.params, hyper.lr, hyper.adam_beta1,
                      hyper.adam_beta2, hyper.adam_eps)
        opt_v = Adam(value.params, hyper.lr, hyper.adam_beta1,
                     hyper.adam_beta2, hyper.adam_eps)
        for name, p in policy.params.items():
            p.data = zf[f"pi:{name}"]
            opt_pi.m[name] = zf[f"adam_pi_m:{name}"]
            opt_pi.v[name] = zf[f"adam_pi_v:{name}"]
        for name, p in value.params.items():
            p.data = zf[f"v:{name}"]
            opt_v.m[name] = zf[f"adam_v_m:{name}"]
            opt_v.v[name] = zf[f"adam_v_v:{name}"]
        opt_pi.t = meta["adam_t_pi"]
        opt_v.t = meta["adam_t_v"]

        state = _TrainState(policy, value, opt_pi, opt_v, hyper,
                            meta["seed"], meta["run_idx"],
                            meta["n_history"], tuple(meta["initial_raw"]),
                            meta["side0"])
        state.phase_count = meta["phase_count"]
        state.episodes_done = meta["episodes_completed"]
        for i in range(meta["n_phase_buf"]):
            u = zf[f"phase{i}:u"]
            wins = windows_from_actions(np.tanh(u), state.n_history,
                                        state.initial_raw, state.side0)
            state.phase_buf.append(Trajectory(
                windows=wins, u=u, raw=np.tanh(u),
                logp=zf[f"phase{i}:logp"],
                rewards=zf[f"phase{i}:rewards"],
                values=zf[f"phase{i}:values"],
                rows=[], eta=float("nan"),
            ))
        for i in range(meta["n_replay_buf"]):
            state.replay_buf.append(CompactEpisode(
                u=zf[f"replay{i}:u"], vtarg=zf[f"replay{i}:vtarg"]))
    return state, meta


def resume_train(path, env_factory, episodes: int, out_dir=None,
                 progress=None):
    """Continue a checkpointed run up to ``episodes`` total episodes.

    Returns (logs, state): per-episode logs for the episodes actually
    run here, and the final training state.
    """
    from .ppg import EpisodeLog
    from ..reward import normalize_performance

    state, meta = load_checkpoint(path)
    env = env_factory()
    logs = []
    for ep in range(meta["episodes_completed"], episodes):
        traj = state.collect(env, ep)
        lg = EpisodeLog(ep, traj.eta, normalize_performance(traj.eta),
                        traj.rows)
        logs.append(lg)
        if progress is not None:
            progress(lg)
        state.absorb(traj)
        if out_dir is not None \
                and (ep + 1) % state.hyper.checkpoint_every == 0:
            state.save(out_dir, ep + 1)
    return logs, state
