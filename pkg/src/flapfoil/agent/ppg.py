"""Phasic Policy Gradient on the tail-beat environment.

Rollouts are collected with the fast ndarray forward passes; updates
rebuild the same computations on the tape.  The policy is a diagonal
Gaussian squashed through tanh, so its support coincides with the raw
action box.  Phases follow PPG: ``rollout_episodes`` episodes, one
clipped-surrogate policy epoch, one value epoch, and every ``n_pi``
phases an auxiliary phase that distills value knowledge into the
policy trunk under a behavioral-cloning KL penalty (computed on the
pre-squash Gaussians).

Seeding scheme (replayable by construction): with master seed ``s``,

  init       SeedSequence([s, 0])            shared by every run
  env noise  SeedSequence([s, 1, run, ep, retry])
  explore    SeedSequence([s, 2, run, ep, retry])

so any episode can be regenerated from the nearest checkpoint at or
below it by re-running the intervening episodes and updates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..mdp import BeatRow, EnvironmentFault, FlapEnv
from ..reward import long_term_efficiency, normalize_performance
from ..hydro import DegeneratePower
from .autodiff import Tensor
from .nets import Adam, PolicyNet, ValueNet

log = logging.getLogger(__name__)

TAG_INIT, TAG_ENV, TAG_EXPLORE = 0, 1, 2
_LOG_2PI = math.log(2.0 * math.pi)
_SQUASH_EPS = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    gamma: float = 0.999
    lr: float = 0.0002
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    rollout_episodes: int = 8
    policy_epochs: int = 1
    value_epochs: int = 1
    n_pi: int = 32
    aux_epochs: int = 6
    beta_clone: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # architecture (fixed by design; shrinkable for gradient checks)
    pi_hidden: int = 64
    pi_trunk: int = 128
    v_hidden: int = 128
    v_trunk: int = 128
    log_std_init: float = -0.5
    checkpoint_every: int = 50

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.lr < 0.0:
            raise ValueError("lr must be nonnegative")


# ---------------------------------------------------------------------------
# squashed-Gaussian policy head
# ---------------------------------------------------------------------------

def sample_action(mean: np.ndarray, log_std: np.ndarray,
                  rng: np.random.Generator
                  ) -> tuple[np.ndarray, float, np.ndarray]:
    """Draw raw = tanh(mean + std*z); returns (raw, log_prob, pre-squash u)."""
    z = rng.standard_normal(mean.shape)
    u = mean + np.exp(log_std) * z
    raw = np.tanh(u)
    return raw, float(logp_squashed_np(u[None], mean[None], log_std)[0]), u


def logp_squashed_np(u: np.ndarray, mean: np.ndarray,
                     log_std: np.ndarray) -> np.ndarray:
    """Log-density of a = tanh(u) under the squashed Gaussian, (B,)."""
    z = (u - mean) / np.exp(log_std)
    gauss = -0.5 * z * z - log_std - 0.5 * _LOG_2PI
    corr = np.log(1.0 - np.tanh(u) ** 2 + _SQUASH_EPS)
    return (gauss - corr).sum(axis=-1)


def logp_squashed_tape(u: np.ndarray, mean: Tensor, log_std: Tensor) -> Tensor:
    """Taped log-density at fixed pre-squash actions u (B, n_act).

    Mirrors logp_squashed_np operation for operation so the two paths
    agree bitwise.  The tanh change-of-variables term depends only on
    the stored u, so it enters as a constant: it shifts reported
    log-probs but carries no gradient.
    """
    z = (Tensor(u) - mean) / log_std.exp()
    gauss = -0.5 * z * z - log_std - 0.5 * _LOG_2PI
    corr = np.log(1.0 - np.tanh(u) ** 2 + _SQUASH_EPS)
    return (gauss - Tensor(corr)).sum(axis=1)


def kl_diag_gaussians(mean_old: np.ndarray, log_std_old: np.ndarray,
                      mean_new: Tensor, log_std_new: Tensor) -> Tensor:
    """KL(old || new) per row for diagonal Gaussians; old side is constant.

    Written with std ratios rather than variance products so that
    KL(pi || pi) evaluates to exactly zero.
    """
    std_new = log_std_new.exp()
    ratio_sq = (Tensor(np.exp(log_std_old)) / std_new) ** 2
    shift_sq = ((Tensor(mean_old) - mean_new) / std_new) ** 2
    per_dim = (log_std_new - log_std_old) \
        + 0.5 * ratio_sq + 0.5 * shift_sq - 0.5
    return per_dim.sum(axis=1)


# ---------------------------------------------------------------------------
# advantage estimation
# ---------------------------------------------------------------------------

def gae(rewards: np.ndarray, values: np.ndarray, gamma: float,
        lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates with terminal bootstrap 0."""
    rewards = np.asarray(rewards, float)
    values = np.asarray(values, float)
    if rewards.shape != values.shape:
        raise ValueError("rewards and values must have equal length")
    t_len = len(rewards)
    v_next = np.append(values[1:], 0.0)
    delta = rewards + gamma * v_next - values
    adv = np.empty(t_len)
    acc = 0.0
    for t in range(t_len - 1, -1, -1):
        acc = delta[t] + gamma * lam * acc
        adv[t] = acc
    return adv, adv + values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """One episode of experience (windows kept only while in a phase)."""

    windows: np.ndarray      # (T, n, 3) state feature windows
    u: np.ndarray            # (T, 2) pre-squash actions
    raw: np.ndarray          # (T, 2) squashed actions
    logp: np.ndarray         # (T,) behavior log-probs
    rewards: np.ndarray      # (T,)
    values: np.ndarray       # (T,) critic estimates at collection time
    rows: list               # per-beat metadata (BeatRow)
    eta: float               # long-term efficiency (nan if degenerate)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None


@dataclass
class CompactEpisode:
    """Replay-buffer entry: enough to rebuild windows and aux targets."""

    u: np.ndarray            # (T, 2)
    vtarg: np.ndarray        # (T,)


def windows_from_actions(raw: np.ndarray, n_history: int,
                         initial_raw: tuple[float, float],
                         side0: int) -> np.ndarray:
    """Rebuild the exact history windows the environment produced.

    ``side0`` is the trailing-edge side after warm-up (the side the
    episode starts from).  Row t of the result is the state the agent
    saw when choosing action t.
    """
    t_len = len(raw)
    seq = np.empty((n_history + t_len, 3))
    for j in range(n_history):
        seq[j, 0] = initial_raw[0]
        seq[j, 1] = initial_raw[1]
        seq[j, 2] = side0 if (n_history - 1 - j) % 2 == 0 else -side0
    side = side0
    for i in range(t_len):
        side = -side
        seq[n_history + i, 0] = raw[i, 0]
        seq[n_history + i, 1] = raw[i, 1]
        seq[n_history + i, 2] = side
    out = np.empty((t_len, n_history, 3))
    for t in range(t_len):
        out[t] = seq[t:t + n_history]
    return out


def collect_episode(env: FlapEnv, policy: PolicyNet, value: ValueNet,
                    env_seed, explore_seed) -> Trajectory:
    """Run one full episode under the current (frozen) parameters."""
    state = env.reset(env_seed)
    rng = np.random.default_rng(explore_seed)
    windows, us, raws, logps, rewards, values = [], [], [], [], [], []
    done = False
    while not done:
        feats = state.features()
        batch = feats[None]
        mean, log_std, _ = policy.forward_np(batch)
        v = value.forward_np(batch)
        raw, logp, u = sample_action(mean[0], log_std, rng)
        state, r, done, _ = env.step(raw)
        windows.append(feats)
        us.append(u)
        raws.append(raw)
        logps.append(logp)
        rewards.append(r)
        values.append(float(v[0, 0]))
    try:
        eta = long_term_efficiency(env.ledger())
    except DegeneratePower:
        log.warning("episode power sum not positive; eta undefined")
        eta = float("nan")
    return Trajectory(
        windows=np.array(windows), u=np.array(us), raw=np.array(raws),
        logp=np.array(logps), rewards=np.array(rewards),
        values=np.array(values), rows=env.rows, eta=eta,
    )


# ---------------------------------------------------------------------------
# updates
# ---------------------------------------------------------------------------

def _prepare_advantages(trajs: Sequence[Trajectory], hyper: Hyperparams
                        ) -> None:
    """GAE per episode, then advantage normalization pooled over the batch."""
    raw_adv = []
    for tr in trajs:
        adv, ret = gae(tr.rewards, tr.values, hyper.gamma, hyper.gae_lambda)
        tr.returns = ret
        raw_adv.append(adv)
    pooled = normalize_advantages(np.concatenate(raw_adv))
    ofs = 0
    for tr, adv in zip(trajs, raw_adv):
        tr.advantages = pooled[ofs:ofs + len(adv)]
        ofs += len(adv)


def ppo_policy_update(trajs: Sequence[Trajectory], policy: PolicyNet,
                      opt: Adam, hyper: Hyperparams) -> dict:
    """Clipped-surrogate ascent, one Adam step per episode sequence."""
    losses, skipped = [], 0
    for _ in range(hyper.policy_epochs):
        for tr in trajs:
            opt.zero_grad()
            mean, log_std, _ = policy.forward(tr.windows)
            logp = logp_squashed_tape(tr.u, mean, log_std)
            ratio = (logp - Tensor(tr.logp)).exp()
            adv = Tensor(tr.advantages)
            surr = (ratio * adv).minimum(
                ratio.clip(1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps) * adv)
            loss = -surr.mean()
            if not np.isfinite(loss.data):
                skipped += 1
                log.error("non-finite policy loss; update skipped")
                continue
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
    return {"policy_loss": losses, "skipped": skipped}


def value_update(trajs: Sequence[Trajectory], value: ValueNet,
                 opt: Adam, hyper: Hyperparams) -> dict:
    """Mean-squared error against the GAE returns."""
    losses, skipped = [], 0
    for _ in range(hyper.value_epochs):
        for tr in trajs:
            opt.zero_grad()
            v = value.forward(tr.windows)
            err = v - Tensor(tr.returns[:, None])
            loss = (err * err).mean()
            if not np.isfinite(loss.data):
                skipped += 1
                log.error("non-finite value loss; update skipped")
                continue
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
    return {"value_loss": losses, "skipped": skipped}


def ppg_aux_phase(replay: Sequence[CompactEpisode], policy: PolicyNet,
                  value: ValueNet, opt_pi: Adam, opt_v: Adam,
                  hyper: Hyperparams, n_history: int,
                  initial_raw: tuple[float, float], side0: int) -> dict:
    """PPG sleep phase: distill value targets into the policy trunk while
    a KL penalty (pre-squash Gaussian space) pins the behavior."""
    if not replay:
        raise ValueError("auxiliary phase needs a nonempty replay")
    eps = []
    for ce in replay:
        wins = windows_from_actions(np.tanh(ce.u), n_history,
                                    initial_raw, side0)
        mean_old, log_std_old, _ = policy.forward_np(wins)
        eps.append((wins, ce.vtarg, mean_old, log_std_old))
    aux_losses, kls = [], []
    for _ in range(hyper.aux_epochs):
        for wins, vtarg, mean_old, log_std_old in eps:
            opt_pi.zero_grad()
            mean, log_std, aux = policy.forward(wins)
            err = aux - Tensor(vtarg[:, None])
            aux_mse = (err * err).mean()
            kl = kl_diag_gaussians(mean_old, log_std_old,
                                   mean, log_std).mean()
            joint = aux_mse + hyper.beta_clone * kl
            if not np.isfinite(joint.data):
                log.error("non-finite aux loss; step skipped")
                continue
            joint.backward()
            opt_pi.step()
            aux_losses.append(float(aux_mse.data))
            kls.append(float(kl.data))

            opt_v.zero_grad()
            v = value.forward(wins)
            verr = v - Tensor(vtarg[:, None])
            vloss = (verr * verr).mean()
            if np.isfinite(vloss.data):
                vloss.backward()
                opt_v.step()
    return {"aux_mse": aux_losses, "kl": kls}


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class EpisodeLog:
    episode: int
    eta: float
    performance: float
    rows: list[BeatRow] = field(repr=False, default_factory=list)


@dataclass
class TrainResult:
    logs: list[EpisodeLog]
    policy: PolicyNet
    value: ValueNet
    checkpoints: list[str] = field(default_factory=list)


def build_nets(hyper: Hyperparams, seed: int, n_in: int = 3
               ) -> tuple[PolicyNet, ValueNet]:
    """Initial parameters depend only on (seed, hyper): every run of a
    suite starts from the same weights."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, TAG_INIT]))
    policy = PolicyNet(rng, n_in=n_in, n_hidden=hyper.pi_hidden,
                       n_trunk=hyper.pi_trunk,
                       log_std_init=hyper.log_std_init)
    value = ValueNet(rng, n_in=n_in, n_hidden=hyper.v_hidden,
                     n_trunk=hyper.v_trunk)
    return policy, value


def train(env_factory: Callable[[], FlapEnv], hyper: Hyperparams,
          episodes: int, seed: int, run_idx: int = 0,
          out_dir=None, progress: Callable[[EpisodeLog], None] | None = None
          ) -> TrainResult:
    """Full PPG training run; see module docstring for the seeding plan."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env = env_factory()
    policy, value = build_nets(hyper, seed)
    opt_pi = Adam(policy.params, hyper.lr, hyper.adam_beta1,
                  hyper.adam_beta2, hyper.adam_eps)
    opt_v = Adam(value.params, hyper.lr, hyper.adam_beta1,
                 hyper.adam_beta2, hyper.adam_eps)
    side0 = 1 if env.cfg.warmup_repeats % 2 == 0 else -1
    init_raw = env.cfg.initial_action.raw

    state = _TrainState(policy, value, opt_pi, opt_v, hyper, seed, run_idx,
                        env.cfg.n_history, init_raw, side0)
    result = TrainResult(logs=[], policy=policy, value=value)
    if out_dir is not None:
        result.checkpoints.append(state.save(out_dir, 0))

    for ep in range(episodes):
        traj = state.collect(env, ep)
        lg = EpisodeLog(ep, traj.eta, normalize_performance(traj.eta),
                        traj.rows)
        result.logs.append(lg)
        if progress is not None:
            progress(lg)
        state.absorb(traj)
        if out_dir is not None and (ep + 1) % hyper.checkpoint_every == 0:
            result.checkpoints.append(state.save(out_dir, ep + 1))
    return result


class _TrainState:
    """Mutable training-loop state shared by train() and checkpoint resume."""

    def __init__(self, policy, value, opt_pi, opt_v, hyper, seed, run_idx,
                 n_history, initial_raw, side0):
        self.policy, self.value = policy, value
        self.opt_pi, self.opt_v = opt_pi, opt_v
        self.hyper, self.seed, self.run_idx = hyper, seed, run_idx
        self.n_history, self.initial_raw, self.side0 = \
            n_history, initial_raw, side0
        self.phase_buf: list[Trajectory] = []
        self.replay_buf: list[CompactEpisode] = []
        self.phase_count = 0
        self.episodes_done = 0

    def collect(self, env: FlapEnv, ep: int) -> Trajectory:
        for retry in range(3):
            env_ss = np.random.SeedSequence(
                [self.seed, TAG_ENV, self.run_idx, ep, retry])
            exp_ss = np.random.SeedSequence(
                [self.seed, TAG_EXPLORE, self.run_idx, ep, retry])
            try:
                return collect_episode(env, self.policy, self.value,
                                       env_ss, exp_ss)
            except EnvironmentFault as exc:
                log.error("episode %d fault (%s); recollecting", ep, exc)
        raise EnvironmentFault(f"episode {ep} failed after 3 attempts")

    def absorb(self, traj: Trajectory) -> None:
        """Buffer the episode; run phase updates when the buffer fills."""
        self.phase_buf.append(traj)
        self.episodes_done += 1
        if len(self.phase_buf) < self.hyper.rollout_episodes:
            return
        _prepare_advantages(self.phase_buf, self.hyper)
        ppo_policy_update(self.phase_buf, self.policy, self.opt_pi,
                          self.hyper)
        value_update(self.phase_buf, self.value, self.opt_v, self.hyper)
        for tr in self.phase_buf:
            self.replay_buf.append(CompactEpisode(tr.u, tr.returns))
        self.phase_buf = []
        self.phase_count += 1
        if self.phase_count % self.hyper.n_pi == 0:
            ppg_aux_phase(self.replay_buf, self.policy, self.value,
                          self.opt_pi, self.opt_v, self.hyper,
                          self.n_history, self.initial_raw, self.side0)
            self.replay_buf = []

    def save(self, out_dir, episodes_completed: int) -> str:
        from .checkpoint import save_checkpoint

        return save_checkpoint(out_dir, self, episodes_completed)
