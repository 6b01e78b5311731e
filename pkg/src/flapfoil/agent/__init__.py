"""Recurrent actor-critic trained with Phasic Policy Gradient, plus the
minimal reverse-mode gradient engine the two fixed architectures need."""

from .autodiff import Tensor
from .checkpoint import (
    checkpoint_path,
    load_checkpoint,
    resume_train,
    save_checkpoint,
)
from .nets import LOG_STD_MAX, LOG_STD_MIN, Adam, LSTM, PolicyNet, ValueNet, orthogonal
from .ppg import (
    CompactEpisode,
    EpisodeLog,
    Hyperparams,
    TrainResult,
    Trajectory,
    build_nets,
    collect_episode,
    gae,
    kl_diag_gaussians,
    logp_squashed_np,
    logp_squashed_tape,
    normalize_advantages,
    ppg_aux_phase,
    ppo_policy_update,
    sample_action,
    train,
    value_update,
    windows_from_actions,
)

__all__ = [
    "Tensor", "Adam", "LSTM", "PolicyNet", "ValueNet", "orthogonal",
    "LOG_STD_MIN", "LOG_STD_MAX",
    "Hyperparams", "Trajectory", "CompactEpisode", "EpisodeLog",
    "TrainResult", "build_nets", "collect_episode", "gae",
    "kl_diag_gaussians", "logp_squashed_np", "logp_squashed_tape",
    "normalize_advantages", "ppo_policy_update", "value_update",
    "ppg_aux_phase", "sample_action", "train", "windows_from_actions",
    "checkpoint_path", "save_checkpoint", "load_checkpoint", "resume_train",
]
