"""Gradient-engine, policy-distribution, update, and checkpoint tests.

The finite-difference checks here are the authoritative oracles for
every gradient path; they run on miniature widths (3/4) in double
precision with h = 1e-5 and demand < 1e-4 relative agreement.
"""

import math
import os

import numpy as np
import pytest

from flapfoil import agent as A
from flapfoil import mdp as M
from flapfoil.agent.autodiff import Tensor
from flapfoil.agent.ppg import _prepare_advantages

TINY = A.Hyperparams(pi_hidden=3, pi_trunk=4, v_hidden=4, v_trunk=4)


def fd_check(params, loss_np, analytic, h=1e-5, stride=2):
    """Worst relative error between analytic grads and central differences."""
    worst = 0.0
    for name, p in params.items():
        g = analytic.get(name)
        g = np.zeros_like(p.data) if g is None else g
        flat = p.data.reshape(-1)
        assert flat.base is not None or flat is p.data  # must be a view
        gflat = g.reshape(-1)
        for j in range(0, flat.size, stride):
            orig = flat[j]
            flat[j] = orig + h
            lp = loss_np()
            flat[j] = orig - h
            lm = loss_np()
            flat[j] = orig
            fd = (lp - lm) / (2 * h)
            worst = max(worst, abs(fd - gflat[j])
                        / max(abs(fd), abs(gflat[j]), 1e-8))
    return worst


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------


def test_zero_params_zero_mean():
    pol, _ = A.build_nets(TINY, seed=0)
    for p in pol.params.values():
        p.data = np.zeros_like(p.data)
    mean, _, aux = pol.forward_np(np.random.default_rng(0)
                                  .standard_normal((3, 5, 3)))
    assert np.all(mean == 0.0)
    assert np.all(aux == 0.0)


def test_forward_is_pure():
    pol, _ = A.build_nets(TINY, seed=1)
    x = np.random.default_rng(1).standard_normal((2, 6, 3))
    a = pol.forward_np(x)
    b = pol.forward_np(x)
    for p, q in zip(a, b):
        assert np.array_equal(p, q)


def test_forward_order_sensitivity():
    pol, _ = A.build_nets(TINY, seed=2)
    x = np.random.default_rng(2).standard_normal((1, 6, 3))
    mean_fwd, _, _ = pol.forward_np(x)
    mean_rev, _, _ = pol.forward_np(x[:, ::-1, :])
    assert not np.allclose(mean_fwd, mean_rev)


def test_tape_matches_plain_forward():
    pol, val = A.build_nets(TINY, seed=3)
    x = np.random.default_rng(3).standard_normal((4, 7, 3))
    mt, lt, at = pol.forward(x)
    mn, ln, an = pol.forward_np(x)
    assert np.array_equal(mt.data, mn)
    assert np.array_equal(lt.data, ln)
    assert np.array_equal(at.data, an)
    assert np.array_equal(val.forward(x).data, val.forward_np(x))


def test_log_std_clamp():
    pol, _ = A.build_nets(TINY, seed=4)
    x = np.zeros((1, 4, 3))
    pol.params["log_std"].data = np.array([5.0, -9.0])
    _, log_std, _ = pol.forward_np(x)
    assert log_std[0] == A.LOG_STD_MAX
    assert log_std[1] == A.LOG_STD_MIN


def test_orthogonal_init_shapes():
    rng = np.random.default_rng(5)
    tall = A.orthogonal(rng, (8, 3), gain=1.0)
    assert np.allclose(tall.T @ tall, np.eye(3), atol=1e-12)
    wide = A.orthogonal(rng, (3, 8), gain=2.0)
    assert np.allclose(wide @ wide.T, 4.0 * np.eye(3), atol=1e-12)


# ---------------------------------------------------------------------------
# squashed Gaussian
# ---------------------------------------------------------------------------


def test_sample_action_in_box():
    rng = np.random.default_rng(6)
    for _ in range(200):
        raw, logp, u = A.sample_action(
            rng.normal(size=2), rng.uniform(-2, 1, size=2), rng)
        assert np.all(np.abs(raw) < 1.0)
        assert math.isfinite(logp)
        assert np.allclose(raw, np.tanh(u))


def test_sample_action_floor_is_deterministic_limit():
    rng = np.random.default_rng(7)
    mean = np.array([0.4, -1.2])
    for _ in range(100):
        raw, _, _ = A.sample_action(mean, np.full(2, A.LOG_STD_MIN), rng)
        assert np.allclose(raw, np.tanh(mean), atol=0.05)


def test_density_integrates_to_one():
    # 1-D quadrature over the open interval (-1, 1)
    mean, log_std = np.array([0.3]), np.array([-0.3])
    a = np.linspace(-1 + 1e-9, 1 - 1e-9, 200001)
    u = np.arctanh(a)
    logp = A.logp_squashed_np(u[:, None], mean[None, :], log_std)
    integral = np.trapezoid(np.exp(logp), a)
    assert integral == pytest.approx(1.0, abs=1e-3)


def test_sample_distribution_symmetric():
    rng = np.random.default_rng(8)
    raws = np.array([A.sample_action(np.zeros(2), np.zeros(2), rng)[0]
                     for _ in range(10**5)])
    assert np.all(np.abs(raws.mean(axis=0)) < 0.01)


def test_logp_tape_matches_np():
    pol, _ = A.build_nets(TINY, seed=9)
    rng = np.random.default_rng(9)
    x = rng.standard_normal((6, 5, 3))
    u = rng.standard_normal((6, 2))
    mean_t, ls_t, _ = pol.forward(x)
    got = A.logp_squashed_tape(u, mean_t, ls_t)
    mean_n, ls_n, _ = pol.forward_np(x)
    want = A.logp_squashed_np(u, mean_n, ls_n)
    assert np.array_equal(got.data, want)


def test_kl_self_is_exactly_zero():
    pol, _ = A.build_nets(TINY, seed=10)
    x = np.random.default_rng(10).standard_normal((5, 4, 3))
    mean_n, ls_n, _ = pol.forward_np(x)
    mean_t, ls_t, _ = pol.forward(x)
    kl = A.kl_diag_gaussians(mean_n, ls_n, mean_t, ls_t)
    assert np.all(kl.data == 0.0)


# ---------------------------------------------------------------------------
# advantage estimation
# ---------------------------------------------------------------------------


def test_gae_lambda_one_is_monte_carlo():
    rng = np.random.default_rng(11)
    r = rng.normal(size=40)
    v = rng.normal(size=40)
    gamma = 0.999
    adv, ret = A.gae(r, v, gamma, 1.0)
    mc = np.array([sum(gamma ** i * r[t + i] for i in range(40 - t))
                   for t in range(40)])
    assert np.allclose(adv, mc - v, rtol=1e-12, atol=1e-12)
    assert np.allclose(ret, mc, rtol=1e-12, atol=1e-12)


def test_gae_lambda_zero_is_td_error():
    rng = np.random.default_rng(12)
    r = rng.normal(size=10)
    v = rng.normal(size=10)
    adv, _ = A.gae(r, v, 0.9, 0.0)
    v_next = np.append(v[1:], 0.0)
    assert np.allclose(adv, r + 0.9 * v_next - v, rtol=1e-12)


def test_gae_zeros():
    adv, ret = A.gae(np.zeros(5), np.zeros(5), 0.99, 0.95)
    assert np.all(adv == 0.0) and np.all(ret == 0.0)


def test_advantage_normalization_idempotent_under_shift():
    rng = np.random.default_rng(13)
    adv = rng.normal(size=100)
    a = A.normalize_advantages(adv)
    b = A.normalize_advantages(adv + 7.3)
    assert np.allclose(a, b, atol=1e-12)
    assert abs(a.mean()) < 1e-12


# ---------------------------------------------------------------------------
# gradient checks (finite-difference oracles)
# ---------------------------------------------------------------------------


def test_gradcheck_value_loss():
    pol, val = A.build_nets(TINY, seed=14)
    rng = np.random.default_rng(14)
    x = rng.standard_normal((5, 6, 3))
    targ = rng.standard_normal(5)
    out = val.forward(x)
    ((out - Tensor(targ[:, None])) ** 2).mean().backward()
    analytic = {k: p.grad for k, p in val.params.items()}

    def loss():
        return float(np.mean((val.forward_np(x)[:, 0] - targ) ** 2))

    assert fd_check(val.params, loss, analytic) < 1e-4


def test_gradcheck_policy_surrogate():
    pol, _ = A.build_nets(TINY, seed=15)
    rng = np.random.default_rng(15)
    x = rng.standard_normal((5, 6, 3))
    u = rng.standard_normal((5, 2))
    # Ratios pinned well clear of the clip kinks at 0.8 / 1.2 so central
    # differences stay on one smooth branch: exp(-offs) ~ [1.35, 1.05,
    # 1.0, 0.95, 0.74] covers clipped, interior, and tied samples.
    mean0, ls0, _ = pol.forward_np(x)
    offs = np.array([-0.3, -0.05, 0.0, 0.05, 0.3])
    logp_old = A.logp_squashed_np(u, mean0, ls0) + offs
    adv = rng.standard_normal(5)

    mean, ls, _ = pol.forward(x)
    logp = A.logp_squashed_tape(u, mean, ls)
    ratio = (logp - Tensor(logp_old)).exp()
    at = Tensor(adv)
    surr = (ratio * at).minimum(ratio.clip(0.8, 1.2) * at)
    (-surr.mean()).backward()
    analytic = {k: p.grad for k, p in pol.params.items()}

    def loss():
        m, ls_n, _ = pol.forward_np(x)
        lp = A.logp_squashed_np(u, m, ls_n)
        r = np.exp(lp - logp_old)
        s = np.minimum(r * adv, np.clip(r, 0.8, 1.2) * adv)
        return float(-s.mean())

    assert fd_check(pol.params, loss, analytic) < 1e-4


def test_gradcheck_aux_joint_loss():
    pol, _ = A.build_nets(TINY, seed=16)
    rng = np.random.default_rng(16)
    x = rng.standard_normal((5, 6, 3))
    mean_old, ls_old, _ = pol.forward_np(x)
    for p in pol.params.values():  # move off the KL optimum
        p.data = p.data + 0.01 * rng.standard_normal(p.data.shape)
    vtarg = rng.standard_normal(5)

    mean, ls, aux = pol.forward(x)
    mse = ((aux - Tensor(vtarg[:, None])) ** 2).mean()
    kl = A.kl_diag_gaussians(mean_old, ls_old, mean, ls).mean()
    (mse + 1.0 * kl).backward()
    analytic = {k: p.grad for k, p in pol.params.items()}

    def loss():
        m, ls_n, aux_n = pol.forward_np(x)
        mse_n = np.mean((aux_n[:, 0] - vtarg) ** 2)
        kl_n = (ls_n - ls_old
                + 0.5 * (np.exp(ls_old) / np.exp(ls_n)) ** 2
                + 0.5 * ((mean_old - m) / np.exp(ls_n)) ** 2
                - 0.5).sum(-1).mean()
        return float(mse_n + kl_n)

    assert fd_check(pol.params, loss, analytic) < 1e-4


# ---------------------------------------------------------------------------
# updates
# ---------------------------------------------------------------------------


def _toy_trajectories(pol, val, n_eps=3, t_len=6, seed=17):
    rng = np.random.default_rng(seed)
    trajs = []
    for _ in range(n_eps):
        x = rng.standard_normal((t_len, 5, 3))
        mean, ls, _ = pol.forward_np(x)
        u = mean + np.exp(ls) * rng.standard_normal((t_len, 2))
        logp = A.logp_squashed_np(u, mean, ls)
        trajs.append(A.Trajectory(
            windows=x, u=u, raw=np.tanh(u), logp=logp,
            rewards=rng.uniform(0, 0.2, t_len),
            values=val.forward_np(x)[:, 0], rows=[], eta=0.1))
    return trajs


def test_ppo_ratio_one_at_equal_params():
    pol, val = A.build_nets(TINY, seed=18)
    trajs = _toy_trajectories(pol, val)
    _prepare_advantages(trajs, TINY)
    tr = trajs[0]
    mean, ls, _ = pol.forward(tr.windows)
    logp = A.logp_squashed_tape(tr.u, mean, ls)
    ratio = np.exp(logp.data - tr.logp)
    assert np.all(np.abs(ratio - 1.0) < 1e-12)
    surr = np.minimum(ratio * tr.advantages,
                      np.clip(ratio, 0.8, 1.2) * tr.advantages)
    pooled = np.concatenate([t.advantages for t in trajs])
    assert abs(pooled.mean()) < 1e-12


def test_policy_update_lr_zero_is_noop():
    hyper = A.Hyperparams(**{**TINY.__dict__, "lr": 0.0})
    pol, val = A.build_nets(hyper, seed=19)
    before = {k: p.data.copy() for k, p in pol.params.items()}
    trajs = _toy_trajectories(pol, val)
    _prepare_advantages(trajs, hyper)
    opt = A.Adam(pol.params, hyper.lr)
    A.ppo_policy_update(trajs, pol, opt, hyper)
    for k, p in pol.params.items():
        assert np.array_equal(p.data, before[k])


def test_value_update_lr_zero_and_zero_loss():
    hyper = A.Hyperparams(**{**TINY.__dict__, "lr": 0.0})
    pol, val = A.build_nets(hyper, seed=20)
    trajs = _toy_trajectories(pol, val)
    _prepare_advantages(trajs, hyper)
    before = {k: p.data.copy() for k, p in val.params.items()}
    opt = A.Adam(val.params, 0.0)
    A.value_update(trajs, val, opt, hyper)
    for k, p in val.params.items():
        assert np.array_equal(p.data, before[k])
    # targets equal to predictions -> exactly zero loss
    tr = trajs[0]
    tr.returns = val.forward_np(tr.windows)[:, 0]
    out = val.forward(tr.windows)
    loss = ((out - Tensor(tr.returns[:, None])) ** 2).mean()
    assert loss.data == 0.0


def test_aux_phase_identity_when_no_epochs():
    hyper = A.Hyperparams(**{**TINY.__dict__, "aux_epochs": 0})
    pol, val = A.build_nets(hyper, seed=21)
    before = {k: p.data.copy() for k, p in pol.params.items()}
    replay = [A.CompactEpisode(u=np.random.default_rng(0)
                               .standard_normal((4, 2)),
                               vtarg=np.zeros(4))]
    A.ppg_aux_phase(replay, pol, val, A.Adam(pol.params, hyper.lr),
                    A.Adam(val.params, hyper.lr), hyper,
                    n_history=5, initial_raw=(0.0, 0.0), side0=1)
    for k, p in pol.params.items():
        assert np.array_equal(p.data, before[k])


def test_aux_phase_huge_clone_pins_policy():
    hyper = A.Hyperparams(**{**TINY.__dict__, "beta_clone": 1e6})
    pol, val = A.build_nets(hyper, seed=22)
    rng = np.random.default_rng(22)
    before = pol.params["head_mean.W"].data.copy()
    replay = [A.CompactEpisode(u=rng.standard_normal((6, 2)),
                               vtarg=rng.standard_normal(6))
              for _ in range(3)]
    for _ in range(2):
        A.ppg_aux_phase(replay, pol, val, A.Adam(pol.params, hyper.lr),
                        A.Adam(val.params, hyper.lr), hyper,
                        n_history=5, initial_raw=(0.0, 0.0), side0=1)
    drift = np.abs(pol.params["head_mean.W"].data - before).max()
    assert drift < 1e-3


def test_aux_phase_requires_replay():
    pol, val = A.build_nets(TINY, seed=23)
    with pytest.raises(ValueError):
        A.ppg_aux_phase([], pol, val, A.Adam(pol.params, 1e-4),
                        A.Adam(val.params, 1e-4), TINY,
                        n_history=5, initial_raw=(0.0, 0.0), side0=1)


# ---------------------------------------------------------------------------
# training loop integration
# ---------------------------------------------------------------------------


def test_windows_match_environment():
    cfg = M.EpisodeConfig.for_k(2)
    hyper = A.Hyperparams(pi_hidden=4, pi_trunk=4, v_hidden=4, v_trunk=4)
    pol, val = A.build_nets(hyper, seed=24)
    env = M.FlapEnv(cfg)
    traj = A.collect_episode(env, pol, val, env_seed=1, explore_seed=2)
    rebuilt = A.windows_from_actions(traj.raw, cfg.n_history,
                                     cfg.initial_action.raw, side0=1)
    assert np.array_equal(traj.windows, rebuilt)


def test_four_episode_determinism():
    cfg = M.EpisodeConfig.for_k(1)
    hyper = A.Hyperparams(pi_hidden=8, pi_trunk=8, v_hidden=8, v_trunk=8)
    a = A.train(lambda: M.FlapEnv(cfg), hyper, episodes=4, seed=77)
    b = A.train(lambda: M.FlapEnv(cfg), hyper, episodes=4, seed=77)
    for la, lb in zip(a.logs, b.logs):
        assert la.eta == lb.eta
        assert la.rows == lb.rows


def test_train_runs_updates_and_aux(tmp_path):
    cfg = M.EpisodeConfig.for_k(1)
    hyper = A.Hyperparams(pi_hidden=4, pi_trunk=4, v_hidden=4, v_trunk=4,
                          rollout_episodes=2, n_pi=2, aux_epochs=1,
                          checkpoint_every=4)
    res = A.train(lambda: M.FlapEnv(cfg), hyper, episodes=8, seed=5,
                  out_dir=tmp_path)
    assert len(res.logs) == 8
    assert [os.path.basename(c) for c in res.checkpoints] == \
        ["ep0000.npz", "ep0004.npz", "ep0008.npz"]


def test_checkpoint_round_trip_bit_identical(tmp_path):
    cfg = M.EpisodeConfig.for_k(1)
    hyper = A.Hyperparams(pi_hidden=4, pi_trunk=4, v_hidden=4, v_trunk=4,
                          rollout_episodes=2, checkpoint_every=2)
    res = A.train(lambda: M.FlapEnv(cfg), hyper, episodes=4, seed=6,
                  out_dir=tmp_path)
    state, meta = A.load_checkpoint(tmp_path / "checkpoints" / "ep0004.npz")
    assert meta["episodes_completed"] == 4
    x = np.random.default_rng(0).standard_normal((3, cfg.n_history, 3))
    for got, want in zip(state.policy.forward_np(x),
                         res.policy.forward_np(x)):
        assert np.array_equal(got, want)
    assert np.array_equal(state.value.forward_np(x),
                          res.value.forward_np(x))


def test_resume_reproduces_original_run(tmp_path):
    cfg = M.EpisodeConfig.for_k(1)
    hyper = A.Hyperparams(pi_hidden=4, pi_trunk=4, v_hidden=4, v_trunk=4,
                          rollout_episodes=2, checkpoint_every=3)
    res = A.train(lambda: M.FlapEnv(cfg), hyper, episodes=9, seed=8,
                  out_dir=tmp_path)
    logs2, state2 = A.resume_train(tmp_path / "checkpoints" / "ep0003.npz",
                                   lambda: M.FlapEnv(cfg), episodes=9)
    orig = res.logs[3:]
    assert len(logs2) == len(orig)
    for la, lb in zip(orig, logs2):
        assert la.eta == lb.eta
        assert la.rows == lb.rows
    for k in res.policy.params:
        assert np.array_equal(res.policy.params[k].data,
                              state2.policy.params[k].data)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        A.Hyperparams(gamma=1.0)
    with pytest.raises(ValueError):
        A.Hyperparams(lr=-1e-4)
