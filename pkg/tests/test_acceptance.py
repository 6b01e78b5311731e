"""Acceptance gates: eight calibration and behavior criteria.

Each test prints one ``PASS criterion N`` / ``FAIL criterion N`` line (and
fails the run when the gate does not hold). Criterion 4 trains the full
nine-run suite and dominates the runtime; everything else finishes in a
few minutes total.
"""

import logging
import math
import time

import numpy as np
import pytest

from flapfoil import cli, harness
from flapfoil.agent.ppg import gae
from flapfoil.hydro import (
    FlowConditions,
    FoilGeometry,
    SurrogateParams,
    compute_ct,
    strouhal,
)
from flapfoil.mdp import ActionSpec, EpisodeConfig, FlapEnv, rollout_random
from flapfoil.reward import (
    kwindow_reward,
    long_term_efficiency,
    mismatch_analysis,
)

logging.disable(logging.WARNING)


def _gate(num, ok: bool, detail: str) -> None:
    verdict = "PASS" if ok else "FAIL"
    line = f"{verdict} criterion {num}: {detail}"
    print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------


def test_criterion_1_metric_units():
    flow, geom = FlowConditions(), FoilGeometry()
    compute_ct(0.118580, flow, geom)  # warm the code path
    t0 = time.perf_counter()
    ct = compute_ct(0.118580, flow, geom)
    dt = time.perf_counter() - t0
    _gate(1, abs(ct - 1.0) <= 1e-6 and dt < 1e-3,
          f"C_T(0.118580 N) = {ct:.9f}, {dt * 1e6:.0f} us")


def test_criterion_2_constraint_safety():
    rng = np.random.default_rng(np.random.SeedSequence([2, 2]))
    flow, geom = FlowConditions(), FoilGeometry()
    t0 = time.perf_counter()
    raw = rng.uniform(-1.0, 1.0, size=(100_000, 2))
    ok = 0
    for r in raw:
        act = ActionSpec.from_raw(r, flow, geom)
        st = strouhal(act.amp_rad, act.freq_hz, flow, geom)
        if (7.0 <= act.amp_deg <= 20.0
                and 0.2 - 1e-9 <= st <= 0.8 + 1e-9):
            ok += 1
    dt = time.perf_counter() - t0
    _gate(2, ok == len(raw) and dt < 10.0,
          f"{ok}/{len(raw)} beats inside the box, {dt:.1f} s")


def test_criterion_3_mismatch_ordering():
    t0 = time.perf_counter()
    cfg = EpisodeConfig(horizon_s=60.0, n_history=1, warmup_repeats=2,
                        k_window=1)
    k_list = (1, 8, 16)
    r2 = {k: [] for k in k_list}
    ordered = 0
    for ens in range(20):
        records = [
            rollout_random(cfg, [ens, harness.TAG_MISMATCH, ep], 60.0,
                           episode=ep)
            for ep in range(10)
        ]
        res = mismatch_analysis(records, k_list)
        for k in k_list:
            r2[k].append(res.r_squared[k])
        if res.r_squared[1] < res.r_squared[8] <= res.r_squared[16]:
            ordered += 1
    dt = time.perf_counter() - t0
    m1, m8, m16 = (float(np.mean(r2[k])) for k in k_list)
    clauses = [m1 + 0.05 <= m8, m8 <= m16 + 0.02, m16 >= m8 - 0.02,
               ordered >= 16, dt < 300.0]
    _gate(3, all(clauses),
          f"mean R2 k=1 {m1:.3f} k=8 {m8:.3f} k=16 {m16:.3f}, "
          f"ordering in {ordered}/20 ensembles, {dt:.0f} s")


def test_criterion_4_k_sweep_ordering():
    t0 = time.perf_counter()
    suite = harness.run_training_suite([1, 8, 16], n_seeds=3, episodes=300,
                                       master_seed=0)
    dt = time.perf_counter() - t0

    def final_eta(k):
        vals = []
        for rec in suite.records:
            if rec.config["k"] == k and not rec.failed:
                vals.extend(row.eta for row in rec.rows[-50:])
        return float(np.nanmean(vals))

    eta1, eta8, eta16 = final_eta(1), final_eta(8), final_eta(16)

    def pooled_iqr(k, sl, field):
        vals = [getattr(b, field)
                for rec in suite.records
                if rec.config["k"] == k and not rec.failed
                for row in rec.rows[sl]
                for b in row.rows]
        q1, q3 = np.percentile(vals, [25, 75])
        return q3 - q1

    amp_ratio = pooled_iqr(8, slice(-50, None), "amp_deg") \
        / pooled_iqr(8, slice(0, 50), "amp_deg")
    freq_ratio = pooled_iqr(8, slice(-50, None), "freq_hz") \
        / pooled_iqr(8, slice(0, 50), "freq_hz")

    final_sts = [
        float(np.median([b.st for b in rec.rows[-1].rows]))
        for rec in suite.records
        if rec.config["k"] == 8 and not rec.failed and rec.rows
    ]
    st_ok = all(0.3 <= st <= 0.6 for st in final_sts)

    clauses = [eta8 >= eta1, eta8 >= eta16,
               amp_ratio <= 0.5, freq_ratio <= 0.5,
               st_ok, dt <= 4 * 3600.0]
    _gate(4, all(clauses),
          f"final-50 eta k=1 {eta1:.4f} k=8 {eta8:.4f} k=16 {eta16:.4f}; "
          f"k=8 IQR ratio amp {amp_ratio:.2f} freq {freq_ratio:.2f}; "
          f"final St {['%.3f' % s for s in final_sts]}; {dt / 60:.0f} min")


def test_criterion_5_gradient_checks():
    import test_agent

    t0 = time.perf_counter()
    test_agent.test_gradcheck_value_loss()
    test_agent.test_gradcheck_policy_surrogate()
    test_agent.test_gradcheck_aux_joint_loss()
    dt = time.perf_counter() - t0
    _gate(5, dt < 60.0,
          f"policy/value/aux gradients match central differences "
          f"(h=1e-5, rel err < 1e-4), {dt:.1f} s")


def test_criterion_6_exact_identities():
    rng = np.random.default_rng(6)
    rewards = rng.normal(size=40)
    values = rng.normal(size=40)
    adv, _ = gae(rewards, values, gamma=0.97, lam=1.0)
    disc = 0.97 ** np.arange(41)
    mc = np.array([
        float(np.sum(rewards[t:] * disc[: 40 - t])) - values[t]
        for t in range(40)
    ])
    gae_err = float(np.max(np.abs(adv - mc)))

    cfg = EpisodeConfig(horizon_s=30.0, n_history=1, warmup_repeats=2,
                        k_window=1)
    ledger = rollout_random(cfg, [6, 1], 30.0).ledger
    t_len = len(ledger.w) - ledger.warmup_len
    kw_err = abs(kwindow_reward(ledger, t_len - 1, t_len)
                 - long_term_efficiency(ledger))

    seed = np.random.SeedSequence([6, harness.TAG_SWEEP, 0, 0, 0])
    ct, eta, _ = harness.sweep_point(12.0, 0.5, seed, 30.0)
    flow, geom = FlowConditions(), FoilGeometry()
    act = harness._point_action(12.0, 0.5, flow, geom)
    env = FlapEnv(EpisodeConfig(horizon_s=30.0, n_history=1,
                                warmup_repeats=2, initial_action=act,
                                k_window=1))
    env.reset(np.random.SeedSequence([6, harness.TAG_SWEEP, 0, 0, 0]))
    done = False
    while not done:
        _, _, done, _ = env.step(act.raw)
    sweep_err = abs(eta - long_term_efficiency(env.ledger()))

    _gate(6, gae_err <= 1e-12 and kw_err <= 1e-12 and sweep_err <= 1e-12,
          f"GAE(lambda=1) vs MC {gae_err:.2e}; kwindow(k=T) vs long-term "
          f"{kw_err:.2e}; sweep vs constant-action episode {sweep_err:.2e}")


def test_criterion_7_sweep_calibration():
    t0 = time.perf_counter()
    quiet = SurrogateParams(sigma_t=0.0, sigma_m=0.0, sigma_u=0.0)
    pts = harness.run_sinusoidal_sweep(repeats=1, duration_s=60.0,
                                       params=quiet)
    dt = time.perf_counter() - t0
    sts = sorted({p.st for p in pts})
    best = max((p for p in pts if not p.degenerate), key=lambda p: p.eta)
    interior = sts[0] < best.st < sts[-1] and 0.3 <= best.st <= 0.6
    peak_ok = 0.08 <= best.eta <= 0.25
    viol = [p for p in pts
            if not p.degenerate and p.c_t > 0 and not 0.0 < p.eta < 1.0]
    _gate(7, interior and peak_ok and not viol and dt < 300.0,
          f"argmax eta at amp {best.amp_deg:g} deg St {best.st:g} "
          f"(eta {best.eta:.4f}), {len(viol)} efficiency violations among "
          f"C_T>0 points, {dt:.0f} s")


def test_criterion_8_determinism(tmp_path):
    sweep_args = ["sweep", "--seed", "8", "--amps", "8,14",
                  "--st", "0.3,0.5", "--repeats", "2"]
    mm_args = ["mismatch", "--seed", "8", "--episodes", "4"]
    payload = {}
    for side in ("a", "b"):
        for name, args in (("sweep", sweep_args), ("mismatch", mm_args)):
            out = tmp_path / f"{name}_{side}"
            assert cli.main(args + ["--out", str(out)]) == 0
            payload[name, side] = (out / f"{name}.csv").read_bytes()
    sweep_same = payload["sweep", "a"] == payload["sweep", "b"]
    mm_same = payload["mismatch", "a"] == payload["mismatch", "b"]

    run_out = tmp_path / "train"
    rc = cli.main([
        "train", "--seed", "8", "--out", str(run_out),
        "--set", "reward.k=2", "--seeds", "1", "--episodes", "4",
        "--set", "agent.pi_hidden=8", "--set", "agent.pi_trunk=8",
        "--set", "agent.v_hidden=8", "--set", "agent.v_trunk=8",
        "--set", "agent.rollout_episodes=2",
        "--set", "agent.checkpoint_every=2",
    ])
    assert rc == 0
    replay_rc = cli.main(["replay", str(run_out / "runs" / "k02_s0"), "3"])

    _gate(8, sweep_same and mm_same and replay_rc == 0,
          f"sweep CSV identical: {sweep_same}; mismatch CSV identical: "
          f"{mm_same}; replay of logged episode 3 exit code {replay_rc}")
