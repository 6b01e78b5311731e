"""Quasi-steady hydrodynamic load surrogate for a pitching foil in uniform flow.

The model stack, per 80 Hz kinematic sample:

    u_rel  = u_inf - u_w                          (wake-reduced inflow)
    q      = 1/2 rho u_rel^2
    a_eff  = theta - atan(quarter_arm * omega / u_rel)
    att    = 1 + (a_eff/alpha_stall)^4
    C_N    = cn_alpha sin(a_eff) cos(a_eff) / att
             + cn_sep sin(a_eff) |sin(a_eff)| (1 - 1/att)
    F_N    = q s c C_N
    F_S    = q s c suction_eff cn_alpha sin^2(a_eff)
             / [att (1 + (a_eff/suction_stall)^4)]
    thrust = -F_N sin(theta) + F_S cos(theta) - q s c cd0
    torque = -F_N moment_arm - c_am rho s c^4 alpha_dd
    du_w/dt = (kappa_w (te_arm |omega|)^2 / u_inf - u_w) / tau_w   (explicit Euler,
              clamped to [0, 0.9 u_inf])

C_N blends the attached (stall-attenuated) normal-force law into the
separated flat-plate law cn_sep sin|sin| as the effective angle crosses
stall; the blend weight (1 - 1/att) keeps the separated term O(alpha^6)
below stall, so small-angle loads are untouched while deep-stall beats pay
full separated-plate torque. F_S is the leading-edge suction component
(attenuated earlier than F_N), which is what lets a pure pitching foil
produce net thrust; cd0 is parasitic drag. Two noise families ride on top:
a per-beat gust multiplies u_inf by 1 + sigma_u * xi (cycle-to-cycle flow
variability, felt by the clean loads), and measured loads add Gaussian
sensor noise (sigma_t, sigma_m). Beats are half-cosine arcs between
trailing-edge extremes, so a sinusoidal gait is a chain of identical
alternating beats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

DT = 1.0 / 80.0

AMP_MIN = math.radians(7.0)
AMP_MAX = math.radians(20.0)

# Kinematic viscosity of the (cold) working water, m^2/s.
NU_WATER = 1.14e-6


class ConstraintViolation(ValueError):
    """An action or kinematic parameter left its admissible box."""


class DegenerateStart(ValueError):
    """A tail-beat cannot be planned from the centerline."""


class DegeneratePower(ValueError):
    """Expended power is not positive, so efficiency is undefined."""


@dataclass(frozen=True)
class FoilGeometry:
    chord: float = 0.2
    span: float = 0.2
    pivot_frac: float = 0.2

    @property
    def te_arm(self) -> float:
        return (1.0 - self.pivot_frac) * self.chord


@dataclass(frozen=True)
class FlowConditions:
    u_inf: float = 0.077
    rho: float = 1000.0

    def re_c(self, geom: FoilGeometry) -> float:
        return self.u_inf * geom.chord / NU_WATER

    def q_ref(self, geom: FoilGeometry) -> float:
        """Reference force 1/2 rho U^2 s c (0.118580 N at defaults)."""
        return 0.5 * self.rho * self.u_inf**2 * geom.span * geom.chord


@dataclass(frozen=True)
class SurrogateParams:
    cn_alpha: float = 2.0 * math.pi
    alpha_stall: float = math.radians(45.0)
    cn_sep: float = 2.5
    cd0: float = 0.045
    suction_eff: float = 0.26
    suction_stall: float = math.radians(58.0)
    quarter_arm: float = 0.55 * 0.2
    moment_arm: float = 0.55 * 0.2
    c_am: float = 0.05
    kappa_w: float = 0.05
    tau_w: float = 5.0 * 0.2 / 0.077
    sigma_t: float = 0.1 * 0.118580
    sigma_m: float = 0.1 * 0.118580 * 0.2
    sigma_u: float = 0.25
    dt: float = DT
    rectify_power: bool = False


@dataclass(frozen=True)
class KinematicSample:
    t: float
    theta: float
    omega: float
    alpha_dd: float


@dataclass(frozen=True)
class WakeState:
    u_w: float = 0.0


@dataclass(frozen=True)
class LoadSample:
    t: float
    thrust_clean: float
    torque_clean: float
    thrust_meas: float
    torque_meas: float


@dataclass(frozen=True)
class LedgerEntry:
    w_useful: float
    p_expended: float
    duration: float
    mean_thrust: float


@dataclass
class BeatPlan:
    """Struct-of-arrays kinematic trajectory for one tail-beat.

    Samples are uniformly spaced by dt; duration is the sampled duration
    n*dt (energy bookkeeping telescopes exactly with this convention).
    """

    t: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    alpha_dd: np.ndarray
    duration: float = field(init=False)

    def __post_init__(self) -> None:
        self.duration = len(self.t) * DT

    def __len__(self) -> int:
        return len(self.t)

    def sample(self, i: int) -> KinematicSample:
        return KinematicSample(
            float(self.t[i]), float(self.theta[i]),
            float(self.omega[i]), float(self.alpha_dd[i]),
        )

    def mirrored(self) -> "BeatPlan":
        return BeatPlan(self.t, -self.theta, -self.omega, -self.alpha_dd)


@dataclass
class LoadSeries:
    t: np.ndarray
    thrust_clean: np.ndarray
    torque_clean: np.ndarray
    thrust_meas: np.ndarray
    torque_meas: np.ndarray

    def sample(self, i: int) -> LoadSample:
        return LoadSample(
            float(self.t[i]), float(self.thrust_clean[i]),
            float(self.torque_clean[i]), float(self.thrust_meas[i]),
            float(self.torque_meas[i]),
        )


def plan_tailbeat(theta_start: float, amp: float, freq: float) -> BeatPlan:
    """Plan one half-cosine tail-beat from theta_start to the opposite extreme.

    theta(tau) = m + h cos(pi tau / D) over D = 1/(2 freq) with
    m = (theta_start - s*amp)/2, h = (theta_start + s*amp)/2, s = sign(theta_start),
    sampled at tau = i*dt for i in 0..round(D/dt)-1. Starts exactly at
    theta_start, ends (continuously) at -s*amp, crosses zero exactly once.
    """
    if theta_start == 0.0:
        raise DegenerateStart("tail-beat must start at a nonzero extreme")
    if not (AMP_MIN - 1e-12 <= amp <= AMP_MAX + 1e-12):
        raise ConstraintViolation(f"amplitude {math.degrees(amp):.3f} deg outside [7, 20]")
    if not (freq > 0.0 and math.isfinite(freq)):
        raise ConstraintViolation(f"frequency {freq} must be positive and finite")

    s = 1.0 if theta_start > 0 else -1.0
    duration = 1.0 / (2.0 * freq)
    m = (theta_start - s * amp) / 2.0
    h = (theta_start + s * amp) / 2.0
    n = int(round(duration / DT))
    if n < 1:
        raise ConstraintViolation(f"frequency {freq} Hz leaves no samples per beat")

    t = np.arange(n) * DT
    phase = np.pi * t / duration
    theta = m + h * np.cos(phase)
    omega = -h * (np.pi / duration) * np.sin(phase)
    alpha_dd = -h * (np.pi / duration) ** 2 * np.cos(phase)
    return BeatPlan(t, theta, omega, alpha_dd)


def strouhal(amp: float, freq: float, flow: FlowConditions, geom: FoilGeometry) -> float:
    """St = 2 A f / U with A the trailing-edge excursion te_arm*sin(amp)."""
    a_te = geom.te_arm * math.sin(amp)
    return 2.0 * a_te * freq / flow.u_inf


def _loads_arrays(
    theta: np.ndarray,
    omega: np.ndarray,
    alpha_dd: np.ndarray,
    u_w: np.ndarray,
    params: SurrogateParams,
    flow: FlowConditions,
    geom: FoilGeometry,
) -> tuple[np.ndarray, np.ndarray]:
    """Clean (thrust, torque) arrays for per-sample kinematics and wake deficit."""
    sc = geom.span * geom.chord
    u_rel = flow.u_inf - u_w
    q = 0.5 * flow.rho * u_rel * u_rel
    a_eff = theta - np.arctan(params.quarter_arm * omega / u_rel)
    att = 1.0 + (a_eff / params.alpha_stall) ** 4
    att_s = 1.0 + (a_eff / params.suction_stall) ** 4
    s_eff = np.sin(a_eff)
    # attached (attenuated) + separated flat-plate normal force; the
    # (1 - 1/att) blend keeps the separated term O(alpha^6) pre-stall
    cn = (params.cn_alpha * s_eff * np.cos(a_eff) / att
          + params.cn_sep * s_eff * np.abs(s_eff) * (1.0 - 1.0 / att))
    f_n = q * sc * cn
    f_s = q * sc * params.suction_eff * params.cn_alpha * s_eff ** 2 / (att * att_s)
    thrust = -f_n * np.sin(theta) + f_s * np.cos(theta) - q * sc * params.cd0
    torque = -f_n * params.moment_arm - params.c_am * flow.rho * sc * geom.chord**3 * alpha_dd
    return thrust, torque


def _wake_path(
    omega: np.ndarray,
    u_w0: float,
    params: SurrogateParams,
    flow: FlowConditions,
    geom: FoilGeometry,
) -> tuple[np.ndarray, float]:
    """Wake deficit at each sample (loads see the pre-update value) plus the exit value.

    One explicit Euler step per sample of du_w/dt = (target - u_w)/tau_w with
    target = kappa_w (te_arm |omega|)^2 / u_inf, clamped to [0, 0.9 u_inf].
    """
    target = params.kappa_w * (geom.te_arm * np.abs(omega)) ** 2 / flow.u_inf
    lo, hi = 0.0, 0.9 * flow.u_inf
    dt, tau = params.dt, params.tau_w
    out = np.empty(len(target))
    u = u_w0
    tgt = target.tolist()
    for i, g in enumerate(tgt):
        out[i] = u
        u = u + dt * (g - u) / tau
        if u < lo:
            u = lo
        elif u > hi:
            u = hi
    return out, u


def step_loads(
    kin: KinematicSample,
    wake: WakeState,
    params: SurrogateParams,
    flow: FlowConditions,
    geom: FoilGeometry,
    rng: np.random.Generator | None = None,
) -> tuple[LoadSample, WakeState]:
    """Loads for one kinematic sample (current wake), then one wake Euler step."""
    vals = (kin.theta, kin.omega, kin.alpha_dd, wake.u_w)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"non-finite kinematic input {vals}")
    theta = np.array([kin.theta])
    omega = np.array([kin.omega])
    alpha_dd = np.array([kin.alpha_dd])
    u_w = np.array([wake.u_w])
    thrust, torque = _loads_arrays(theta, omega, alpha_dd, u_w, params, flow, geom)
    _, u_next = _wake_path(omega, wake.u_w, params, flow, geom)
    tc, mc = float(thrust[0]), float(torque[0])
    tm, mm = tc, mc
    if rng is not None and params.sigma_t > 0.0:
        tm = tc + params.sigma_t * rng.standard_normal()
    if rng is not None and params.sigma_m > 0.0:
        mm = mc + params.sigma_m * rng.standard_normal()
    return LoadSample(kin.t, tc, mc, tm, mm), WakeState(u_next)


def simulate_beat(
    plan: BeatPlan,
    wake: WakeState,
    params: SurrogateParams,
    flow: FlowConditions,
    geom: FoilGeometry,
    rng: np.random.Generator | None = None,
) -> tuple[LoadSeries, LedgerEntry, WakeState]:
    """Fold the load model over a planned beat.

    Noise draws (when rng is given and the sigma is > 0), in order: one
    standard-normal scalar for the beat gust, one standard-normal vector
    for thrust, then one for torque.

    The gust perturbs the oncoming flow for the whole beat (cycle-to-cycle
    variability of the channel), so it moves the clean loads themselves;
    sigma_t / sigma_m are sensor noise on top.  Work accounting stays
    against the nominal u_inf — a rig reports thrust times the channel
    set-speed, not the instantaneous inflow.
    """
    n = len(plan)
    flow_beat = flow
    if rng is not None and params.sigma_u > 0.0:
        gust = 1.0 + params.sigma_u * rng.standard_normal()
        flow_beat = replace(flow, u_inf=flow.u_inf * max(gust, 0.2))
    u_w, u_exit = _wake_path(plan.omega, wake.u_w, params, flow_beat, geom)
    thrust_c, torque_c = _loads_arrays(
        plan.theta, plan.omega, plan.alpha_dd, u_w, params, flow_beat, geom
    )
    if rng is not None and params.sigma_t > 0.0:
        thrust_m = thrust_c + params.sigma_t * rng.standard_normal(n)
    else:
        thrust_m = thrust_c.copy()
    if rng is not None and params.sigma_m > 0.0:
        torque_m = torque_c + params.sigma_m * rng.standard_normal(n)
    else:
        torque_m = torque_c.copy()

    mean_thrust = float(np.mean(thrust_m))
    w_useful = mean_thrust * flow.u_inf * plan.duration
    power_inc = torque_m * plan.omega
    if params.rectify_power:
        power_inc = np.maximum(power_inc, 0.0)
    p_expended = float(np.sum(power_inc) * params.dt)

    series = LoadSeries(plan.t, thrust_c, torque_c, thrust_m, torque_m)
    entry = LedgerEntry(w_useful, p_expended, plan.duration, mean_thrust)
    return series, entry, WakeState(u_exit)


def compute_ct(mean_thrust: float, flow: FlowConditions, geom: FoilGeometry) -> float:
    """Thrust coefficient C_T = T / (1/2 rho U^2 s c)."""
    return mean_thrust / flow.q_ref(geom)


def compute_eta(w: float, p: float) -> float:
    """Froude efficiency eta = W/P (may be negative when W < 0)."""
    if p <= 0.0:
        raise DegeneratePower(f"expended energy {p} J is not positive")
    return w / p
