"""Fixed-step closed-loop simulation of the robot+motor plant.

Scheduling follows a two-rate architecture: the whole-body controller runs
every ``dt_outer`` seconds, the motor-torque inner loop every ``dt_inner``
seconds and the plant is integrated with RK4 at ``dt_physics``; every
command is held constant until the next tick of the loop that produces it.

The plant is integrated in raw root-twist coordinates by compiled kernels
(the ODE is the same as in centroidal coordinates, only the velocity
parametrization differs); states handed to controllers and logs are always
converted back to centroidal coordinates.

Velocity measurements are corrupted by a first-order low-pass filter
followed by additive Gaussian noise.  Noise is drawn from numpy's Philox
counter-based generator seeded with ``NoiseModel.seed`` so that streams are
reproducible and identical across controllers for the same seed.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels as K
from .control_fixed import JointGains, JointReference, baseline_fixed_control, ef_fixed_control
from .control_floating import (ControllerState, MomentumGains, MomentumReference,
                               baseline_momentum_controller, ef_momentum_controller,
                               momentum_integral_update)
from .dynamics import (RobotState, compiled, compute_dynamics, contact_anchors,
                       contact_constraint_residual, contact_pose_error,
                       forward_dynamics_constrained, pinv, raw_vector,
                       state_from_raw)
from .friction import condition_number, friction_quantities
from .inner_loop import (InnerLoopState, baseline_motor_torque, ef_motor_torque, joint_torque,
                         measure_u)
from .model import FIXTURES, RobotModel, load_fixture, load_model
from .qp import QPInfeasibleError, friction_cone_constraints

WATCHDOG_NU = 1e3


class ConfigError(ValueError):
    pass


class ModelNotFoundError(ConfigError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, t: float, reason: str):
        super().__init__(f"simulation diverged at t = {t:.6g} s: {reason}")
        self.t = t


class ScenarioInfeasibleError(QPInfeasibleError):
    def __init__(self, t: float, exc: QPInfeasibleError):
        super().__init__(f"at t = {t:.6g} s: {exc}", exc.constraint, exc.violation)
        self.t = t


# ---------------------------------------------------------------------------
# measurement


@dataclass
class NoiseModel:
    sigma_v: float = 0.0
    tau_f: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_v < 0 or self.tau_f < 0:
            raise ConfigError("noise sigma_v and tau_f must be >= 0")

    @property
    def exact(self) -> bool:
        return self.sigma_v == 0 and self.tau_f == 0


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


class VelocitySensor:
    """Low-pass filter (discretized exactly for a held input) plus Gaussian
    noise, sampled every ``dt``.  The filter starts at the first sample."""

    def __init__(self, noise: NoiseModel, dt: float, rng: Optional[np.random.Generator] = None):
        self.noise = noise
        self.rng = make_rng(noise.seed) if rng is None else rng
        self.gain = 1.0 - math.exp(-dt / noise.tau_f) if noise.tau_f > 0 else 1.0
        self.filtered: Optional[np.ndarray] = None

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.filtered is None:
            self.filtered = v.copy()
        else:
            self.filtered = self.filtered + self.gain * (v - self.filtered)
        if self.noise.sigma_v > 0:
            return self.filtered + self.noise.sigma_v * self.rng.standard_normal(v.shape[0])
        return self.filtered.copy()


def measure(state: RobotState, noise: NoiseModel, rng: np.random.Generator,
            sensor: Optional[VelocitySensor] = None) -> RobotState:
    """Positions exact; joint and base velocities through the sensor model.
    Without a ``sensor`` only the Gaussian part applies (no filter memory)."""
    out = state.copy()
    v = np.concatenate([state.sdot, state.vB])
    if sensor is not None:
        v = sensor(v)
    elif noise.sigma_v > 0:
        v = v + noise.sigma_v * rng.standard_normal(v.shape[0])
    n = state.n
    out.sdot = v[:n]
    out.vB = v[n:]
    return out


# ---------------------------------------------------------------------------
# configuration


def _vec(value, n: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape == (1,):
        arr = np.full(n, arr[0])
    if arr.shape != (n,):
        raise ConfigError(f"{name} must be a scalar or a list of length {n}")
    return arr


_REF_UNITS = {"amplitude_deg": ("amplitude", math.pi / 180.0),
              "amplitude_cm": ("amplitude", 0.01)}


@dataclass
class ScenarioConfig:
    model: str
    controller: str = "ef"
    mode: str = "fixed_base"
    gains: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    dt_inner: float = 1e-3
    dt_outer: float = 1e-2
    dt_physics: float = 1e-4
    duration: float = 10.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    anti_windup: dict = field(default_factory=lambda: {"momentum": 50.0, "inner": 50.0})
    control_mode: str = "sampled"
    baumgarte_alpha: float = 10.0
    cone_safety: float = 0.05
    output: Optional[str] = None
    base_dir: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.noise, dict):
            self.noise = NoiseModel(**self.noise)
        self.reference = _convert_units(dict(self.reference))
        if self.controller not in ("baseline", "ef"):
            raise ConfigError(f"controller must be 'baseline' or 'ef', got {self.controller!r}")
        if self.mode not in ("fixed_base", "floating_base"):
            raise ConfigError(f"mode must be 'fixed_base' or 'floating_base', got {self.mode!r}")
        if self.control_mode not in ("sampled", "continuous"):
            raise ConfigError("control_mode must be 'sampled' or 'continuous'")
        if min(self.dt_physics, self.dt_inner, self.dt_outer) <= 0 or self.duration < 0:
            raise ConfigError("time steps must be positive and duration non-negative")
        if not self.dt_physics <= self.dt_inner <= self.dt_outer:
            raise ConfigError("need dt_physics <= dt_inner <= dt_outer")
        self.inner_steps = _ratio(self.dt_inner, self.dt_physics, "dt_inner / dt_physics")
        self.outer_steps = _ratio(self.dt_outer, self.dt_inner, "dt_outer / dt_inner")
        self.n_samples = _ratio(self.duration, self.dt_outer, "duration / dt_outer", allow_zero=True)
        if self.control_mode == "continuous" and (self.mode != "fixed_base" or not self.noise.exact):
            raise ConfigError("continuous control needs a fixed base and exact measurements")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "ScenarioConfig":
        doc = dict(doc)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "model" not in doc:
            raise ConfigError("config needs a 'model' entry")
        if base_dir is not None and doc.get("base_dir") is None:
            doc["base_dir"] = str(base_dir)
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["noise"] = asdict(self.noise)
        return out

    def with_(self, **changes) -> "ScenarioConfig":
        doc = self.to_dict()
        doc.update(changes)
        return ScenarioConfig(**doc)

    def resolve_model(self) -> RobotModel:
        path = Path(self.model)
        if not path.is_absolute() and self.base_dir is not None:
            candidate = Path(self.base_dir) / path
            if candidate.exists():
                path = candidate
        if path.exists():
            return load_model(path)
        if self.model in FIXTURES:
            return load_fixture(self.model)
        raise ModelNotFoundError(f"model not found: {self.model}")


def _convert_units(ref: dict) -> dict:
    for key, (target, factor) in _REF_UNITS.items():
        if key in ref:
            if target in ref:
                raise ConfigError(f"give either {key} or {target}, not both")
            val = ref.pop(key)
            ref[target] = [v * factor for v in val] if isinstance(val, list) else val * factor
    return ref


def _ratio(a: float, b: float, label: str, allow_zero: bool = False) -> int:
    r = a / b
    k = int(round(r))
    if abs(r - k) > 1e-9 * max(1.0, r) or (k == 0 and not allow_zero):
        raise ConfigError(f"{label} must be a positive integer, got {r:.12g}")
    return k


# ---------------------------------------------------------------------------
# gains


def tune_joint_gains(Ms_bar: np.ndarray, dt_outer: float, omega_n: float = 10.0, zeta: float = 1.0,
                     kappa: float = 0.5) -> JointGains:
    """Documented gain procedure shared by both controllers.

    Kp = omega_n^2 diag(Mbar_s); Kd = 2 zeta omega_n diag(Mbar_s), capped per
    joint at kappa * 2 Mbar_ii / dt_outer, the sampled-damping stability
    limit (a velocity feedback held for dt is unstable beyond Kd dt / M = 2).
    """
    m = np.diag(Ms_bar).copy()
    kp = omega_n ** 2 * m
    kd = np.minimum(2.0 * zeta * omega_n * m, kappa * 2.0 * m / dt_outer)
    return JointGains(np.diag(kp), np.diag(kd))


def _fixed_gains(cfg: ScenarioConfig, model: RobotModel, Ms_bar: np.ndarray):
    g = dict(cfg.gains)
    n = model.n
    if "kp" in g or "kd" in g:
        gains = JointGains(np.diag(_vec(g.get("kp", 0.0), n, "kp")), np.diag(_vec(g.get("kd", 0.0), n, "kd")))
    else:
        gains = tune_joint_gains(Ms_bar, cfg.dt_outer, g.get("omega_n", 10.0), g.get("zeta", 1.0),
                                 g.get("kappa", 0.5))
    KI = np.diag(_vec(g.get("ki_inner", 5.0), n, "ki_inner"))
    return gains, KI


def _momentum_gains(cfg: ScenarioConfig, model: RobotModel) -> MomentumGains:
    g = dict(cfg.gains)
    n = model.n
    kp = _vec(g.get("momentum_kp", [12.0, 12.0, 12.0, 6.0, 6.0, 6.0]), 6, "momentum_kp")
    ki = _vec(g.get("momentum_ki", [36.0, 36.0, 36.0, 9.0, 9.0, 9.0]), 6, "momentum_ki")
    joint = JointGains(np.diag(_vec(g.get("postural_kp", 25.0), n, "postural_kp")),
                       np.diag(_vec(g.get("postural_kd", 10.0), n, "postural_kd")))
    KI = np.diag(_vec(g.get("ki_inner", 5.0), n, "ki_inner"))
    return MomentumGains(np.diag(kp), np.diag(ki), KI, joint)


# ---------------------------------------------------------------------------
# references


class JointSinusoid:
    """s_d = s0 + A sin(2 pi f t) on the selected joints."""

    def __init__(self, spec: dict, s0: np.ndarray):
        n = s0.shape[0]
        amp = _vec(spec.get("amplitude", 0.0), n, "amplitude")
        joints = spec.get("joints")
        if joints is not None:
            mask = np.zeros(n, dtype=bool)
            mask[list(joints)] = True
            amp = np.where(mask, amp, 0.0)
        self.s0 = np.asarray(spec.get("offset", s0), dtype=float)
        self.amp = amp
        self.omega = 2.0 * math.pi * float(spec.get("frequency", 0.5))

    def __call__(self, t: float) -> JointReference:
        w = self.omega
        return JointReference(self.s0 + self.amp * math.sin(w * t), self.amp * w * math.cos(w * t),
                              -self.amp * w * w * math.sin(w * t))


class CoMReference:
    """CoM sinusoid c_d = c0 + A sin(2 pi f t) e and a kinematic reference
    robot that follows it with both feet fixed.

    The reference robot supplies the postural reference (s_d, sdot_d) and
    Jbar_G at the desired posture.  Its joint velocity is the minimum-norm
    solution of the contact constraint for the CoM velocity reference (with
    proportional drift correction) plus a null-space pull to the start
    posture; it is integrated with RK4 at the outer rate.
    """

    K_COM = 10.0
    K_FEET = 10.0
    K_POSTURE = 2.0

    def __init__(self, spec: dict, model: RobotModel, start: RobotState, anchors, dt: float):
        self.model = model
        self.anchors = anchors
        self.dt = dt
        axis = spec.get("axis", "y")
        if isinstance(axis, str):
            if axis not in ("x", "y", "z"):
                raise ConfigError(f"reference axis must be x, y, z or a 3-vector, got {axis!r}")
            axis = {"x": [1, 0, 0], "y": [0, 1, 0], "z": [0, 0, 1]}[axis]
        axis = np.asarray(axis, dtype=float)
        if axis.shape != (3,) or not np.linalg.norm(axis) > 0:
            raise ConfigError("reference axis must be a nonzero 3-vector")
        self.axis = axis / np.linalg.norm(axis)
        self.amp = float(spec.get("amplitude", 0.0))
        self.omega = 2.0 * math.pi * float(spec.get("frequency", 0.5))
        dq0 = compute_dynamics(model, _at_rest(start))
        self.c0 = dq0.com.copy()
        self.mass = dq0.mass
        self.s_home = start.s.copy()
        self.q = (start.base_pos.copy(), start.base_quat.copy(), start.s.copy())
        self.t = 0.0
        self.sdot_prev: Optional[np.ndarray] = None

    def com(self, t):
        w = self.omega
        return (self.c0 + self.amp * math.sin(w * t) * self.axis,
                self.amp * w * math.cos(w * t) * self.axis,
                -self.amp * w * w * math.sin(w * t) * self.axis)

    def momentum(self, t) -> MomentumReference:
        _, v, a = self.com(t)
        return MomentumReference(np.concatenate([self.mass * v, np.zeros(3)]),
                                 np.concatenate([self.mass * a, np.zeros(3)]))

    def _field(self, q, t):
        pb, quat, s = q
        st = RobotState(pb, quat / np.linalg.norm(quat), s, np.zeros(6), np.zeros_like(s))
        dq = compute_dynamics(self.model, st)
        c_d, v_d, _ = self.com(t)
        vB = np.concatenate([v_d + self.K_COM * (c_d - dq.com), np.zeros(3)])
        err = contact_pose_error(dq, self.anchors)
        Jsp = pinv(dq.Js)
        Ns = np.eye(dq.n) - Jsp @ dq.Js
        sdot = Jsp @ (-self.K_FEET * err - dq.Jb @ vB) - self.K_POSTURE * Ns @ (s - self.s_home)
        x = dq.extras["Pinv"] @ vB - dq.extras["AinvF"] @ sdot
        w = x[:3]
        dp = x[3:] + np.cross(w, pb)
        dquat = 0.5 * np.array([-w @ quat[1:], *(quat[0] * w + np.cross(w, quat[1:]))])
        return (dp, dquat, sdot), dq

    def initial_velocity(self):
        """(vB, sdot) of the reference robot at t = 0; consistent with the
        contacts, so the plant can start on the reference trajectory."""
        (_, _, sdot), dq = self._field(self.q, 0.0)
        _, v_d, _ = self.com(0.0)
        c_d = self.com(0.0)[0]
        return np.concatenate([v_d + self.K_COM * (c_d - dq.com), np.zeros(3)]), sdot

    def sample(self, t: float):
        """Return (JointReference, MomentumReference, Jbar_G at s_d) at the
        current reference state, then advance the reference robot to t + dt."""
        (_, _, sdot), dq = self._field(self.q, t)
        sddot = np.zeros_like(sdot) if self.sdot_prev is None else (sdot - self.sdot_prev) / self.dt
        self.sdot_prev = sdot
        jref = JointReference(self.q[2].copy(), sdot, sddot)
        out = (jref, self.momentum(t), dq.Jg)
        self._advance(t)
        return out

    def _advance(self, t):
        h = self.dt

        def add(q, k, a):
            return tuple(qi + a * ki for qi, ki in zip(q, k))

        k1, _ = self._field(self.q, t)
        k2, _ = self._field(add(self.q, k1, 0.5 * h), t + 0.5 * h)
        k3, _ = self._field(add(self.q, k2, 0.5 * h), t + 0.5 * h)
        k4, _ = self._field(add(self.q, k3, h), t + h)
        q = tuple(qi + h / 6.0 * (a + 2 * b + 2 * c + d)
                  for qi, a, b, c, d in zip(self.q, k1, k2, k3, k4))
        self.q = (q[0], q[1] / np.linalg.norm(q[1]), q[2])


def _at_rest(state: RobotState) -> RobotState:
    st = state.copy()
    st.vB[:] = 0.0
    st.sdot[:] = 0.0
    return st


# ---------------------------------------------------------------------------
# physics


def step_physics(model: RobotModel, state: RobotState, tau_m, dt: float, anchors=None,
                 alpha: float = 10.0, nsteps: int = 1) -> RobotState:
    """``nsteps`` RK4 steps of the constrained plant at constant motor torque."""
    y = _physics(model, raw_vector(model, state), np.asarray(tau_m, dtype=float), dt, nsteps,
                 anchors, alpha)
    return state_from_raw(model, y)


def _anchor_arrays(anchors):
    if not anchors:
        return np.zeros((0, 3, 3)), np.zeros((0, 3))
    return (np.array([a[0] for a in anchors], dtype=float),
            np.array([a[1] for a in anchors], dtype=float))


def _physics(model, y, tau_m, dt, nsteps, anchors, alpha):
    cm = compiled(model)
    n = model.n
    if model.floating_base:
        aR, ap = _anchor_arrays(anchors)
        if model.nc and anchors is None:
            dq = compute_dynamics(model, state_from_raw(model, y))
            aR, ap = _anchor_arrays(contact_anchors(dq))
        return K.floating_rk4(y, n, tau_m, dt, nsteps, aR, ap, float(alpha), *cm.floating_args())
    s, sd = K.fixed_rk4(np.eye(3), np.zeros(3), y[7:7 + n], y[13 + n:], tau_m, dt, nsteps,
                        *cm.plant_args())
    out = y.copy()
    out[7:7 + n] = s
    out[13 + n:] = sd
    return out


def _joint_accel(model, y, tau_m, anchors, alpha):
    cm = compiled(model)
    n = model.n
    if model.floating_base:
        aR, ap = _anchor_arrays(anchors)
        return K.floating_accel(y, n, tau_m, aR, ap, float(alpha), *cm.floating_args())[1][6:]
    return K._fixed_accel(np.eye(3), np.zeros(3), y[7:7 + n], y[13 + n:], tau_m, *cm.plant_args())


# ---------------------------------------------------------------------------
# run log


class RunLog:
    """Time series sampled at dt_outer; one row per sample."""

    def __init__(self, columns: list[str], rows=None, meta: Optional[dict] = None):
        self.columns = list(columns)
        self._index = {c: i for i, c in enumerate(self.columns)}
        data = np.asarray(rows if rows is not None and len(rows) else np.zeros((0, len(columns))),
                          dtype=float)
        self.data = data.reshape(-1, len(self.columns))
        self.meta = dict(meta or {})

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self._index[name]]

    def group(self, prefix: str) -> np.ndarray:
        """Columns ``prefix_0 .. prefix_k`` stacked as (rows, k+1)."""
        cols = [i for c, i in self._index.items()
                if c.startswith(prefix + "_") and c[len(prefix) + 1:].isdigit()]
        return self.data[:, cols]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join("%.17g" % v for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RunLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in r] for r in reader if r]
        return cls(header, rows)


def log_columns(model: RobotModel, controller: str, mode: str) -> list[str]:
    n = model.n
    cmd = "u" if controller == "ef" else "tau"
    cols = ["t"]
    for name in ("s", "s_d", "sdot", "sdot_meas", cmd, "tau_m"):
        cols += [f"{name}_{i}" for i in range(n)]
    if mode == "floating_base":
        cols += [f"f_{i}" for i in range(6 * model.nc)]
        for name in ("H", "H_d", "I_H"):
            cols += [f"{name}_{i}" for i in range(6)]
        cols += ["com_x", "com_y", "com_z", "com_d_x", "com_d_y", "com_d_z"]
        cols += ["err_s", "err_com", "err_H_lin", "constraint_residual", "contact_drift",
                 "cone_margin"]
    else:
        cols += ["err_s"]
    cols += ["cond_Ms", "cond_Ms_bar"]
    return cols


# ---------------------------------------------------------------------------
# scenario driver


def _start_state(model: RobotModel, cfg: ScenarioConfig) -> RobotState:
    st = RobotState.home(model)
    off = cfg.reference.get("initial_offset")
    if off is not None:
        st.s = st.s + _vec(off, model.n, "initial_offset")
    return st


def run_scenario(config: ScenarioConfig, model: Optional[RobotModel] = None) -> RunLog:
    model = config.resolve_model() if model is None else model
    if config.mode == "floating_base" and not model.floating_base:
        raise ConfigError("floating_base mode needs a floating-base model")
    if config.mode == "fixed_base" and model.floating_base:
        raise ConfigError("fixed_base mode needs a fixed-base model")
    if config.mode == "floating_base" and model.nc == 0:
        raise ConfigError("floating_base mode needs contacts")
    if config.control_mode == "continuous":
        return _run_fixed_continuous(config, model)
    return _run_sampled(config, model)


def _run_fixed_continuous(cfg: ScenarioConfig, model: RobotModel) -> RunLog:
    cm = compiled(model)
    state = _start_state(model, cfg)
    dq0 = compute_dynamics(model, state)
    gains, _ = _fixed_gains(cfg, model, dq0.Ms_bar)
    ref = JointSinusoid(cfg.reference, RobotState.home(model).s)
    cols = log_columns(model, cfg.controller, cfg.mode)
    rows = []
    steps = cfg.outer_steps * cfg.inner_steps
    s, sd = state.s.copy(), state.sdot.copy()
    for k in range(cfg.n_samples):
        t = k * cfg.dt_outer
        st = RobotState.home(model, s)
        st.sdot = sd.copy()
        dq = compute_dynamics(model, st)
        fq = friction_quantities(model, dq.Ms, sd)
        r = ref(t)
        if cfg.controller == "ef":
            cmd = ef_fixed_control(dq, fq, r, st, gains)
            tau_m = model.actuation.gamma.T @ cmd
        else:
            cmd = baseline_fixed_control(dq, r, st, gains)
            tau_m = model.actuation.gamma.T @ (cmd + fq.Kf_bar @ sd)
        rows.append(np.concatenate([[t], s, r.s_d, sd, sd, cmd, tau_m,
                                    [np.linalg.norm(s - r.s_d), condition_number(dq.Ms),
                                     condition_number(dq.Ms_bar)]]))
        s, sd = K.fixed_closed_loop_rk4(s, sd, t, cfg.dt_physics, steps, cfg.controller == "ef",
                                        gains.Kp_s, gains.Kd_s, ref.s0, ref.amp, ref.omega,
                                        *cm.plant_args())
        _watchdog(t + cfg.dt_outer, sd)
    return RunLog(cols, rows, meta={"model": model.name, "controller": cfg.controller})


def _watchdog(t: float, nu: np.ndarray):
    if not np.all(np.isfinite(nu)):
        raise DivergenceError(t, "non-finite state")
    norm = float(np.linalg.norm(nu))
    if norm > WATCHDOG_NU:
        raise DivergenceError(t, f"|nu| = {norm:.4g} exceeds {WATCHDOG_NU:g}")


def _run_sampled(cfg: ScenarioConfig, model: RobotModel) -> RunLog:
    n = model.n
    floating = cfg.mode == "floating_base"
    gi = np.linalg.inv(model.actuation.gamma)
    alpha = cfg.baumgarte_alpha
    state = _start_state(model, cfg)
    dq = compute_dynamics(model, state)
    anchors = contact_anchors(dq) if floating else None
    y = raw_vector(model, state)

    if floating:
        mgains = _momentum_gains(cfg, model)
        KI = mgains.KI_inner
        ref = CoMReference(cfg.reference, model, state, anchors, cfg.dt_outer)
        if cfg.reference.get("start_on_reference", True):
            state.vB, state.sdot = ref.initial_velocity()
            y = raw_vector(model, state)
        cstate = ControllerState.zero(cfg.anti_windup.get("momentum"))
    else:
        gains, KI = _fixed_gains(cfg, model, dq.Ms_bar)
        ref = JointSinusoid(cfg.reference, RobotState.home(model).s)
    il = InnerLoopState.zero(n, cfg.anti_windup.get("inner"))
    sensor = VelocitySensor(cfg.noise, cfg.dt_inner)
    cols = log_columns(model, cfg.controller, cfg.mode)
    rows = []
    tau_m = np.zeros(n)

    for k in range(cfg.n_samples):
        t = k * cfg.dt_outer
        state = state_from_raw(model, y)
        meas = meas0 = measure(state, cfg.noise, sensor.rng, sensor)
        dq = compute_dynamics(model, state)
        dq_m = dq if cfg.noise.exact else compute_dynamics(model, meas)
        fq = friction_quantities(model, dq_m.Ms, meas.sdot)
        try:
            if floating:
                jref, mref, Jg_d = ref.sample(t)
                if cfg.controller == "ef":
                    out = ef_momentum_controller(dq_m, fq, mref, cstate, mgains, model.contacts, jref,
                                                 cone_shrink=cfg.cone_safety)
                else:
                    out = baseline_momentum_controller(dq_m, fq, mref, cstate, mgains, model.contacts,
                                                       jref, reflected=True, cone_shrink=cfg.cone_safety)
                cmd = out.command
                I_H = cstate.I_Htilde.copy()
                cstate = momentum_integral_update(cstate, dq_m, Jg_d, meas.sdot, jref.sdot_d, cfg.dt_outer)
            else:
                jref = ref(t)
                if cfg.controller == "ef":
                    cmd = ef_fixed_control(dq_m, fq, jref, meas, gains)
                else:
                    cmd = baseline_fixed_control(dq_m, jref, meas, gains)
        except QPInfeasibleError as exc:
            raise ScenarioInfeasibleError(t, exc) from None

        for j in range(cfg.outer_steps):
            if j > 0:
                meas_s = state_from_raw(model, y) if floating else _fixed_state(model, y)
                meas = measure(meas_s, cfg.noise, sensor.rng, sensor)
            if cfg.controller == "ef":
                u_meas = measure_u(model, tau_m)
                tau_m, il = ef_motor_torque(model, cmd, u_meas, il, KI, cfg.dt_inner)
            else:
                thd_true = gi @ y[13 + n:]
                sdd = _joint_accel(model, y, tau_m, anchors, alpha)
                tau_meas = joint_torque(model, tau_m, thd_true, gi @ sdd)
                tau_m, il = baseline_motor_torque(model, cmd, tau_meas, gi @ meas.sdot, il, KI,
                                                  cfg.dt_inner)
            if j == 0:
                info = (mref, I_H, ref.com(t)[0], anchors) if floating else None
                rows.append(_log_row(model, cfg, t, state, meas0, dq, jref, cmd, tau_m, info))
            y = _physics(model, y, tau_m, cfg.dt_physics, cfg.inner_steps, anchors, alpha)
            _watchdog(t + (j + 1) * cfg.dt_inner, y[7 + n:])
    return RunLog(cols, rows, meta={"model": model.name, "controller": cfg.controller})


def _fixed_state(model, y):
    n = model.n
    st = RobotState.home(model, y[7:7 + n])
    st.sdot = y[13 + n:].copy()
    return st


def _log_row(model, cfg, t, state, meas, dq, jref, cmd, tau_m, floating_info):
    row = [t, *state.s, *jref.s_d, *state.sdot, *meas.sdot, *cmd, *tau_m]
    err_s = float(np.linalg.norm(state.s - jref.s_d))
    if floating_info is not None:
        mref, I_H, com_d, anchors = floating_info
        u = measure_u(model, tau_m)
        nud, f = forward_dynamics_constrained(model, state, u, dq=dq, anchors=anchors,
                                              alpha=cfg.baumgarte_alpha)
        res = float(np.abs(contact_constraint_residual(dq, nud)).max())
        A, b = friction_cone_constraints(list(model.contacts), dq.contact_R)
        margin = float(np.min(b - A @ f))
        pos = contact_pose_error(dq, anchors).reshape(-1, 6)[:, :3]
        row += [*f, *dq.H, *mref.H_d, *I_H, *dq.com, *com_d,
                err_s, float(np.linalg.norm(dq.com - com_d)),
                float(np.linalg.norm(dq.H[:3] - mref.H_d[:3])), res, float(np.abs(pos).max()), margin]
    else:
        row += [err_s]
    row += [condition_number(dq.Ms), condition_number(dq.Ms_bar)]
    return np.asarray(row, dtype=float)


# ---------------------------------------------------------------------------
# comparison and batches


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x)))) if len(x) else float("nan")


METRICS = ("err_s", "err_com", "err_H_lin")


def summarize(log: RunLog) -> dict:
    if len(log) == 0:
        raise ValueError("empty run log")
    out = {}
    for name in METRICS:
        if name in log.columns:
            out[f"rms_{name}"] = _rms(log[name])
            out[f"max_{name}"] = float(np.max(np.abs(log[name])))
    if "cone_margin" in log.columns:
        out["min_cone_margin"] = float(np.min(log["cone_margin"]))
        out["max_constraint_residual"] = float(np.max(log["constraint_residual"]))
        out["max_contact_drift"] = float(np.max(log["contact_drift"]))
    out["samples"] = len(log)
    out["duration"] = float(log["t"][-1]) if len(log) else 0.0
    return out


def compare_runs(log_a: RunLog, log_b: RunLog) -> dict:
    """RMS and max error norms of both runs and their ratios a / b."""
    if len(log_a) == 0 or len(log_b) == 0:
        raise ValueError("cannot compare empty run logs")
    if len(log_a) != len(log_b) or not np.array_equal(log_a["t"], log_b["t"]):
        raise ValueError("run logs are not on the same sampling grid")
    sa, sb = summarize(log_a), summarize(log_b)
    report = {"a": sa, "b": sb, "ratio": {}}
    for key, va in sa.items():
        if key.startswith(("rms_", "max_err")) and key in sb:
            vb = sb[key]
            report["ratio"][key] = 1.0 if va == vb else (va / vb if vb != 0 else float("inf"))
    return report


def _worker(cfg: ScenarioConfig) -> RunLog:
    return run_scenario(cfg)


def max_workers() -> int:
    env = os.environ.get("FRICTORQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FRICTORQ_THREADS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


def run_many(configs: list[ScenarioConfig], workers: Optional[int] = None) -> list[RunLog]:
    """Run independent scenarios concurrently; results keep the input order."""
    workers = min(max_workers() if workers is None else workers, len(configs))
    if workers <= 1:
        return [run_scenario(c) for c in configs]
    with concurrent.futures.ProcessPoolExecutor(workers) as pool:
        return list(pool.map(_worker, configs))
