"""Quadrotor rigid-body model: rotor wrench, 6-DOF derivatives, motor lag, RK4.

The body frame sits at the unloaded vehicle CoM, z up through the rotor
plane. Rotor speeds are normalized to [0, 1]; a rotor at full speed produces
``c_t`` newtons, so per-rotor thrust is capped at ``c_t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spatial import E3, cross3, quat_derivative, quat_normalize, quat_to_rot


class NonFinite(RuntimeError):
    """Integration produced NaN or Inf state components."""


MAX_STEP = 5e-3


@dataclass
class VehicleState:
    p: np.ndarray  # world position (m)
    v: np.ndarray  # world velocity (m/s)
    q: np.ndarray  # unit quaternion body->world
    omega: np.ndarray  # body angular rate (rad/s)

    def copy(self) -> "VehicleState":
        return VehicleState(self.p.copy(), self.v.copy(), self.q.copy(), self.omega.copy())

    @classmethod
    def at_rest(cls, p) -> "VehicleState":
        return cls(np.asarray(p, dtype=float).reshape(3).copy(), np.zeros(3),
                   np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))


@dataclass(frozen=True)
class RotorConfig:
    positions: np.ndarray  # (4,3) rotor centers in body frame (m)
    spin_dirs: np.ndarray  # (4,) +1 / -1
    c_t: float = 18.1712   # N at unit normalized speed (squared-speed thrust model)
    k_tau: float = 0.0136  # yaw drag torque per newton of thrust (m)
    k_m: float = 1.0       # motor steady-state gain
    tau_m: float = 0.02    # motor time constant (s)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(4, 3).copy()
        spins = np.asarray(self.spin_dirs, dtype=float).reshape(4).copy()
        if self.c_t <= 0.0 or self.tau_m <= 0.0:
            raise ValueError("c_t and tau_m must be positive")
        if not np.all(np.abs(spins) == 1.0):
            raise ValueError("spin_dirs must be +1 or -1")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "spin_dirs", spins)

    @property
    def max_thrust(self) -> float:
        """Per-rotor thrust at full normalized speed."""
        return self.c_t

    @classmethod
    def x_config(cls, arm_length: float = 0.12, rotor_height: float = 0.0,
                 **kwargs) -> "RotorConfig":
        """Standard X quad: rotors at +-45 deg, arm_length from center to rotor."""
        a = arm_length / math.sqrt(2.0)
        h = rotor_height
        positions = np.array([[a, a, h], [-a, a, h], [-a, -a, h], [a, -a, h]])
        spin_dirs = np.array([-1.0, 1.0, -1.0, 1.0])
        return cls(positions=positions, spin_dirs=spin_dirs, **kwargs)


@dataclass
class Environment:
    g: float = 9.81
    wind: list = field(default_factory=list)  # [(t_start, force_vec3 N)], piecewise constant
    accel_noise: float = 0.0  # sigma, m/s^2 per axis
    gyro_noise: float = 0.0   # sigma, rad/s per axis

    def __post_init__(self):
        if self.g <= 0.0:
            raise ValueError("g must be positive")
        self.wind = sorted(((float(t), np.asarray(f, dtype=float).reshape(3))
                            for t, f in self.wind), key=lambda x: x[0])

    def wind_at(self, t: float) -> np.ndarray:
        out = np.zeros(3)
        for t0, f in self.wind:
            if t >= t0:
                out = f
            else:
                break
        return out


def rotor_wrench(thrusts, cfg: RotorConfig, com) -> tuple[np.ndarray, np.ndarray]:
    """Total body-frame force and torque of the four rotors about ``com``.

    Each rotor pushes along body z; yaw drag is ``spin_dir * k_tau * T`` about z.
    """
    thrusts = np.asarray(thrusts, dtype=float).reshape(4)
    com = np.asarray(com, dtype=float).reshape(3)
    total = float(thrusts.sum())
    force = np.array([0.0, 0.0, total])
    arms = cfg.positions - com
    # (r x e3) = (r_y, -r_x, 0)
    tau_x = float(arms[:, 1] @ thrusts)
    tau_y = float(-arms[:, 0] @ thrusts)
    tau_z = float(cfg.k_tau * (cfg.spin_dirs @ thrusts))
    return force, np.array([tau_x, tau_y, tau_z])


def torque_matrix(cfg: RotorConfig, com) -> np.ndarray:
    """3x4 map from per-rotor thrusts to body torque about ``com``."""
    com = np.asarray(com, dtype=float).reshape(3)
    arms = cfg.positions - com
    m = np.empty((3, 4))
    m[0] = arms[:, 1]
    m[1] = -arms[:, 0]
    m[2] = cfg.k_tau * cfg.spin_dirs
    return m


def _deriv_raw(v, q, omega, force_b, torque_b, m_t, j_t, j_inv, g, f_ext_w):
    R = quat_to_rot(q)
    dv = -g * E3 + (R @ force_b) / m_t
    if f_ext_w is not None:
        dv = dv + f_ext_w / m_t
    gyro = torque_b - cross3(omega, j_t @ omega)
    domega = j_inv @ gyro if j_inv is not None else np.linalg.solve(j_t, gyro)
    dq = quat_derivative(q, omega)
    return v, dv, dq, domega


def derivatives(s: VehicleState, wrench, m_t: float, j_t: np.ndarray,
                g: float = 9.81, f_ext_w=None, j_inv: np.ndarray | None = None):
    """Time derivatives (dp, dv, dq, domega) of the rigid-body state.

    ``wrench`` is the body-frame (force, torque) pair about the current CoM;
    ``f_ext_w`` is an optional extra world-frame force (e.g. wind). A
    precomputed ``j_inv`` skips the per-call linear solve.
    """
    force_b, torque_b = wrench
    f_ext = None if f_ext_w is None else np.asarray(f_ext_w, dtype=float)
    return _deriv_raw(s.v, s.q, s.omega, np.asarray(force_b, dtype=float),
                      np.asarray(torque_b, dtype=float), m_t, j_t, j_inv, g,
                      f_ext)


def motor_lag_step(t_des, t_actual, cfg: RotorConfig, dt: float) -> np.ndarray:
    """Exact first-order response of rotor thrusts toward k_m * t_des over dt."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    t_des = np.asarray(t_des, dtype=float).reshape(4)
    t_actual = np.asarray(t_actual, dtype=float).reshape(4)
    target = cfg.k_m * t_des
    a = math.exp(-dt / cfg.tau_m)
    return target + (t_actual - target) * a


def step_rk4(s: VehicleState, force_b, torque_b, m_t: float, j_t: np.ndarray,
             dt: float, g: float = 9.81, f_ext_w=None) -> VehicleState:
    """Classical RK4 step holding the body wrench constant; renormalizes q.

    Raises NonFinite if any state component leaves the finite range.
    """
    if not 0.0 < dt <= MAX_STEP:
        raise ValueError(f"dt must be in (0, {MAX_STEP}] s")
    force = np.asarray(force_b, dtype=float)
    torque = np.asarray(torque_b, dtype=float)
    f_ext = None if f_ext_w is None else np.asarray(f_ext_w, dtype=float)
    j_inv = np.linalg.inv(j_t)

    def f(v, q, w):
        return _deriv_raw(v, q, w, force, torque, m_t, j_t, j_inv, g, f_ext)

    p0, v0, q0, w0 = s.p, s.v, s.q, s.omega
    k1 = f(v0, q0, w0)
    h = 0.5 * dt
    k2 = f(v0 + h * k1[1], q0 + h * k1[2], w0 + h * k1[3])
    k3 = f(v0 + h * k2[1], q0 + h * k2[2], w0 + h * k2[3])
    k4 = f(v0 + dt * k3[1], q0 + dt * k3[2], w0 + dt * k3[3])

    sixth = dt / 6.0
    p = p0 + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    v = v0 + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    q = q0 + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    w = w0 + sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])

    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))
            and np.all(np.isfinite(q)) and np.all(np.isfinite(w))):
        raise NonFinite("state diverged during integration")
    return VehicleState(p, v, quat_normalize(q), w)
