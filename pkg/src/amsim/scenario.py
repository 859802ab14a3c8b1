"""Multirate scenario engine: physics at the sim step, controller at 400 Hz,
observer and servos at 100 Hz, all driven from one seeded RNG so a run is
bit-reproducible."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import adaptation, delta, presense
from .adaptation import DobState, GraspDetector, TotalInertia
from .config import ScenarioConfig
from .controller import RateLoop, attitude_loop, iags_gain, mixer, position_loop
from .dynamics import (Environment, NonFinite, VehicleState, motor_lag_step,
                       rotor_wrench, step_rk4)
from .spatial import E3, InertialParams, QUAT_IDENTITY, quat_to_rot

COLUMNS = (
    ["t",
     "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz",
     "px_des", "py_des", "pz_des", "vx_des", "vy_des", "vz_des",
     "qw_des", "qx_des", "qy_des", "qz_des", "wx_des", "wy_des", "wz_des",
     "thrust_des", "taux_des", "tauy_des", "tauz_des",
     "rotor1", "rotor2", "rotor3", "rotor4",
     "theta1", "theta2", "theta3",
     "m_obj_hat", "m_t_hat", "ctx_hat", "cty_hat", "ctz_hat",
     "jtx_hat", "jty_hat", "jtz_hat", "kk_x", "kk_y", "kk_z",
     "m_t_true", "ctx_true", "cty_true", "ctz_true",
     "jtx_true", "jty_true", "jtz_true",
     "fext_x", "fext_y", "fext_z", "attached", "latched"]
)


class MismatchedRuns(ValueError):
    """Logs being compared were not produced from the same trajectory/seed."""


@dataclass
class RunLog:
    names: list
    data: np.ndarray
    events: dict = field(default_factory=dict)
    config: ScenarioConfig | None = None

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.names.index(name)]

    def columns(self, *names) -> np.ndarray:
        idx = [self.names.index(n) for n in names]
        return self.data[:, idx]

    def to_csv(self, path: str):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.names) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path: str) -> "RunLog":
        with open(path, "r", encoding="utf-8") as fh:
            names = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(names=names, data=data)


class Trajectory:
    """Timed waypoints joined by minimum-jerk segments; holds at the ends."""

    def __init__(self, waypoints):
        # rows: (t, pos3[, extra scalar])
        self.times = np.array([w[0] for w in waypoints])
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("waypoint times must be strictly increasing")
        self.points = np.array([np.asarray(w[1], dtype=float) for w in waypoints])
        self.extras = np.array([float(w[2]) if len(w) > 2 else 0.0 for w in waypoints])

    @staticmethod
    def _smooth(tau: float):
        s = tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)
        ds = 30.0 * tau ** 2 * (1.0 - 2.0 * tau + tau * tau)
        dds = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * tau * tau)
        return s, ds, dds

    def eval(self, t: float):
        """Returns (pos, vel, acc, extra) at time t."""
        if t <= self.times[0] or len(self.times) == 1:
            return self.points[0].copy(), np.zeros(3), np.zeros(3), float(self.extras[0])
        if t >= self.times[-1]:
            return self.points[-1].copy(), np.zeros(3), np.zeros(3), float(self.extras[-1])
        k = int(np.searchsorted(self.times, t, side="right") - 1)
        t0, t1 = self.times[k], self.times[k + 1]
        span = t1 - t0
        dp = self.points[k + 1] - self.points[k]
        s, ds, dds = self._smooth((t - t0) / span)
        pos = self.points[k] + s * dp
        vel = (ds / span) * dp
        acc = (dds / span ** 2) * dp
        extra = self.extras[k] + s * (self.extras[k + 1] - self.extras[k])
        return pos, vel, acc, extra


def _presense_object(cfg: ScenarioConfig, rng: np.random.Generator):
    """Synthesize a cloud of the true object shape, fit it, and apply the prior.

    Returns (mass_tilde, moi_tilde in arm-frame axes, grasp_offset).
    """
    obj = cfg.obj
    n = cfg.est.cloud_points
    if obj.shape == "cylinder":
        cloud = presense.sample_cylinder_cloud(obj.dims[0], obj.dims[2], n, rng)
    else:
        cloud = presense.sample_box_cloud(obj.dims, n, rng)
    box = presense.fit_obb(cloud)
    if obj.prior is not None:
        beta, alpha, rho = obj.prior
        prior = presense.ObjectPrior(label=obj.label or "inline", beta=beta,
                                     alpha=alpha, rho=rho)
    else:
        catalog = presense.load_catalog(cfg.est.catalog)
        prior = presense.prior_for(obj.label, catalog)
    est = presense.estimate_inertia(box, prior, pad_height=cfg.est.suction_pad)
    moi_world = box.rotation @ est.moi_tilde @ box.rotation.T
    return est.mass_tilde, moi_world, est.grasp_offset


def run_scenario(cfg: ScenarioConfig) -> RunLog:
    """Run one scenario to completion and return the full-rate log.

    Raises NonFinite (annotated with the simulation time) if the state
    diverges.
    """
    rng = np.random.default_rng(cfg.seed)
    dt = cfg.sim_dt
    n_steps = int(round(cfg.duration / dt))
    noise = rng.standard_normal((n_steps, 6))

    veh = cfg.vehicle
    rotor = veh.rotor
    geom = cfg.arm.geom
    g = cfg.g
    env = Environment(g=g, wind=cfg.wind, accel_noise=veh.accel_noise,
                      gyro_noise=veh.gyro_noise)
    am = InertialParams(veh.mass, veh.p_b, veh.j_a)
    j_a = veh.j_a

    every_ctrl = cfg.steps_per(cfg.control_hz)
    every_dob = cfg.steps_per(cfg.dob_hz)
    every_servo = cfg.steps_per(cfg.servo_hz)
    ctrl_dt = dt * every_ctrl
    dob_dt = dt * every_dob
    servo_dt = dt * every_servo

    traj = Trajectory(cfg.trajectory)
    arm_wps = cfg.arm.waypoints or [(0.0, cfg.arm.home)]
    arm_traj = Trajectory(arm_wps)

    mode = cfg.mode
    use_prior = mode in ("iags", "pre-only") and cfg.obj is not None
    use_dob = mode in ("iags", "dob-only") and cfg.obj is not None

    m_tilde = j_tilde = offset_est = None
    if use_prior:
        m_tilde, j_tilde, offset_est = _presense_object(cfg, rng)
    elif use_dob:
        # no vision prior: point-mass payload assumed right below the pad
        j_tilde = np.eye(3) * 1e-8
        offset_est = np.array([0.0, 0.0, -cfg.est.suction_pad])

    obj = cfg.obj
    offset_true = None
    if obj is not None:
        offset_true = np.array([0.0, 0.0, -(0.5 * obj.dims[2] + cfg.est.suction_pad)])

    joints = delta.JointState(delta.inverse_kin(geom, cfg.arm.home), np.zeros(3))
    p0, v0, _, _ = traj.eval(0.0)
    state = VehicleState.at_rest(p0)
    thr = np.full(4, am.mass * g / 4.0)  # hover trim
    t_cmd = thr.copy()

    rate_ctl = RateLoop(cfg.gains)
    detector = GraspDetector(cfg.est.grasp_threshold, cfg.est.grasp_persistence)
    dob = DobState()
    det_filt = None
    det_alpha = adaptation.lowpass_alpha(cfg.est.force_lpf_hz, dob_dt)

    truth = TotalInertia(am.mass, am.com.copy(), am.inertia_about_com.copy())
    est_tot = TotalInertia(am.mass, am.com.copy(), am.inertia_about_com.copy())
    attached = False
    latched = False
    kk = np.ones(3)
    thrust_des = am.mass * g
    tau_des = np.zeros(3)
    q_des = QUAT_IDENTITY.copy()
    w_des = np.zeros(3)
    p_des, v_des = p0.copy(), v0.copy()
    f_res_filt = np.zeros(3)

    events = {"attach_time": None, "latch_time": None, "control_ticks": 0,
              "dob_ticks": 0, "servo_ticks": 0, "freefall_ticks": 0,
              "infeasible_ticks": 0, "m_tilde": m_tilde}

    rows = np.empty((n_steps, len(COLUMNS)))

    def refresh_truth():
        nonlocal truth
        if attached:
            tot = adaptation.update_total(am.mass, am.inertia_about_com, am.com,
                                          obj.true_mass, obj.true_inertia,
                                          offset_true, joints.theta, geom)
            truth = tot

    try:
        for k in range(n_steps):
            t = k * dt

            if obj is not None and not attached and t >= obj.grasp_time - 1e-12:
                attached = True
                events["attach_time"] = t
                refresh_truth()

            wind = env.wind_at(t)
            R = quat_to_rot(state.q)
            thrust_vec_b = np.array([0.0, 0.0, float(thr.sum())])
            acc_true = -g * E3 + (R @ thrust_vec_b) / truth.m_t_hat + wind / truth.m_t_hat
            acc_meas = acc_true + env.accel_noise * noise[k, 0:3]
            w_meas = state.omega + env.gyro_noise * noise[k, 3:6]

            if k % every_dob == 0:
                events["dob_ticks"] += 1
                f_res = R @ thrust_vec_b - am.mass * acc_meas - am.mass * g * E3
                if det_filt is None:
                    det_filt = f_res
                else:
                    det_filt = det_filt + det_alpha * (f_res - det_filt)
                f_res_filt = det_filt
                detector, now_latched = adaptation.detect_grasp(
                    detector, float(det_filt[2]), dob_dt)
                if now_latched and not latched:
                    latched = True
                    events["latch_time"] = t
                    if use_dob:
                        dob = DobState(m_hat=(m_tilde if use_prior else 0.0))
                if latched and use_dob:
                    dob = adaptation.dob_step(dob, acc_meas, R, thrust_vec_b,
                                              am.mass, cfg.est.dob_c, dob_dt,
                                              g=g, force_lpf_hz=cfg.est.force_lpf_hz)

            if k % every_servo == 0:
                events["servo_ticks"] += 1
                tgt_p, tgt_v, _, _ = arm_traj.eval(t)
                try:
                    _, thd_des = delta.joint_command(geom, tgt_p, tgt_v, joints,
                                                     cfg.arm.k_theta)
                except delta.KinematicsError:
                    thd_des = np.zeros(3)
                joints = delta.servo_step(geom, joints, thd_des, servo_dt,
                                          cfg.arm.rate_limit)
                if attached:
                    refresh_truth()

            if k % every_ctrl == 0:
                events["control_ticks"] += 1
                if latched and mode != "baseline" and obj is not None:
                    if use_dob and use_prior:
                        m_o = dob.m_hat
                        j_o = adaptation.rescale_moi(j_tilde, m_tilde, m_o)
                    elif use_prior:
                        m_o, j_o = m_tilde, j_tilde
                    else:
                        m_o, j_o = dob.m_hat, j_tilde
                    est_tot = adaptation.update_total(am.mass, am.inertia_about_com,
                                                      am.com, m_o, j_o, offset_est,
                                                      joints.theta, geom)
                    kk = np.diag(iags_gain(j_a, est_tot.j_t_hat)).copy()
                else:
                    est_tot = TotalInertia(am.mass, am.com.copy(),
                                           am.inertia_about_com.copy())
                    kk = np.ones(3)
                p_des, v_des, a_ff, yaw = traj.eval(t)
                thrust_des, q_des, freefall = position_loop(
                    p_des, v_des, state.p, state.v, state.q, est_tot.m_t_hat,
                    cfg.gains, a_ff=a_ff, yaw_des=yaw, g=g)
                if freefall:
                    events["freefall_ticks"] += 1
                w_des = attitude_loop(q_des, state.q, cfg.gains.k_att)
                tau_des = rate_ctl.step(w_des, w_meas, kk, ctrl_dt)
                t_cmd, infeasible = mixer(thrust_des, tau_des, rotor,
                                          com=est_tot.c_t - veh.p_b)
                if infeasible:
                    events["infeasible_ticks"] += 1

            row = rows[k]
            row[0] = t
            row[1:4] = state.p
            row[4:7] = state.v
            row[7:11] = state.q
            row[11:14] = state.omega
            row[14:17] = p_des
            row[17:20] = v_des
            row[20:24] = q_des
            row[24:27] = w_des
            row[27] = thrust_des
            row[28:31] = tau_des
            row[31:35] = thr
            row[35:38] = joints.theta
            row[38] = dob.m_hat if (latched and use_dob) else (
                m_tilde if (latched and use_prior) else 0.0)
            row[39] = est_tot.m_t_hat
            row[40:43] = est_tot.c_t
            row[43:46] = np.diag(est_tot.j_t_hat)
            row[46:49] = kk
            row[49] = truth.m_t_hat
            row[50:53] = truth.c_t
            row[53:56] = np.diag(truth.j_t_hat)
            row[56:59] = f_res_filt
            row[59] = 1.0 if attached else 0.0
            row[60] = 1.0 if latched else 0.0

            thr = motor_lag_step(t_cmd, thr, rotor, dt)
            com_true_b = truth.c_t - veh.p_b
            force_b, torque_b = rotor_wrench(thr, rotor, com_true_b)
            state = step_rk4(state, force_b, torque_b, truth.m_t_hat,
                             truth.j_t_hat, dt, g=g, f_ext_w=wind)
    except NonFinite as exc:
        raise NonFinite(f"{exc} at t={k * dt:.4f} s") from exc

    return RunLog(names=list(COLUMNS), data=rows, events=events, config=cfg)
