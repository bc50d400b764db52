"""Ground-truth world: geometric robot specs over an out-tree, analytic
forward kinematics with exact time derivatives, inertial-sensor synthesis,
and joint trajectory generation.

Every joint is revolute.  The transform contributed by edge ``e`` at angle
``q`` is ``offset_e @ Rot(axis_e, q)``; a sensor's pose is the product of
the factors along its node's root path, times the mount pose in the link
frame.  Accelerometers report specific force ``R^T (b_dd - g)`` so a resting
sensor in an upright frame reads +|g| on z; gyros report roll-pitch-yaw
rates whose integrated rotation over one sample period matches the true
body angular velocity exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rigid_motion as rm
from .errors import SchemaError
from .topology import OutTree

AXIS_TOL = 1e-9

# Per-joint sinusoidal velocity parameters (amplitude, frequency, phase);
# rows cycle for robots with more joints than rows.
SINUSOID_TABLE = (
    (0.2, 0.10, 0.1),
    (0.2, 0.13, 0.2),
    (0.2, 0.15, 0.3),
    (0.2, 0.17, 0.4),
    (0.2, 0.19, 0.5),
    (0.2, 0.21, 0.6),
)


@dataclass(frozen=True)
class Joint:
    """Revolute joint: fixed offset from the parent frame, then rotation
    about a unit axis."""

    axis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > AXIS_TOL:
            raise ValueError("joint axis must be a unit vector")
        offset = np.asarray(self.offset, dtype=float)
        if offset.shape != (4, 4):
            raise ValueError("joint offset must be a 4x4 transform")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "offset", offset)


@dataclass(frozen=True)
class RobotSpec:
    """Geometric realization of a topology.

    ``joints`` is keyed by edge label, ``mounts`` maps each node to the
    sensor mount poses in its link frame.  The joint vector ordering used
    everywhere is ``joint_order`` (sorted edge labels).
    """

    topology: OutTree
    joints: dict[str, Joint]
    mounts: dict[str, tuple[np.ndarray, ...]]
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.8]))

    def __post_init__(self):
        if set(self.joints) != set(self.topology.edges):
            raise ValueError("joints must be keyed by exactly the topology's edges")
        for node in self.mounts:
            if node not in self.topology.parents:
                raise ValueError(f"mounts given for unknown node {node!r}")
        mounts = {
            node: tuple(np.asarray(m, dtype=float) for m in ms)
            for node, ms in self.mounts.items()
        }
        object.__setattr__(self, "mounts", mounts)
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))

    @property
    def joint_order(self) -> tuple[str, ...]:
        return self.topology.edges

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def sensor_ids(self) -> tuple[str, ...]:
        ids = []
        for node in self.topology.nodes:
            for k in range(len(self.mounts.get(node, ()))):
                ids.append(f"{node}:{k}")
        return tuple(ids)

    def sensor_link(self, sensor_id: str) -> str:
        return sensor_id.rsplit(":", 1)[0]

    def mount_of(self, sensor_id: str) -> np.ndarray:
        node, k = sensor_id.rsplit(":", 1)
        return self.mounts[node][int(k)]

    def joint_index(self, edge: str) -> int:
        return self.joint_order.index(edge)


@dataclass(frozen=True)
class TrajectorySample:
    """One timestamped proprioception + exteroception record.

    ``measurements`` maps sensor id to (alpha_b, beta_b): body-frame linear
    acceleration and roll-pitch-yaw rates.
    """

    t: float
    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray
    measurements: dict[str, tuple[np.ndarray, np.ndarray]]


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------


def _axis_rot_homogeneous(axis: np.ndarray, q: float) -> np.ndarray:
    t = np.eye(4)
    t[:3, :3] = rm.rodrigues(axis, q)
    return t


def _hat4(axis: np.ndarray) -> np.ndarray:
    h = np.zeros((4, 4))
    h[:3, :3] = rm.hat(axis)
    return h


def _factor_triple(joint: Joint, q, qd, qdd):
    """(M, dM/dt, d2M/dt2) for one joint factor offset @ Rot(axis, q(t))."""
    rot = _axis_rot_homogeneous(joint.axis, q)
    h = _hat4(joint.axis)
    m = joint.offset @ rot
    d_rot = rot @ h  # d/dq Rot(axis, q) = Rot @ hat(axis)
    md = joint.offset @ d_rot * qd
    mdd = joint.offset @ (d_rot @ h) * qd * qd + joint.offset @ d_rot * qdd
    return m, md, mdd


def _chain_triple(factors):
    """Fold (value, dot, ddot) factor triples with the product rule."""
    t, td, tdd = factors[0]
    for f, fd, fdd in factors[1:]:
        t, td, tdd = (
            t @ f,
            td @ f + t @ fd,
            tdd @ f + 2.0 * (td @ fd) + t @ fdd,
        )
    return t, td, tdd


def _check_theta(spec: RobotSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_joints,):
        raise ValueError(
            f"theta must have length {spec.n_joints}, got shape {theta.shape}"
        )
    return theta


def pose_with_time_derivatives(
    spec: RobotSpec, sensor_id: str, theta, theta_dot, theta_ddot
):
    """(T, dT/dt, d2T/dt2) of one sensor along the given joint state."""
    theta = _check_theta(spec, theta)
    theta_dot = _check_theta(spec, theta_dot)
    theta_ddot = _check_theta(spec, theta_ddot)
    node = spec.sensor_link(sensor_id)
    zero = np.zeros((4, 4))
    factors = []
    for edge in spec.topology.root_path_edges(node):
        k = spec.joint_index(edge)
        factors.append(
            _factor_triple(spec.joints[edge], theta[k], theta_dot[k], theta_ddot[k])
        )
    factors.append((spec.mount_of(sensor_id), zero, zero))
    return _chain_triple(factors)


def fk(spec: RobotSpec, theta) -> dict[str, np.ndarray]:
    """Pose of every sensor at configuration theta."""
    theta = _check_theta(spec, theta)
    node_pose: dict[str | None, np.ndarray] = {None: np.eye(4)}

    def pose_of(node):
        if node not in node_pose:
            parent, edge = spec.topology.parents[node]
            k = spec.joint_index(edge)
            joint = spec.joints[edge]
            node_pose[node] = (
                pose_of(parent) @ joint.offset @ _axis_rot_homogeneous(joint.axis, theta[k])
            )
        return node_pose[node]

    out = {}
    for sid in spec.sensor_ids:
        out[sid] = pose_of(spec.sensor_link(sid)) @ spec.mount_of(sid)
    return out


def analytic_jacobian(spec: RobotSpec, theta, sensor_id: str) -> np.ndarray:
    """12xN pose Jacobian: rows stack d(n_x)/dtheta, d(n_y)/dtheta,
    d(n_z)/dtheta, d(b)/dtheta.  Columns of joints off the sensor's root
    path are identically zero."""
    theta = _check_theta(spec, theta)
    node = spec.sensor_link(sensor_id)
    path = spec.topology.root_path_edges(node)
    factors = []
    for edge in path:
        k = spec.joint_index(edge)
        joint = spec.joints[edge]
        rot = _axis_rot_homogeneous(joint.axis, theta[k])
        factors.append((joint.offset @ rot, joint.offset @ rot @ _hat4(joint.axis)))
    mount = spec.mount_of(sensor_id)

    jac = np.zeros((12, spec.n_joints))
    for pos, edge in enumerate(path):
        k = spec.joint_index(edge)
        dt = np.eye(4)
        for q, (m, dm) in enumerate(factors):
            dt = dt @ (dm if q == pos else m)
        dt = dt @ mount
        # columns of R then translation: n_x, n_y, n_z, b
        jac[0:3, k] = dt[:3, 0]
        jac[3:6, k] = dt[:3, 1]
        jac[6:9, k] = dt[:3, 2]
        jac[9:12, k] = dt[:3, 3]
    return jac


# ---------------------------------------------------------------------------
# Measurement synthesis
# ---------------------------------------------------------------------------


def body_rates_to_rpy_rates(omega_b: np.ndarray, ts: float) -> np.ndarray:
    """Roll-pitch-yaw rates whose integrated rotation over ts seconds equals
    the rotation produced by the body rate omega_b over the same period."""
    r1 = rm.rodrigues(omega_b, ts)
    return rm.rpy_from_matrix(r1) / ts


def synthesize_imu(
    spec: RobotSpec, theta, theta_dot, theta_ddot, ts: float = 0.01
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-sensor (alpha_b, beta_b) at one joint state.

    alpha_b = R^T (b_dd - g); beta_b integrates to the exact body rotation
    over ``ts`` so the two rotation constructions agree on noiseless data.
    """
    out = {}
    for sid in spec.sensor_ids:
        t, td, tdd = pose_with_time_derivatives(
            spec, sid, theta, theta_dot, theta_ddot
        )
        r = t[:3, :3]
        b_dd = tdd[:3, 3]
        alpha = r.T @ (b_dd - spec.gravity)
        omega_b = rm.vee_antisym(r.T @ td[:3, :3])
        beta = body_rates_to_rpy_rates(omega_b, ts)
        out[sid] = (alpha, beta)
    return out


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


def _sinusoid_state(params, t):
    """theta, theta_dot, theta_ddot for qd_i(t) = A sin(2 pi k t + y),
    integrated analytically from theta(0) = 0."""
    theta, theta_dot, theta_ddot = [], [], []
    for a, k, y in params:
        w = 2.0 * np.pi * k
        theta.append((a / w) * (np.cos(y) - np.cos(w * t + y)))
        theta_dot.append(a * np.sin(w * t + y))
        theta_ddot.append(a * w * np.cos(w * t + y))
    return np.array(theta), np.array(theta_dot), np.array(theta_ddot)


def _smooth_random_params(n_joints: int, bandwidth: float, seed: int):
    rng = np.random.default_rng(seed)
    params = []
    for _ in range(n_joints):
        comps = []
        for _ in range(3):
            a = rng.uniform(-0.15, 0.15)
            f = rng.uniform(0.05, bandwidth)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            comps.append((a, f, phase))
        params.append(comps)
    return params


def _smooth_random_state(params, t):
    theta, theta_dot, theta_ddot = [], [], []
    for comps in params:
        q = qd = qdd = 0.0
        for a, f, phase in comps:
            w = 2.0 * np.pi * f
            qd += a * np.sin(w * t + phase)
            q += (a / w) * (np.cos(phase) - np.cos(w * t + phase))
            qdd += a * w * np.cos(w * t + phase)
        theta.append(q)
        theta_dot.append(qd)
        theta_ddot.append(qdd)
    return np.array(theta), np.array(theta_dot), np.array(theta_ddot)


def gen_trajectory(
    spec: RobotSpec,
    mode: str = "sinusoidal",
    duration: float = 60.0,
    rate: float = 100.0,
    seed: int = 0,
    bandwidth: float = 0.3,
    table=SINUSOID_TABLE,
) -> list[TrajectorySample]:
    """Sample a joint trajectory at ``rate`` Hz and synthesize noiseless
    measurements at each step."""
    if duration <= 0 or rate <= 0:
        raise ValueError("duration and rate must be positive")
    n = spec.n_joints
    ts = 1.0 / rate
    if mode == "sinusoidal":
        params = [table[i % len(table)] for i in range(n)]
        state = lambda t: _sinusoid_state(params, t)
    elif mode == "smooth_random":
        params = _smooth_random_params(n, bandwidth, seed)
        state = lambda t: _smooth_random_state(params, t)
    else:
        raise ValueError(f"unknown trajectory mode {mode!r}")

    samples = []
    for k in range(int(round(duration * rate)) + 1):
        t = k * ts
        theta, theta_dot, theta_ddot = state(t)
        meas = synthesize_imu(spec, theta, theta_dot, theta_ddot, ts)
        samples.append(TrajectorySample(t, theta, theta_dot, theta_ddot, meas))
    return samples


def add_noise(
    samples: list[TrajectorySample],
    sigma_alpha: float = 0.05,
    sigma_beta: float = 0.01,
    seed: int = 0,
) -> list[TrajectorySample]:
    """Add iid Gaussian noise to the measurements; deterministic per seed,
    identity when both sigmas are zero."""
    if sigma_alpha < 0 or sigma_beta < 0:
        raise ValueError("noise levels must be non-negative")
    rng = np.random.default_rng(seed)
    out = []
    for s in samples:
        meas = {}
        for sid in sorted(s.measurements):
            alpha, beta = s.measurements[sid]
            meas[sid] = (
                alpha + rng.normal(0.0, 1.0, 3) * sigma_alpha,
                beta + rng.normal(0.0, 1.0, 3) * sigma_beta,
            )
        out.append(TrajectorySample(s.t, s.theta, s.theta_dot, s.theta_ddot, meas))
    return out


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def robot_to_json_dict(spec: RobotSpec) -> dict:
    return {
        "topology": spec.topology.to_json_dict(),
        "joints": {
            e: {"axis": j.axis.tolist(), "offset": j.offset.tolist()}
            for e, j in sorted(spec.joints.items())
        },
        "mounts": {
            node: [m.tolist() for m in ms] for node, ms in sorted(spec.mounts.items())
        },
        "gravity": spec.gravity.tolist(),
    }


def robot_from_json_dict(doc: dict) -> RobotSpec:
    try:
        topology = OutTree.from_json_dict(doc["topology"])
        joints = {
            e: Joint(np.array(j["axis"]), np.array(j["offset"]))
            for e, j in doc["joints"].items()
        }
        mounts = {
            node: tuple(np.array(m) for m in ms)
            for node, ms in doc.get("mounts", {}).items()
        }
        gravity = np.array(doc.get("gravity", [0.0, 0.0, -9.8]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed robot document: {exc}") from exc
    return RobotSpec(topology, joints, mounts, gravity)


def save_robot(spec: RobotSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(robot_to_json_dict(spec), f, indent=1)


def load_robot(path) -> RobotSpec:
    with open(path) as f:
        return robot_from_json_dict(json.load(f))


def save_trajectory(samples: list[TrajectorySample], spec: RobotSpec, path) -> None:
    """JSONL: one metadata line, then one sample per line."""
    with open(path, "w") as f:
        meta = {
            "meta": {
                "joints": list(spec.joint_order),
                "sensors": list(spec.sensor_ids),
                "gravity": spec.gravity.tolist(),
            }
        }
        f.write(json.dumps(meta) + "\n")
        for s in samples:
            rec = {
                "t": s.t,
                "theta": s.theta.tolist(),
                "theta_dot": s.theta_dot.tolist(),
                "theta_ddot": s.theta_ddot.tolist(),
                "sensors": {
                    sid: {"alpha": a.tolist(), "beta": b.tolist()}
                    for sid, (a, b) in sorted(s.measurements.items())
                },
            }
            f.write(json.dumps(rec) + "\n")


def load_trajectory(path):
    """Returns (samples, meta dict)."""
    samples = []
    meta = None
    try:
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if "meta" in rec:
                    meta = rec["meta"]
                    continue
                meas = {
                    sid: (np.array(v["alpha"]), np.array(v["beta"]))
                    for sid, v in rec["sensors"].items()
                }
                samples.append(
                    TrajectorySample(
                        rec["t"],
                        np.array(rec["theta"]),
                        np.array(rec["theta_dot"]),
                        np.array(rec["theta_ddot"]),
                        meas,
                    )
                )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise SchemaError(f"malformed trajectory file {path}: {exc}") from exc
    if meta is None:
        raise SchemaError(f"trajectory file {path} missing metadata line")
    return samples, meta
