"""Per-sensor pose approximator and its training loss.

Each sensor owns one small network: three sigmoid hidden layers feeding a
3-unit linear translation head and a 3-unit linear rotation head whose
outputs are read as roll-pitch-yaw angles (periodic, so no range clamp is
needed; ``forward`` reports them wrapped into [0, 2pi)).  The rotation block
is assembled as Rz(yaw) @ Ry(pitch) @ Rx(roll), giving an orthonormal block
by construction.

Training minimizes, per sample,

    || alpha_b - R^T (b_dd - g) ||  -  tr(R1^T R2)

where b_dd is the translation head's second time-derivative, R1 integrates
the net's own body angular velocity over one sample period, and R2
integrates the measured roll-pitch-yaw rates over the same period.  First
and second time-derivatives are propagated in closed form through every
layer (value / first / second streams), and parameter gradients are the
exact adjoints of that propagation -- no autodiff framework, no full
Hessian tensor is ever materialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import rigid_motion as rm
from .errors import SchemaError, TrainingDivergedError

# smoothing for the norm term: keeps the gradient finite at a perfect fit
# while shifting the attainable minimum by only sqrt(eps) = 1e-12
_NORM_EPS = 1e-24

# below this integrated angle the closed-form rodrigues coefficients lose
# precision; switch to their series
_SERIES_SWITCH = 1e-4


@dataclass
class PoseNet:
    """Weights of one sensor's pose approximator."""

    hidden: list[tuple[np.ndarray, np.ndarray]]
    head_t: tuple[np.ndarray, np.ndarray]
    head_r: tuple[np.ndarray, np.ndarray]

    @property
    def n_joints(self) -> int:
        return self.hidden[0][0].shape[1]

    def copy(self) -> "PoseNet":
        return PoseNet(
            [(w.copy(), b.copy()) for w, b in self.hidden],
            (self.head_t[0].copy(), self.head_t[1].copy()),
            (self.head_r[0].copy(), self.head_r[1].copy()),
        )

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in self.hidden:
            out += [w, b]
        out += [self.head_t[0], self.head_t[1], self.head_r[0], self.head_r[1]]
        return out

    def to_json_dict(self) -> dict:
        """Layer shapes plus flat weight arrays."""

        def tensor(a: np.ndarray) -> dict:
            return {"shape": list(a.shape), "data": a.ravel().tolist()}

        return {
            "widths": [w.shape[0] for w, _ in self.hidden],
            "n_joints": self.n_joints,
            "hidden": [{"w": tensor(w), "b": tensor(b)} for w, b in self.hidden],
            "head_t": {"w": tensor(self.head_t[0]), "b": tensor(self.head_t[1])},
            "head_r": {"w": tensor(self.head_r[0]), "b": tensor(self.head_r[1])},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PoseNet":
        def tensor(rec: dict) -> np.ndarray:
            return np.array(rec["data"], dtype=float).reshape(rec["shape"])

        try:
            hidden = [
                (tensor(rec["w"]), tensor(rec["b"])) for rec in doc["hidden"]
            ]
            head_t = (tensor(doc["head_t"]["w"]), tensor(doc["head_t"]["b"]))
            head_r = (tensor(doc["head_r"]["w"]), tensor(doc["head_r"]["b"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed net document: {exc}") from exc
        return cls(hidden, head_t, head_r)


def save_net(net: PoseNet, path) -> None:
    with open(path, "w") as f:
        json.dump(net.to_json_dict(), f)


def load_net(path) -> PoseNet:
    with open(path) as f:
        return PoseNet.from_json_dict(json.load(f))


def init_pose_net(n_joints: int, widths=(64, 64, 64), seed: int = 0) -> PoseNet:
    """Uniform fan-balanced init, deterministic per seed."""
    rng = np.random.default_rng(seed)
    dims = [n_joints, *widths]
    hidden = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (d_in + d_out))
        hidden.append(
            (rng.uniform(-lim, lim, (d_out, d_in)), np.zeros(d_out))
        )
    lim = np.sqrt(6.0 / (dims[-1] + 3))
    head_t = (rng.uniform(-lim, lim, (3, dims[-1])), np.zeros(3))
    head_r = (rng.uniform(-lim, lim, (3, dims[-1])), np.zeros(3))
    return PoseNet(hidden, head_t, head_r)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 60
    batch_size: int = 128
    seed: int = 0
    ts: float = 0.01
    gravity: bool = True
    gravity_vector: tuple = (0.0, 0.0, -9.8)
    derivative_mode: str = "analytic"  # or "fd"
    fd_step: float = 1e-4
    momentum: float = 0.0
    optimizer: str = "sgd"  # "adam" available for badly conditioned losses

    def __post_init__(self):
        if self.ts <= 0:
            raise ValueError("ts must be positive")
        if self.derivative_mode == "fd" and self.fd_step <= 0:
            raise ValueError("fd step must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def _axis_rot_batch(axis: int, ang: np.ndarray):
    """(A, A', A'') for a single-axis rotation, batched over angles."""
    b = ang.shape[0]
    c, s = np.cos(ang), np.sin(ang)
    zero = np.zeros(b)
    one = np.ones(b)

    def m(rows):
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    if axis == 0:  # roll
        a0 = m([[one, zero, zero], [zero, c, -s], [zero, s, c]])
        a1 = m([[zero, zero, zero], [zero, -s, -c], [zero, c, -s]])
        a2 = m([[zero, zero, zero], [zero, -c, s], [zero, -s, -c]])
    elif axis == 1:  # pitch
        a0 = m([[c, zero, s], [zero, one, zero], [-s, zero, c]])
        a1 = m([[-s, zero, c], [zero, zero, zero], [-c, zero, -s]])
        a2 = m([[-c, zero, -s], [zero, zero, zero], [s, zero, -c]])
    else:  # yaw
        a0 = m([[c, -s, zero], [s, c, zero], [zero, zero, one]])
        a1 = m([[-s, -c, zero], [c, -s, zero], [zero, zero, zero]])
        a2 = m([[-c, s, zero], [-s, -c, zero], [zero, zero, zero]])
    return a0, a1, a2


def _hat_batch(v: np.ndarray) -> np.ndarray:
    b = v.shape[0]
    k = np.zeros((b, 3, 3))
    k[:, 0, 1] = -v[:, 2]
    k[:, 0, 2] = v[:, 1]
    k[:, 1, 0] = v[:, 2]
    k[:, 1, 2] = -v[:, 0]
    k[:, 2, 0] = -v[:, 1]
    k[:, 2, 1] = v[:, 0]
    return k


def _vee_star_batch(m: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            m[:, 2, 1] - m[:, 1, 2],
            m[:, 0, 2] - m[:, 2, 0],
            m[:, 1, 0] - m[:, 0, 1],
        ],
        axis=-1,
    )


def _rodrigues_coeffs(sigma: np.ndarray, ts: float):
    """f1 = sin(sigma ts)/sigma, f2 = (1 - cos(sigma ts))/sigma^2 and the
    sigma-normalized derivatives g_i = f_i'(sigma)/sigma, series-safe."""
    x = sigma * ts
    small = x < _SERIES_SWITCH
    sig = np.where(small, 1.0, sigma)  # dummy to avoid 0/0 in the closed form
    sx, cx = np.sin(x), np.cos(x)
    f1 = np.where(small, ts * (1.0 - x**2 / 6.0), sx / sig)
    f2 = np.where(small, ts**2 * (0.5 - x**2 / 24.0), (1.0 - cx) / sig**2)
    g1 = np.where(
        small,
        ts**3 * (-1.0 / 3.0 + x**2 / 30.0),
        (ts * cx * sig - sx) / sig**3,
    )
    g2 = np.where(
        small,
        ts**4 * (-1.0 / 12.0 + x**2 / 180.0),
        (ts * sx * sig**2 - 2.0 * sig * (1.0 - cx)) / sig**5,
    )
    return f1, f2, g1, g2


def _mlp_streams(net: PoseNet, theta, theta_dot, theta_ddot):
    """Propagate value / first / second time-derivative streams through the
    hidden stack; returns the head inputs and per-layer caches."""
    x = np.atleast_2d(np.asarray(theta, dtype=float))
    u = np.atleast_2d(np.asarray(theta_dot, dtype=float))
    v = np.atleast_2d(np.asarray(theta_ddot, dtype=float))
    caches = []
    for w, b in net.hidden:
        a = x @ w.T + b
        p = u @ w.T
        q = v @ w.T
        s = _sigmoid(a)
        s1 = s * (1.0 - s)
        s2 = s1 * (1.0 - 2.0 * s)
        caches.append((x, u, v, p, q, s, s1, s2))
        x = s
        u = s1 * p
        v = s2 * p * p + s1 * q
    return x, u, v, caches


def _head_outputs(net: PoseNet, x, u, v):
    wt, bt = net.head_t
    wr, br = net.head_r
    t = x @ wt.T + bt
    td = u @ wt.T
    tdd = v @ wt.T
    r = x @ wr.T + br
    rd = u @ wr.T
    rdd = v @ wr.T
    return t, td, tdd, r, rd, rdd


def forward(net: PoseNet, theta) -> np.ndarray:
    """Pose at one configuration, assembled into a homogeneous transform."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (net.n_joints,):
        raise ValueError(f"theta must have length {net.n_joints}")
    x, _, _, _ = _mlp_streams(net, theta, np.zeros_like(theta), np.zeros_like(theta))
    t, _, _, r, _, _ = _head_outputs(net, x, x, x)
    return rm.make_transform(rm.rpy_matrix(r[0]), t[0])


def rotation_head_angles(net: PoseNet, theta) -> np.ndarray:
    """Rotation head output wrapped into [0, 2pi)."""
    x, _, _, _ = _mlp_streams(net, theta, np.zeros_like(theta), np.zeros_like(theta))
    _, _, _, r, _, _ = _head_outputs(net, x, x, x)
    return np.mod(r[0], 2.0 * np.pi)


def _rotation_triple(r, rd, rdd):
    """(R, dR/dt, d2R/dt2) batched, from angle triples and their rates."""
    f1, f1d_m, f1dd_m = _axis_rot_batch(0, r[:, 0])
    f2, f2d_m, f2dd_m = _axis_rot_batch(1, r[:, 1])
    f3, f3d_m, f3dd_m = _axis_rot_batch(2, r[:, 2])

    def dots(a1, a2, phi_d, phi_dd):
        d = a1 * phi_d[:, None, None]
        dd = a2 * (phi_d**2)[:, None, None] + a1 * phi_dd[:, None, None]
        return d, dd

    f1_d, f1_dd = dots(f1d_m, f1dd_m, rd[:, 0], rdd[:, 0])
    f2_d, f2_dd = dots(f2d_m, f2dd_m, rd[:, 1], rdd[:, 1])
    f3_d, f3_dd = dots(f3d_m, f3dd_m, rd[:, 2], rdd[:, 2])

    g = f2 @ f1
    g_d = f2_d @ f1 + f2 @ f1_d
    g_dd = f2_dd @ f1 + 2.0 * (f2_d @ f1_d) + f2 @ f1_dd
    rot = f3 @ g
    rot_d = f3_d @ g + f3 @ g_d
    rot_dd = f3_dd @ g + 2.0 * (f3_d @ g_d) + f3 @ g_dd
    return rot, rot_d, rot_dd


def time_derivatives(
    net: PoseNet,
    theta,
    theta_dot,
    theta_ddot,
    mode: str = "analytic",
    fd_step: float = 1e-4,
):
    """(T, dT/dt, d2T/dt2) along the given joint rates.

    ``analytic`` propagates the two directional-derivative streams in closed
    form; ``fd`` uses central differences of the forward map along
    theta_dot (and theta_ddot for the curvature term).
    """
    theta = np.asarray(theta, dtype=float)
    theta_dot = np.asarray(theta_dot, dtype=float)
    theta_ddot = np.asarray(theta_ddot, dtype=float)
    if not theta.shape == theta_dot.shape == theta_ddot.shape == (net.n_joints,):
        raise ValueError("inconsistent joint-vector lengths")
    if mode == "fd":
        h = fd_step
        f0 = forward(net, theta)
        fp = forward(net, theta + h * theta_dot)
        fm = forward(net, theta - h * theta_dot)
        gp = forward(net, theta + h * theta_ddot)
        gm = forward(net, theta - h * theta_ddot)
        td = (fp - fm) / (2.0 * h)
        tdd = (fp - 2.0 * f0 + fm) / h**2 + (gp - gm) / (2.0 * h)
        # keep the homogeneous rows exact
        td[3] = 0.0
        tdd[3] = 0.0
        return f0, td, tdd
    if mode != "analytic":
        raise ValueError(f"unknown derivative mode {mode!r}")

    x, u, v, _ = _mlp_streams(net, theta, theta_dot, theta_ddot)
    t, td, tdd, r, rd, rdd = _head_outputs(net, x, u, v)
    rot, rot_d, rot_dd = _rotation_triple(r, rd, rdd)
    out = rm.make_transform(rot[0], t[0])
    out_d = np.zeros((4, 4))
    out_d[:3, :3] = rot_d[0]
    out_d[:3, 3] = td[0]
    out_dd = np.zeros((4, 4))
    out_dd[:3, :3] = rot_dd[0]
    out_dd[:3, 3] = tdd[0]
    return out, out_d, out_dd


def pose_jacobian(net: PoseNet, theta) -> np.ndarray:
    """12xN Jacobian of the pose map, rows stacking the derivatives of the
    three rotation columns and the translation."""
    theta = np.asarray(theta, dtype=float)
    n = net.n_joints
    x = np.atleast_2d(theta)
    tangents = np.eye(n)
    for w, b in net.hidden:
        a = x @ w.T + b
        s = _sigmoid(a)
        tangents = (tangents @ w.T) * (s * (1.0 - s))
        x = s
    wt, _ = net.head_t
    wr, br = net.head_r
    db = tangents @ wt.T  # (N, 3)
    dr = tangents @ wr.T  # (N, 3)
    r = (x @ wr.T + br)[0]

    ang = r[None, :]
    f1, f1d, _ = _axis_rot_batch(0, ang[:, 0])
    f2, f2d, _ = _axis_rot_batch(1, ang[:, 1])
    f3, f3d, _ = _axis_rot_batch(2, ang[:, 2])
    d_roll = (f3 @ f2 @ f1d)[0]
    d_pitch = (f3 @ f2d @ f1)[0]
    d_yaw = (f3d @ f2 @ f1)[0]

    jac = np.zeros((12, n))
    for j in range(n):
        drot = d_roll * dr[j, 0] + d_pitch * dr[j, 1] + d_yaw * dr[j, 2]
        jac[0:3, j] = drot[:, 0]
        jac[3:6, j] = drot[:, 1]
        jac[6:9, j] = drot[:, 2]
        jac[9:12, j] = db[j]
    return jac


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def loss_from_pose(t, t_dot, t_ddot, alpha_b, beta_b, ts, gravity_vector=None):
    """The training objective evaluated on an arbitrary pose triple; used
    both by the network loss and by oracle checks with ground-truth
    kinematics substituted for the net."""
    r = np.asarray(t, dtype=float)[:3, :3]
    r_dot = np.asarray(t_dot, dtype=float)[:3, :3]
    b_dd = np.asarray(t_ddot, dtype=float)[:3, 3]
    g = np.zeros(3) if gravity_vector is None else np.asarray(gravity_vector, float)
    res = np.asarray(alpha_b, float) - r.T @ (b_dd - g)
    l1 = float(np.sqrt(res @ res + _NORM_EPS))
    omega = rm.vee_antisym(r.T @ r_dot)
    r1 = rm.rodrigues(omega, ts)
    r2 = rm.rpy_matrix(np.asarray(beta_b, float) * ts)
    return l1 - float(np.sum(r1 * r2))


def loss(net: PoseNet, theta, theta_dot, theta_ddot, alpha_b, beta_b, cfg: TrainConfig):
    """Per-sample objective for one sensor measurement."""
    value, _ = _batch_loss_and_grads(
        net,
        np.atleast_2d(theta),
        np.atleast_2d(theta_dot),
        np.atleast_2d(theta_ddot),
        np.atleast_2d(alpha_b),
        np.atleast_2d(beta_b),
        cfg,
        want_grads=False,
    )
    if not np.isfinite(value):
        raise TrainingDivergedError("non-finite loss value")
    return float(value)


def _batch_loss_and_grads(
    net: PoseNet, theta, theta_dot, theta_ddot, alpha, beta, cfg: TrainConfig,
    want_grads: bool = True,
):
    """Mean loss over a batch and the exact parameter gradients."""
    bsz = theta.shape[0]
    ts = cfg.ts
    g_eff = (
        np.asarray(cfg.gravity_vector, dtype=float)
        if cfg.gravity
        else np.zeros(3)
    )

    x3, u3, v3, caches = _mlp_streams(net, theta, theta_dot, theta_ddot)
    wt, bt = net.head_t
    wr, br = net.head_r
    b_dd = v3 @ wt.T  # translation second derivative is all the loss sees
    r = x3 @ wr.T + br
    rd = u3 @ wr.T

    # rotation value and first derivative (the curvature of R is not used)
    f_mats = [_axis_rot_batch(axis, r[:, axis]) for axis in range(3)]
    f1, f1p, f1pp = f_mats[0]
    f2, f2p, f2pp = f_mats[1]
    f3, f3p, f3pp = f_mats[2]
    f1_d = f1p * rd[:, 0][:, None, None]
    f2_d = f2p * rd[:, 1][:, None, None]
    f3_d = f3p * rd[:, 2][:, None, None]
    g_val = f2 @ f1
    g_dot = f2_d @ f1 + f2 @ f1_d
    rot = f3 @ g_val
    rot_d = f3_d @ g_val + f3 @ g_dot

    q_vec = b_dd - g_eff
    pred = np.einsum("bij,bi->bj", rot, q_vec)  # R^T q
    res = alpha - pred
    l1 = np.sqrt(np.einsum("bi,bi->b", res, res) + _NORM_EPS)

    w_mat = np.einsum("bji,bjk->bik", rot, rot_d)  # R^T Rdot
    omega = 0.5 * _vee_star_batch(w_mat)
    sigma = np.linalg.norm(omega, axis=1)
    fc1, fc2, gc1, gc2 = _rodrigues_coeffs(sigma, ts)
    k_mat = _hat_batch(omega)
    k2_mat = k_mat @ k_mat
    r1 = (
        np.eye(3)[None, :, :]
        + fc1[:, None, None] * k_mat
        + fc2[:, None, None] * k2_mat
    )
    r2 = np.stack([rm.rpy_matrix(beta[i] * ts) for i in range(bsz)])
    l2 = -np.einsum("bij,bij->b", r1, r2)

    mean_loss = float(np.mean(l1 + l2))
    if not want_grads:
        return mean_loss, None

    # ---- adjoints -------------------------------------------------------
    c = 1.0 / bsz
    res_bar = (c / l1)[:, None] * res
    q_bar = -np.einsum("bij,bj->bi", rot, res_bar)
    rot_bar = -np.einsum("bi,bj->bij", q_vec, res_bar)
    b_dd_bar = q_bar

    r1_bar = -c * r2
    fc1_bar = np.einsum("bij,bij->b", r1_bar, k_mat)
    fc2_bar = np.einsum("bij,bij->b", r1_bar, k2_mat)
    kt = k_mat.transpose(0, 2, 1)
    k_bar = fc1[:, None, None] * r1_bar + fc2[:, None, None] * (
        r1_bar @ kt + kt @ r1_bar
    )
    omega_bar = _vee_star_batch(k_bar)
    omega_bar += ((fc1_bar * gc1 + fc2_bar * gc2)[:, None]) * omega

    w_bar = 0.5 * _hat_batch(omega_bar)
    rot_bar += np.einsum("bik,bjk->bij", rot_d, w_bar)  # Rdot @ Wbar^T
    rot_d_bar = rot @ w_bar

    # product-rule adjoints through rot = F3 (F2 F1), rot_d likewise
    gt = g_val.transpose(0, 2, 1)
    f3t = f3.transpose(0, 2, 1)
    f3_bar = rot_bar @ gt
    g_bar = f3t @ rot_bar
    f3_d_bar = rot_d_bar @ gt
    g_bar += f3_d.transpose(0, 2, 1) @ rot_d_bar
    f3_bar += rot_d_bar @ g_dot.transpose(0, 2, 1)
    g_dot_bar = f3t @ rot_d_bar

    f1t = f1.transpose(0, 2, 1)
    f2t = f2.transpose(0, 2, 1)
    f2_bar = g_bar @ f1t + g_dot_bar @ f1_d.transpose(0, 2, 1)
    f1_bar = f2t @ g_bar + f2_d.transpose(0, 2, 1) @ g_dot_bar
    f2_d_bar = g_dot_bar @ f1t
    f1_d_bar = f2t @ g_dot_bar

    r_bar = np.zeros_like(r)
    rd_bar = np.zeros_like(rd)
    for axis, (fb, fdb, fp, fpp, _fd) in enumerate(
        (
            (f1_bar, f1_d_bar, f1p, f1pp, f1_d),
            (f2_bar, f2_d_bar, f2p, f2pp, f2_d),
            (f3_bar, f3_d_bar, f3p, f3pp, f3_d),
        )
    ):
        r_bar[:, axis] = np.einsum("bij,bij->b", fb, fp) + rd[:, axis] * np.einsum(
            "bij,bij->b", fdb, fpp
        )
        rd_bar[:, axis] = np.einsum("bij,bij->b", fdb, fp)

    # head adjoints
    wt_grad = b_dd_bar.T @ v3
    bt_grad = np.zeros(3)  # the translation value never enters the loss
    wr_grad = r_bar.T @ x3 + rd_bar.T @ u3
    br_grad = r_bar.sum(axis=0)
    x_bar = r_bar @ wr
    u_bar = rd_bar @ wr
    v_bar = b_dd_bar @ wt

    grads_hidden = []
    for (w, _b), cache in zip(reversed(net.hidden), reversed(caches)):
        x_in, u_in, v_in, p, q, s, s1, s2 = cache
        s3 = s1 * (1.0 - 6.0 * s + 6.0 * s * s)
        a_bar = x_bar * s1 + u_bar * s2 * p + v_bar * (s3 * p * p + s2 * q)
        p_bar = u_bar * s1 + v_bar * 2.0 * s2 * p
        q_bar_l = v_bar * s1
        w_grad = a_bar.T @ x_in + p_bar.T @ u_in + q_bar_l.T @ v_in
        b_grad = a_bar.sum(axis=0)
        grads_hidden.append((w_grad, b_grad))
        x_bar = a_bar @ w
        u_bar = p_bar @ w
        v_bar = q_bar_l @ w
    grads_hidden.reverse()

    grads = []
    for w_grad, b_grad in grads_hidden:
        grads += [w_grad, b_grad]
    grads += [wt_grad, bt_grad, wr_grad, br_grad]
    return mean_loss, grads


def parameter_gradients(
    net: PoseNet, theta, theta_dot, theta_ddot, alpha, beta, cfg: TrainConfig
):
    """Exact gradients of the mean batch loss, ordered as net.params()."""
    _, grads = _batch_loss_and_grads(
        net,
        np.atleast_2d(theta),
        np.atleast_2d(theta_dot),
        np.atleast_2d(theta_ddot),
        np.atleast_2d(alpha),
        np.atleast_2d(beta),
        cfg,
    )
    return grads


@dataclass(frozen=True)
class SensorDataset:
    """Training arrays for one sensor."""

    theta: np.ndarray
    theta_dot: np.ndarray
    theta_ddot: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __len__(self) -> int:
        return len(self.theta)

    @classmethod
    def from_samples(cls, samples, sensor_id: str) -> "SensorDataset":
        theta = np.stack([s.theta for s in samples])
        theta_dot = np.stack([s.theta_dot for s in samples])
        theta_ddot = np.stack([s.theta_ddot for s in samples])
        alpha = np.stack([s.measurements[sensor_id][0] for s in samples])
        beta = np.stack([s.measurements[sensor_id][1] for s in samples])
        return cls(theta, theta_dot, theta_ddot, alpha, beta)


@dataclass(frozen=True)
class TrainResult:
    net: PoseNet
    final_loss: float
    epoch_losses: tuple[float, ...] = field(default_factory=tuple)


def train(net: PoseNet, dataset: SensorDataset, cfg: TrainConfig) -> TrainResult:
    """Mini-batch gradient descent on the mean loss; deterministic per seed.

    Raises TrainingDivergedError on a non-finite loss so a blown-up run
    never masquerades as a trained model.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    net = net.copy()
    rng = np.random.default_rng(cfg.seed)
    n = len(dataset)
    params = net.params()
    velocity = [np.zeros_like(p) for p in params]
    second = [np.zeros_like(p) for p in params]
    step = 0
    epoch_losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            value, grads = _batch_loss_and_grads(
                net,
                dataset.theta[idx],
                dataset.theta_dot[idx],
                dataset.theta_ddot[idx],
                dataset.alpha[idx],
                dataset.beta[idx],
                cfg,
            )
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"loss became non-finite after {len(epoch_losses)} epochs"
                )
            epoch_loss += value * len(idx)
            step += 1
            if cfg.optimizer == "adam":
                b1, b2, eps = 0.9, 0.999, 1e-8
                for p, vel, sec, grad in zip(params, velocity, second, grads):
                    vel *= b1
                    vel += (1.0 - b1) * grad
                    sec *= b2
                    sec += (1.0 - b2) * grad * grad
                    vhat = vel / (1.0 - b1**step)
                    shat = sec / (1.0 - b2**step)
                    p -= cfg.learning_rate * vhat / (np.sqrt(shat) + eps)
            else:
                for p, vel, grad in zip(params, velocity, grads):
                    vel *= cfg.momentum
                    vel -= cfg.learning_rate * grad
                    p += vel
        epoch_losses.append(epoch_loss / n)

    final, _ = _batch_loss_and_grads(
        net,
        dataset.theta,
        dataset.theta_dot,
        dataset.theta_ddot,
        dataset.alpha,
        dataset.beta,
        cfg,
        want_grads=False,
    )
    if not np.isfinite(final):
        raise TrainingDivergedError("final loss is non-finite")
    return TrainResult(net, float(final), tuple(epoch_losses))
