import json

import numpy as np
import pytest

from bodyschema import chain, rigid_motion as rm, robots
from bodyschema.chain import Joint, RobotSpec
from bodyschema.errors import SchemaError
from bodyschema.topology import OutTree


@pytest.fixture(scope="module")
def serial():
    return robots.builtin_robot("robot1")


@pytest.fixture(scope="module")
def branched():
    return robots.builtin_robot("robot2")


def one_joint_robot(axis=(0, 0, 1), mount_x=1.0):
    topo = OutTree({"l1": (None, "j1")})
    joints = {"j1": Joint(np.array(axis, dtype=float), np.eye(4))}
    mounts = {"l1": (rm.translate([mount_x, 0.0, 0.0]),)}
    return RobotSpec(topo, joints, mounts, np.array([0.0, 0.0, -9.8]))


class TestSpecValidation:
    def test_rejects_non_unit_axis(self):
        with pytest.raises(ValueError):
            Joint(np.array([0.0, 0.0, 2.0]), np.eye(4))

    def test_rejects_wrong_joint_keys(self):
        topo = OutTree({"l1": (None, "j1")})
        with pytest.raises(ValueError):
            RobotSpec(topo, {"jX": Joint(np.array([0, 0, 1.0]), np.eye(4))}, {})

    def test_sensor_ids_and_links(self, serial):
        assert serial.sensor_ids[0] == "l1:0"
        assert serial.sensor_link("l3:1") == "l3"
        assert len(serial.sensor_ids) == 10


class TestForwardKinematics:
    def test_zero_theta_single_joint_is_mount(self):
        spec = one_joint_robot()
        poses = chain.fk(spec, np.zeros(1))
        assert np.allclose(poses["l1:0"], rm.translate([1, 0, 0]))

    def test_quarter_turn_moves_unit_x_to_unit_y(self):
        spec = one_joint_robot()
        pose = chain.fk(spec, np.array([np.pi / 2]))["l1:0"]
        assert np.allclose(pose[:3, 3], [0, 1, 0], atol=1e-12)

    def test_off_path_joint_does_not_move_sensor(self, branched):
        rng = np.random.default_rng(0)
        theta = rng.uniform(-1, 1, 5)
        # l5 hangs under l2; j3, j4 are on the other branch
        base = chain.fk(branched, theta)["l5:0"]
        for k, edge in enumerate(branched.joint_order):
            bumped = theta.copy()
            bumped[k] += 0.37
            moved = chain.fk(branched, bumped)["l5:0"]
            on_path = edge in branched.topology.root_path_edges("l5")
            assert np.allclose(moved, base) != on_path

    def test_dimension_mismatch(self, serial):
        with pytest.raises(ValueError):
            chain.fk(serial, np.zeros(3))


class TestJacobian:
    def test_single_joint_hand_value(self):
        spec = one_joint_robot()
        jac = chain.analytic_jacobian(spec, np.zeros(1), "l1:0")
        assert np.allclose(jac[9:12, 0], [0, 1, 0], atol=1e-12)

    def test_matches_finite_differences(self, serial):
        rng = np.random.default_rng(1)
        theta = rng.uniform(-1, 1, 5)
        h = 1e-6
        for sid in ("l1:0", "l3:0", "l5:1"):
            jac = chain.analytic_jacobian(serial, theta, sid)
            fd = np.zeros_like(jac)
            for k in range(5):
                e = np.zeros(5)
                e[k] = h
                tp_ = chain.fk(serial, theta + e)[sid]
                tm = chain.fk(serial, theta - e)[sid]
                d = (tp_ - tm) / (2 * h)
                fd[0:3, k], fd[3:6, k] = d[:3, 0], d[:3, 1]
                fd[6:9, k], fd[9:12, k] = d[:3, 2], d[:3, 3]
            assert np.abs(jac - fd).max() < 1e-6

    def test_off_path_columns_exactly_zero(self, branched):
        rng = np.random.default_rng(2)
        for sid in branched.sensor_ids:
            path = branched.topology.root_path_edges(branched.sensor_link(sid))
            jac = chain.analytic_jacobian(branched, rng.uniform(-2, 2, 5), sid)
            for k, edge in enumerate(branched.joint_order):
                if edge not in path:
                    assert np.array_equal(jac[:, k], np.zeros(12))

    def test_same_link_sensors_share_pattern(self, branched):
        rng = np.random.default_rng(3)
        theta = rng.uniform(-1, 1, 5)
        for node in branched.topology.nodes:
            jacs = [
                chain.analytic_jacobian(branched, theta, f"{node}:{k}")
                for k in range(2)
            ]
            patterns = [
                tuple(bool(np.abs(j[:, c]).max() > 1e-12) for c in range(5))
                for j in jacs
            ]
            assert patterns[0] == patterns[1]


class TestMeasurementSynthesis:
    def test_static_no_gravity_is_silent(self, serial):
        quiet = RobotSpec(
            serial.topology, serial.joints, serial.mounts, np.zeros(3)
        )
        out = chain.synthesize_imu(quiet, np.zeros(5), np.zeros(5), np.zeros(5))
        for alpha, beta in out.values():
            assert np.array_equal(alpha, np.zeros(3))
            assert np.array_equal(beta, np.zeros(3))

    def test_static_gravity_reads_specific_force(self):
        spec = one_joint_robot()
        alpha, beta = chain.synthesize_imu(
            spec, np.zeros(1), np.zeros(1), np.zeros(1)
        )["l1:0"]
        assert np.allclose(alpha, [0, 0, 9.8])
        assert np.allclose(beta, 0.0)

    def test_alpha_matches_position_fd_over_time(self, serial):
        # independent oracle: second-order central difference of the sensor
        # position along the trajectory, rotated into the body frame
        quiet = RobotSpec(serial.topology, serial.joints, serial.mounts, np.zeros(3))
        rate = 100.0
        samples = chain.gen_trajectory(quiet, duration=1.0, rate=rate)
        h = 1.0 / rate
        worst = 0.0
        for k in range(1, len(samples) - 1):
            s = samples[k]
            poses = chain.fk(quiet, s.theta)
            prev = chain.fk(quiet, samples[k - 1].theta)
            nxt = chain.fk(quiet, samples[k + 1].theta)
            for sid in ("l2:0", "l5:1"):
                b_dd = (nxt[sid][:3, 3] - 2 * poses[sid][:3, 3] + prev[sid][:3, 3]) / h**2
                alpha_fd = poses[sid][:3, :3].T @ b_dd
                worst = max(worst, np.abs(alpha_fd - s.measurements[sid][0]).max())
        assert worst < 1e-4

    def test_beta_integrates_to_true_rotation(self, serial):
        ts = 0.01
        rng = np.random.default_rng(4)
        theta, theta_dot, theta_ddot = (rng.uniform(-1, 1, 5) for _ in range(3))
        meas = chain.synthesize_imu(serial, theta, theta_dot, theta_ddot, ts)
        for sid in serial.sensor_ids[:4]:
            t, td, _ = chain.pose_with_time_derivatives(
                serial, sid, theta, theta_dot, theta_ddot
            )
            omega = rm.vee_antisym(t[:3, :3].T @ td[:3, :3])
            r1 = rm.rodrigues(omega, ts)
            r2 = rm.rpy_matrix(meas[sid][1] * ts)
            assert np.abs(r1 - r2).max() < 1e-12


class TestTrajectories:
    def test_zero_amplitude_is_constant(self, serial):
        table = ((0.0, 0.1, 0.1),) * 5
        samples = chain.gen_trajectory(serial, duration=0.2, rate=50, table=table)
        for s in samples:
            assert np.allclose(s.theta, 0.0)

    def test_first_table_row_initial_velocity(self, serial):
        samples = chain.gen_trajectory(serial, duration=0.1, rate=100)
        assert abs(samples[0].theta_dot[0] - 0.2 * np.sin(0.1)) < 1e-12

    def test_velocity_matches_position_fd(self, serial):
        # central differences of theta carry an h^2 theta''' / 6 truncation
        # term, about 6e-6 at the fastest table row and 100 Hz
        samples = chain.gen_trajectory(serial, duration=1.0, rate=100)
        h = 0.01
        worst = 0.0
        for k in range(1, len(samples) - 1):
            fd = (samples[k + 1].theta - samples[k - 1].theta) / (2 * h)
            worst = max(worst, np.abs(fd - samples[k].theta_dot).max())
        assert worst < 1e-5

    def test_smooth_random_is_seeded_and_consistent(self, serial):
        a = chain.gen_trajectory(serial, mode="smooth_random", duration=0.3, rate=50, seed=7)
        b = chain.gen_trajectory(serial, mode="smooth_random", duration=0.3, rate=50, seed=7)
        assert all(np.array_equal(x.theta, y.theta) for x, y in zip(a, b))
        h = 0.02
        for k in range(1, len(a) - 1):
            fd = (a[k + 1].theta - a[k - 1].theta) / (2 * h)
            assert np.abs(fd - a[k].theta_dot).max() < 1e-4

    def test_bad_mode_rejected(self, serial):
        with pytest.raises(ValueError):
            chain.gen_trajectory(serial, mode="warp", duration=1.0)

    def test_all_measurements_finite(self, serial):
        samples = chain.gen_trajectory(serial, duration=0.5, rate=50)
        for s in samples:
            assert np.isfinite(s.theta).all()
            assert len(s.measurements) == len(serial.sensor_ids)
            for alpha, beta in s.measurements.values():
                assert np.isfinite(alpha).all() and np.isfinite(beta).all()


@pytest.fixture(scope="module")
def short_traj(serial):
    return chain.gen_trajectory(serial, duration=0.3, rate=50)


class TestNoise:

    def test_zero_sigma_identity(self, short_traj):
        noisy = chain.add_noise(short_traj, 0.0, 0.0, seed=1)
        for a, b in zip(short_traj, noisy):
            for sid in a.measurements:
                assert np.array_equal(a.measurements[sid][0], b.measurements[sid][0])
                assert np.array_equal(a.measurements[sid][1], b.measurements[sid][1])

    def test_same_seed_identical(self, short_traj):
        n1 = chain.add_noise(short_traj, 0.05, 0.01, seed=3)
        n2 = chain.add_noise(short_traj, 0.05, 0.01, seed=3)
        for a, b in zip(n1, n2):
            for sid in a.measurements:
                assert np.array_equal(a.measurements[sid][0], b.measurements[sid][0])

    def test_noise_statistics(self):
        # mean of the added noise over many draws stays within 3 sigma/sqrt(n)
        rng_draws = 100_000
        spec = one_joint_robot()
        base = chain.gen_trajectory(spec, duration=rng_draws / 100.0, rate=100)
        noisy = chain.add_noise(base, 0.05, 0.0, seed=9)
        diffs = np.stack(
            [
                n.measurements["l1:0"][0] - b.measurements["l1:0"][0]
                for b, n in zip(base, noisy)
            ]
        )
        n = diffs.shape[0]
        assert np.abs(diffs.mean(axis=0)).max() < 3 * 0.05 / np.sqrt(n)


class TestSerialization:
    def test_robot_roundtrip(self, branched, tmp_path):
        path = tmp_path / "robot.json"
        chain.save_robot(branched, path)
        loaded = chain.load_robot(path)
        assert loaded.topology == branched.topology
        for e in branched.joints:
            assert np.allclose(loaded.joints[e].axis, branched.joints[e].axis)
            assert np.allclose(loaded.joints[e].offset, branched.joints[e].offset)
        rng = np.random.default_rng(5)
        theta = rng.uniform(-1, 1, 5)
        for sid in branched.sensor_ids:
            assert np.allclose(
                chain.fk(loaded, theta)[sid], chain.fk(branched, theta)[sid]
            )

    def test_trajectory_roundtrip(self, serial, tmp_path):
        path = tmp_path / "traj.jsonl"
        samples = chain.gen_trajectory(serial, duration=0.1, rate=50)
        chain.save_trajectory(samples, serial, path)
        loaded, meta = chain.load_trajectory(path)
        assert meta["joints"] == list(serial.joint_order)
        assert len(loaded) == len(samples)
        for a, b in zip(samples, loaded):
            assert np.allclose(a.theta, b.theta)
            for sid in a.measurements:
                assert np.allclose(a.measurements[sid][0], b.measurements[sid][0])

    def test_malformed_robot_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"topology": {"parents": []}}))
        with pytest.raises(SchemaError):
            chain.load_robot(path)

    def test_trajectory_missing_meta(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"t": 0.0}\n')
        with pytest.raises(SchemaError):
            chain.load_trajectory(path)
