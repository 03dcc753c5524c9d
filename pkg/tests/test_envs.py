import math

import numpy as np
import pytest

from vdb_lab.envs import (
    EnvState,
    MazeSpec,
    Wall,
    c_maze,
    evaluate_return,
    goal_region_radius,
    maze_by_name,
    maze_from_text,
    maze_to_text,
    mirror,
    mirror_policy,
    reset,
    reset_batch,
    rollout_episodes,
    s_maze,
    step,
    step_batch,
)
from vdb_lab.errors import ConfigError, ShapeError


def open_box(max_accel=1.0, horizon=10):
    return MazeSpec(
        name="box",
        bounds=(-10.0, 10.0, -10.0, 10.0),
        walls=(),
        start_mean=(0.0, 0.0),
        start_radius=0.0,
        goal=(0.0, 0.0),
        max_accel=max_accel,
        horizon=horizon,
    )


def test_reward_spot_value():
    # from (3, 0) at rest, full braking accel (-1, 0) lands at distance 2
    spec = open_box()
    state = EnvState(position=np.array([3.0, 0.0]), velocity=np.zeros(2), t=0)
    state, result = step(state, np.array([-1.0, 0.0]), spec)
    assert result.reward == -2.001
    assert result.distance == 2.0
    assert not result.done


def test_action_clamp():
    spec = open_box(max_accel=0.5)
    state = EnvState(position=np.zeros(2), velocity=np.zeros(2), t=0)
    state, result = step(state, np.array([4.0, -100.0]), spec)
    assert np.array_equal(state.velocity, [0.5, -0.5])
    assert np.array_equal(state.position, [0.5, -0.5])
    # cost charged on the clamped action, not the raw request
    assert result.reward == pytest.approx(-math.sqrt(0.5) - 1e-3 * 0.5, abs=1e-12)


def test_done_at_horizon():
    spec = open_box(horizon=3)
    state = EnvState(position=np.zeros(2), velocity=np.zeros(2), t=0)
    flags = []
    for _ in range(3):
        state, result = step(state, np.zeros(2), spec)
        flags.append(result.done)
    assert flags == [False, False, True]


def test_wall_blocks_and_zeroes_velocity():
    spec = c_maze()
    pos = np.array([[0.3, -0.1]])
    vel = np.array([[0.0, 0.3]])
    # ballistic move upward across y = 0 inside the wall span
    new_pos, new_vel, _, _ = step_batch(pos, vel, np.zeros((1, 2)), spec)
    assert np.array_equal(new_pos[0], [0.3, -0.1])
    assert np.array_equal(new_vel[0], [0.0, 0.0])
    # same move through the gap on the right passes
    pos_gap = np.array([[0.6, -0.1]])
    new_pos, new_vel, _, _ = step_batch(pos_gap, vel, np.zeros((1, 2)), spec)
    assert new_pos[0, 1] > 0.0
    assert new_vel[0, 1] != 0.0


def test_landing_exactly_on_wall_is_blocked():
    spec = c_maze()
    pos = np.array([[0.0, -0.5]])
    vel = np.array([[0.0, 0.48]])
    new_pos, new_vel, _, _ = step_batch(pos, vel, np.array([[0.0, 0.02]]), spec)
    assert new_pos[0, 1] == -0.5
    assert new_vel[0, 1] == 0.0


def test_bounds_block():
    spec = open_box(max_accel=100.0)
    pos = np.array([[9.0, 0.0]])
    vel = np.zeros((1, 2))
    new_pos, new_vel, _, _ = step_batch(pos, vel, np.array([[5.0, 0.0]]), spec)
    assert new_pos[0, 0] == 9.0
    assert new_vel[0, 0] == 0.0


def test_x_resolves_before_y():
    # wall at y = 0 spans x in [-1, 0.4]; moving right into the gap first
    # makes the upward move legal on the same step
    spec = c_maze()
    pos = np.array([[0.35, -0.05]])
    vel = np.array([[0.2, 0.2]])
    new_pos, _, _, _ = step_batch(pos, vel, np.zeros((1, 2)), spec)
    assert new_pos[0, 0] > 0.4
    assert new_pos[0, 1] > 0.0


def test_scalar_python_oracle_matches_batch():
    # independent single-particle simulation with plain floats
    spec = c_maze()
    rng = np.random.default_rng(11)
    x, y = 0.05, -0.6
    vx = vy = 0.0
    state = EnvState(position=np.array([x, y]), velocity=np.zeros(2), t=0)
    for _ in range(60):
        ax, ay = rng.uniform(-0.05, 0.05, size=2)
        state, result = step(state, np.array([ax, ay]), spec)
        cax = min(max(ax, -spec.max_accel), spec.max_accel)
        cay = min(max(ay, -spec.max_accel), spec.max_accel)
        vx, vy = vx + cax, vy + cay
        nx = x + vx
        hit_x = nx < -1.0 or nx > 1.0
        if hit_x:
            vx = 0.0
        else:
            x = nx
        ny = y + vy
        crosses = (y < 0.0 <= ny) or (y > 0.0 >= ny)
        hit_y = ny < -1.0 or ny > 1.0 or (crosses and -1.0 <= x <= 0.4)
        if hit_y:
            vy = 0.0
        else:
            y = ny
        dist = math.sqrt((x - 0.0) ** 2 + (y - 0.65) ** 2)
        reward = -dist - 1e-3 * (cax * cax + cay * cay)
        assert state.position[0] == pytest.approx(x, abs=1e-15)
        assert state.position[1] == pytest.approx(y, abs=1e-15)
        assert result.reward == pytest.approx(reward, abs=1e-12)


def test_mirror_geometry():
    spec = c_maze()
    m = mirror(spec)
    assert m.name == "c-mirrored"
    # wall gap moves from the right to the left
    assert m.walls[0] == Wall("h", 0.0, -0.4, 1.0)
    assert m.start_mean == (0.0, -0.65)
    assert m.goal == (0.0, 0.65)
    assert mirror(m) == spec


def test_mirror_rollout_exact():
    for spec in (c_maze(), s_maze()):
        m = mirror(spec)
        rng = np.random.default_rng(3)
        starts = np.array(spec.start_mean) + rng.uniform(-0.08, 0.08, size=(8, 2))
        flipped = starts.copy()
        flipped[:, 0] = -flipped[:, 0]

        def pol(obs, rng, spec=spec):
            return np.stack(
                [
                    0.3 * np.sin(5 * obs[:, 0]) * spec.max_accel,
                    np.full(obs.shape[0], spec.max_accel),
                ],
                axis=1,
            )

        r1 = rollout_episodes(pol, spec, 8, np.random.default_rng(0), start_positions=starts)
        r2 = rollout_episodes(
            mirror_policy(pol, spec), m, 8, np.random.default_rng(0), start_positions=flipped
        )
        assert np.array_equal(r1["rewards"], r2["rewards"])
        assert np.array_equal(r1["observations"][:, :, 0], -r2["observations"][:, :, 0])
        assert np.array_equal(r1["observations"][:, :, 1], r2["observations"][:, :, 1])


def test_reset_statistics():
    spec = c_maze()
    rng = np.random.default_rng(5)
    pos, vel = reset_batch(spec, 20_000, rng)
    assert np.array_equal(vel, np.zeros_like(vel))
    offsets = pos - np.array(spec.start_mean)
    radii = np.sqrt((offsets**2).sum(axis=1))
    assert radii.max() <= spec.start_radius
    # uniform disc: E[r] = 2R/3, sd(r) = R/sqrt(18)
    se = spec.start_radius / math.sqrt(18) / math.sqrt(20_000)
    assert abs(radii.mean() - 2 * spec.start_radius / 3) < 4 * se
    assert abs(offsets[:, 0].mean()) < 4 * radii.std() / math.sqrt(20_000)


def test_reset_single_matches_distribution():
    spec = c_maze()
    state = reset(spec, np.random.default_rng(0))
    assert state.t == 0
    assert np.array_equal(state.velocity, np.zeros(2))
    d = np.linalg.norm(state.position - np.array(spec.start_mean))
    assert d <= spec.start_radius


def test_rollout_shapes_and_return_consistency():
    spec = c_maze()

    def still(obs, rng):
        return np.zeros_like(obs)

    roll = rollout_episodes(still, spec, 4, np.random.default_rng(2))
    assert roll["observations"].shape == (4, 100, 2)
    assert roll["rewards"].shape == (4, 100)
    assert np.array_equal(roll["next_observations"][:, :-1], roll["observations"][:, 1:])
    rep = evaluate_return(still, spec, 4, np.random.default_rng(2))
    assert rep.mean_return == pytest.approx(roll["rewards"].sum(axis=1).mean())
    assert rep.reach_fraction == 0.0


def test_goal_region_radius():
    assert goal_region_radius(c_maze()) == pytest.approx(0.2)


def test_maze_by_name():
    assert maze_by_name("s").name == "s"
    assert maze_by_name("c-mirrored").walls == mirror(c_maze()).walls
    with pytest.raises(ConfigError):
        maze_by_name("z")


def test_serialization_round_trip():
    for spec in (c_maze(), s_maze(), mirror(s_maze())):
        assert maze_from_text(maze_to_text(spec)) == spec


def test_shape_validation():
    spec = open_box()
    with pytest.raises(ShapeError):
        step_batch(np.zeros((3, 2)), np.zeros((2, 2)), np.zeros((3, 2)), spec)


def test_reward_zero_at_goal():
    spec = open_box()
    state = EnvState(position=np.zeros(2), velocity=np.zeros(2), t=0)
    _, result = step(state, np.zeros(2), spec)
    assert result.reward == 0.0


def in_free_space(p, spec, eps=1e-12):
    xmin, xmax, ymin, ymax = spec.bounds
    if not (xmin <= p[0] <= xmax and ymin <= p[1] <= ymax):
        return False
    for w in spec.walls:
        if w.axis == "h" and abs(p[1] - w.level) < eps and w.lo <= p[0] <= w.hi:
            return False
        if w.axis == "v" and abs(p[0] - w.level) < eps and w.lo <= p[1] <= w.hi:
            return False
    return True


def test_resets_in_free_space():
    for spec in (c_maze(), s_maze()):
        pos, _ = reset_batch(spec, 5000, np.random.default_rng(9))
        assert all(in_free_space(p, spec) for p in pos)
        assert in_free_space(spec.start_mean, spec)
        assert in_free_space(spec.goal, spec)


def test_mirror_preserves_wall_neighborhood_area():
    # congruent wall sets: the measure near walls is identical, so the same
    # MC point cloud (mirrored along with the maze) scores identical counts
    spec = s_maze()
    m = mirror(spec)
    xmin, xmax, ymin, ymax = spec.bounds
    rng = np.random.default_rng(17)
    pts = np.column_stack(
        [rng.uniform(xmin, xmax, 20_000), rng.uniform(ymin, ymax, 20_000)]
    )

    def near_wall_count(points, walls, delta=0.05):
        hit = np.zeros(points.shape[0], dtype=bool)
        for w in walls:
            along, across = (0, 1) if w.axis == "h" else (1, 0)
            hit |= (np.abs(points[:, across] - w.level) < delta) & (
                (points[:, along] >= w.lo) & (points[:, along] <= w.hi)
            )
        return int(hit.sum())

    mirrored_pts = pts.copy()
    mirrored_pts[:, 0] = -mirrored_pts[:, 0]
    assert near_wall_count(pts, spec.walls) == near_wall_count(mirrored_pts, m.walls)


def test_zero_policy_return_closed_form():
    spec = MazeSpec(
        name="fixed",
        bounds=(-10.0, 10.0, -10.0, 10.0),
        walls=(),
        start_mean=(3.0, 4.0),
        start_radius=0.0,
        goal=(0.0, 0.0),
        max_accel=1.0,
        horizon=100,
    )

    def still(obs, rng):
        return np.zeros_like(obs)

    rep = evaluate_return(still, spec, 3, np.random.default_rng(0))
    assert np.array_equal(rep.returns, np.full(3, -500.0))


def test_evaluate_return_deterministic_given_seed():
    spec = c_maze()

    def noisy(obs, rng):
        return rng.normal(scale=spec.max_accel, size=obs.shape)

    r1 = evaluate_return(noisy, spec, 6, np.random.default_rng(21))
    r2 = evaluate_return(noisy, spec, 6, np.random.default_rng(21))
    assert np.array_equal(r1.returns, r2.returns)


def test_scripted_controller_near_dp_optimum():
    # 1-D instance: start (1.3, 0), goal at origin, no walls. Restricting
    # actions to {-a, 0, +a} keeps (x, v) on an exact lattice, so full
    # dynamic programming over the horizon gives the discretized optimum.
    a = 0.03
    d = 1.3
    horizon = 100
    spec = MazeSpec(
        name="line",
        bounds=(-10.0, 10.0, -10.0, 10.0),
        walls=(),
        start_mean=(d, 0.0),
        start_radius=0.0,
        goal=(0.0, 0.0),
        max_accel=a,
        horizon=horizon,
    )

    n_range = np.arange(-80, 21)  # x = d + n*a
    m_range = np.arange(-25, 26)  # v = m*a
    xs = d + n_range * a
    best = np.zeros((n_range.size, m_range.size))
    for _ in range(horizon):
        nxt = np.full_like(best, -np.inf)
        for u in (-1, 0, 1):
            m_new = m_range + u
            ok_m = (m_new >= m_range[0]) & (m_new <= m_range[-1])
            n_new = n_range[:, None] + m_new[None, :]
            ok = ok_m[None, :] & (n_new >= n_range[0]) & (n_new <= n_range[-1])
            n_idx = np.clip(n_new - n_range[0], 0, n_range.size - 1)
            m_idx = np.clip(m_new - m_range[0], 0, m_range.size - 1)
            reward = -np.abs(d + n_new * a) - 1e-3 * (u * a) ** 2
            cand = np.where(ok, reward + best[n_idx, m_idx], -np.inf)
            nxt = np.maximum(nxt, cand)
        best = nxt
    dp_value = best[-n_range[0], -m_range[0]]  # state (n=0, m=0)

    def controller(obs, rng):
        x = obs[:, 0]
        v = controller.vel
        v_star = -np.sign(x) * np.minimum(np.sqrt(2 * a * np.abs(x)), 0.3)
        u = np.clip(v_star - v, -a, a)
        controller.vel = v + u
        return np.column_stack([u, np.zeros_like(u)])

    controller.vel = np.zeros(1)
    rep = evaluate_return(controller, spec, 1, np.random.default_rng(0))
    scripted = rep.returns[0]
    assert dp_value < 0 and scripted < 0
    assert abs(scripted - dp_value) <= 0.05 * abs(dp_value)


def test_spec_validation():
    with pytest.raises(ConfigError):
        Wall("d", 0.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        Wall("h", 0.0, 1.0, 0.0)
    with pytest.raises(ConfigError):
        MazeSpec("bad", (1.0, -1.0, -1.0, 1.0), (), (0, 0), 0.1, (0, 0), 0.02)
    with pytest.raises(ConfigError):
        MazeSpec("bad", (-1.0, 1.0, -1.0, 1.0), (), (0, 0), 0.1, (0, 0), -0.5)
