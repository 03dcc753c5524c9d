"""Point-mass maze control with axis-aligned walls.

Dynamics are a discrete double integrator with unit timestep: the action is
an acceleration clamped per axis to +/- max_accel, velocity integrates the
acceleration, position integrates the velocity. Movement resolves one axis
at a time (x first); if a move would cross a wall or leave the bounding box,
that axis' position component stays put and its velocity component zeroes.

The observation is the position alone; velocity is hidden state. Reward each
step is -(distance to goal after the move) - action_cost * |a|^2, episodes
run a fixed horizon with no early termination.

All geometry helpers keep exact left-right mirror symmetry: for the shipped
mazes (centerline at x = 0) mirroring is floating-point negation, so a
mirrored policy in the mirrored maze reproduces returns bit for bit.
"""

from dataclasses import dataclass, replace

import numpy as np

from vdb_lab.errors import ConfigError, ShapeError


@dataclass(frozen=True)
class Wall:
    """Axis-aligned barrier: 'h' lies along y = level, 'v' along x = level.

    The wall occupies level x [lo, hi] on the other axis and blocks motion
    across it, in both directions.
    """

    axis: str
    level: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.axis not in ("h", "v"):
            raise ConfigError(f"wall axis must be 'h' or 'v', got {self.axis!r}")
        if not self.lo < self.hi:
            raise ConfigError("wall span must have lo < hi")


@dataclass(frozen=True)
class MazeSpec:
    name: str
    bounds: tuple  # (xmin, xmax, ymin, ymax)
    walls: tuple
    start_mean: tuple
    start_radius: float
    goal: tuple
    max_accel: float
    horizon: int = 100
    action_cost: float = 1e-3

    def __post_init__(self):
        xmin, xmax, ymin, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise ConfigError("bounds must satisfy xmin < xmax and ymin < ymax")
        if self.max_accel <= 0:
            raise ConfigError("max_accel must be positive")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        if self.start_radius < 0:
            raise ConfigError("start_radius must be nonnegative")


@dataclass
class EnvState:
    position: np.ndarray
    velocity: np.ndarray
    t: int


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    distance: float
    done: bool


def c_maze():
    """One interior wall below the goal; the gap is on the right."""
    return MazeSpec(
        name="c",
        bounds=(-1.0, 1.0, -1.0, 1.0),
        walls=(Wall("h", 0.0, -1.0, 0.4),),
        start_mean=(0.0, -0.65),
        start_radius=0.1,
        goal=(0.0, 0.65),
        max_accel=0.03,
    )


def s_maze():
    """Taller maze with two staggered walls and doubled control authority."""
    return MazeSpec(
        name="s",
        bounds=(-1.0, 1.0, -1.4, 1.4),
        walls=(Wall("h", -0.45, -1.0, 0.4), Wall("h", 0.45, -0.4, 1.0)),
        start_mean=(0.0, -1.05),
        start_radius=0.1,
        goal=(0.0, 1.05),
        max_accel=0.06,
    )


def mirror(spec):
    """Reflect walls, start, and goal about the vertical centerline."""
    xmin, xmax, _, _ = spec.bounds
    s = xmin + xmax

    def flip_x(x):
        return s - x

    walls = []
    for w in spec.walls:
        if w.axis == "v":
            walls.append(Wall("v", flip_x(w.level), w.lo, w.hi))
        else:
            walls.append(Wall("h", w.level, flip_x(w.hi), flip_x(w.lo)))
    name = spec.name[: -len("-mirrored")] if spec.name.endswith("-mirrored") else (
        spec.name + "-mirrored"
    )
    return replace(
        spec,
        name=name,
        walls=tuple(walls),
        start_mean=(flip_x(spec.start_mean[0]), spec.start_mean[1]),
        goal=(flip_x(spec.goal[0]), spec.goal[1]),
    )


def maze_by_name(name):
    mazes = {
        "c": c_maze(),
        "s": s_maze(),
        "c-mirrored": mirror(c_maze()),
        "s-mirrored": mirror(s_maze()),
    }
    if name not in mazes:
        raise ConfigError(f"unknown maze {name!r}; choose from {sorted(mazes)}")
    return mazes[name]


def goal_region_radius(spec):
    """Goal region: within 10% of the maze width of the goal point."""
    xmin, xmax, _, _ = spec.bounds
    return 0.1 * (xmax - xmin)


# -- dynamics -----------------------------------------------------------------


def _blocked_axis_move(cur, new, walls_levels, walls_lo, walls_hi, span_coord, lo_b, hi_b):
    """Mask of rows whose move from cur to new crosses a wall or the bounds."""
    blocked = (new < lo_b) | (new > hi_b)
    for level, lo, hi in zip(walls_levels, walls_lo, walls_hi):
        crosses = ((cur < level) & (new >= level)) | ((cur > level) & (new <= level))
        in_span = (span_coord >= lo) & (span_coord <= hi)
        blocked |= crosses & in_span
    return blocked


def step_batch(position, velocity, action, spec):
    """Vectorized dynamics over (m, 2) arrays; returns (pos, vel, reward, dist)."""
    position = np.asarray(position, dtype=np.float64)
    velocity = np.asarray(velocity, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if position.shape != velocity.shape or position.shape != action.shape:
        raise ShapeError("position, velocity, action must share shape (m, 2)")
    xmin, xmax, ymin, ymax = spec.bounds

    a = np.clip(action, -spec.max_accel, spec.max_accel)
    vel = velocity + a
    pos = position.copy()

    v_walls = [w for w in spec.walls if w.axis == "v"]
    new_x = pos[:, 0] + vel[:, 0]
    blocked_x = _blocked_axis_move(
        pos[:, 0], new_x,
        [w.level for w in v_walls], [w.lo for w in v_walls], [w.hi for w in v_walls],
        pos[:, 1], xmin, xmax,
    )
    pos[:, 0] = np.where(blocked_x, pos[:, 0], new_x)
    vel[:, 0] = np.where(blocked_x, 0.0, vel[:, 0])

    h_walls = [w for w in spec.walls if w.axis == "h"]
    new_y = pos[:, 1] + vel[:, 1]
    blocked_y = _blocked_axis_move(
        pos[:, 1], new_y,
        [w.level for w in h_walls], [w.lo for w in h_walls], [w.hi for w in h_walls],
        pos[:, 0], ymin, ymax,
    )
    pos[:, 1] = np.where(blocked_y, pos[:, 1], new_y)
    vel[:, 1] = np.where(blocked_y, 0.0, vel[:, 1])

    goal = np.asarray(spec.goal)
    dist = np.sqrt(np.sum((pos - goal) ** 2, axis=1))
    reward = -dist - spec.action_cost * np.sum(a * a, axis=1)
    return pos, vel, reward, dist


def step(state, action, spec):
    """Single-instance step; see step_batch for the dynamics."""
    pos, vel, reward, dist = step_batch(
        state.position[None, :], state.velocity[None, :], np.asarray(action)[None, :], spec
    )
    t = state.t + 1
    new_state = EnvState(position=pos[0], velocity=vel[0], t=t)
    result = StepResult(
        observation=pos[0].copy(),
        reward=float(reward[0]),
        distance=float(dist[0]),
        done=t >= spec.horizon,
    )
    return new_state, result


def reset(spec, rng):
    """Start at rest, uniformly inside the start disc."""
    r = spec.start_radius * np.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * np.pi)
    position = np.array(spec.start_mean) + r * np.array([np.cos(theta), np.sin(theta)])
    return EnvState(position=position, velocity=np.zeros(2), t=0)


def reset_batch(spec, m, rng):
    r = spec.start_radius * np.sqrt(rng.uniform(size=m))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
    offsets = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    return np.asarray(spec.start_mean) + offsets, np.zeros((m, 2))


# -- rollouts and evaluation ----------------------------------------------------


def rollout_episodes(act_fn, spec, episodes, rng, start_positions=None):
    """Run `episodes` full-horizon episodes in lockstep.

    act_fn(obs (m,2), rng) -> actions (m,2). Returns a dict of arrays:
    observations (m,T,2) at the pre-action positions, actions (m,T,2),
    rewards (m,T), distances (m,T), next_observations (m,T,2), and
    final_positions (m,2).
    """
    if start_positions is None:
        pos, vel = reset_batch(spec, episodes, rng)
    else:
        pos = np.array(start_positions, dtype=np.float64)
        vel = np.zeros_like(pos)
    m, horizon = pos.shape[0], spec.horizon
    obs = np.zeros((m, horizon, 2))
    nxt = np.zeros((m, horizon, 2))
    acts = np.zeros((m, horizon, 2))
    rews = np.zeros((m, horizon))
    dists = np.zeros((m, horizon))
    for t in range(horizon):
        obs[:, t] = pos
        a = act_fn(pos, rng)
        pos, vel, r, d = step_batch(pos, vel, a, spec)
        acts[:, t] = a
        rews[:, t] = r
        dists[:, t] = d
        nxt[:, t] = pos
    return {
        "observations": obs,
        "actions": acts,
        "rewards": rews,
        "distances": dists,
        "next_observations": nxt,
        "final_positions": pos,
    }


@dataclass
class EvalReport:
    mean_return: float
    std_return: float
    returns: np.ndarray
    reach_fraction: float
    min_distances: np.ndarray


def evaluate_return(act_fn, spec, episodes, rng):
    """Ground-truth undiscounted returns and goal-region reach rate."""
    roll = rollout_episodes(act_fn, spec, episodes, rng)
    returns = roll["rewards"].sum(axis=1)
    min_d = roll["distances"].min(axis=1)
    reach = float(np.mean(min_d < goal_region_radius(spec)))
    return EvalReport(
        mean_return=float(np.mean(returns)),
        std_return=float(np.std(returns)),
        returns=returns,
        reach_fraction=reach,
        min_distances=min_d,
    )


def mirror_policy(act_fn, spec):
    """Conjugate a policy by the mirror map of `spec`.

    The wrapped policy, run in mirror(spec), retraces the original policy's
    behavior in spec exactly.
    """
    xmin, xmax, _, _ = spec.bounds
    s = xmin + xmax

    def wrapped(obs, rng):
        flipped = obs.copy()
        flipped[:, 0] = s - flipped[:, 0]
        a = act_fn(flipped, rng)
        out = a.copy()
        out[:, 0] = -out[:, 0]
        return out

    return wrapped


# -- serialization --------------------------------------------------------------


def maze_to_text(spec):
    lines = [
        f"name = {spec.name}",
        "bounds = " + " ".join(repr(v) for v in spec.bounds),
        "start_mean = " + " ".join(repr(v) for v in spec.start_mean),
        f"start_radius = {spec.start_radius!r}",
        "goal = " + " ".join(repr(v) for v in spec.goal),
        f"max_accel = {spec.max_accel!r}",
        f"horizon = {spec.horizon}",
        f"action_cost = {spec.action_cost!r}",
    ]
    for w in spec.walls:
        lines.append(f"wall = {w.axis} {w.level!r} {w.lo!r} {w.hi!r}")
    return "\n".join(lines) + "\n"


def maze_from_text(text):
    fields = {}
    walls = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "wall":
            axis, level, lo, hi = value.split()
            walls.append(Wall(axis, float(level), float(lo), float(hi)))
        else:
            fields[key] = value
    def floats(key):
        return tuple(float(v) for v in fields[key].split())
    return MazeSpec(
        name=fields["name"],
        bounds=floats("bounds"),
        walls=tuple(walls),
        start_mean=floats("start_mean"),
        start_radius=float(fields["start_radius"]),
        goal=floats("goal"),
        max_accel=float(fields["max_accel"]),
        horizon=int(fields["horizon"]),
        action_cost=float(fields["action_cost"]),
    )


def save_trajectories(path, rollout):
    """Dump a rollout dict to CSV: traj, t, x, y, ax, ay, reward."""
    obs, acts, rews = rollout["observations"], rollout["actions"], rollout["rewards"]
    with open(path, "w") as fh:
        fh.write("traj,t,x,y,ax,ay,reward\n")
        for i in range(obs.shape[0]):
            for t in range(obs.shape[1]):
                fh.write(
                    f"{i},{t},{float(obs[i, t, 0])!r},{float(obs[i, t, 1])!r},"
                    f"{float(acts[i, t, 0])!r},{float(acts[i, t, 1])!r},"
                    f"{float(rews[i, t])!r}\n"
                )
