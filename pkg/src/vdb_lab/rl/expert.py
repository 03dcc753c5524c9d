"""Expert training on ground-truth reward and demonstration management."""

from dataclasses import dataclass, field

import numpy as np

from vdb_lab.envs import evaluate_return, goal_region_radius, reset_batch, step_batch
from vdb_lab.errors import ConfigError
from vdb_lab.rl.policy import GaussianPolicy, ValueNet
from vdb_lab.rl.ppo import PpoConfig, ppo_update
from vdb_lab.rl.rollout import collect
from vdb_lab.nn.optim import make_optimizer


@dataclass(frozen=True)
class ExpertConfig:
    iterations: int = 300
    episodes_per_iter: int = 32
    ppo: PpoConfig = field(default_factory=PpoConfig)
    eval_every: int = 25
    eval_episodes: int = 50
    demo_count: int = 100
    reach_threshold: float = 0.8

    def __post_init__(self):
        if self.iterations < 1 or self.episodes_per_iter < 1:
            raise ConfigError("iterations and episodes_per_iter must be positive")
        if self.demo_count < 1:
            raise ConfigError("demo_count must be positive")


@dataclass
class DemoSet:
    """Expert trajectories: states, actions, and successor states."""

    observations: np.ndarray  # (n, T, 2)
    actions: np.ndarray  # (n, T, 2)
    next_observations: np.ndarray  # (n, T, 2)

    @property
    def count(self):
        return self.observations.shape[0]

    def states(self):
        return self.observations.reshape(-1, 2)

    def transitions(self):
        flat = self.observations.reshape(-1, 2)
        return flat, self.actions.reshape(-1, 2), self.next_observations.reshape(-1, 2)

    def save(self, path):
        np.savez(
            path,
            observations=self.observations,
            actions=self.actions,
            next_observations=self.next_observations,
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            return cls(
                observations=data["observations"],
                actions=data["actions"],
                next_observations=data["next_observations"],
            )


@dataclass
class ExpertResult:
    policy: GaussianPolicy
    value_net: ValueNet
    demos: DemoSet
    metrics: list
    mean_return: float
    reach_fraction: float
    reached_goal: bool
    failure: str | None


def collect_demos(policy, spec, count, rng):
    """Sample full episodes from the (stochastic) policy as demonstrations."""
    pos, vel = reset_batch(spec, count, rng)
    horizon = spec.horizon
    obs = np.zeros((count, horizon, 2))
    acts = np.zeros((count, horizon, 2))
    nxt = np.zeros((count, horizon, 2))
    for t in range(horizon):
        obs[:, t] = pos
        a, _ = policy.act(pos, rng)
        pos, vel, _, _ = step_batch(pos, vel, a, spec)
        acts[:, t] = a
        nxt[:, t] = pos
    return DemoSet(observations=obs, actions=acts, next_observations=nxt)


def replay_demos(demos, spec):
    """Re-run logged actions open loop; returns the reproduced observations."""
    pos = demos.observations[:, 0].copy()
    vel = np.zeros_like(pos)
    out = np.zeros_like(demos.observations)
    for t in range(demos.observations.shape[1]):
        out[:, t] = pos
        pos, vel, _, _ = step_batch(pos, vel, demos.actions[:, t], spec)
    return out


def train_expert(spec, cfg, seed=0, on_iteration=None):
    """PPO on the ground-truth maze reward; gates on goal-reach rate."""
    root = np.random.SeedSequence(seed)
    init_ss, roll_ss, update_ss, eval_ss, demo_ss = root.spawn(5)
    init_rng = np.random.default_rng(init_ss)
    roll_rng = np.random.default_rng(roll_ss)
    update_rng = np.random.default_rng(update_ss)

    policy = GaussianPolicy(2, 2, init_rng, log_std_init=float(np.log(0.5 * spec.max_accel)))
    value_net = ValueNet(2, init_rng)
    policy_opt = make_optimizer(cfg.ppo.optimizer, policy.named_parameters(), cfg.ppo.policy_lr)
    value_opt = make_optimizer(cfg.ppo.optimizer, value_net.named_parameters(), cfg.ppo.value_lr)

    metrics = []
    for it in range(cfg.iterations):
        batch = collect(policy, spec, cfg.episodes_per_iter, roll_rng,
                        reward_source="env", value_net=value_net,
                        gamma=cfg.ppo.gamma, lam=cfg.ppo.lam)
        stats = ppo_update(policy, value_net, policy_opt, value_opt, batch, cfg.ppo, update_rng)
        mean_return = float(batch.env_rewards.reshape(cfg.episodes_per_iter, -1).sum(axis=1).mean())
        row = {
            "iteration": it,
            "mean_return": mean_return,
            "policy_loss": stats.policy_loss,
            "value_loss": stats.value_loss,
            "clip_fraction": stats.clip_fraction,
            "approx_kl": stats.approx_kl,
            "entropy": stats.entropy,
        }
        metrics.append(row)
        if on_iteration is not None:
            on_iteration(row)

    eval_rng = np.random.default_rng(eval_ss)
    report = evaluate_return(policy.as_act_fn(), spec, cfg.eval_episodes, eval_rng)
    reached = report.reach_fraction >= cfg.reach_threshold
    failure = None
    if not reached:
        failure = (
            f"expert reached the goal region (radius {goal_region_radius(spec):.3g}) in "
            f"{report.reach_fraction:.0%} of evaluation episodes; needs {cfg.reach_threshold:.0%}"
        )
    demos = collect_demos(policy, spec, cfg.demo_count, np.random.default_rng(demo_ss))
    return ExpertResult(
        policy=policy,
        value_net=value_net,
        demos=demos,
        metrics=metrics,
        mean_return=report.mean_return,
        reach_fraction=report.reach_fraction,
        reached_goal=reached,
        failure=failure,
    )


def save_demos(path, demos):
    with open(path, "w") as fh:
        fh.write("traj,t,x,y,ax,ay,x_next,y_next\n")
        obs, acts, nxt = demos.observations, demos.actions, demos.next_observations
        for i in range(obs.shape[0]):
            for t in range(obs.shape[1]):
                # shortest-round-trip float repr keeps the file exact
                fh.write(
                    f"{i},{t},{float(obs[i, t, 0])!r},{float(obs[i, t, 1])!r},"
                    f"{float(acts[i, t, 0])!r},{float(acts[i, t, 1])!r},"
                    f"{float(nxt[i, t, 0])!r},{float(nxt[i, t, 1])!r}\n"
                )


def load_demos(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    if rows.ndim == 1:
        rows = rows[None, :]
    n_traj = int(rows[:, 0].max()) + 1
    horizon = int(rows[:, 1].max()) + 1
    if rows.shape[0] != n_traj * horizon:
        raise ConfigError(f"demo file is ragged: {rows.shape[0]} rows for "
                          f"{n_traj} trajectories x {horizon} steps")
    order = np.lexsort((rows[:, 1], rows[:, 0]))
    rows = rows[order]
    obs = rows[:, 2:4].reshape(n_traj, horizon, 2)
    acts = rows[:, 4:6].reshape(n_traj, horizon, 2)
    nxt = rows[:, 6:8].reshape(n_traj, horizon, 2)
    return DemoSet(observations=obs, actions=acts, next_observations=nxt)
