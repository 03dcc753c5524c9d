from vdb_lab.envs.maze import (
    EnvState,
    EvalReport,
    MazeSpec,
    StepResult,
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
    save_trajectories,
    step,
    step_batch,
    s_maze,
)

__all__ = [
    "EnvState",
    "EvalReport",
    "MazeSpec",
    "StepResult",
    "Wall",
    "c_maze",
    "evaluate_return",
    "goal_region_radius",
    "maze_by_name",
    "maze_from_text",
    "maze_to_text",
    "mirror",
    "mirror_policy",
    "reset",
    "rollout_episodes",
    "s_maze",
    "save_trajectories",
    "step",
    "step_batch",
]
