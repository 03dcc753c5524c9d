"""Command line front end: one subcommand per experiment family.

Every run serializes its full configuration (plus the package version) into
the output directory before any training starts, streams per-step metrics to
metrics.csv, and renders figures next to the delimited outputs. Exit codes:
0 success, 1 usage error, 2 training diverged, 3 a verification command
found a violation.
"""

import argparse
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from vdb_lab import __version__
from vdb_lab.bounds import bound_report
from vdb_lab.envs import (
    evaluate_return,
    maze_by_name,
    rollout_episodes,
)
from vdb_lab.envs import save_trajectories as save_rollout_csv
from vdb_lab.errors import CheckFailure, ConfigError, DivergenceError
from vdb_lab.experiment import reports
from vdb_lab.experiment.checks import run_gradient_suite, summarize_suite
from vdb_lab.experiment.config import write_config
from vdb_lab.experiment.metrics import MetricsLog, write_csv
from vdb_lab.imitation import (
    RecoveredReward,
    VailConfig,
    VairlConfig,
    transfer,
    vail_train,
    vairl_train,
)
from vdb_lab.nn import save_checkpoint
from vdb_lab.rl import DemoSet, ExpertConfig, load_demos, save_demos, train_expert
from vdb_lab.synth import (
    DiscStudyConfig,
    VganConfig,
    between_modes_band,
    decision_grids,
    gaussian,
    ring,
    train_discriminator_only,
    train_vgan,
    two_gaussians,
)

OUTPUT_ROOT_ENV = "VDB_LAB_OUT"

# study pair for the decision-boundary runs: far enough apart that an
# unconstrained classifier separates them essentially perfectly
STUDY_MEAN_A = (-4.0, 0.0)
STUDY_MEAN_B = (4.0, 0.0)

# per-maze defaults; the tighter S-maze needs a smaller budget and penalty
MAZE_KL_TARGET = {"c": 0.5, "s": 0.05}
MAZE_GP = {"c": 0.1, "s": 0.01}

_SALT_EXPERT = 104729
_SALT_TRAJ = 1299709


class UsageError(Exception):
    """Bad flags or flag values; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _derived_seed(seed, salt):
    """Independent 64-bit seed for a side activity (expert prep, dumps)."""
    return int(np.random.SeedSequence([int(seed), salt]).generate_state(1, np.uint64)[0])


def _resolve_out(arg, kind):
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    out = Path(arg) if arg else root / kind
    out.mkdir(parents=True, exist_ok=True)
    return out


def _layers_text(layers):
    return ",".join(f"{width}:{act}" for width, act in layers)


def _flatten_config(prefix, cfg):
    """Dataclass -> flat dotted key/value pairs for the run echo."""
    flat = {}

    def walk(prefix, mapping):
        for key, value in mapping.items():
            name = f"{prefix}.{key}"
            if isinstance(value, dict):
                walk(name, value)
            elif isinstance(value, tuple):
                flat[name] = _layers_text(value)
            else:
                flat[name] = value

    walk(prefix, asdict(cfg))
    return flat


def _parse_ic(text):
    if text.strip().lower() == "inf":
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--ic expects a number or 'inf', got {text!r}") from None


def _position_grid(spec, resolution=61):
    xmin, xmax, ymin, ymax = spec.bounds
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    gx, gy = np.meshgrid(xs, ys)
    return xs, ys, np.stack([gx.ravel(), gy.ravel()], axis=1)


def _write_grid(path, xs, ys, grid, value_key):
    rows = []
    for iy in range(len(ys)):
        for ix in range(len(xs)):
            rows.append((float(xs[ix]), float(ys[iy]), float(grid[iy, ix])))
    write_csv(path, ["x", "y", value_key], rows)


def _dump_trajectories(out, policy, spec, seed, episodes=8):
    """Deterministic-policy rollouts as CSV plus a maze overlay figure."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _SALT_TRAJ]))
    roll = rollout_episodes(policy.as_act_fn(deterministic=True), spec, episodes, rng)
    save_rollout_csv(out / "trajectories.csv", roll)
    paths = [
        np.vstack([roll["observations"][i], roll["final_positions"][i][None, :]])
        for i in range(episodes)
    ]
    reports.save_trajectories(out / "trajectories.png", spec, paths)


def _load_or_train_demos(args, spec, out):
    """Demonstrations from --demos, or a freshly trained expert saved in-run."""
    if args.demos:
        path = Path(args.demos)
        if path.suffix == ".npz":
            return DemoSet.load(path)
        return load_demos(path)
    expert_seed = _derived_seed(args.seed, _SALT_EXPERT)
    print(f"no --demos given; training an expert first (seed {expert_seed})")
    result = train_expert(spec, ExpertConfig(), seed=expert_seed)
    if not result.reached_goal:
        raise DivergenceError(f"expert preparation failed: {result.failure}")
    save_demos(out / "demos.csv", result.demos)
    print(f"expert return {result.mean_return:.2f}, "
          f"reach {result.reach_fraction:.2f}; demos -> {out / 'demos.csv'}")
    return result.demos


# -- vgan ------------------------------------------------------------------


def cmd_vgan(args):
    out = _resolve_out(args.out, "vgan")
    if args.target == "ring8":
        target = ring()
    elif args.target == "two-gaussians":
        target = two_gaussians()
    else:
        raise UsageError(f"unknown --target {args.target!r}")
    cfg = VganConfig(
        kl_target=args.ic,
        steps=args.steps,
        fixed_beta=args.fixed_beta,
        gp_coefficient=args.gp,
    )
    echo = {"task": "vgan", "target": args.target, "seed": args.seed}
    echo.update(_flatten_config("vgan", cfg))
    write_config(out / "run_config.txt", echo)

    fields = ["step", "disc_loss", "gen_loss", "batch_kl", "beta", "gp_term",
              "mode_coverage"]
    with MetricsLog(out / "metrics.csv", fields) as log:
        result = train_vgan(target, cfg, seed=args.seed, on_step=log.log)

    write_csv(out / "samples.csv", ["x", "y"],
              [(float(x), float(y)) for x, y in result.final_samples])
    xs, ys, d_grid, g_grid = decision_grids(result.encoder, result.head)
    _write_grid(out / "grid_D.csv", xs, ys, d_grid, "d")
    _write_grid(out / "grid_gradnorm.csv", xs, ys, g_grid, "gradnorm")
    save_checkpoint(
        out / "model.npz",
        result.generator.named_parameters("gen.")
        + result.encoder.named_parameters("enc.")
        + result.head.named_parameters("disc."),
        meta={"kind": "vgan", "target": args.target, "seed": args.seed,
              "beta": result.dual.beta},
    )

    reports.save_scatter(out / "samples.png", result.final_samples, target=target,
                         title="generated samples")
    reports.save_curves(out / "loss_curves.png", result.metrics, "step",
                        ["disc_loss", "gen_loss"], title="adversarial losses")
    kl_ref = cfg.kl_target if math.isfinite(cfg.kl_target) else None
    reports.save_curves(out / "kl_curve.png", result.metrics, "step",
                        ["batch_kl", "beta"], title="KL budget and multiplier",
                        reference=kl_ref)
    reports.save_heatmap(out / "grid_D.png", xs, ys, d_grid,
                         title="discriminator output", colorbar_label="D")
    reports.save_heatmap(out / "grid_gradnorm.png", xs, ys, g_grid,
                         title="input-gradient magnitude", colorbar_label="|dD/dx|")

    tail = result.kl_history[-min(1000, len(result.kl_history)):]
    coverage = result.coverage_history[-1][1] if result.coverage_history else "n/a"
    print(f"vgan done: {cfg.steps} steps, trailing KL {tail.mean():.4f}, "
          f"final beta {result.dual.beta:.4f}, mode coverage {coverage}")
    print(f"artifacts in {out}")
    return 0


# -- fig2-style discriminator study -----------------------------------------


def cmd_fig2(args):
    out = _resolve_out(args.out, "fig2")
    tags = [t.strip() for t in args.ic.split(",") if t.strip()]
    if not tags:
        raise UsageError("--ic needs at least one value")
    values = [_parse_ic(t) for t in tags]
    echo = {"task": "fig2", "seed": args.seed, "steps": args.steps,
            "ic": args.ic, "mean_a": f"{STUDY_MEAN_A}", "mean_b": f"{STUDY_MEAN_B}"}
    write_config(out / "run_config.txt", echo)

    dist_a = gaussian(STUDY_MEAN_A, 1.0)
    dist_b = gaussian(STUDY_MEAN_B, 1.0)
    summary = []
    for tag, ic in zip(tags, values):
        cfg = DiscStudyConfig(kl_target=ic, steps=args.steps)
        fields = ["step", "disc_loss", "batch_kl", "beta", "train_accuracy"]
        with MetricsLog(out / f"metrics_{tag}.csv", fields) as log:
            res = train_discriminator_only(dist_a, dist_b, cfg, seed=args.seed,
                                           on_step=log.log)
        xs, ys, d_grid, g_grid = decision_grids(res.encoder, res.head)
        _write_grid(out / f"grid_D_{tag}.csv", xs, ys, d_grid, "d")
        _write_grid(out / f"grid_gradnorm_{tag}.csv", xs, ys, g_grid, "gradnorm")
        reports.save_heatmap(out / f"grid_D_{tag}.png", xs, ys, d_grid,
                             title=f"D, ic={tag}", colorbar_label="D")
        reports.save_heatmap(out / f"grid_gradnorm_{tag}.png", xs, ys, g_grid,
                             title=f"|dD/dx|, ic={tag}", colorbar_label="|dD/dx|")
        band = between_modes_band(xs, ys, STUDY_MEAN_A, STUDY_MEAN_B)
        row = {
            "ic": ic,
            "accuracy": res.accuracy,
            "mean_accuracy": res.mean_accuracy,
            "max_gradnorm": float(g_grid.max()),
            "band_gradnorm": float(g_grid[band].mean()),
            "final_beta": res.dual.beta,
            "tail_kl": float(res.kl_history[-min(200, len(res.kl_history)):].mean()),
        }
        summary.append(row)
        print(f"ic={tag}: accuracy {row['accuracy']:.4f} "
              f"max |dD/dx| {row['max_gradnorm']:.4f} "
              f"band |dD/dx| {row['band_gradnorm']:.5f}")
    write_csv(out / "summary.csv", list(summary[0]), [list(r.values()) for r in summary])
    print(f"artifacts in {out}")
    return 0


# -- imitation ---------------------------------------------------------------


def _parse_vail_beta_mode(text):
    if text in ("adaptive", "zero", "none"):
        return text, None
    if text.startswith("fixed:"):
        try:
            return "fixed", float(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad fixed beta value in {text!r}") from None
    raise UsageError(
        f"--beta-mode must be adaptive, zero, none, or fixed:X, got {text!r}"
    )


def _parse_vairl_beta_mode(text):
    if text == "adaptive":
        return "adaptive"
    if text in ("zero", "fixed:0", "fixed:0.0"):
        return "fixed-zero"
    raise UsageError(f"--beta-mode must be adaptive or zero for vairl, got {text!r}")


def _maze_ic_gp(args):
    spec = maze_by_name(args.maze)
    base = args.maze.partition("-")[0]
    ic = args.ic if args.ic is not None else MAZE_KL_TARGET[base]
    gp = args.gp if args.gp is not None else MAZE_GP[base]
    return spec, ic, gp


def run_vail(out, spec, cfg, seed, demos, extra_echo=()):
    """One VAIL run with the full artifact set; returns the result."""
    echo = {"task": "vail", "seed": seed}
    echo.update(extra_echo)
    echo.update(_flatten_config("vail", cfg))
    write_config(out / "run_config.txt", echo)
    fields = ["iteration", "env_return", "disc_reward", "batch_kl", "beta",
              "disc_accuracy"]
    with MetricsLog(out / "metrics.csv", fields) as log:
        result = vail_train(demos, spec, cfg, seed=seed, on_iteration=log.log)

    xs, ys, points = _position_grid(spec)
    grid = result.discriminator.reward(points).reshape(len(ys), len(xs))
    _write_grid(out / "reward_grid.csv", xs, ys, grid, "reward")
    reports.save_heatmap(out / "reward_grid.png", xs, ys, grid,
                         title="discriminator reward", colorbar_label="r",
                         overlays=((spec.goal, "goal"),))
    save_checkpoint(out / "policy.npz", result.policy.named_parameters(),
                    meta={"kind": "policy", "seed": seed})
    save_checkpoint(out / "discriminator.npz",
                    result.discriminator.named_parameters(),
                    meta={"kind": "vail-discriminator", "seed": seed,
                          "beta": result.discriminator.dual.beta,
                          "kl_target": cfg.kl_target})
    _dump_trajectories(out, result.policy, spec, seed)
    reports.save_curves(out / "return_curve.png", result.metrics, "iteration",
                        ["env_return"], title="environment return")
    reports.save_curves(out / "kl_curve.png", result.metrics, "iteration",
                        ["batch_kl", "beta"], title="KL budget and multiplier",
                        reference=cfg.kl_target)
    return result


def run_vairl(out, spec, cfg, seed, demos, extra_echo=()):
    """One VAIRL run; also saves the recovered reward for transfer."""
    echo = {"task": "vairl", "seed": seed}
    echo.update(extra_echo)
    echo.update(_flatten_config("vairl", cfg))
    write_config(out / "run_config.txt", echo)
    fields = ["iteration", "env_return", "disc_reward", "batch_kl", "beta",
              "disc_accuracy"]
    with MetricsLog(out / "metrics.csv", fields) as log:
        result = vairl_train(demos, spec, cfg, seed=seed, on_iteration=log.log)

    xs, ys, grid = result.recovered.grid(spec)
    _write_grid(out / "reward_grid.csv", xs, ys, grid, "reward")
    reports.save_heatmap(out / "reward_grid.png", xs, ys, grid,
                         title="recovered reward", colorbar_label="g",
                         overlays=((spec.goal, "goal"),))
    save_checkpoint(out / "policy.npz", result.policy.named_parameters(),
                    meta={"kind": "policy", "seed": seed})
    save_checkpoint(out / "discriminator.npz",
                    result.discriminator.named_parameters(),
                    meta={"kind": "vairl-discriminator", "seed": seed,
                          "beta": result.discriminator.dual.beta,
                          "kl_target": cfg.kl_target})
    result.recovered.save(out / "recovered_reward.npz")
    _dump_trajectories(out, result.policy, spec, seed)
    reports.save_curves(out / "return_curve.png", result.metrics, "iteration",
                        ["env_return"], title="environment return")
    reports.save_curves(out / "kl_curve.png", result.metrics, "iteration",
                        ["batch_kl", "beta"], title="KL budget and multiplier",
                        reference=cfg.kl_target)
    return result


def cmd_vail(args):
    out = _resolve_out(args.out, "vail")
    spec, ic, gp = _maze_ic_gp(args)
    mode, fixed_beta = _parse_vail_beta_mode(args.beta_mode)
    cfg = VailConfig(
        kl_target=ic,
        gp_coefficient=gp,
        beta_mode=mode,
        fixed_beta=fixed_beta,
        iterations=args.iterations,
        episodes_per_iter=args.episodes,
    )
    demos = _load_or_train_demos(args, spec, out)
    result = run_vail(out, spec, cfg, args.seed, demos, {"maze": args.maze})
    print(f"vail done: return {result.mean_return:.2f}, "
          f"reach {result.reach_fraction:.2f}, "
          f"final beta {result.discriminator.dual.beta:.4f}")
    print(f"artifacts in {out}")
    return 0


def cmd_vairl(args):
    out = _resolve_out(args.out, "vairl")
    spec, ic, gp = _maze_ic_gp(args)
    cfg = VairlConfig(
        kl_target=ic,
        gp_coefficient=gp,
        beta_mode=_parse_vairl_beta_mode(args.beta_mode),
        iterations=args.iterations,
        episodes_per_iter=args.episodes,
    )
    demos = _load_or_train_demos(args, spec, out)
    result = run_vairl(out, spec, cfg, args.seed, demos, {"maze": args.maze})
    print(f"vairl done: return {result.mean_return:.2f}, "
          f"reach {result.reach_fraction:.2f}; "
          f"recovered reward -> {out / 'recovered_reward.npz'}")
    print(f"artifacts in {out}")
    return 0


def cmd_transfer(args):
    out = _resolve_out(args.out, "transfer")
    spec = maze_by_name(args.maze)
    try:
        recovered = RecoveredReward.load(args.reward)
    except FileNotFoundError:
        raise UsageError(f"--reward checkpoint not found: {args.reward}") from None
    echo = {"task": "transfer", "maze": args.maze, "seed": args.seed,
            "reward": str(args.reward), "iterations": args.iterations}
    write_config(out / "run_config.txt", echo)
    fields = ["iteration", "env_return", "recovered_reward"]
    with MetricsLog(out / "metrics.csv", fields) as log:
        result = transfer(recovered, spec, seed=args.seed,
                          iterations=args.iterations, on_iteration=log.log)
    save_checkpoint(out / "policy.npz", result.policy.named_parameters(),
                    meta={"kind": "policy", "seed": args.seed})
    _dump_trajectories(out, result.policy, spec, args.seed)
    reports.save_curves(out / "return_curve.png", result.metrics, "iteration",
                        ["env_return", "recovered_reward"],
                        title="transfer optimization")
    print(f"transfer done: return {result.mean_return:.2f} "
          f"(+/- {result.std_return:.2f}), reach {result.reach_fraction:.2f}")
    print(f"artifacts in {out}")
    return 0


# -- verification commands ---------------------------------------------------


def _parse_grid_spec(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--ic-grid expects lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--ic-grid expects lo:hi:n, got {text!r}") from None
    if lo <= 0 or hi <= lo or n < 2:
        raise UsageError("--ic-grid needs 0 < lo < hi and n >= 2")
    # log spacing: the interesting regime spans decades and the small-budget
    # limit lives at the left edge
    return np.geomspace(lo, hi, n)


def cmd_bounds(args):
    grid = _parse_grid_spec(args.ic_grid)
    if args.out:
        out_file = Path(args.out)
    else:
        out_file = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / "bounds" / "report.csv"
    out_file.parent.mkdir(parents=True, exist_ok=True)

    report = bound_report(args.k, grid)
    rows = list(report.rows())
    write_csv(out_file, list(rows[0]), [list(r.values()) for r in rows])
    reports.save_curves(out_file.with_name("bounds.png"), rows, "ic",
                        ["lower", "upper"], title=f"variance bounds, K={args.k}",
                        logy=True)
    reports.save_curves(out_file.with_name("coefficient.png"), rows, "ic",
                        ["log_coefficient"],
                        title=f"log coefficient floor, K={args.k}")

    verdicts = {
        "lower < upper everywhere": report.ordering_strict,
        "lower strictly decreasing": report.lower_decreasing,
        "upper strictly increasing": report.upper_increasing,
        "coefficient strictly decreasing": report.coefficient_decreasing,
        "coefficient positive": report.coefficient_positive,
    }
    for name, ok in verdicts.items():
        print(f"{'pass' if ok else 'FAIL'}: {name}")
    print(f"small-budget coefficient {report.limit_estimate:.6e} "
          f"(analytic limit {report.limit_analytic:.6e})")
    print(f"report -> {out_file}")
    if not all(verdicts.values()):
        raise CheckFailure("one or more bound shape checks failed")
    return 0


def cmd_gradcheck(args):
    results = run_gradient_suite(args.configs, seed=args.seed)
    if args.out:
        out = _resolve_out(args.out, "gradcheck")
        rows = [
            (r.family, r.seed, r.ok, r.worst.get("name") or "",
             float(r.worst.get("error", 0.0)))
            for r in results
        ]
        write_csv(out / "gradcheck.csv",
                  ["family", "case", "ok", "worst_param", "worst_error"], rows)
        print(f"report -> {out / 'gradcheck.csv'}")
    failures = 0
    for family, (passed, total) in summarize_suite(results).items():
        print(f"{family:20s} {passed}/{total}")
        failures += total - passed
    if failures:
        raise CheckFailure(f"{failures} of {len(results)} configurations failed")
    print(f"all {len(results)} configurations matched finite differences")
    return 0


# -- sweep -------------------------------------------------------------------


def _sweep_child_cfg(task, axis, value, args):
    """Config for one sweep child; returns (cfg, value_tag)."""
    base = args.maze.partition("-")[0]
    ic = args.ic if args.ic is not None else MAZE_KL_TARGET[base]
    gp = args.gp if args.gp is not None else MAZE_GP[base]
    beta_mode = "adaptive"
    fixed_beta = None
    if axis == "beta-mode":
        if task == "vail":
            beta_mode, fixed_beta = _parse_vail_beta_mode(value)
        else:
            beta_mode = _parse_vairl_beta_mode(value)
    elif axis == "ic":
        ic = _parse_ic(value)
    elif axis == "gp":
        try:
            gp = float(value)
        except ValueError:
            raise UsageError(f"--axis gp expects numbers, got {value!r}") from None
    else:
        raise UsageError(f"--axis must be beta-mode, ic, or gp, got {axis!r}")

    if task == "vail":
        cfg = VailConfig(kl_target=ic, gp_coefficient=gp, beta_mode=beta_mode,
                         fixed_beta=fixed_beta, iterations=args.iterations,
                         episodes_per_iter=args.episodes)
    else:
        cfg = VairlConfig(kl_target=ic, gp_coefficient=gp, beta_mode=beta_mode,
                          iterations=args.iterations,
                          episodes_per_iter=args.episodes)
    return cfg, value.replace(":", "-")


def cmd_sweep(args):
    out = _resolve_out(args.out, "sweep")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise UsageError("--values needs at least one entry")
    if args.task not in ("vail", "vairl"):
        raise UsageError(f"--task must be vail or vairl, got {args.task!r}")
    spec = maze_by_name(args.maze)
    demos = _load_or_train_demos(args, spec, out)

    echo = {"task": f"sweep/{args.task}", "axis": args.axis, "values": args.values,
            "maze": args.maze, "seeds": args.seeds, "seed": args.seed,
            "iterations": args.iterations, "episodes": args.episodes}
    write_config(out / "run_config.txt", echo)

    runner = run_vail if args.task == "vail" else run_vairl
    summary = []
    for value in values:
        cfg, tag = _sweep_child_cfg(args.task, args.axis, value, args)
        for k in range(args.seeds):
            seed = args.seed + k
            child_out = out / tag / f"seed{seed}"
            child_out.mkdir(parents=True, exist_ok=True)
            row = {"value": value, "seed": seed, "status": "ok",
                   "mean_return": "", "reach_fraction": "",
                   "final_kl": "", "final_beta": ""}
            try:
                result = runner(child_out, spec, cfg, seed, demos,
                                {"maze": args.maze, "sweep_value": value})
                last = result.metrics[-1]
                row.update(mean_return=result.mean_return,
                           reach_fraction=result.reach_fraction,
                           final_kl=last["batch_kl"], final_beta=last["beta"])
                print(f"{value} seed {seed}: return {result.mean_return:.2f}, "
                      f"reach {result.reach_fraction:.2f}")
            except DivergenceError as exc:
                # a diverged child is a data point, not a sweep failure
                row["status"] = f"diverged: {exc}"
                print(f"{value} seed {seed}: diverged ({exc})", file=sys.stderr)
            summary.append(row)

    write_csv(out / "summary.csv", list(summary[0]),
              [list(r.values()) for r in summary])
    med_rows = []
    for value in values:
        good = [r for r in summary if r["value"] == value and r["status"] == "ok"]
        med_rows.append({
            "value": value,
            "runs_ok": len(good),
            "median_return": float(np.median([r["mean_return"] for r in good]))
            if good else "",
            "median_reach": float(np.median([r["reach_fraction"] for r in good]))
            if good else "",
        })
    write_csv(out / "medians.csv", list(med_rows[0]),
              [list(r.values()) for r in med_rows])
    for r in med_rows:
        print(f"{r['value']}: {r['runs_ok']} ok, median return {r['median_return']}, "
              f"median reach {r['median_reach']}")
    print(f"artifacts in {out}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="vdb-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(run=fn)
        p.add_argument("--seed", type=int, default=0, help="global 64-bit run seed")
        p.add_argument("--out", default=None,
                       help=f"output directory (default ${OUTPUT_ROOT_ENV} or ./runs)")
        return p

    p = add("vgan", cmd_vgan, "adversarial generation on a 2D mixture")
    p.add_argument("--target", default="ring8", help="ring8 | two-gaussians")
    p.add_argument("--ic", type=_parse_ic, default=0.5, help="KL budget (or 'inf')")
    p.add_argument("--steps", type=int, default=VganConfig.steps)
    p.add_argument("--fixed-beta", type=float, default=None,
                   help="pin beta and disable the dual update")
    p.add_argument("--gp", type=float, default=0.0, help="gradient penalty weight")

    p = add("fig2", cmd_fig2, "decision-boundary study across KL budgets")
    p.add_argument("--ic", default="inf,1.0,0.5,0.1",
                   help="comma list of budgets; 'inf' is the unconstrained baseline")
    p.add_argument("--steps", type=int, default=DiscStudyConfig.steps)

    for name, fn, help_text in (
        ("vail", cmd_vail, "adversarial imitation on a maze"),
        ("vairl", cmd_vairl, "inverse RL with a recovered reward"),
    ):
        p = add(name, fn, help_text)
        p.add_argument("--maze", default="c", help="c | s")
        p.add_argument("--ic", type=_parse_ic, default=None,
                       help="KL budget (default 0.5 on c, 0.05 on s)")
        p.add_argument("--gp", type=float, default=None,
                       help="gradient penalty weight (default 0.1 on c, 0.01 on s)")
        if name == "vail":
            p.add_argument("--beta-mode", default="adaptive",
                           help="adaptive | zero | none | fixed:X")
            p.add_argument("--iterations", type=int, default=VailConfig.iterations)
            p.add_argument("--episodes", type=int,
                           default=VailConfig.episodes_per_iter)
        else:
            p.add_argument("--beta-mode", default="adaptive", help="adaptive | zero")
            p.add_argument("--iterations", type=int, default=VairlConfig.iterations)
            p.add_argument("--episodes", type=int,
                           default=VairlConfig.episodes_per_iter)
        p.add_argument("--demos", default=None,
                       help="demonstration file (.csv or .npz); trains an expert if omitted")

    p = add("transfer", cmd_transfer, "retrain on a recovered reward, maze may be mirrored")
    p.add_argument("--reward", required=True, help="recovered_reward.npz from a vairl run")
    p.add_argument("--maze", required=True, help="c | s | c-mirrored | s-mirrored")
    p.add_argument("--iterations", type=int, default=300)

    p = add("bounds", cmd_bounds, "closed-form capacity bounds on a budget grid")
    p.add_argument("--k", type=int, default=2, help="latent dimension")
    p.add_argument("--ic-grid", default="0.001:10:100", help="lo:hi:n (log spaced)")
    # --out is a file here, not a directory
    for action in p._actions:
        if action.dest == "out":
            action.help = "report CSV path (default $%s/bounds/report.csv)" % OUTPUT_ROOT_ENV

    p = add("gradcheck", cmd_gradcheck, "finite-difference audit of every gradient path")
    p.add_argument("--configs", type=int, default=100)

    p = add("sweep", cmd_sweep, "run one axis over several values and seeds")
    p.add_argument("--task", default="vail", help="vail | vairl")
    p.add_argument("--axis", default="beta-mode", help="beta-mode | ic | gp")
    p.add_argument("--values", required=True,
                   help="comma list, e.g. fixed:0,fixed:0.1,adaptive")
    p.add_argument("--seeds", type=int, default=5, help="seeds per value (seed..seed+n-1)")
    p.add_argument("--maze", default="c", help="c | s")
    p.add_argument("--ic", type=_parse_ic, default=None)
    p.add_argument("--gp", type=float, default=None)
    p.add_argument("--iterations", type=int, default=VailConfig.iterations)
    p.add_argument("--episodes", type=int, default=VailConfig.episodes_per_iter)
    p.add_argument("--demos", default=None,
                   help="demonstration file shared by every child run")

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.run(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 2
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
