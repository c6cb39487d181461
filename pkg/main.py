# main.py
"""
Command-line entry point: collect, train, plan, eval, analyze, dump, config.

Every command resolves defaults <- --config file <- flags, writes the resolved
configuration to its output directory before doing any work, and finishes
with a manifest of input and output hashes.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 incompatibility.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from colorama import Fore, Style, init as colorama_init

from agents import BaseAgent, RandomDeltaAgent, ValueGuidedMPCAgent
from analysis import (
    empirical_variance, containment_grid, qvalue_map, filtered_latent_at, dump_rollout, rollout_mse,
    dump_latents, latent_centroids,
)
from config.settings import (
    Config, RUN_DEFAULTS, load_kv_file, dump_kv, resolve_run_config, parse_int_list, parse_grid,
)
from dataset import collect, save as save_dataset, load as load_dataset
from envs import ContactEnv, EnvConfig
from models import (
    NoiseModel, Objective, PlanConfig, TaskKind, BOUND_REPORT_COLUMNS, validate_plan_config,
)
from planner import control_loop, write_episode_csv, LoopSummary, SUMMARY_COLUMNS
from utils.csv_io import write_csv
from utils.error_handler import ErrorHandler, IncompatibleModelError, UsageError, WorldModelError
from utils.hashing import file_sha256
from utils.structured_logger import (
    setup_logging, log_command_start, log_command_complete, log_plan_summary,
)
from worldmodel import ModelConfig, ModelSnapshot, load_model, save_model, train

logger = logging.getLogger("main")

RESOLVED_CONFIG = "resolved_config.txt"
MANIFEST = "manifest.json"


# ──────────────────────────────────────────────────────────────
# Configuration plumbing
# ──────────────────────────────────────────────────────────────
def run_defaults() -> Dict[str, Any]:
    """Every key a command may consume: run/collect/model/plan/eval/analysis plus env.*"""
    return {**RUN_DEFAULTS, **EnvConfig().to_kv()}


def resolve(args: argparse.Namespace) -> Dict[str, Any]:
    file_values = load_kv_file(args.config) if args.config else {}
    flags = {key: value for key, value in vars(args).items() if "." in key and value is not None}
    return resolve_run_config(file_values, flags, defaults=run_defaults())


def parse_task(text: str) -> TaskKind:
    try:
        return TaskKind.parse(text)
    except ValueError as e:
        raise UsageError(str(e)) from e


def plan_config_from(run: Dict[str, Any], **overrides) -> PlanConfig:
    try:
        config = PlanConfig.from_run_config(run).with_overrides(**overrides)
    except ValueError as e:
        raise UsageError(f"Invalid planner configuration: {e}") from e
    validate_plan_config(config).raise_if_invalid("planner configuration")
    return config


def objectives_from(text: str) -> List[Objective]:
    try:
        return [Objective(part.strip().lower()) for part in str(text).split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"Unknown objective in '{text}', expected javg, rew or td") from e


class Run:
    """Output directory bookkeeping for one command invocation."""

    def __init__(self, command: str, run: Dict[str, Any], out_dir: Path):
        self.command = command
        self.run = run
        self.out_dir = out_dir
        self.inputs: Dict[str, str] = {}
        self.outputs: List[Path] = []
        self.started = time.perf_counter()

    def begin(self) -> "Run":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / RESOLVED_CONFIG).write_text(dump_kv(self.run), encoding="utf-8")
        log_command_start(self.command, out_dir=str(self.out_dir))
        return self

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path) -> Path:
        path = Path(path)
        self.outputs.append(path)
        return path

    def finish(self) -> float:
        duration = time.perf_counter() - self.started
        manifest = {
            'command': self.command,
            'seed': self.run.get("run.seed"),
            'resolved_config': RESOLVED_CONFIG,
            'inputs': self.inputs,
            'outputs': {str(p): file_sha256(p) for p in self.outputs if p.is_file()},
            'duration_s': round(duration, 3),
        }
        with open(self.out_dir / MANIFEST, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        log_command_complete(self.command, "success", duration)
        return duration


def output_dir(args: argparse.Namespace, out_file: Optional[str] = None) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    if out_file:
        return Path(out_file).parent
    return Path(Config.OUTPUT_DIR) / args.command


def say(text: str, color: str = Fore.GREEN) -> None:
    print(f"{color}{text}{Style.RESET_ALL}")


# ──────────────────────────────────────────────────────────────
# Commands
# ──────────────────────────────────────────────────────────────
def cmd_collect(args: argparse.Namespace) -> int:
    run = resolve(args)
    task = parse_task(run["collect.task"])
    env_config = EnvConfig.from_kv(run)
    out_file = args.out or str(Path(Config.OUTPUT_DIR) / "collect" / "dataset.lcd")
    ctx = Run("collect", run, output_dir(args, out_file)).begin()

    data = collect(task, run["collect.episodes"], run["collect.steps"], run["run.seed"],
                   env_config=env_config, gamma=run["collect.gamma"], eta=run["collect.eta"],
                   workers=run["collect.workers"])
    save_dataset(data, ctx.add_output(out_file))
    duration = ctx.finish()
    say(f"Collected {len(data)} {task.value} episodes x {data.header.horizon} steps -> {out_file} "
        f"({duration:.1f}s)")
    counts = data.task_counts()
    print(f"  tasks: {counts}  terminated: {int(sum(t.terminated for t in data.trajectories()))}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    run = resolve(args)
    config = ModelConfig.from_run_config(run)
    out_file = args.out or str(Path(Config.OUTPUT_DIR) / "train" / "model.lwm")
    ctx = Run("train", run, output_dir(args, out_file)).begin()

    data = load_dataset(args.data, obs_dim=config.obs_dim, act_dim=config.act_dim)
    ctx.add_input(args.data)
    log_path = ctx.add_output(args.log or ctx.out_dir / "training_log.csv")
    result = train(data, config, log_path=log_path)
    snapshot = ModelSnapshot(config=config, params=result.params,
                             dataset_hash=ctx.inputs[str(args.data)],
                             env_hash=data.header.env_hash.hex())
    save_model(ctx.add_output(out_file), snapshot)
    ctx.finish()

    last = result.history[-1]
    say(f"Trained {len(result.history)} epochs ({result.updates} updates, {result.duration_s:.1f}s) -> {out_file}")
    print("  final " + "  ".join(f"{k}={v:.4f}" for k, v in zip(last.columns(), last.values())))
    return 0


def _load_for_planning(args: argparse.Namespace, ctx: Run) -> ModelSnapshot:
    snapshot = load_model(args.model)
    ctx.add_input(args.model)
    return snapshot


def _over_seeds(env: ContactEnv, agent: BaseAgent, task: TaskKind, run: Dict[str, Any], episodes: int, seeds: int) -> LoopSummary:
    """Seed s runs run.seed + s; episode indices continue across seeds so every row is unique."""
    summary = LoopSummary([])
    for s in range(seeds):
        summary = summary.merged(control_loop(env, agent, task, episodes, seed=run["run.seed"] + s,
                                              episode_offset=s * episodes))
    return summary


def _evaluate(snapshot: ModelSnapshot, env: ContactEnv, task: TaskKind, plan: PlanConfig,
              run: Dict[str, Any], episodes: int, seeds: int) -> LoopSummary:
    agent = ValueGuidedMPCAgent(snapshot, plan)
    try:
        return _over_seeds(env, agent, task, run, episodes, seeds)
    finally:
        agent.close()


def _print_summary(label: str, summary: LoopSummary) -> None:
    print(f"  {label:<16} return {summary.mean_return:8.3f} +/- {summary.std_return:6.3f}  "
          f"term {summary.termination_rate:4.2f}  p50 {summary.latency_percentile(50):6.1f} ms  "
          f"p95 {summary.latency_percentile(95):6.1f} ms")


def cmd_plan(args: argparse.Namespace) -> int:
    run = resolve(args)
    task = parse_task(run["eval.task"])
    plan = plan_config_from(run)
    ctx = Run("plan", run, output_dir(args)).begin()
    snapshot = _load_for_planning(args, ctx)
    env = ContactEnv(EnvConfig.from_kv(run))

    summary = _evaluate(snapshot, env, task, plan, run, run["eval.episodes"], 1)
    write_episode_csv(ctx.add_output(ctx.out_dir / "episodes.csv"), summary.episodes)
    write_csv(ctx.add_output(ctx.out_dir / "summary.csv"), ["objective", "horizon"] + SUMMARY_COLUMNS,
              [[plan.objective.value, plan.horizon] + summary.row()])
    log_plan_summary(plan.objective.value, plan.horizon, **summary.to_dict())
    ctx.finish()
    say(f"Planned {len(summary.episodes)} {task.value} episodes -> {ctx.out_dir}")
    _print_summary(f"{plan.objective.value} N={plan.horizon}", summary)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    run = resolve(args)
    task = parse_task(run["eval.task"])
    horizons = parse_int_list(run["eval.horizons"])
    objectives = objectives_from(run["eval.objectives"])
    if not horizons or not objectives:
        raise UsageError("eval needs at least one horizon and one objective")
    plans = [(objective, horizon, plan_config_from(run, objective=objective, horizon=horizon))
             for objective in objectives for horizon in horizons]
    ctx = Run("eval", run, output_dir(args)).begin()
    snapshot = _load_for_planning(args, ctx)
    for objective in objectives:
        if objective.needs_reward_head and not snapshot.has_reward_head:
            raise IncompatibleModelError(
                f"objective '{objective.value}' needs a reward head; retrain with --enable-reward-head")
    env = ContactEnv(EnvConfig.from_kv(run))
    episodes, seeds = run["eval.episodes"], run["eval.seeds"]

    say(f"Evaluating {task.value}: {len(plans)} settings x {seeds} seeds x {episodes} episodes", Fore.CYAN)
    rows = []
    for objective, horizon, plan in plans:
        summary = _evaluate(snapshot, env, task, plan, run, episodes, seeds)
        write_episode_csv(ctx.add_output(ctx.out_dir / f"episodes_{objective.value}_n{horizon}.csv"),
                          summary.episodes)
        rows.append([objective.value, horizon] + summary.row())
        log_plan_summary(objective.value, horizon, **summary.to_dict())
        _print_summary(f"{objective.value} N={horizon}", summary)
    write_csv(ctx.add_output(ctx.out_dir / "summary.csv"), ["objective", "horizon"] + SUMMARY_COLUMNS, rows)

    if run["eval.include_random"]:
        baseline = _over_seeds(env, RandomDeltaAgent(eta=run["collect.eta"]), task, run, episodes, seeds)
        write_episode_csv(ctx.add_output(ctx.out_dir / "episodes_random.csv"), baseline.episodes)
        write_csv(ctx.add_output(ctx.out_dir / "baseline.csv"), ["objective", "horizon"] + SUMMARY_COLUMNS,
                  [["random", 0] + baseline.row()])
        _print_summary("random", baseline)
    ctx.finish()
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    run = resolve(args)
    ctx = Run("analyze", run, output_dir(args)).begin()
    if args.kind == "variance":
        if args.n is None or args.rho is None or args.vmax is None:
            raise UsageError("analyze variance needs --n, --rho and --vmax")
        noise = NoiseModel(args.n, args.rho, args.vmax, args.vmin, run["analysis.trials"])
        reports = [empirical_variance(noise, run["run.seed"], workers=run["plan.workers"])]
    else:
        reports = containment_grid(trials=run["analysis.trials"], seed=run["run.seed"],
                                   workers=run["plan.workers"])
    path = ctx.add_output(ctx.out_dir / f"{args.kind}.csv")
    write_csv(path, BOUND_REPORT_COLUMNS, (r.csv_row() for r in reports))
    ctx.finish()
    passed = sum(r.passed for r in reports)
    color = Fore.GREEN if passed == len(reports) else Fore.RED
    say(f"{passed}/{len(reports)} bound checks passed -> {path}", color)
    if args.kind == "variance":
        r = reports[0]
        print(f"  empirical {r.empirical_var:.5f} (SE {r.standard_error:.5f})  bounds [{r.v_lb:.5f}, {r.v_ub:.5f}]")
    return 0


def cmd_dump(args: argparse.Namespace) -> int:
    run = resolve(args)
    ctx = Run("dump", run, output_dir(args)).begin()
    snapshot = load_model(args.model)
    ctx.add_input(args.model)
    data = load_dataset(args.data, obs_dim=snapshot.config.obs_dim, act_dim=snapshot.config.act_dim)
    ctx.add_input(args.data)
    if not 0 <= args.episode < len(data):
        raise UsageError(f"--episode {args.episode} outside dataset of {len(data)} episodes")
    trajectory = data.trajectory(args.episode)
    if not 0 <= args.step < trajectory.horizon:
        raise UsageError(f"--step {args.step} outside episode of {trajectory.horizon} steps")

    if args.kind == "qmap":
        env = ContactEnv(EnvConfig.from_kv(run))
        snapshot.check_env(env.config.config_hash().hex())
        latent = filtered_latent_at(snapshot, trajectory, args.step)
        qmap = qvalue_map(snapshot, latent, env, parse_grid(run["analysis.grid"]),
                          plan_config=plan_config_from(run))
        qmap.write_csv(ctx.add_output(ctx.out_dir / "qmap.csv"))
        qmap.write_pgm(ctx.add_output(ctx.out_dir / "qmap.pgm"))
        x, z = qmap.argmax()
        say(f"Q-value map {qmap.shape[1]}x{qmap.shape[0]} -> {ctx.out_dir}; best hand target x={x:.3f} z={z:.3f}")
    elif args.kind == "rollout":
        horizon = run["analysis.rollout_horizon"]
        if args.step + horizon >= trajectory.horizon:
            raise UsageError(f"rollout of {horizon} steps from step {args.step} runs past the episode end")
        for path in dump_rollout(snapshot, trajectory, ctx.out_dir / "rollout", args.step, horizon):
            ctx.add_output(path)
        accuracy = rollout_mse(snapshot, data, horizon, args.step)
        accuracy.write_csv(ctx.add_output(ctx.out_dir / "rollout_mse.csv"))
        say(f"Rollout dump ({horizon} steps) -> {ctx.out_dir / 'rollout'}")
        print(f"  horizon {horizon}: model mse {accuracy.model_mse[-1]:.5f}  "
              f"copy-last mse {accuracy.baseline_mse[-1]:.5f}  ({accuracy.episodes} episodes)")
    else:
        path = ctx.add_output(ctx.out_dir / "latents.csv")
        count = dump_latents(snapshot, data, path)
        centroids, distances = latent_centroids(path)
        write_csv(ctx.add_output(ctx.out_dir / "centroid_distances.csv"), ["task_a", "task_b", "distance"],
                  ([a, b, d] for (a, b), d in distances.items()))
        say(f"Wrote {count} latent rows -> {path}")
        for (a, b), d in distances.items():
            print(f"  |{a} - {b}| = {d:.4f}")
    ctx.finish()
    return 0


def cmd_config(args: argparse.Namespace) -> int:
    sys.stdout.write(dump_kv(resolve(args)))
    return 0


# ──────────────────────────────────────────────────────────────
# Argument parsing
# ──────────────────────────────────────────────────────────────
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", dest="run.seed", help="experiment seed")
    common.add_argument("--out-dir", help="output directory (resolved config, manifest, results)")
    common.add_argument("--log-level", default=None, help="override LOG_LEVEL")

    planning = argparse.ArgumentParser(add_help=False)
    planning.add_argument("--model", required=True, help="model file")
    planning.add_argument("--task", dest="eval.task")
    planning.add_argument("--episodes", dest="eval.episodes")
    planning.add_argument("--candidates", dest="plan.num_candidates")
    planning.add_argument("--iterations", dest="plan.cem_iterations")
    planning.add_argument("--elites", dest="plan.elites")
    planning.add_argument("--noise-mode", dest="plan.noise_mode")
    planning.add_argument("--precision", dest="plan.precision")
    planning.add_argument("--workers", dest="plan.workers")
    planning.add_argument("--mask-trigger-step", dest="plan.mask_trigger_step", action="store_const", const="true")

    parser = argparse.ArgumentParser(prog="main.py", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", parents=[common], help="collect a random-delta dataset")
    p.add_argument("--task", dest="collect.task")
    p.add_argument("--episodes", dest="collect.episodes")
    p.add_argument("--steps", dest="collect.steps")
    p.add_argument("--gamma", dest="collect.gamma")
    p.add_argument("--eta", dest="collect.eta")
    p.add_argument("--workers", dest="collect.workers")
    p.add_argument("--out", help="dataset file")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", parents=[common], help="train the world model")
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--out", help="model file")
    p.add_argument("--log", help="training log CSV (defaults to <out-dir>/training_log.csv)")
    p.add_argument("--epochs", dest="model.epochs")
    p.add_argument("--batch-size", dest="model.batch_size")
    p.add_argument("--seq-len", dest="model.seq_len")
    p.add_argument("--learning-rate", dest="model.learning_rate")
    p.add_argument("--enable-reward-head", dest="model.enable_reward_head", action="store_const", const="true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plan", parents=[common, planning], help="run the MPC controller")
    p.add_argument("--horizon", dest="plan.horizon")
    p.add_argument("--objective", dest="plan.objective")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", parents=[common, planning], help="sweep horizons and objectives")
    p.add_argument("--horizons", dest="eval.horizons")
    p.add_argument("--objective", "--objectives", dest="eval.objectives")
    p.add_argument("--seeds", dest="eval.seeds")
    p.add_argument("--no-random", dest="eval.include_random", action="store_const", const="false")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", parents=[common], help="variance-bound checks")
    p.add_argument("kind", choices=["variance", "grid"])
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--vmax", type=float)
    p.add_argument("--vmin", type=float)
    p.add_argument("--trials", dest="analysis.trials")
    p.add_argument("--workers", dest="plan.workers")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dump", parents=[common], help="interpretability exports")
    p.add_argument("kind", choices=["qmap", "rollout", "latents"])
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--episode", type=int, default=0)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--grid", dest="analysis.grid")
    p.add_argument("--horizon", dest="analysis.rollout_horizon")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("config", parents=[common], help="print the resolved configuration")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    colorama_init()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level)
    try:
        return args.func(args)
    except (WorldModelError, OSError) as e:
        code = ErrorHandler.exit_code_for(e)
        ErrorHandler("main").log_error(e, context={'command': args.command, 'exit_code': code})
        log_command_complete(args.command, "failed", 0.0, exit_code=code, error=str(e))
        print(f"{Fore.RED}error: {e}{Style.RESET_ALL}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
