"""Experiment harness: resolved specs, the training loop, and run artifacts.

A run directory is self-describing: `config.resolved` (the exact spec),
`metrics.csv` (train episodes and eval sweeps), `trace.csv` (one row per
teacher update), `checkpoint.ckpt` (student nets), and `timing.txt`
(wall-clock accounting, kept out of the CSVs so re-runs stay
byte-identical).
"""

from __future__ import annotations

import csv
import io
import time
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import make_teacher
from .envs import ENV_KINDS, make_env
from .envs.base import ContractError, GridEnv
from .nn import Categorical, entropy, sample, save_checkpoint, load_checkpoint
from .rng import SeedTree
from .student import StudentConfig, StudentPolicy, evaluate, rollout, update
from .teacher import CurriculumConfig

METRICS_SCHEMA = "hap-metrics-1"
TRACE_SCHEMA = "hap-trace-1"
FLOAT_FMT = "%.10g"


@dataclass(frozen=True)
class EnvOverrides:
    """Optional constructor knobs for `make_env`; sentinels keep env defaults."""

    cap: int = 0  # 0 keeps the environment default
    step_penalty: float = -1.0  # negative keeps the environment default
    distances: tuple[int, ...] = ()  # empty keeps the default (nav only)

    def __post_init__(self):
        if self.cap < 0:
            raise ValueError("cap must be >= 1 (or 0 for the env default)")

    def kwargs(self) -> dict:
        out = {}
        if self.cap:
            out["cap"] = self.cap
        if self.step_penalty >= 0.0:
            out["step_penalty"] = self.step_penalty
        if self.distances:
            out["distances"] = self.distances
        return out


@dataclass
class ExperimentSpec:
    """Everything a run needs; resolves to a flat key-value text file."""

    name: str = "run"
    env: str = "nav"
    total_steps: int = 50_000
    eval_every: int = 2_000
    eval_episodes: int = 20
    batch_episodes: int = 2
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    env_overrides: EnvOverrides = field(default_factory=EnvOverrides)
    student: StudentConfig = field(default_factory=StudentConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)

    def __post_init__(self):
        if not self.name or any(c in self.name for c in " /\\\n="):
            raise ValueError(f"run name {self.name!r} must be a plain token")
        if self.env not in ENV_KINDS:
            raise ValueError(f"unknown environment kind {self.env!r}")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not 1 <= self.eval_every <= self.total_steps:
            raise ValueError("eval_every must lie in [1, total_steps]")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.batch_episodes < 1:
            raise ValueError("batch_episodes must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.env_overrides.distances and self.env != "nav":
            raise ValueError("distances only apply to the nav environment")

    def build_env(self):
        return make_env(self.env, **self.env_overrides.kwargs())


# -- config text format -------------------------------------------------------
#
# One `section.key = value` per line.  Sections: run, student, curriculum.
# Booleans are true/false, integer tuples are comma separated, floats use
# repr so parsing round-trips exactly.  Unknown keys are errors.

_RUN_KEYS = ("name", "env", "total_steps", "eval_every", "eval_episodes",
             "batch_episodes", "seeds")


def _encode(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _decode(text: str, hint):
    origin = typing.get_origin(hint)
    if origin is tuple:
        return tuple(int(v) for v in text.split(",") if v.strip())
    if hint is bool:
        if text not in ("true", "false"):
            raise ValueError(f"expected true/false, got {text!r}")
        return text == "true"
    return hint(text)


def _hints(cls) -> dict[str, type]:
    return typing.get_type_hints(cls)


def resolve_config(spec: ExperimentSpec) -> str:
    """Serialize a spec so that `parse_config` reproduces it exactly."""
    lines = []
    for key in _RUN_KEYS:
        lines.append(f"run.{key} = {_encode(getattr(spec, key))}")
    for section, cfg in (("env", spec.env_overrides), ("student", spec.student),
                         ("curriculum", spec.curriculum)):
        for f in fields(cfg):
            lines.append(f"{section}.{f.name} = {_encode(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentSpec:
    """Parse the flat key-value format; unknown keys are hard errors."""
    run_hints = {k: h for k, h in _hints(ExperimentSpec).items() if k in _RUN_KEYS}
    section_hints = {"run": run_hints, "env": _hints(EnvOverrides),
                     "student": _hints(StudentConfig),
                     "curriculum": _hints(CurriculumConfig)}
    out: dict[str, dict] = {"run": {}, "env": {}, "student": {}, "curriculum": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ValueError(f"line {lineno}: key {key!r} needs a section prefix")
        section, name = key.split(".", 1)
        hints = section_hints.get(section)
        if hints is None or name not in hints:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[section][name] = _decode(value, hints[name])
    return ExperimentSpec(env_overrides=EnvOverrides(**out["env"]),
                          student=StudentConfig(**out["student"]),
                          curriculum=CurriculumConfig(**out["curriculum"]),
                          **out["run"])


def load_spec(path) -> ExperimentSpec:
    return parse_config(Path(path).read_text())


# -- CSV writers --------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FMT % float(value)


class _CsvWriter:
    def __init__(self, path, schema: str, header: list[str]):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(f"# schema: {schema}\n")
        self._csv = csv.writer(self._fh)
        self._csv.writerow(header)

    def row(self, values):
        self._csv.writerow([_fmt(v) for v in values])

    def close(self):
        self._fh.close()


class MetricsWriter:
    """Per-episode train rows and per-sweep eval rows, one file."""

    def __init__(self, path, tasks: tuple[str, ...]):
        self.tasks = tasks
        header = (["step", "episode", "event", "task", "ret", "success"]
                  + [f"p_{t}" for t in tasks] + [f"eval_{t}" for t in tasks])
        self._w = _CsvWriter(path, METRICS_SCHEMA, header)

    def train_row(self, step, episode, task, ret, success, probs):
        self._w.row([step, episode, "train", task, ret, success]
                    + list(probs) + [None] * len(self.tasks))

    def eval_row(self, step, episode, probs, rates: dict[str, float]):
        self._w.row([step, episode, "eval", None, None, None]
                    + list(probs) + [rates[t] for t in self.tasks])

    def abort_row(self, step, episode, message: str):
        self._w.row([step, episode, "abort", message, None, None]
                    + [None] * (2 * len(self.tasks)))

    def close(self):
        self._w.close()


class TraceWriter:
    """One row per teacher gradient update (warm-up takes none)."""

    def __init__(self, path, tasks: tuple[str, ...]):
        self.tasks = tasks
        header = (["update", "episode", "step", "kind", "mean_return",
                   "teacher_reward", "grad_norm", "entropy"]
                  + [f"p_{t}" for t in tasks])
        self._w = _CsvWriter(path, TRACE_SCHEMA, header)

    def row(self, update, episode, step, kind, report: dict, dist: Categorical):
        self._w.row([update, episode, step, kind,
                     report.get("mean_return"), report.get("teacher_reward"),
                     report.get("grad_norm"), entropy(dist)]
                    + list(dist.probs))

    def close(self):
        self._w.close()


def _parse_csv(path, schema: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# schema: {schema}":
            raise ContractError(f"{path}: expected schema {schema!r}, got {first!r}")
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


@dataclass
class RunData:
    """Parsed metrics for one run directory."""

    spec: ExperimentSpec
    tasks: tuple[str, ...]
    train_step: np.ndarray
    train_task: list[str]
    train_ret: np.ndarray
    train_success: np.ndarray
    eval_step: np.ndarray
    eval_probs: np.ndarray  # (sweeps, n)
    eval_rates: np.ndarray  # (sweeps, n)


def load_run(run_dir) -> RunData:
    run_dir = Path(run_dir)
    spec = load_spec(run_dir / "config.resolved")
    header, rows = _parse_csv(run_dir / "metrics.csv", METRICS_SCHEMA)
    tasks = tuple(h[2:] for h in header if h.startswith("p_"))
    col = {h: i for i, h in enumerate(header)}
    t_step, t_task, t_ret, t_success = [], [], [], []
    e_step, e_probs, e_rates = [], [], []
    for row in rows:
        event = row[col["event"]]
        if event == "train":
            t_step.append(int(row[col["step"]]))
            t_task.append(row[col["task"]])
            t_ret.append(float(row[col["ret"]]))
            t_success.append(int(row[col["success"]]))
        elif event == "eval":
            e_step.append(int(row[col["step"]]))
            e_probs.append([float(row[col[f"p_{t}"]]) for t in tasks])
            e_rates.append([float(row[col[f"eval_{t}"]]) for t in tasks])
    return RunData(spec=spec, tasks=tasks,
                   train_step=np.array(t_step, dtype=int), train_task=t_task,
                   train_ret=np.array(t_ret), train_success=np.array(t_success),
                   eval_step=np.array(e_step, dtype=int),
                   eval_probs=np.array(e_probs).reshape(len(e_step), len(tasks)),
                   eval_rates=np.array(e_rates).reshape(len(e_step), len(tasks)))


def load_trace(run_dir) -> dict[str, np.ndarray]:
    header, rows = _parse_csv(Path(run_dir) / "trace.csv", TRACE_SCHEMA)
    tasks = [h[2:] for h in header if h.startswith("p_")]
    col = {h: i for i, h in enumerate(header)}
    out = {
        "step": np.array([int(r[col["step"]]) for r in rows], dtype=int),
        "entropy": np.array([float(r[col["entropy"]]) for r in rows]),
        "probs": np.array([[float(r[col[f"p_{t}"]]) for t in tasks] for r in rows]
                          ).reshape(len(rows), len(tasks)),
    }
    return out


# -- the training loop --------------------------------------------------------


def _return_bounds(env: GridEnv) -> tuple[float, float]:
    return (-env.cap * env.step_penalty, 1.0)


def _sweep(policy: StudentPolicy, env: GridEnv, episodes: int) -> dict[str, float]:
    return {t: evaluate(policy, env, t, episodes)[0] for t in env.space.tasks}


def run(spec: ExperimentSpec, seed: int, out_root) -> Path:
    """Train one seed to the step budget and write the run directory."""
    run_dir = Path(out_root) / f"{spec.name}-seed{seed}"
    run_dir.mkdir(parents=True, exist_ok=False)
    (run_dir / "config.resolved").write_text(resolve_config(spec))

    tree = SeedTree(seed)
    env = spec.build_env()
    eval_env = env.fresh()  # eval never touches the training episode state
    policy = StudentPolicy(env.obs_dim, env.n_actions, spec.student,
                           tree.stream("student-init"))
    teacher = make_teacher(env.space, spec.curriculum, tree.stream("teacher"),
                           return_bounds=_return_bounds(env))
    act_rng = tree.stream("student-act")
    task_rng = tree.stream("task-sample")

    metrics = MetricsWriter(run_dir / "metrics.csv", env.space.tasks)
    trace = TraceWriter(run_dir / "trace.csv", env.space.tasks)
    started = time.perf_counter()
    step = episode = 0
    train_batch, teacher_batch = [], []
    eval_block = -1  # forces a sweep at step 0 before any training

    def sweep():
        rates = _sweep(policy, eval_env, spec.eval_episodes)
        metrics.eval_row(step, episode, teacher.distribution().probs, rates)
        teacher.on_eval(rates)

    try:
        while step < spec.total_steps:
            if step // spec.eval_every > eval_block or eval_block < 0:
                eval_block = step // spec.eval_every
                sweep()
            dist = teacher.distribution()
            sampled_in_warmup = teacher.in_warmup
            idx = sample(dist, task_rng)
            task = env.space.tasks[idx]
            traj = rollout(policy, env, task, seed=2 * episode, rng=act_rng)
            episode += 1
            step += len(traj)
            teacher.on_episode(idx, traj.discounted_return, traj.success)
            metrics.train_row(step, episode, task, traj.discounted_return,
                              traj.success, dist.probs)
            train_batch.append(traj)
            if len(train_batch) >= spec.batch_episodes:
                update(policy, train_batch)
                train_batch = []
            if not sampled_in_warmup:
                teacher_batch.append((task, traj.discounted_return))
                if len(teacher_batch) >= spec.curriculum.update_every:
                    report = teacher.update(teacher_batch)
                    teacher_batch = []
                    if not report.get("skipped", False):
                        trace.row(teacher.updates, episode, step,
                                  spec.curriculum.kind, report,
                                  teacher.distribution())
        sweep()
    except ContractError as err:
        metrics.abort_row(step, episode, str(err))
        raise
    finally:
        metrics.close()
        trace.close()

    save_checkpoint(run_dir / "checkpoint.ckpt",
                    {"actor": policy.actor, "critic": policy.critic}, seed)
    elapsed = time.perf_counter() - started
    (run_dir / "timing.txt").write_text(
        f"seconds = {elapsed:.3f}\nepisodes = {episode}\nsteps = {step}\n")
    return run_dir


def run_all(spec: ExperimentSpec, out_root) -> list[Path]:
    """One run directory per seed, plus the resolved spec at the root."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "spec.resolved").write_text(resolve_config(spec))
    return [run(spec, s, out_root) for s in spec.seeds]


def evaluate_run(run_dir, episodes: int | None = None) -> dict[str, tuple[float, float]]:
    """Greedy held-out sweep of a finished run's checkpoint."""
    run_dir = Path(run_dir)
    spec = load_spec(run_dir / "config.resolved")
    nets, _ = load_checkpoint(run_dir / "checkpoint.ckpt")
    env = spec.build_env()
    policy = StudentPolicy(env.obs_dim, env.n_actions, spec.student)
    policy.actor, policy.critic = nets["actor"], nets["critic"]
    episodes = spec.eval_episodes if episodes is None else episodes
    return {t: evaluate(policy, env, t, episodes) for t in env.space.tasks}


# -- comparison ---------------------------------------------------------------


@dataclass
class RunSummary:
    name: str
    env: str
    steps_to_threshold: dict[str, int | None]
    steps_to_all: int | None
    aulc: float
    final_rates: dict[str, float]
    correlation: float | None


def _first_crossing(steps: np.ndarray, values: np.ndarray, threshold: float,
                    grid: int = 1) -> int | None:
    """First step at which values reach the threshold.

    Sweeps fire at the first episode boundary past each eval-grid line, so
    crossings are only resolvable to grid precision; with `grid` set they
    are reported as the grid line the sweep belongs to.
    """
    hit = np.nonzero(values >= threshold)[0]
    if not hit.size:
        return None
    return int(steps[hit[0]]) // max(grid, 1) * max(grid, 1)


def _aulc(steps: np.ndarray, rates: np.ndarray) -> float:
    if len(steps) < 2:
        return float(rates.mean()) if rates.size else 0.0
    span = steps[-1] - steps[0]
    per_task = np.trapezoid(rates, x=steps, axis=0) / max(span, 1)
    return float(per_task.mean())


def prob_success_correlation(data: RunData, lo: float = 0.2, hi: float = 0.8) -> float | None:
    """Pearson r between teacher probability and eval success, pooled over
    the mid-training sweeps.  Absent when either pool has no variance."""
    budget = data.spec.total_steps
    mask = (data.eval_step >= lo * budget) & (data.eval_step <= hi * budget)
    probs = data.eval_probs[mask].ravel()
    rates = data.eval_rates[mask].ravel()
    if probs.size < 2 or np.ptp(probs) == 0.0 or np.ptp(rates) == 0.0:
        return None
    return float(np.corrcoef(probs, rates)[0, 1])


def summarize_run(run_dir, threshold: float = 0.9) -> RunSummary:
    data = load_run(run_dir)
    grid = data.spec.eval_every
    per_task = {t: _first_crossing(data.eval_step, data.eval_rates[:, i], threshold, grid)
                for i, t in enumerate(data.tasks)}
    all_hit = _first_crossing(data.eval_step, data.eval_rates.min(axis=1), threshold, grid)
    final = dict(zip(data.tasks, data.eval_rates[-1])) if len(data.eval_step) else {}
    return RunSummary(name=data.spec.name, env=data.spec.env,
                      steps_to_threshold=per_task, steps_to_all=all_hit,
                      aulc=_aulc(data.eval_step, data.eval_rates),
                      final_rates=final,
                      correlation=prob_success_correlation(data))


def _median_steps_to_all(summaries: list[RunSummary], budget_hint: int) -> float:
    # non-converging seeds count as one full budget past the end
    vals = [s.steps_to_all if s.steps_to_all is not None else 2 * budget_hint
            for s in summaries]
    return float(np.median(vals))


@dataclass
class CompareReport:
    left: list[RunSummary]
    right: list[RunSummary]
    delta_median_steps_to_all: float
    delta_mean_aulc: float

    def render(self) -> str:
        out = io.StringIO()

        def block(title, summaries):
            print(f"== {title} ==", file=out)
            for s in summaries:
                steps = ", ".join(f"{t}={v if v is not None else 'never'}"
                                  for t, v in s.steps_to_threshold.items())
                corr = "absent" if s.correlation is None else f"{s.correlation:.3f}"
                allv = s.steps_to_all if s.steps_to_all is not None else "never"
                print(f"{s.name}: all>=thr at {allv}; aulc {s.aulc:.3f}; "
                      f"corr {corr}; per-task [{steps}]", file=out)

        block("left", self.left)
        if self.right:
            block("right", self.right)
            print(f"delta median steps-to-all (left - right): "
                  f"{self.delta_median_steps_to_all:.10g}", file=out)
            print(f"delta mean aulc (left - right): "
                  f"{self.delta_mean_aulc:.10g}", file=out)
        return out.getvalue()


def compare(left_dirs, right_dirs=None, threshold: float = 0.9) -> CompareReport:
    """Summaries plus paired deltas; comparing a set to itself gives zeros."""
    left_dirs = [Path(d) for d in left_dirs]
    right_dirs = [Path(d) for d in (right_dirs or [])]
    if not left_dirs:
        raise ContractError("compare needs at least one run directory")
    envs = {load_spec(Path(d) / "config.resolved").env
            for d in left_dirs + right_dirs}
    if len(envs) > 1:
        raise ContractError(f"cannot compare runs across environments: {sorted(envs)}")
    left = [summarize_run(d, threshold) for d in left_dirs]
    right = [summarize_run(d, threshold) for d in right_dirs]
    d_steps = d_aulc = 0.0
    if right:
        budget = load_spec(left_dirs[0] / "config.resolved").total_steps
        d_steps = (_median_steps_to_all(left, budget)
                   - _median_steps_to_all(right, budget))
        d_aulc = (float(np.mean([s.aulc for s in left]))
                  - float(np.mean([s.aulc for s in right])))
    return CompareReport(left=left, right=right,
                         delta_median_steps_to_all=d_steps,
                         delta_mean_aulc=d_aulc)


# -- plots ---------------------------------------------------------------------


def _points_csv(path, series: dict[str, tuple[np.ndarray, np.ndarray]]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "x", "y"])
        for name, (xs, ys) in series.items():
            for x, y in zip(xs, ys):
                w.writerow([name, FLOAT_FMT % x, FLOAT_FMT % y])


def load_points(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        acc: dict[str, list[tuple[float, float]]] = {}
        for name, x, y in reader:
            acc.setdefault(name, []).append((float(x), float(y)))
    return {name: (np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
            for name, pts in acc.items()}


def emit_plots(run_dir) -> Path:
    """Deterministic SVG plots plus the exact plotted points as CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "hap"
    run_dir = Path(run_dir)
    plots = run_dir / "plots"
    plots.mkdir(exist_ok=True)
    data = load_run(run_dir)

    def save(fig, name, series):
        fig.savefig(plots / f"{name}.svg", format="svg", metadata={"Date": None})
        plt.close(fig)
        _points_csv(plots / f"{name}_points.csv", series)

    # eval success per task over steps
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    for i, t in enumerate(data.tasks):
        ys = data.eval_rates[:, i]
        ax.plot(data.eval_step, ys, label=t)
        series[t] = (data.eval_step.astype(float), ys)
    ax.set_xlabel("env steps")
    ax.set_ylabel("eval success")
    ax.set_ylim(-0.05, 1.05)
    if series:
        ax.legend(loc="lower right")
    save(fig, "success", series)

    # train returns over steps
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    if data.train_step.size:
        series["return"] = (data.train_step.astype(float), data.train_ret)
        ax.plot(data.train_step, data.train_ret, lw=0.5, alpha=0.6)
        window = max(1, min(50, data.train_step.size))
        kernel = np.ones(window) / window
        smooth = np.convolve(data.train_ret, kernel, mode="valid")
        xs = data.train_step[window - 1:].astype(float)
        series["return_smooth"] = (xs, smooth)
        ax.plot(xs, smooth, lw=1.5)
    ax.set_xlabel("env steps")
    ax.set_ylabel("train return")
    save(fig, "returns", series)

    # teacher probabilities (dashed) against eval success (solid)
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    for i, t in enumerate(data.tasks):
        ax.plot(data.eval_step, data.eval_rates[:, i], label=f"success {t}")
        ax.plot(data.eval_step, data.eval_probs[:, i], ls="--", label=f"p {t}")
        series[f"success_{t}"] = (data.eval_step.astype(float), data.eval_rates[:, i])
        series[f"p_{t}"] = (data.eval_step.astype(float), data.eval_probs[:, i])
    ax.set_xlabel("env steps")
    ax.set_ylabel("probability / success")
    ax.set_ylim(-0.05, 1.05)
    if series:
        ax.legend(loc="upper right", fontsize=7)
    save(fig, "curriculum", series)
    return plots
