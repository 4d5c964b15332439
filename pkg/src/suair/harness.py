"""Experiment orchestration: seeded runs, periodic evaluation, CSV metrics.

One run trains an agent bundle per seed. Every step the active strategy
picks an action source (teacher / model reuse / self), the environment
advances, the student does one gated Q-learning update, and the dropout twin
mirrors it when the strategy needs student uncertainty. Every eval_interval
steps the student's greedy policy is scored on evaluation-only episodes and
a metrics row is emitted.

Per-seed randomness is split into independent named streams (environment,
exploration, replay sampling, strategy coins, per-network generators), so
strategies that never touch a stream cannot perturb the others. This is
what makes the degenerate-strategy equivalences exact.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ExperimentConfig
from .dqn import StudentAgent, Transition
from .gridworld import (
    GridSpec,
    GridWorld,
    TeacherPolicy,
    load_network_teacher,
    optimal_return,
    q_table_as_network,
    value_iteration,
)
from .imitation import AdviceBuffer, TeacherModel
from .network import save_network
from .strategies import (
    MODEL_REUSE,
    SELF,
    TEACHER,
    ReuseGate,
    StepDecision,
    decide_air,
    decide_ea,
    decide_na,
    decide_ra,
    decide_sua,
    decide_sua_air,
    episode_reset_gate,
)
from .uncertainty import SecondaryNet, UncertaintyBuffer, update_secondary

CSV_COLUMNS = ("step", "eval_return_mean", "eval_return_stderr",
               "advice_taken_per_100", "advice_reused_per_100",
               "model_accuracy", "rho", "budget_remaining",
               "u_s_mean", "u_m_mean")

VISITED_SAMPLE_SIZE = 1_000


class PretrainRefused(RuntimeError):
    """A trained teacher candidate missed the competence bar."""


@dataclass
class MetricsRow:
    step: int
    eval_return_mean: float
    eval_return_stderr: float
    advice_taken_per_100: float
    advice_reused_per_100: float
    model_accuracy: float | None
    rho: float | None
    budget_remaining: float | None
    u_s_mean: float | None
    u_m_mean: float | None

    def as_fields(self) -> tuple:
        return tuple(getattr(self, name) for name in CSV_COLUMNS)


@dataclass
class TraceRow:
    """One decision plus the bundle context an auditor needs to replay it."""

    step: int
    decision: StepDecision
    advice_size: int
    model_is_trained: bool
    model_trained_this_step: bool
    rho: float | None
    episode_started: bool


@dataclass
class SeedResult:
    seed: int
    rows: list
    trace: list | None
    budget_final: int
    teacher_queries: int
    reuse_steps: int
    advice_size: int
    steps_run: int
    steps_to_target: int | None
    params_digest: str
    bundle: object | None = None


class VisitedStates:
    """The most recently visited distinct states, oldest evicted first."""

    def __init__(self, capacity: int = VISITED_SAMPLE_SIZE):
        self.capacity = capacity
        self._states: dict[bytes, np.ndarray] = {}

    def add(self, state: np.ndarray) -> None:
        key = state.tobytes()
        if key in self._states:
            del self._states[key]  # refresh recency
        self._states[key] = state
        if len(self._states) > self.capacity:
            oldest = next(iter(self._states))
            del self._states[oldest]

    def states(self) -> list[np.ndarray]:
        return list(self._states.values())

    def __len__(self) -> int:
        return len(self._states)


def _component_seeds(seed: int) -> dict[str, int]:
    """Named integer seeds for every randomness consumer in one run."""
    names = ("env", "policy", "replay", "strategy", "student", "secondary",
             "model", "eval")
    words = np.random.SeedSequence(seed).generate_state(len(names), dtype=np.uint64)
    return {name: int(word) for name, word in zip(names, words)}


def build_teacher(cfg: ExperimentConfig, spec: GridSpec) -> TeacherPolicy:
    if cfg.teacher_mode == "oracle":
        return TeacherPolicy.oracle(spec, cfg.gamma)
    return load_network_teacher(spec, cfg.teacher_checkpoint)


class AgentBundle:
    """Everything one seed owns: student, uncertainty twin, model, budget."""

    def __init__(self, cfg: ExperimentConfig, spec: GridSpec,
                 teacher: TeacherPolicy, seed: int):
        adv = cfg.advising
        seeds = _component_seeds(seed)
        self.cfg = cfg
        self.spec = spec
        self.teacher = teacher
        self.strategy = adv.strategy
        self.budget = adv.budget
        self.env_seed = seeds["env"]
        self.eval_seed = seeds["eval"]
        self.policy_rng = np.random.default_rng(seeds["policy"])
        self.replay_rng = np.random.default_rng(seeds["replay"])
        self.strategy_rng = np.random.default_rng(seeds["strategy"])
        self.student = StudentAgent(
            obs_dim=spec.obs_dim, n_actions=4, hidden=cfg.hidden,
            gamma=cfg.gamma, learning_rate=cfg.learning_rate,
            batch_size=cfg.batch_size, replay_capacity=cfg.replay_capacity,
            replay_min=cfg.replay_min, target_sync_period=cfg.target_sync,
            eps_init=cfg.eps_init, eps_final=cfg.eps_final,
            eps_decay_steps=cfg.eps_decay_steps, seed=seeds["student"])
        uses_secondary = self.strategy in ("SUA", "SUA_AIR")
        uses_model = self.strategy in ("AIR", "SUA_AIR")
        self.secondary = SecondaryNet.for_student(
            spec.obs_dim, 4, hidden=cfg.hidden, dropout=adv.secondary_dropout,
            n_passes=adv.n_passes, seed=seeds["secondary"]) if uses_secondary else None
        self.ubuf = (UncertaintyBuffer(adv.min_window, adv.max_window)
                     if uses_secondary else None)
        self.model = TeacherModel.create(
            spec.obs_dim, 4, hidden=cfg.hidden, dropout=adv.model_dropout,
            n_passes=adv.n_passes, seed=seeds["model"],
            learning_rate=adv.imitation_lr,
            batch_size=adv.imitation_batch) if uses_model else None
        self.advice = AdviceBuffer(4) if uses_model else None
        self.gate = ReuseGate(rho=adv.rho_init) if uses_model else None

    def on_episode_start(self) -> None:
        if self.gate is not None:
            episode_reset_gate(self.gate, self.strategy_rng)

    def decide(self, state: np.ndarray, step: int) -> StepDecision:
        adv = self.cfg.advising
        if self.strategy == "NA":
            return decide_na(state, self.student, step, self.policy_rng)
        if self.strategy == "EA":
            decision = decide_ea(state, self.student, self.teacher,
                                 self.budget, step, self.policy_rng)
        elif self.strategy == "RA":
            decision = decide_ra(state, self.student, self.teacher,
                                 self.budget, step, adv, self.policy_rng,
                                 self.strategy_rng)
        elif self.strategy == "SUA":
            decision = decide_sua(state, self.student, self.secondary,
                                  self.ubuf, self.teacher, self.budget, step,
                                  adv, self.policy_rng)
        elif self.strategy == "AIR":
            decision = decide_air(state, self.student, self.teacher,
                                  self.model, self.advice, self.gate,
                                  self.budget, step, adv, self.policy_rng)
        else:  # SUA_AIR
            decision = decide_sua_air(state, self.student, self.secondary,
                                      self.ubuf, self.teacher, self.model,
                                      self.advice, self.gate, self.budget,
                                      step, adv, self.policy_rng)
        self.budget = decision.budget_after
        return decision

    def params_digest(self) -> str:
        digest = hashlib.sha256()
        for p in self.student.online_net.parameters():
            digest.update(p.tobytes())
        return digest.hexdigest()


def evaluate(student: StudentAgent, spec: GridSpec, gamma: float,
             trials: int, seed_base: int) -> tuple[float, float]:
    """Greedy-policy evaluation on dedicated episodes.

    Returns (mean, stderr) of the discounted episode return; stderr is 0 by
    convention for a single trial. Training state is untouched: fresh
    environments, no exploration, no shared generators.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    returns = np.zeros(trials)
    for trial in range(trials):
        env = GridWorld(spec)
        obs = env.reset(seed=seed_base + trial)
        total, disc, done = 0.0, 1.0, False
        while not done:
            obs, reward, done = env.step(student.greedy(obs))
            total += disc * reward
            disc *= gamma
        returns[trial] = total
    mean = float(returns.mean())
    stderr = float(returns.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return mean, stderr


def model_accuracy(model: TeacherModel, teacher: TeacherPolicy,
                   states: list) -> float:
    """Fraction of states where the cloned model picks the teacher's action."""
    from .imitation import model_action

    if not states:
        raise ValueError("model_accuracy needs a nonempty state sample")
    hits = sum(model_action(model, s) == teacher.action(s) for s in states)
    return hits / len(states)


def run_single_seed(cfg: ExperimentConfig, seed: int, *,
                    spec: GridSpec | None = None,
                    collect_trace: bool = False,
                    stop_at_return: float | None = None,
                    stop_early: bool = False,
                    keep_bundle: bool = False) -> SeedResult:
    """Train one seed and collect its metrics rows.

    ``stop_at_return`` records the first evaluation step whose mean return
    reaches the threshold; with ``stop_early`` the loop also stops there.
    """
    if spec is None:
        spec = cfg.grid_spec()
    teacher = build_teacher(cfg, spec)
    bundle = AgentBundle(cfg, spec, teacher, seed)
    env = GridWorld(spec, seed=bundle.env_seed)
    visited = VisitedStates()

    rows: list[MetricsRow] = []
    trace: list[TraceRow] | None = [] if collect_trace else None
    taken = reused = 0
    us_sum = um_sum = 0.0
    us_n = um_n = 0
    teacher_queries = reuse_steps = 0
    steps_to_target = None
    steps_run = 0

    obs = env.reset()
    bundle.on_episode_start()
    episode_started = True
    for t in range(1, cfg.total_steps + 1):
        steps_run = t
        visited.add(obs)
        decision = bundle.decide(obs, t)
        next_obs, reward, done = env.step(decision.action)
        bundle.student.replay.append(
            Transition(obs, decision.action, reward, next_obs, done))
        if bundle.student.replay.ready:
            _, batch = bundle.student.dqn_update(bundle.replay_rng)
            if bundle.secondary is not None:
                update_secondary(bundle.secondary, batch, cfg.learning_rate)

        if decision.source == TEACHER:
            taken += 1
            teacher_queries += 1
        elif decision.source == MODEL_REUSE:
            reused += 1
            reuse_steps += 1
        if decision.u_s is not None:
            us_sum += decision.u_s
            us_n += 1
        if decision.u_m is not None:
            um_sum += decision.u_m
            um_n += 1
        if collect_trace:
            model = bundle.model
            trace.append(TraceRow(
                step=t, decision=decision,
                advice_size=len(bundle.advice) if bundle.advice is not None else 0,
                model_is_trained=bool(model is not None and model.trained),
                model_trained_this_step=bool(
                    model is not None and model.trained and model.t_last == t),
                rho=bundle.gate.rho if bundle.gate is not None else None,
                episode_started=episode_started))
        episode_started = False

        if done:
            obs = env.reset()
            bundle.on_episode_start()
            episode_started = True
        else:
            obs = next_obs

        if t % cfg.eval_interval == 0:
            mean, stderr = evaluate(bundle.student, spec, cfg.gamma,
                                    cfg.eval_trials, bundle.eval_seed)
            accuracy = None
            if (bundle.model is not None and bundle.model.trained
                    and len(visited) > 0):
                accuracy = model_accuracy(bundle.model, teacher,
                                          visited.states())
            window = cfg.eval_interval
            rows.append(MetricsRow(
                step=t,
                eval_return_mean=mean,
                eval_return_stderr=stderr,
                advice_taken_per_100=100.0 * taken / window,
                advice_reused_per_100=100.0 * reused / window,
                model_accuracy=accuracy,
                rho=bundle.gate.rho if bundle.gate is not None else None,
                budget_remaining=(float(bundle.budget)
                                  if bundle.strategy != "NA" else None),
                u_s_mean=us_sum / us_n if us_n else None,
                u_m_mean=um_sum / um_n if um_n else None))
            taken = reused = 0
            us_sum = um_sum = 0.0
            us_n = um_n = 0
            if (stop_at_return is not None and steps_to_target is None
                    and mean >= stop_at_return):
                steps_to_target = t
                if stop_early:
                    break

    return SeedResult(
        seed=seed, rows=rows, trace=trace,
        budget_final=bundle.budget,
        teacher_queries=teacher_queries, reuse_steps=reuse_steps,
        advice_size=len(bundle.advice) if bundle.advice is not None else 0,
        steps_run=steps_run, steps_to_target=steps_to_target,
        params_digest=bundle.params_digest(),
        bundle=bundle if keep_bundle else None)


# ----------------------------------------------------------------- CSV I/O


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def rows_to_csv(rows: list[MetricsRow]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_field(v) for v in row.as_fields()))
    return "\n".join(lines) + "\n"


def write_rows(path: str, rows: list[MetricsRow]) -> None:
    with open(path, "w") as fh:
        fh.write(rows_to_csv(rows))


def aggregate_rows(per_seed: list[list[MetricsRow]]) -> list[MetricsRow]:
    """Cross-seed mean per column; the stderr column becomes the standard
    error of the per-seed evaluation means (sample stddev / sqrt(seeds))."""
    if not per_seed:
        raise ValueError("nothing to aggregate")
    lengths = {len(rows) for rows in per_seed}
    if len(lengths) != 1:
        raise ValueError("per-seed row counts differ; cannot aggregate")
    out = []
    for group in zip(*per_seed):
        steps = {row.step for row in group}
        if len(steps) != 1:
            raise ValueError("per-seed steps are misaligned")
        means = np.array([row.eval_return_mean for row in group])
        stderr = (float(means.std(ddof=1) / np.sqrt(len(means)))
                  if len(means) > 1 else 0.0)

        def present_mean(name):
            values = [getattr(row, name) for row in group
                      if getattr(row, name) is not None]
            return float(np.mean(values)) if values else None

        out.append(MetricsRow(
            step=group[0].step,
            eval_return_mean=float(means.mean()),
            eval_return_stderr=stderr,
            advice_taken_per_100=present_mean("advice_taken_per_100"),
            advice_reused_per_100=present_mean("advice_reused_per_100"),
            model_accuracy=present_mean("model_accuracy"),
            rho=present_mean("rho"),
            budget_remaining=present_mean("budget_remaining"),
            u_s_mean=present_mean("u_s_mean"),
            u_m_mean=present_mean("u_m_mean")))
    return out


# ------------------------------------------------------------- experiments


@dataclass
class RunReport:
    label: str
    out_dir: str
    seed_csvs: dict = field(default_factory=dict)
    aggregate_csv: str = ""
    report_path: str = ""
    results: list = field(default_factory=list)


def _seed_worker(args) -> SeedResult:
    cfg, seed = args
    return run_single_seed(cfg, seed)


def run_experiment(cfg: ExperimentConfig, seed_offset: int = 0,
                   out_dir: str | None = None) -> RunReport:
    """Run every configured seed, write per-seed and aggregate CSVs plus a
    JSON summary; fails on config/IO problems before any training starts."""
    out_dir = out_dir if out_dir is not None else cfg.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as err:
        raise ConfigError(f"output directory {out_dir!r} not writable: {err}")

    spec = cfg.grid_spec()          # fail fast on bad env/map
    build_teacher(cfg, spec)        # fail fast on bad checkpoint

    seeds = [s + seed_offset for s in cfg.seeds]
    if cfg.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_seed_worker, [(cfg, s) for s in seeds]))
    else:
        results = [run_single_seed(cfg, s) for s in seeds]

    report = RunReport(label=cfg.label, out_dir=out_dir, results=results)
    for result in results:
        path = os.path.join(out_dir, f"{cfg.label}_seed{result.seed}.csv")
        write_rows(path, result.rows)
        report.seed_csvs[result.seed] = path
    aggregate = aggregate_rows([r.rows for r in results])
    report.aggregate_csv = os.path.join(out_dir, f"{cfg.label}_aggregate.csv")
    write_rows(report.aggregate_csv, aggregate)

    summary = {
        "label": cfg.label,
        "seeds": seeds,
        "seed_csvs": {str(k): v for k, v in report.seed_csvs.items()},
        "aggregate_csv": report.aggregate_csv,
        "per_seed": [{
            "seed": r.seed,
            "final_eval_return": r.rows[-1].eval_return_mean if r.rows else None,
            "budget_final": r.budget_final,
            "teacher_queries": r.teacher_queries,
            "reuse_steps": r.reuse_steps,
            "advice_size": r.advice_size,
            "steps_run": r.steps_run,
        } for r in results],
    }
    report.report_path = os.path.join(out_dir, f"{cfg.label}_report.json")
    with open(report.report_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def pretrain_teacher(spec: GridSpec, mode: str, out_path: str,
                     gamma: float = 0.99, steps: int = 40_000, seed: int = 1,
                     min_return_fraction: float = 0.9) -> TeacherPolicy:
    """Produce a teacher and write its checkpoint.

    oracle: solve the grid exactly and encode the Q-table as a network.
    dqn: train a plain student; refuse to checkpoint below the bar.
    """
    if mode == "oracle":
        q = value_iteration(spec, gamma)
        save_network(q_table_as_network(spec, q), out_path)
        return TeacherPolicy("oracle_greedy", spec, q_table=q)
    if mode != "dqn":
        raise ValueError(f"unknown teacher mode {mode!r}")

    target = min_return_fraction * optimal_return(spec, gamma)
    # the preset field is a placeholder: the explicit spec drives the run
    cfg = ExperimentConfig(env_preset="open5", seeds=(seed,), gamma=gamma,
                           total_steps=steps, eval_interval=1_000,
                           eval_trials=3)
    result = run_single_seed(cfg, seed, spec=spec, stop_at_return=target,
                             stop_early=True, keep_bundle=True)
    if result.steps_to_target is None:
        raise PretrainRefused(
            f"trained policy never reached {target:.4f} within {steps} steps")
    net = result.bundle.student.online_net
    save_network(net, out_path)
    return TeacherPolicy.from_network(spec, net)
