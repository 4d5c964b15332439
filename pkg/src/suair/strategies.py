"""Per-step advising decisions: when to ask, reuse, or act alone.

Six strategies share one decision record:

- NA: never advised.
- EA: teacher actions until the budget runs out.
- RA: coin-flip teacher actions until the budget runs out.
- AIR: model-of-teacher uncertainty drives both collection and reuse.
- SUA: student uncertainty drives collection; no reuse.
- SUA_AIR: student uncertainty drives collection, model uncertainty and a
  per-episode reuse gate drive reuse.

Collection always precedes reuse within a step, so a step never both spends
budget and reuses the model. Asking uses the strict comparison u_s > c1;
reusing uses the strict u_m < c2. Boundary equality falls through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dqn import StudentAgent
from .gridworld import TeacherPolicy
from .imitation import AdviceBuffer, TeacherModel, maybe_train, model_action, model_uncertainty
from .uncertainty import SecondaryNet, UncertaintyBuffer, record_and_threshold, student_uncertainty

STRATEGIES = ("NA", "EA", "RA", "AIR", "SUA", "SUA_AIR")

TEACHER, MODEL_REUSE, SELF = "teacher", "model_reuse", "self"


@dataclass
class AdvisingConfig:
    strategy: str = "NA"
    budget: int = 500
    p1: float = 70.0
    p2: float = 90.0
    rho_init: float = 0.5
    rho_final: float = 0.1
    rho_decay_steps: int = 30_000
    rho_decay_start: int = 5_000
    n_min: int = 50
    t_min: int = 1_000
    k_init: int = 2_000
    k_periodic: int = 1_000
    n_passes: int = 100
    ra_probability: float = 0.5
    min_window: int = 200
    max_window: int = 10_000
    secondary_dropout: float = 0.2
    model_dropout: float = 0.35
    imitation_lr: float = 1e-4
    imitation_batch: int = 32
    lazy_um: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; have {STRATEGIES}")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.rho_final > self.rho_init:
            raise ValueError("rho_final must not exceed rho_init")
        for name in ("rho_init", "rho_final", "ra_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 < v <= 100.0:
                raise ValueError(f"{name} must be in (0, 100], got {v}")
        for name in ("n_min", "t_min", "k_init", "k_periodic", "n_passes",
                     "rho_decay_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.rho_decay_start < 0:
            raise ValueError("rho_decay_start must be non-negative")


@dataclass
class StepDecision:
    """What happened on one training step, for traces and invariants."""

    source: str
    action: int
    u_s: float | None
    u_m: float | None
    c1: float | None
    c2: float | None
    budget_after: int
    reuse_enabled: bool


@dataclass
class ReuseGate:
    """Episode-level reuse switch with a decaying Bernoulli probability."""

    rho: float
    reuse_enabled: bool = False


def episode_reset_gate(gate: ReuseGate, rng: np.random.Generator) -> None:
    """Resample the episode's reuse switch with the current rho."""
    gate.reuse_enabled = bool(rng.random() < gate.rho)


def decay_rho(gate: ReuseGate, t: int, cfg: AdvisingConfig) -> None:
    """Linear decay from rho_init to rho_final starting at rho_decay_start."""
    if t <= cfg.rho_decay_start:
        gate.rho = cfg.rho_init
    elif t >= cfg.rho_decay_start + cfg.rho_decay_steps:
        gate.rho = cfg.rho_final
    else:
        frac = (t - cfg.rho_decay_start) / cfg.rho_decay_steps
        gate.rho = cfg.rho_init + (cfg.rho_final - cfg.rho_init) * frac


def _self_decision(student: StudentAgent, state, step, policy_rng, *,
                   u_s=None, u_m=None, c1=None, c2=None, budget=0,
                   reuse_enabled=False) -> StepDecision:
    action = student.act(state, step, policy_rng)
    return StepDecision(SELF, action, u_s, u_m, c1, c2, budget, reuse_enabled)


def _collect(state, student: StudentAgent, secondary: SecondaryNet,
             buf: UncertaintyBuffer, budget: int, cfg: AdvisingConfig):
    """Shared collection phase: measure/record u_s, decide whether to ask.

    Returns (ask, u_s, c1). u_s lands in the window every step once the
    secondary has trained, even with the budget exhausted; the threshold is
    only computed on the asking path.
    """
    u_s = c1 = None
    ask = False
    if secondary.trained_once:
        u_s = student_uncertainty(secondary, state)
        if budget > 0:
            c1 = record_and_threshold(buf, u_s, cfg.p1)
            ask = c1 is None or u_s > c1  # None: window underfull, ask early
        else:
            buf.append(u_s)
    elif budget > 0:
        ask = True  # nothing trained yet: early advising
    return ask, u_s, c1


def decide_sua(state, student: StudentAgent, secondary: SecondaryNet,
               buf: UncertaintyBuffer, teacher: TeacherPolicy, budget: int,
               step: int, cfg: AdvisingConfig,
               policy_rng: np.random.Generator) -> StepDecision:
    ask, u_s, c1 = _collect(state, student, secondary, buf, budget, cfg)
    if ask:
        return StepDecision(TEACHER, teacher.action(state), u_s, None, c1,
                            None, budget - 1, False)
    return _self_decision(student, state, step, policy_rng,
                          u_s=u_s, c1=c1, budget=budget)


def decide_sua_air(state, student: StudentAgent, secondary: SecondaryNet,
                   buf: UncertaintyBuffer, teacher: TeacherPolicy,
                   model: TeacherModel, advice: AdviceBuffer, gate: ReuseGate,
                   budget: int, step: int, cfg: AdvisingConfig,
                   policy_rng: np.random.Generator) -> StepDecision:
    ask, u_s, c1 = _collect(state, student, secondary, buf, budget, cfg)
    action = None
    source = SELF
    if ask:
        action = teacher.action(state)
        advice.append(state, action)
        budget -= 1
        source = TEACHER

    maybe_train(model, advice, step, cfg)

    u_m = None
    if model.trained:
        needed = action is None and gate.reuse_enabled
        if needed or not cfg.lazy_um:
            u_m = model_uncertainty(model, state)
    if (action is None and gate.reuse_enabled and model.trained
            and u_m is not None and u_m < model.c2):
        action = model_action(model, state)
        source = MODEL_REUSE

    decay_rho(gate, step, cfg)
    c2 = model.c2 if model.trained else None
    if action is None:
        return _self_decision(student, state, step, policy_rng, u_s=u_s,
                              u_m=u_m, c1=c1, c2=c2, budget=budget,
                              reuse_enabled=gate.reuse_enabled)
    return StepDecision(source, action, u_s, u_m, c1, c2, budget,
                        gate.reuse_enabled)


def decide_air(state, student: StudentAgent, teacher: TeacherPolicy,
               model: TeacherModel, advice: AdviceBuffer, gate: ReuseGate,
               budget: int, step: int, cfg: AdvisingConfig,
               policy_rng: np.random.Generator) -> StepDecision:
    """Collection asks when the model is untrained or uncertain (u_m >= c2),
    the exact complement of the reuse condition, so the two never overlap."""
    u_m = None
    action = None
    source = SELF
    if budget > 0:
        if not model.trained:
            ask = True
        else:
            u_m = model_uncertainty(model, state)
            ask = u_m >= model.c2
        if ask:
            action = teacher.action(state)
            advice.append(state, action)
            budget -= 1
            source = TEACHER

    retrained = maybe_train(model, advice, step, cfg)

    if action is None and gate.reuse_enabled and model.trained:
        if u_m is None or retrained:
            # no collection-phase measurement, or it came from the stale
            # pre-training model: measure against the current one
            u_m = model_uncertainty(model, state)
        if u_m < model.c2:
            action = model_action(model, state)
            source = MODEL_REUSE

    decay_rho(gate, step, cfg)
    c2 = model.c2 if model.trained else None
    if action is None:
        return _self_decision(student, state, step, policy_rng, u_m=u_m,
                              c2=c2, budget=budget,
                              reuse_enabled=gate.reuse_enabled)
    return StepDecision(source, action, None, u_m, None, c2, budget,
                        gate.reuse_enabled)


def decide_ea(state, student: StudentAgent, teacher: TeacherPolicy,
              budget: int, step: int,
              policy_rng: np.random.Generator) -> StepDecision:
    if budget > 0:
        return StepDecision(TEACHER, teacher.action(state), None, None, None,
                            None, budget - 1, False)
    return _self_decision(student, state, step, policy_rng, budget=budget)


def decide_ra(state, student: StudentAgent, teacher: TeacherPolicy,
              budget: int, step: int, cfg: AdvisingConfig,
              policy_rng: np.random.Generator,
              strategy_rng: np.random.Generator) -> StepDecision:
    if budget > 0 and strategy_rng.random() < cfg.ra_probability:
        return StepDecision(TEACHER, teacher.action(state), None, None, None,
                            None, budget - 1, False)
    return _self_decision(student, state, step, policy_rng, budget=budget)


def decide_na(state, student: StudentAgent, step: int,
              policy_rng: np.random.Generator) -> StepDecision:
    return _self_decision(student, state, step, policy_rng)
