"""Decision flows for the six advising strategies."""

import numpy as np
import pytest

from suair.dqn import StudentAgent
from suair.imitation import AdviceBuffer, TeacherModel
from suair.network import DenseLayer, Network
from suair.strategies import (
    MODEL_REUSE,
    SELF,
    TEACHER,
    AdvisingConfig,
    ReuseGate,
    decay_rho,
    decide_air,
    decide_ea,
    decide_na,
    decide_ra,
    decide_sua,
    decide_sua_air,
    episode_reset_gate,
)
from suair.uncertainty import SecondaryNet, UncertaintyBuffer

OBS_DIM, N_ACTIONS = 3, 4
STATE = np.array([1.0, 0.0, 0.0])


class FixedTeacher:
    def __init__(self, action=2):
        self.fixed = action
        self.queries = 0

    def action(self, state):
        self.queries += 1
        return self.fixed


def make_student(seed=0):
    return StudentAgent(obs_dim=OBS_DIM, n_actions=N_ACTIONS, hidden=(8,),
                        replay_capacity=100, replay_min=1, seed=seed)


def constant_output_secondary(trained=True):
    """Dropout present but applied to zero weights: u_s is exactly 0."""
    l1 = DenseLayer(w=np.zeros((4, OBS_DIM)), b=np.ones(4), activation="relu")
    l2 = DenseLayer(w=np.zeros((N_ACTIONS, 4)), b=np.arange(4.0),
                    activation="linear", dropout_rate=0.5)
    sec = SecondaryNet(Network.from_parts([l1, l2], head=None), n_passes=5)
    sec.trained_once = trained
    return sec


def untrained_secondary():
    return constant_output_secondary(trained=False)


def stub_model(probs=(0.1, 0.2, 0.6, 0.1), c2=0.5, trained=True):
    """No-dropout softmax stub: u_m is exactly 0, argmax is fixed."""
    logits = np.log(np.asarray(probs))
    layer = DenseLayer(w=np.tile(logits[:, None], (1, OBS_DIM)),
                       b=np.zeros(N_ACTIONS), activation="softmax")
    model = TeacherModel(Network.from_parts([layer], head=None), n_passes=5)
    model.trained = trained
    model.c2 = c2 if trained else None
    return model


def cfg(**kw):
    defaults = dict(strategy="SUA_AIR", budget=10, min_window=1, n_min=5,
                    t_min=100, k_init=5, k_periodic=2, n_passes=5)
    defaults.update(kw)
    return AdvisingConfig(**defaults)


class TestSua:
    def test_untrained_student_early_advising(self):
        teacher = FixedTeacher()
        d = decide_sua(STATE, make_student(), untrained_secondary(),
                       UncertaintyBuffer(1, 10), teacher, budget=3, step=0,
                       cfg=cfg(), policy_rng=np.random.default_rng(0))
        assert d.source == TEACHER and d.action == 2 and d.budget_after == 2
        assert teacher.queries == 1

    def test_budget_zero_still_records_uncertainty(self):
        buf = UncertaintyBuffer(1, 10)
        d = decide_sua(STATE, make_student(), constant_output_secondary(),
                       buf, FixedTeacher(), budget=0, step=0, cfg=cfg(),
                       policy_rng=np.random.default_rng(0))
        assert d.source == SELF and d.budget_after == 0
        assert len(buf) == 1 and d.u_s == 0.0 and d.c1 is None

    def test_boundary_equality_falls_to_self(self):
        # constant zero uncertainty: window holds only zeros, c1 == u_s == 0
        buf = UncertaintyBuffer(1, 10)
        sec = constant_output_secondary()
        d = decide_sua(STATE, make_student(), sec, buf, FixedTeacher(),
                       budget=5, step=0, cfg=cfg(),
                       policy_rng=np.random.default_rng(0))
        assert d.u_s == 0.0 and d.c1 == 0.0
        assert d.source == SELF and d.budget_after == 5

    def test_underfull_window_asks(self):
        buf = UncertaintyBuffer(min_window=50, max_window=100)
        d = decide_sua(STATE, make_student(), constant_output_secondary(),
                       buf, FixedTeacher(), budget=5, step=0, cfg=cfg(),
                       policy_rng=np.random.default_rng(0))
        assert d.source == TEACHER and d.c1 is None and d.budget_after == 4


class TestSuaAir:
    def run_one(self, budget, gate, model=None, secondary=None, advice=None,
                the_cfg=None):
        return decide_sua_air(
            STATE, make_student(), secondary or constant_output_secondary(),
            UncertaintyBuffer(1, 10), FixedTeacher(), model or stub_model(),
            advice if advice is not None else AdviceBuffer(N_ACTIONS), gate,
            budget, step=1, cfg=the_cfg or cfg(),
            policy_rng=np.random.default_rng(0))

    def test_reuse_when_budget_gone_and_model_confident(self):
        d = self.run_one(0, ReuseGate(rho=0.5, reuse_enabled=True))
        assert d.source == MODEL_REUSE and d.action == 2
        assert d.u_m == 0.0 and d.c2 == 0.5 and d.budget_after == 0

    def test_gate_disabled_blocks_reuse(self):
        d = self.run_one(0, ReuseGate(rho=0.5, reuse_enabled=False))
        assert d.source == SELF

    def test_uncertain_model_blocks_reuse(self):
        d = self.run_one(0, ReuseGate(rho=0.5, reuse_enabled=True),
                         model=stub_model(c2=0.0))  # u_m == c2: strict <
        assert d.source == SELF

    def test_collection_preempts_reuse(self):
        advice = AdviceBuffer(N_ACTIONS)
        d = self.run_one(3, ReuseGate(rho=0.5, reuse_enabled=True),
                         secondary=untrained_secondary(), advice=advice)
        assert d.source == TEACHER and d.budget_after == 2
        assert len(advice) == 1

    def test_untrained_model_never_reuses(self):
        d = self.run_one(0, ReuseGate(rho=0.5, reuse_enabled=True),
                         model=stub_model(trained=False))
        assert d.source == SELF and d.u_m is None and d.c2 is None

    def test_lazy_um_skips_measurement_when_action_determined(self):
        the_cfg = cfg(lazy_um=True)
        d = self.run_one(3, ReuseGate(rho=0.5, reuse_enabled=False),
                         secondary=untrained_secondary(), the_cfg=the_cfg)
        assert d.source == TEACHER and d.u_m is None

    def test_rho_decays_during_step(self):
        gate = ReuseGate(rho=0.5, reuse_enabled=False)
        the_cfg = cfg(rho_init=0.5, rho_final=0.1, rho_decay_start=0,
                      rho_decay_steps=10)
        decide_sua_air(STATE, make_student(), constant_output_secondary(),
                       UncertaintyBuffer(1, 10), FixedTeacher(), stub_model(),
                       AdviceBuffer(N_ACTIONS), gate, 0, step=5, cfg=the_cfg,
                       policy_rng=np.random.default_rng(0))
        assert gate.rho == pytest.approx(0.3)


class TestAir:
    def run_one(self, budget, gate, model, advice=None):
        return decide_air(STATE, make_student(), FixedTeacher(), model,
                          advice if advice is not None else AdviceBuffer(N_ACTIONS),
                          gate, budget, step=1, cfg=cfg(),
                          policy_rng=np.random.default_rng(0))

    def test_untrained_model_early_advising(self):
        advice = AdviceBuffer(N_ACTIONS)
        d = self.run_one(2, ReuseGate(0.5, False), stub_model(trained=False),
                         advice)
        assert d.source == TEACHER and d.budget_after == 1 and len(advice) == 1

    def test_boundary_equality_collects(self):
        # u_m == c2 must collect (>=), the complement of the strict reuse
        d = self.run_one(2, ReuseGate(0.5, True), stub_model(c2=0.0))
        assert d.source == TEACHER

    def test_no_budget_uncertain_model_acts_self(self):
        d = self.run_one(0, ReuseGate(0.5, True), stub_model(c2=0.0))
        assert d.source == SELF

    def test_no_budget_confident_model_reuses(self):
        d = self.run_one(0, ReuseGate(0.5, True), stub_model(c2=0.5))
        assert d.source == MODEL_REUSE and d.action == 2

    def test_confident_model_with_budget_may_reuse_not_collect(self):
        d = self.run_one(5, ReuseGate(0.5, True), stub_model(c2=0.5))
        assert d.source == MODEL_REUSE and d.budget_after == 5


class TestSimpleStrategies:
    def test_ea_spends_then_self(self):
        student, teacher = make_student(), FixedTeacher()
        d = decide_ea(STATE, student, teacher, budget=1, step=0,
                      policy_rng=np.random.default_rng(0))
        assert d.source == TEACHER and d.budget_after == 0
        d = decide_ea(STATE, student, teacher, budget=0, step=0,
                      policy_rng=np.random.default_rng(0))
        assert d.source == SELF and d.budget_after == 0

    def test_ea_total_queries_is_min_budget_steps(self):
        student, teacher = make_student(), FixedTeacher()
        rng = np.random.default_rng(0)
        budget = 7
        for step in range(20):
            d = decide_ea(STATE, student, teacher, budget, step, rng)
            budget = d.budget_after
        assert teacher.queries == 7 and budget == 0

    def test_ra_extremes_match_ea_and_na(self):
        student, teacher = make_student(), FixedTeacher()
        rng, srng = np.random.default_rng(0), np.random.default_rng(1)
        always = decide_ra(STATE, student, teacher, 5, 0, cfg(ra_probability=1.0),
                           rng, srng)
        assert always.source == TEACHER
        never = decide_ra(STATE, student, teacher, 5, 0, cfg(ra_probability=0.0),
                          rng, srng)
        assert never.source == SELF and never.budget_after == 5

    def test_ra_frequency_is_binomial(self):
        student, teacher = make_student(), FixedTeacher()
        rng, srng = np.random.default_rng(2), np.random.default_rng(3)
        the_cfg = cfg(ra_probability=0.5)
        taken = 0
        for step in range(10_000):
            d = decide_ra(STATE, student, teacher, 10**9, step, the_cfg, rng, srng)
            taken += d.source == TEACHER
        assert abs(taken - 5_000) < 3 * np.sqrt(10_000 * 0.25)

    def test_na_always_self(self):
        student = make_student()
        rng = np.random.default_rng(0)
        for step in range(50):
            assert decide_na(STATE, student, step, rng).source == SELF


class TestReuseGateSchedule:
    def test_extreme_rhos(self):
        rng = np.random.default_rng(0)
        gate = ReuseGate(rho=1.0)
        for _ in range(100):
            episode_reset_gate(gate, rng)
            assert gate.reuse_enabled
        gate = ReuseGate(rho=0.0)
        for _ in range(100):
            episode_reset_gate(gate, rng)
            assert not gate.reuse_enabled

    def test_half_rho_binomial(self):
        rng = np.random.default_rng(5)
        gate = ReuseGate(rho=0.5)
        enabled = 0
        for _ in range(10_000):
            episode_reset_gate(gate, rng)
            enabled += gate.reuse_enabled
        assert abs(enabled - 5_000) < 3 * np.sqrt(10_000 * 0.25)

    def test_linear_decay_anchors(self):
        the_cfg = cfg(rho_init=0.8, rho_final=0.2, rho_decay_start=100,
                      rho_decay_steps=200)
        gate = ReuseGate(rho=0.8)
        decay_rho(gate, 100, the_cfg)
        assert gate.rho == pytest.approx(0.8)
        decay_rho(gate, 200, the_cfg)
        assert gate.rho == pytest.approx(0.5)
        decay_rho(gate, 300, the_cfg)
        assert gate.rho == pytest.approx(0.2)
        decay_rho(gate, 10_000, the_cfg)
        assert gate.rho == pytest.approx(0.2)

    def test_rho_sequence_monotone_non_increasing(self):
        the_cfg = cfg(rho_init=0.5, rho_final=0.1, rho_decay_start=10,
                      rho_decay_steps=50)
        gate = ReuseGate(rho=0.5)
        history = []
        for t in range(100):
            decay_rho(gate, t, the_cfg)
            history.append(gate.rho)
        assert all(a >= b for a, b in zip(history, history[1:]))


class TestConfigValidation:
    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError):
            AdvisingConfig(strategy="BOGUS")

    def test_rejects_negative_budget(self):
        with pytest.raises(ValueError):
            AdvisingConfig(budget=-1)

    def test_rejects_rho_inversion(self):
        with pytest.raises(ValueError):
            AdvisingConfig(rho_init=0.1, rho_final=0.5)

    def test_rejects_bad_percentile(self):
        with pytest.raises(ValueError):
            AdvisingConfig(p1=0.0)
        with pytest.raises(ValueError):
            AdvisingConfig(p2=101)
