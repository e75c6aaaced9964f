import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cachesched.errors import ConfigurationError, DimensionError, ValidationError
from cachesched.scheduler import (
    PolicyConfig,
    StepEstimates,
    build_codebook,
    compare_policies,
    estimates_from_model,
    estimates_from_recorded,
    simulate,
    simulate_cfg,
    simulate_main,
)
from cachesched.trace_model import CfgDecision, DiffCodebook, FitModel, MainDecision, TimestepTrace

from .oracles import check_boundary

C, R = MainDecision.COMPUTE, MainDecision.REUSE
CB, RU, SK = CfgDecision.COMPUTE_BOTH, CfgDecision.REUSE_UNCOND, CfgDecision.SKIPPED


def computed_steps(decisions, marker):
    return [t for t, d in enumerate(decisions) if d is marker]


# --- codebook -----------------------------------------------------------------

def test_codebook_single_trace():
    cb = build_codebook([TimestepTrace("a", (0, 0), cfg_diff=(0.1, 0.2))])
    assert cb.values == (0.1, 0.2)
    assert cb.source_count == 1


def test_codebook_elementwise_mean():
    cb = build_codebook([TimestepTrace("a", (0, 0), cfg_diff=(0.1, 0.3)),
                         TimestepTrace("b", (0, 0), cfg_diff=(0.3, 0.1)),
                         TimestepTrace("c", (0, 0))])
    assert cb.values == pytest.approx((0.2, 0.2), rel=1e-15)
    assert cb.source_count == 2


def test_codebook_errors():
    with pytest.raises(DimensionError):
        build_codebook([TimestepTrace("a", (0, 0), cfg_diff=(0.1, 0.3)),
                        TimestepTrace("b", (0, 0, 0), cfg_diff=(0.1, 0.3, 0.2))])
    with pytest.raises(ValidationError):
        build_codebook([TimestepTrace("a", (0, 0))])


# --- main path ----------------------------------------------------------------

def test_main_hand_simulation_with_tie():
    decisions, acc = simulate_main([99.0, 0.5, 0.3, 0.2, 0.4], 0.6)
    assert decisions == [C, R, C, R, R]
    assert acc == pytest.approx([0.0, 0.5, 0.8, 0.2, 0.6])


def test_exact_binary_tie_reuses():
    decisions, _ = simulate_main([0.0, 0.25, 0.5], 0.75)
    assert decisions == [C, R, R]


def test_main_all_zero_reuses():
    decisions, _ = simulate_main([0.0] * 8, 0.1)
    assert decisions == [C] + [R] * 7


def test_main_small_delta_all_compute():
    decisions, _ = simulate_main([0.3, 0.2, 0.5, 0.25], 0.1)
    assert decisions == [C] * 4


def test_main_errors():
    with pytest.raises(ValidationError):
        simulate_main([], 0.1)
    with pytest.raises(ConfigurationError):
        simulate_main([0.0, 0.1], 0.0)


# --- cfg path -----------------------------------------------------------------

def test_cfg_hand_simulation():
    decisions, acc = simulate_cfg(DiffCodebook((0.0, 0.01, 0.01, 0.05)), 0.02, [C] * 4)
    assert decisions == [CB, RU, RU, CB]
    assert acc == pytest.approx([0.0, 0.01, 0.02, 0.07])


def test_cfg_main_reuse_skips():
    decisions, _ = simulate_cfg(DiffCodebook((0.0, 0.5, 0.5, 0.5)), 0.02, [C, R, R, R])
    assert decisions == [CB, SK, SK, SK]


def test_cfg_huge_threshold():
    decisions, _ = simulate_cfg(DiffCodebook((0.0, 0.5, 0.5, 0.5, 0.5)), 1e9, [C, C, R, C, C])
    assert decisions == [CB, RU, SK, RU, RU]


def test_cfg_accumulator_advances_through_skipped_steps():
    # 0.015 at the skipped step is still counted: 0.015 + 0.01 > 0.02
    decisions, acc = simulate_cfg(DiffCodebook((0.0, 0.015, 0.01)), 0.02, [C, R, C])
    assert decisions == [CB, SK, CB]
    assert acc == pytest.approx([0.0, 0.015, 0.025])


def test_cfg_length_mismatch():
    with pytest.raises(DimensionError):
        simulate_cfg(DiffCodebook((0.0, 0.1)), 0.02, [C, C, C])


# --- composition and accounting -----------------------------------------------

def test_all_compute_teacache_no_cfg():
    sched = simulate(PolicyConfig("teacache", 0.01, cfg_enabled=False), StepEstimates((1.0,) * 50))
    assert sched.computed_passes == 50
    assert sched.baseline_passes == 50
    assert sched.speedup == 1.0


def test_prompttea_pass_count():
    est = StepEstimates((0.0, 0.1, 0.9, 0.1), DiffCodebook((0.0, 0.05, 0.05, 0.05)))
    sched = simulate(PolicyConfig("prompttea", 0.5, 0.02), est)
    assert sched.main_decisions == (C, R, C, R)
    assert sched.cfg_decisions == (CB, SK, CB, SK)
    assert sched.computed_passes == 4
    assert sched.baseline_passes == 8
    assert sched.speedup == 2.0


def test_dyncfg_only_pass_count():
    est = StepEstimates((0.0,) * 4, DiffCodebook((0.0, 0.01, 0.01, 0.05)))
    sched = simulate(PolicyConfig("dyncfg_only", delta_cfg=0.02), est)
    assert sched.cfg_decisions == (CB, RU, RU, CB)
    assert sched.computed_passes == 6
    assert sched.speedup == 8 / 6


def test_prompttea_without_cfg_matches_pca_teacache():
    est = StepEstimates((0.0, 0.1, 0.9, 0.1, 0.3))
    a = simulate(PolicyConfig("prompttea", 0.5, cfg_enabled=False), est)
    b = simulate(PolicyConfig("pca_teacache", 0.5, cfg_enabled=False), est)
    assert a.main_decisions == b.main_decisions
    assert a.computed_passes == b.computed_passes == 2
    assert a.baseline_passes == 5


def test_missing_codebook_is_configuration_error():
    with pytest.raises(ConfigurationError):
        simulate(PolicyConfig("prompttea", 0.2, 0.02), StepEstimates((0.0, 0.1)))


def test_policy_config_validation():
    with pytest.raises(ConfigurationError):
        PolicyConfig("fastercache", 0.1)
    with pytest.raises(ConfigurationError):
        PolicyConfig("teacache")
    with pytest.raises(ConfigurationError):
        PolicyConfig("dyncfg_only", delta_cfg=-1.0)
    PolicyConfig("dyncfg_only", cfg_enabled=False)


# --- estimates ------------------------------------------------------------------

def test_estimates_from_model_use_step_index():
    # y_hat = t / t_normalizer, so est[t] = t / 4
    model = FitModel("multivariate12", (0.0, 0.0, 1.0) + (0.0,) * 9, t_normalizer=4)
    est = estimates_from_model(TimestepTrace("p", (0.0, 0.1, 0.1, 0.1, 0.1)), model)
    assert est.est_main == (0.0, 0.25, 0.5, 0.75, 1.0)


def test_estimates_from_recorded_ignore_step_zero():
    est = estimates_from_recorded(TimestepTrace("p", (0.0, 0.1, 0.2), y=(5.0, 0.4, 0.3)))
    assert est.est_main == (0.0, 0.4, 0.3)
    with pytest.raises(ValidationError):
        estimates_from_recorded(TimestepTrace("p", (0.0, 0.1)))


# --- comparison -------------------------------------------------------------------

def test_compare_threshold_rows():
    est = StepEstimates(tuple(np.random.default_rng(0).uniform(0, 0.2, 50)))
    rows = compare_policies([PolicyConfig("teacache", 0.2, cfg_enabled=False),
                             PolicyConfig("teacache", 0.3, cfg_enabled=False)], est)
    assert rows[1].computed_passes <= rows[0].computed_passes
    assert rows[0].reuse_ratio == pytest.approx(1 - rows[0].computed_passes / 50)


def test_compare_empty():
    with pytest.raises(ValidationError):
        compare_policies([], StepEstimates((0.0,)))


def test_compare_single_row_matches_simulate():
    est = StepEstimates((0.0, 0.3, 0.3, 0.3), DiffCodebook((0.0, 0.01, 0.02, 0.03)))
    cfg = PolicyConfig("prompttea", 0.5, 0.02)
    (row,) = compare_policies([cfg], est)
    assert row.schedule == simulate(cfg, est)
    assert (row.computed_passes, row.speedup) == (row.schedule.computed_passes, row.schedule.speedup)


def test_compare_continues_after_failed_row():
    est = StepEstimates((0.0, 0.3, 0.3))
    rows = compare_policies([PolicyConfig("prompttea", 0.5, 0.02), PolicyConfig("teacache", 0.5)], est)
    assert rows[0].error and rows[0].computed_passes is None
    assert rows[1].error is None and rows[1].computed_passes is not None


# --- properties -------------------------------------------------------------------

est_lists = st.integers(1, 50).flatmap(lambda T: st.lists(st.floats(0, 1), min_size=T, max_size=T))


@settings(max_examples=300)
@given(est_lists, st.floats(0.01, 3))
def test_main_boundary_property(est, delta):
    decisions, _ = simulate_main(est, delta)
    assert check_boundary(est, delta, computed_steps(decisions, C)) == []


@settings(max_examples=300)
@given(st.integers(1, 50).flatmap(lambda T: st.tuples(
    st.lists(st.floats(0, 1), min_size=T, max_size=T),
    st.lists(st.floats(0, 0.05), min_size=T, max_size=T))),
    st.floats(0.05, 2), st.floats(0.005, 0.1))
def test_cfg_boundary_property(pair, delta, delta_cfg):
    est, cb = pair
    sched = simulate(PolicyConfig("prompttea", delta, delta_cfg), StepEstimates(est, DiffCodebook(cb)))
    skipped = set(computed_steps(sched.cfg_decisions, SK))
    assert check_boundary(cb, delta_cfg, computed_steps(sched.cfg_decisions, CB), skip=skipped) == []
    assert skipped == set(computed_steps(sched.main_decisions, R))


@given(est_lists, st.floats(0.01, 2), st.floats(0, 2))
def test_threshold_monotonicity(est, delta, extra):
    lo, _ = simulate_main(est, delta)
    hi, _ = simulate_main(est, delta + extra)
    assert hi.count(C) <= lo.count(C)


@given(est_lists, st.floats(0.01, 2), st.floats(0.01, 100))
def test_scaling_covariance(est, delta, scale):
    a, _ = simulate_main(est, delta)
    b, _ = simulate_main([v * scale for v in est], delta * scale)
    assert a == b


@given(st.integers(1, 30).flatmap(lambda T: st.tuples(
    st.lists(st.floats(0, 1), min_size=T, max_size=T),
    st.lists(st.floats(0, 0.05), min_size=T, max_size=T))),
    st.sampled_from(["teacache", "pca_teacache", "dyncfg_only", "prompttea"]), st.booleans())
def test_speedup_bounds_and_step_zero(pair, policy, cfg_enabled):
    est, cb = pair
    sched = simulate(PolicyConfig(policy, 0.3, 0.02, cfg_enabled), StepEstimates(est, DiffCodebook(cb)))
    assert sched.main_decisions[0] is C and sched.cfg_decisions[0] is CB
    assert 1.0 <= sched.speedup <= sched.baseline_passes
    full = sched.computed_passes == sched.baseline_passes
    assert (sched.speedup == 1.0) == full
