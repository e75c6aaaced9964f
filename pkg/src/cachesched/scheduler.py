"""Accumulate-and-reset cache scheduling.

The main path sums per-step estimated output differences since the last
computed step and recomputes once the sum strictly exceeds the threshold; a
sum equal to the threshold still reuses. The CFG path runs the same rule on
codebook values to decide whether the unconditional pass can be reused. When
the main path reuses a step, nothing runs and the CFG decision is Skipped,
but the CFG accumulator keeps growing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, ValidationError
from .poly_fit import predict
from .trace_model import (
    CacheSchedule,
    CfgDecision,
    DiffCodebook,
    FitModel,
    MainDecision,
    TimestepTrace,
    count_passes,
)

TEACACHE = "teacache"
PCA_TEACACHE = "pca_teacache"
DYNCFG_ONLY = "dyncfg_only"
PROMPTTEA = "prompttea"
POLICIES = (TEACACHE, PCA_TEACACHE, DYNCFG_ONLY, PROMPTTEA)

MAIN_CACHING = {TEACACHE, PCA_TEACACHE, PROMPTTEA}
CFG_CACHING = {DYNCFG_ONLY, PROMPTTEA}

# Relative slack on the threshold comparison so that sums that are equal in
# decimal (0.2 + 0.4 vs 0.6) stay ties after binary rounding.
TIE_RTOL = 1e-9


def exceeds(acc: float, delta: float) -> bool:
    return acc > delta * (1.0 + TIE_RTOL)


@dataclass(frozen=True)
class PolicyConfig:
    policy: str
    delta_main: float | None = None
    delta_cfg: float | None = None
    cfg_enabled: bool = True

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigurationError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.policy in MAIN_CACHING:
            _check_delta("delta_main", self.delta_main)
        if self.policy in CFG_CACHING and self.cfg_enabled:
            _check_delta("delta_cfg", self.delta_cfg)

    @property
    def uses_codebook(self) -> bool:
        return self.cfg_enabled and self.policy in CFG_CACHING


def _check_delta(name, value):
    if value is None or isinstance(value, bool) or not math.isfinite(value) or value <= 0:
        raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class StepEstimates:
    est_main: tuple[float, ...]
    codebook: DiffCodebook | None = None

    def __post_init__(self):
        est = tuple(float(v) for v in self.est_main)
        if len(est) < 1:
            raise ValidationError("est_main is empty")
        if any(not math.isfinite(v) or v < 0 for v in est):
            raise ValidationError("est_main entries must be finite and non-negative")
        object.__setattr__(self, "est_main", est)
        if self.codebook is not None and len(self.codebook) != len(est):
            raise DimensionError(
                f"codebook has {len(self.codebook)} steps, estimates have {len(est)}"
            )

    @property
    def num_steps(self) -> int:
        return len(self.est_main)


def estimates_from_model(trace: TimestepTrace, model: FitModel,
                         codebook: DiffCodebook | None = None) -> StepEstimates:
    est = [0.0] + [predict(model, trace.x[t], t) for t in range(1, trace.num_steps)]
    return StepEstimates(tuple(est), codebook)


def estimates_from_recorded(trace: TimestepTrace, codebook: DiffCodebook | None = None) -> StepEstimates:
    if trace.y is None:
        raise ValidationError(f"trace {trace.prompt_id!r} has no recorded output differences")
    return StepEstimates((0.0,) + trace.y[1:], codebook)


def build_codebook(traces: Sequence[TimestepTrace]) -> DiffCodebook:
    """Per-step mean of the conditional/unconditional differences."""
    rows = [tr.cfg_diff for tr in traces if tr.cfg_diff is not None]
    if not rows:
        raise ValidationError("no trace carries cfg_diff data")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise DimensionError(f"cfg_diff lengths differ across traces: {sorted(lengths)}")
    values = np.mean(np.asarray(rows, dtype=float), axis=0)
    return DiffCodebook(values=tuple(float(v) for v in values), source_count=len(rows))


def simulate_main(est: Sequence[float], delta: float) -> tuple[list[MainDecision], list[float]]:
    """Main-path decisions and the accumulator value tested at each step.

    ``est[0]`` is never read: step 0 always computes.
    """
    if len(est) < 1:
        raise ValidationError("est is empty")
    _check_delta("delta", delta)
    decisions = [MainDecision.COMPUTE]
    trace = [0.0]
    acc = 0.0
    for value in est[1:]:
        acc += value
        trace.append(acc)
        if exceeds(acc, delta):
            decisions.append(MainDecision.COMPUTE)
            acc = 0.0
        else:
            decisions.append(MainDecision.REUSE)
    return decisions, trace


def simulate_cfg(codebook, delta_cfg: float,
                 main_decisions: Sequence[MainDecision]) -> tuple[list[CfgDecision], list[float]]:
    values = codebook.values if isinstance(codebook, DiffCodebook) else tuple(codebook)
    if len(values) != len(main_decisions):
        raise DimensionError(f"codebook has {len(values)} steps, schedule has {len(main_decisions)}")
    if len(values) < 1:
        raise ValidationError("codebook is empty")
    _check_delta("delta_cfg", delta_cfg)
    decisions = [CfgDecision.COMPUTE_BOTH if main_decisions[0] is MainDecision.COMPUTE else CfgDecision.SKIPPED]
    trace = [0.0]
    acc = 0.0
    for value, main in zip(values[1:], main_decisions[1:]):
        acc += value
        trace.append(acc)
        if MainDecision(main) is MainDecision.REUSE:
            decisions.append(CfgDecision.SKIPPED)
        elif exceeds(acc, delta_cfg):
            decisions.append(CfgDecision.COMPUTE_BOTH)
            acc = 0.0
        else:
            decisions.append(CfgDecision.REUSE_UNCOND)
    return decisions, trace


def simulate(config: PolicyConfig, estimates: StepEstimates) -> CacheSchedule:
    T = estimates.num_steps
    if config.policy in MAIN_CACHING:
        main, main_acc = simulate_main(estimates.est_main, config.delta_main)
    else:
        main, main_acc = [MainDecision.COMPUTE] * T, [0.0] * T

    if config.uses_codebook:
        if estimates.codebook is None:
            raise ConfigurationError(f"policy {config.policy} with CFG enabled needs a codebook")
        cfg, cfg_acc = simulate_cfg(estimates.codebook, config.delta_cfg, main)
    else:
        # both passes (or the single pass when CFG is off) run at every computed step
        cfg = [CfgDecision.COMPUTE_BOTH if m is MainDecision.COMPUTE else CfgDecision.SKIPPED for m in main]
        cfg_acc = [0.0] * T

    computed = count_passes(main, cfg, config.cfg_enabled)
    baseline = T * (2 if config.cfg_enabled else 1)
    return CacheSchedule(
        main_decisions=tuple(main),
        cfg_decisions=tuple(cfg),
        main_accumulator=tuple(main_acc),
        cfg_accumulator=tuple(cfg_acc),
        computed_passes=computed,
        baseline_passes=baseline,
        speedup=baseline / computed,
        cfg_enabled=config.cfg_enabled,
        policy=config.policy,
        delta_main=config.delta_main if config.policy in MAIN_CACHING else None,
        delta_cfg=config.delta_cfg if config.uses_codebook else None,
    )


@dataclass(frozen=True)
class ComparisonRow:
    policy: str
    delta_main: float | None
    delta_cfg: float | None
    computed_passes: int | None
    speedup: float | None
    reuse_ratio: float | None
    schedule: CacheSchedule | None = None
    error: str | None = None


REPORT_COLUMNS = ("policy", "delta_main", "delta_cfg", "computed_passes", "speedup", "reuse_ratio")


def compare_policies(configs: Sequence[PolicyConfig], estimates: StepEstimates) -> list[ComparisonRow]:
    """One summary row per config; a failing row records its error and the rest still run."""
    if not configs:
        raise ValidationError("no policy configurations given")
    rows = []
    for cfg in configs:
        try:
            sched = simulate(cfg, estimates)
        except (ConfigurationError, ValidationError, DimensionError) as exc:
            rows.append(ComparisonRow(cfg.policy, cfg.delta_main, cfg.delta_cfg, None, None, None, error=str(exc)))
            continue
        rows.append(ComparisonRow(
            policy=cfg.policy,
            delta_main=sched.delta_main,
            delta_cfg=sched.delta_cfg,
            computed_passes=sched.computed_passes,
            speedup=sched.speedup,
            reuse_ratio=sched.reuse_ratio,
            schedule=sched,
        ))
    return rows
