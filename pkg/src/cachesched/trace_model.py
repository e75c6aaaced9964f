"""Domain types and their JSON persistence.

Every artifact is a JSON object carrying ``schema_version`` and a ``type`` tag.
Loading validates all type invariants; saving writes deterministic bytes
(fixed key order, ``repr``-exact floats, trailing newline).

Step indexing is 0-based and follows sampling order. Entry ``i`` of a recorded
difference sequence is the relative L1 difference between the feature at step
``i`` and the feature at step ``i - 1``, normalised by the step ``i - 1`` norm.
Entry 0 has no predecessor; recorders write 0.0 there and the scheduler never
reads it.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import SchemaError, ValidationError

SCHEMA_VERSION = 1

COMPLEX = "complex"
SIMPLE = "simple"
LABELS = (COMPLEX, SIMPLE)

MULTIVARIATE12 = "multivariate12"
UNIVARIATE5 = "univariate5"
COEFF_COUNT = {MULTIVARIATE12: 12, UNIVARIATE5: 5}

PAPER_LITERAL = "paper_literal"
COMPLEX_LOW = "complex_low"
ORIENTATIONS = (PAPER_LITERAL, COMPLEX_LOW)


class MainDecision(str, enum.Enum):
    COMPUTE = "Compute"
    REUSE = "Reuse"


class CfgDecision(str, enum.Enum):
    COMPUTE_BOTH = "ComputeBoth"
    REUSE_UNCOND = "ReuseUncond"
    SKIPPED = "Skipped"


def _check_scalars(values: Iterable[Any], what: str, where: str, nonneg: bool = True) -> tuple[float, ...]:
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
            raise ValidationError(f"{where}: {what}[{i}] is not a number: {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise ValidationError(f"{where}: {what}[{i}] is not finite")
        if nonneg and v < 0:
            raise ValidationError(f"{where}: {what}[{i}] = {v} is negative")
        out.append(v)
    return tuple(out)


@dataclass(frozen=True)
class TimestepTrace:
    prompt_id: str
    x: tuple[float, ...]
    y: tuple[float, ...] | None = None
    cfg_diff: tuple[float, ...] | None = None

    def __post_init__(self):
        where = f"trace {self.prompt_id!r}"
        if not isinstance(self.prompt_id, str):
            raise ValidationError(f"{where}: prompt_id must be a string")
        object.__setattr__(self, "x", _check_scalars(self.x, "x", where))
        if len(self.x) < 1:
            raise ValidationError(f"{where}: x must have at least one entry")
        for name in ("y", "cfg_diff"):
            seq = getattr(self, name)
            if seq is None:
                continue
            seq = _check_scalars(seq, name, where)
            if len(seq) != len(self.x):
                raise ValidationError(
                    f"{where}: {name} has length {len(seq)}, x has length {len(self.x)}"
                )
            object.__setattr__(self, name, seq)

    @property
    def num_steps(self) -> int:
        return len(self.x)

    def to_dict(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "x": list(self.x),
            "y": None if self.y is None else list(self.y),
            "cfg_diff": None if self.cfg_diff is None else list(self.cfg_diff),
        }

    @classmethod
    def from_dict(cls, d: dict, index: int = 0) -> "TimestepTrace":
        if not isinstance(d, dict):
            raise SchemaError(f"traces[{index}] is not an object")
        if "prompt_id" not in d or "x" not in d:
            raise SchemaError(f"traces[{index}] lacks prompt_id or x")
        for key in ("x", "y", "cfg_diff"):
            v = d.get(key)
            if v is not None and not isinstance(v, list):
                raise SchemaError(f"traces[{index}] ({d.get('prompt_id')!r}): {key} must be a list or null")
        return cls(
            prompt_id=d["prompt_id"],
            x=d["x"],
            y=d.get("y"),
            cfg_diff=d.get("cfg_diff"),
        )


@dataclass(frozen=True)
class EmbeddingBank:
    """Labeled reference embeddings (complex / simple prompt sets)."""

    entries: tuple[tuple[str, tuple[float, ...]], ...]
    dim: int

    def __post_init__(self):
        if isinstance(self.dim, bool) or not isinstance(self.dim, int) or self.dim < 1:
            raise ValidationError(f"bank: dim must be a positive integer, got {self.dim!r}")
        clean = []
        for i, entry in enumerate(self.entries):
            label, vector = entry
            if label not in LABELS:
                raise ValidationError(f"bank: entries[{i}] has unknown label {label!r}")
            vec = _check_scalars(vector, "vector", f"bank entries[{i}]", nonneg=False)
            if len(vec) != self.dim:
                raise ValidationError(f"bank: entries[{i}] has dimension {len(vec)}, expected {self.dim}")
            if math.sqrt(math.fsum(v * v for v in vec)) <= 1e-12:
                raise ValidationError(f"bank: entries[{i}] is a zero-norm vector")
            clean.append((label, vec))
        object.__setattr__(self, "entries", tuple(clean))

    @classmethod
    def from_arrays(cls, complex_vectors, simple_vectors) -> "EmbeddingBank":
        entries = [(COMPLEX, tuple(map(float, v))) for v in complex_vectors]
        entries += [(SIMPLE, tuple(map(float, v))) for v in simple_vectors]
        return cls(entries=tuple(entries), dim=len(entries[0][1]) if entries else 1)

    def vectors(self, label: str) -> np.ndarray:
        rows = [v for lab, v in self.entries if lab == label]
        return np.asarray(rows, dtype=float).reshape(len(rows), self.dim)

    def labels(self) -> list[str]:
        return [lab for lab, _ in self.entries]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "entries": [{"label": lab, "vector": list(v)} for lab, v in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingBank":
        if "dim" not in d or not isinstance(d.get("entries"), list):
            raise SchemaError("embedding bank needs 'dim' and an 'entries' list")
        entries = []
        for i, e in enumerate(d["entries"]):
            if not isinstance(e, dict) or "label" not in e or not isinstance(e.get("vector"), list):
                raise SchemaError(f"embedding bank entries[{i}] needs 'label' and a 'vector' list")
            entries.append((e["label"], e["vector"]))
        return cls(entries=tuple(entries), dim=d["dim"])


@dataclass(frozen=True)
class FitModel:
    kind: str
    coeffs: tuple[float, ...]
    t_normalizer: float = 1.0

    def __post_init__(self):
        if self.kind not in COEFF_COUNT:
            raise SchemaError(f"fit model: unknown kind {self.kind!r}")
        coeffs = _check_scalars(self.coeffs, "coeffs", "fit model", nonneg=False)
        if len(coeffs) != COEFF_COUNT[self.kind]:
            raise SchemaError(
                f"fit model: kind {self.kind} needs {COEFF_COUNT[self.kind]} coefficients, got {len(coeffs)}"
            )
        object.__setattr__(self, "coeffs", coeffs)
        tn = float(self.t_normalizer)
        if not math.isfinite(tn) or tn <= 0:
            raise ValidationError(f"fit model: t_normalizer must be positive, got {self.t_normalizer!r}")
        object.__setattr__(self, "t_normalizer", tn)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coeffs": list(self.coeffs), "t_normalizer": self.t_normalizer}

    @classmethod
    def from_dict(cls, d: dict) -> "FitModel":
        if "kind" not in d or not isinstance(d.get("coeffs"), list):
            raise SchemaError("fit model needs 'kind' and a 'coeffs' list")
        return cls(kind=d["kind"], coeffs=d["coeffs"], t_normalizer=d.get("t_normalizer", 1.0))


@dataclass(frozen=True)
class DiffCodebook:
    values: tuple[float, ...]
    source_count: int = 1

    def __post_init__(self):
        values = _check_scalars(self.values, "values", "codebook")
        if len(values) < 1:
            raise ValidationError("codebook: needs at least one value")
        object.__setattr__(self, "values", values)
        if isinstance(self.source_count, bool) or not isinstance(self.source_count, int) or self.source_count < 1:
            raise ValidationError(f"codebook: source_count must be a positive integer, got {self.source_count!r}")

    def __len__(self):
        return len(self.values)

    def to_dict(self) -> dict:
        return {"values": list(self.values), "source_count": self.source_count}

    @classmethod
    def from_dict(cls, d: dict) -> "DiffCodebook":
        if not isinstance(d.get("values"), list):
            raise SchemaError("codebook needs a 'values' list")
        return cls(values=d["values"], source_count=d.get("source_count", 1))


@dataclass(frozen=True)
class CacheSchedule:
    """Per-step decisions of one simulated policy, with pass accounting.

    Accumulator entries hold the value compared against the threshold at
    that step, i.e. before any reset.
    """

    main_decisions: tuple[MainDecision, ...]
    cfg_decisions: tuple[CfgDecision, ...]
    main_accumulator: tuple[float, ...]
    cfg_accumulator: tuple[float, ...]
    computed_passes: int
    baseline_passes: int
    speedup: float
    cfg_enabled: bool = True
    policy: str | None = None
    delta_main: float | None = None
    delta_cfg: float | None = None

    def __post_init__(self):
        try:
            main = tuple(MainDecision(d) for d in self.main_decisions)
            cfg = tuple(CfgDecision(d) for d in self.cfg_decisions)
        except ValueError as exc:
            raise SchemaError(f"schedule: {exc}") from None
        object.__setattr__(self, "main_decisions", main)
        object.__setattr__(self, "cfg_decisions", cfg)
        n = len(main)
        if n < 1:
            raise ValidationError("schedule: empty decision sequence")
        for name in ("cfg_decisions", "main_accumulator", "cfg_accumulator"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"schedule: {name} length differs from main_decisions ({n})")
        object.__setattr__(self, "main_accumulator", _check_scalars(self.main_accumulator, "main_accumulator", "schedule"))
        object.__setattr__(self, "cfg_accumulator", _check_scalars(self.cfg_accumulator, "cfg_accumulator", "schedule"))
        if main[0] is not MainDecision.COMPUTE:
            raise ValidationError("schedule: step 0 must be Compute")
        for t, (m, c) in enumerate(zip(main, cfg)):
            if (m is MainDecision.REUSE) != (c is CfgDecision.SKIPPED):
                raise ValidationError(f"schedule: step {t} pairs {m.value} with {c.value}")
        if not self.cfg_enabled and CfgDecision.REUSE_UNCOND in cfg:
            raise ValidationError("schedule: ReuseUncond present with CFG disabled")
        if cfg[0] is not CfgDecision.COMPUTE_BOTH:
            raise ValidationError("schedule: step 0 must be ComputeBoth")
        expected_computed = count_passes(main, cfg, self.cfg_enabled)
        if self.computed_passes != expected_computed:
            raise ValidationError(
                f"schedule: computed_passes {self.computed_passes} != {expected_computed} implied by decisions"
            )
        expected_baseline = n * (2 if self.cfg_enabled else 1)
        if self.baseline_passes != expected_baseline:
            raise ValidationError(f"schedule: baseline_passes {self.baseline_passes} != {expected_baseline}")
        ratio = self.baseline_passes / self.computed_passes
        if not math.isclose(float(self.speedup), ratio, rel_tol=1e-12):
            raise ValidationError(f"schedule: speedup {self.speedup} != {ratio}")

    @property
    def num_steps(self) -> int:
        return len(self.main_decisions)

    @property
    def reuse_ratio(self) -> float:
        """Fraction of baseline forward passes avoided."""
        return 1.0 - self.computed_passes / self.baseline_passes

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "cfg_enabled": self.cfg_enabled,
            "delta_main": self.delta_main,
            "delta_cfg": self.delta_cfg,
            "main_decisions": [d.value for d in self.main_decisions],
            "cfg_decisions": [d.value for d in self.cfg_decisions],
            "main_accumulator": list(self.main_accumulator),
            "cfg_accumulator": list(self.cfg_accumulator),
            "computed_passes": self.computed_passes,
            "baseline_passes": self.baseline_passes,
            "speedup": self.speedup,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CacheSchedule":
        required = ("main_decisions", "cfg_decisions", "main_accumulator", "cfg_accumulator",
                    "computed_passes", "baseline_passes", "speedup")
        missing = [k for k in required if k not in d]
        if missing:
            raise SchemaError(f"schedule lacks fields {missing}")
        return cls(
            main_decisions=tuple(d["main_decisions"]),
            cfg_decisions=tuple(d["cfg_decisions"]),
            main_accumulator=tuple(d["main_accumulator"]),
            cfg_accumulator=tuple(d["cfg_accumulator"]),
            computed_passes=d["computed_passes"],
            baseline_passes=d["baseline_passes"],
            speedup=d["speedup"],
            cfg_enabled=d.get("cfg_enabled", True),
            policy=d.get("policy"),
            delta_main=d.get("delta_main"),
            delta_cfg=d.get("delta_cfg"),
        )


def count_passes(main: Sequence[MainDecision], cfg: Sequence[CfgDecision], cfg_enabled: bool) -> int:
    """Transformer forward passes implied by a decision sequence."""
    if not cfg_enabled:
        return sum(1 for m in main if m is MainDecision.COMPUTE)
    cost = {CfgDecision.COMPUTE_BOTH: 2, CfgDecision.REUSE_UNCOND: 1, CfgDecision.SKIPPED: 0}
    return sum(cost[c] for c in cfg)


@dataclass(frozen=True)
class PcaConfig:
    k: float
    delta_min: float
    delta_max: float
    epsilon: float = 1e-6
    orientation: str = COMPLEX_LOW

    def __post_init__(self):
        for name in ("k", "delta_min", "delta_max", "epsilon"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValidationError(f"pca config: {name} must be positive and finite, got {v!r}")
        if self.delta_min > self.delta_max:
            raise ValidationError(f"pca config: delta_min {self.delta_min} > delta_max {self.delta_max}")
        if self.orientation not in ORIENTATIONS:
            raise ValidationError(f"pca config: unknown orientation {self.orientation!r}")


# --- persistence -----------------------------------------------------------

TRACE_BUNDLE = "trace_bundle"
EMBEDDING_BANK = "embedding_bank"
FIT_MODEL = "fit_model"
DIFF_CODEBOOK = "diff_codebook"
CACHE_SCHEDULE = "cache_schedule"


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _wrap(kind: str, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "type": kind, **body}


def _read(path, kind: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return _unwrap(d, kind, str(path))


def _unwrap(d: Any, kind: str, source: str = "<data>") -> dict:
    if not isinstance(d, dict):
        raise SchemaError(f"{source}: top level must be a JSON object")
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{source}: unsupported schema_version {version!r}")
    tag = d.get("type", kind)
    if tag != kind:
        raise SchemaError(f"{source}: expected a {kind} artifact, found {tag!r}")
    return d


def _write(path, payload: dict) -> None:
    Path(path).write_text(dumps(payload), encoding="utf-8")


def traces_to_dict(traces: Sequence[TimestepTrace]) -> dict:
    return _wrap(TRACE_BUNDLE, {"traces": [t.to_dict() for t in traces]})


def traces_from_dict(d: dict, source: str = "<data>") -> list[TimestepTrace]:
    d = _unwrap(d, TRACE_BUNDLE, source)
    if not isinstance(d.get("traces"), list):
        raise SchemaError(f"{source}: 'traces' must be a list")
    return [TimestepTrace.from_dict(rec, i) for i, rec in enumerate(d["traces"])]


def load_trace_bundle(path) -> list[TimestepTrace]:
    return traces_from_dict(_read(path, TRACE_BUNDLE), str(path))


def save_trace_bundle(path, traces: Sequence[TimestepTrace]) -> None:
    _write(path, traces_to_dict(traces))


def load_bank(path) -> EmbeddingBank:
    return EmbeddingBank.from_dict(_read(path, EMBEDDING_BANK))


def save_bank(path, bank: EmbeddingBank) -> None:
    _write(path, _wrap(EMBEDDING_BANK, bank.to_dict()))


def load_model(path) -> FitModel:
    return FitModel.from_dict(_read(path, FIT_MODEL))


def save_model(path, model: FitModel) -> None:
    _write(path, _wrap(FIT_MODEL, model.to_dict()))


def load_codebook(path) -> DiffCodebook:
    return DiffCodebook.from_dict(_read(path, DIFF_CODEBOOK))


def save_codebook(path, codebook: DiffCodebook) -> None:
    _write(path, _wrap(DIFF_CODEBOOK, codebook.to_dict()))


def load_schedule(path) -> CacheSchedule:
    return CacheSchedule.from_dict(_read(path, CACHE_SCHEDULE))


def save_schedule(path, schedule: CacheSchedule) -> None:
    _write(path, _wrap(CACHE_SCHEDULE, schedule.to_dict()))


def schedule_to_json(schedule: CacheSchedule) -> str:
    return dumps(_wrap(CACHE_SCHEDULE, schedule.to_dict()))


def to_json(value) -> str:
    """Serialize any of the five persisted types to its file text."""
    if isinstance(value, EmbeddingBank):
        return dumps(_wrap(EMBEDDING_BANK, value.to_dict()))
    if isinstance(value, FitModel):
        return dumps(_wrap(FIT_MODEL, value.to_dict()))
    if isinstance(value, DiffCodebook):
        return dumps(_wrap(DIFF_CODEBOOK, value.to_dict()))
    if isinstance(value, CacheSchedule):
        return schedule_to_json(value)
    if isinstance(value, (list, tuple)) and all(isinstance(t, TimestepTrace) for t in value):
        return dumps(traces_to_dict(value))
    raise TypeError(f"cannot serialize {type(value).__name__}")


def from_json(text: str):
    """Inverse of :func:`to_json`; dispatches on the ``type`` tag."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise SchemaError("top level must be a JSON object")
    kind = d.get("type")
    if kind == TRACE_BUNDLE or (kind is None and "traces" in d):
        return traces_from_dict(d)
    readers = {
        EMBEDDING_BANK: EmbeddingBank.from_dict,
        FIT_MODEL: FitModel.from_dict,
        DIFF_CODEBOOK: DiffCodebook.from_dict,
        CACHE_SCHEDULE: CacheSchedule.from_dict,
    }
    if kind not in readers:
        raise SchemaError(f"unknown artifact type {kind!r}")
    return readers[kind](_unwrap(d, kind))
