"""CSV exports for plotting schedules, fit curves and CV profiles.

Column order is fixed per export; floats are written with ``repr`` so files
are byte-stable across runs.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

from .errors import ValidationError
from .poly_fit import predict
from .scheduler import REPORT_COLUMNS, ComparisonRow
from .trace_model import CacheSchedule, FitModel, TimestepTrace

SCHEDULE_COLUMNS = ("step", "main_decision", "cfg_decision", "main_acc", "cfg_acc")
FIT_EVAL_COLUMNS = ("t", "x", "y", "y_hat_multi", "y_hat_uni")
CV_COLUMNS = ("step", "n", "mean", "std", "cv")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def render_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def schedule_rows(schedule: CacheSchedule):
    if schedule is None or schedule.num_steps == 0:
        raise ValidationError("schedule is empty")
    return [
        (t, m.value, c.value, ma, ca)
        for t, (m, c, ma, ca) in enumerate(zip(
            schedule.main_decisions, schedule.cfg_decisions,
            schedule.main_accumulator, schedule.cfg_accumulator))
    ]


def schedule_csv(schedule: CacheSchedule) -> str:
    return render_csv(SCHEDULE_COLUMNS, schedule_rows(schedule))


def fit_eval_rows(traces: Sequence[TimestepTrace], multi: FitModel, uni: FitModel):
    rows = []
    for tr in traces:
        if tr.y is None:
            continue
        for t in range(1, tr.num_steps):
            rows.append((t, tr.x[t], tr.y[t], predict(multi, tr.x[t], t), predict(uni, tr.x[t], t)))
    if not rows:
        raise ValidationError("no trace provides output differences to evaluate")
    return rows


def fit_eval_csv(traces, multi: FitModel, uni: FitModel) -> str:
    return render_csv(FIT_EVAL_COLUMNS, fit_eval_rows(traces, multi, uni))


def cv_csv(cv_rows: Sequence[dict]) -> str:
    if not cv_rows:
        raise ValidationError("CV report is empty")
    return render_csv(CV_COLUMNS, ([r[c] for c in CV_COLUMNS] for r in cv_rows))


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    return render_csv(REPORT_COLUMNS, ([getattr(r, c) for c in REPORT_COLUMNS] for r in rows))
