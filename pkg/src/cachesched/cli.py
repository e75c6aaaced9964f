"""Command-line front end: ``cachesched <subcommand> ...``."""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, cfg_freq, export, pca_threshold, poly_fit, scheduler, synth
from .diff_kernels import per_step_cv
from .errors import CacheSchedError, ConfigurationError, SchemaError
from .presets import PRESETS, get_preset
from .trace_model import (
    COEFF_COUNT,
    MULTIVARIATE12,
    ORIENTATIONS,
    COMPLEX_LOW,
    UNIVARIATE5,
    PcaConfig,
    dumps,
    load_bank,
    load_codebook,
    load_model,
    load_schedule,
    load_trace_bundle,
    save_bank,
    save_codebook,
    save_model,
    save_schedule,
    save_trace_bundle,
)

log = logging.getLogger("cachesched")


# --- input helpers ---------------------------------------------------------

def load_vector(arg: str) -> np.ndarray:
    """A vector from a JSON file (bare list or ``{"vector": [...]}``) or inline ``a,b,c``."""
    if os.path.exists(arg):
        with open(arg, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{arg}: not valid JSON ({exc})") from None
        if isinstance(data, dict):
            data = data.get("vector")
        if not isinstance(data, list):
            raise SchemaError(f"{arg}: expected a list of numbers or an object with 'vector'")
        return np.asarray(data, dtype=float)
    try:
        return np.array([float(v) for v in arg.split(",") if v.strip()])
    except ValueError:
        raise SchemaError(f"{arg!r} is neither an existing file nor a comma-separated vector") from None


def save_vector(path, vector) -> None:
    Path(path).write_text(dumps({"schema_version": 1, "type": "embedding",
                                 "vector": [float(v) for v in vector]}), encoding="utf-8")


def pick_trace(traces, prompt_id):
    if prompt_id is not None:
        for tr in traces:
            if tr.prompt_id == prompt_id:
                return tr
        raise ConfigurationError(f"no trace with prompt_id {prompt_id!r}")
    if len(traces) != 1:
        raise ConfigurationError(f"bundle holds {len(traces)} traces; pick one with --prompt-id")
    return traces[0]


def pca_config(args) -> PcaConfig:
    preset = get_preset(args.preset)
    k = args.k if args.k is not None else preset.k
    lo = args.delta_min if args.delta_min is not None else preset.delta_min
    hi = args.delta_max if args.delta_max is not None else preset.delta_max
    if None in (k, lo, hi):
        raise ConfigurationError("set --k, --delta-min and --delta-max, or choose a model --preset")
    return PcaConfig(k=k, delta_min=lo, delta_max=hi, epsilon=args.epsilon, orientation=args.orientation)


def write_sidecar(out_path, args, extra: dict) -> None:
    meta = {
        "tool": "cachesched",
        "version": __version__,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "argv": sys.argv[1:] if args.argv is None else args.argv,
        **extra,
    }
    Path(str(out_path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def _emit(text: str, out) -> None:
    if out:
        export.write_text(out, text)
    else:
        sys.stdout.write(text)


# --- subcommands -----------------------------------------------------------

def cmd_fit(args):
    traces = load_trace_bundle(args.traces)
    data = poly_fit.FitDataset.from_traces(traces, args.t_normalizer)
    model = poly_fit.fit(data, args.kind)
    save_model(args.out, model)
    print(f"fit {args.kind}: {len(data)} rows, mse={poly_fit.mse(model, data):.6g}, wrote {args.out}")


def cmd_eval_fit(args):
    model = load_model(args.model)
    traces = load_trace_bundle(args.traces)
    data = poly_fit.FitDataset.from_traces(traces, model.t_normalizer)
    if args.csv:
        rows = []
        for tr in traces:
            if tr.y is None:
                continue
            for t in range(1, tr.num_steps):
                rows.append((tr.prompt_id, t, tr.x[t], tr.y[t], poly_fit.predict(model, tr.x[t], t)))
        export.write_text(args.csv, export.render_csv(("prompt_id", "t", "x", "y", "y_hat"), rows))
    print(f"mse={poly_fit.mse(model, data)!r} rows={len(data)} kind={model.kind}")


def cmd_score_prompt(args):
    config = pca_config(args)
    score = pca_threshold.score_prompt(load_vector(args.embedding), load_bank(args.bank), config)
    print(json.dumps(score.to_dict(), indent=2))


def cmd_bank_stats(args):
    bank = load_bank(args.bank)
    stats = pca_threshold.pairwise_distance_stats(bank)
    stats["silhouette"] = pca_threshold.bank_silhouette(bank)
    stats["n_complex"] = len(bank.vectors("complex"))
    stats["n_simple"] = len(bank.vectors("simple"))
    print(json.dumps(stats, indent=2))


def cmd_codebook(args):
    cb = scheduler.build_codebook(load_trace_bundle(args.traces))
    save_codebook(args.out, cb)
    print(f"codebook: {len(cb)} steps averaged over {cb.source_count} traces, wrote {args.out}")


def _estimates(args, trace, codebook):
    if args.estimator == "recorded":
        return scheduler.estimates_from_recorded(trace, codebook)
    if args.model is None:
        # estimates are irrelevant for a policy without main-path caching
        return scheduler.StepEstimates((0.0,) * trace.num_steps, codebook)
    return scheduler.estimates_from_model(trace, load_model(args.model), codebook)


def cmd_simulate(args):
    preset = get_preset(args.preset)
    cfg_enabled = preset.cfg_enabled if args.cfg is None else args.cfg
    delta_cfg = args.delta_cfg if args.delta_cfg is not None else preset.delta_cfg
    policy = args.policy

    score = None
    delta_main = args.delta_main
    if delta_main is None and policy in scheduler.MAIN_CACHING:
        if args.embedding is None or args.bank is None:
            raise ConfigurationError("give --delta-main, or --embedding and --bank to derive it")
        score = pca_threshold.score_prompt(load_vector(args.embedding), load_bank(args.bank), pca_config(args))
        delta_main = score.delta_pca
    if policy in scheduler.MAIN_CACHING and args.estimator == "model" and args.model is None:
        raise ConfigurationError(f"policy {policy} needs --model (or --estimator recorded)")

    config = scheduler.PolicyConfig(policy, delta_main, delta_cfg, cfg_enabled)
    trace = pick_trace(load_trace_bundle(args.trace), args.prompt_id)
    codebook = load_codebook(args.codebook) if (args.codebook and config.uses_codebook) else None
    sched = scheduler.simulate(config, _estimates(args, trace, codebook))
    if args.out:
        save_schedule(args.out, sched)
        extra = {"prompt_id": trace.prompt_id, "preset": args.preset}
        if score is not None:
            extra["complexity_score"] = score.to_dict()
        write_sidecar(args.out, args, extra)
    print(f"{policy} prompt={trace.prompt_id} delta_main={sched.delta_main} delta_cfg={sched.delta_cfg} "
          f"computed={sched.computed_passes}/{sched.baseline_passes} speedup={sched.speedup:.4f}")


def _read_configs(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("configs")
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a list of configs or {{'configs': [...]}}")
    out = []
    for i, c in enumerate(data):
        if not isinstance(c, dict) or "policy" not in c:
            raise SchemaError(f"{path}: configs[{i}] needs a 'policy'")
        out.append(scheduler.PolicyConfig(c["policy"], c.get("delta_main"), c.get("delta_cfg"),
                                          c.get("cfg_enabled", True)))
    return out


def cmd_compare(args):
    configs = _read_configs(args.configs)
    trace = pick_trace(load_trace_bundle(args.trace), args.prompt_id)
    codebook = load_codebook(args.codebook) if args.codebook else None
    rows = scheduler.compare_policies(configs, _estimates(args, trace, codebook))
    for r in rows:
        if r.error:
            log.warning("row %s failed: %s", r.policy, r.error)
    _emit(export.comparison_csv(rows), args.out)
    if args.out:
        print(f"compared {len(rows)} configs, wrote {args.out}")


def cmd_analyze_cv(args):
    if args.traces:
        traces = [t for t in load_trace_bundle(args.traces) if t.y is not None]
        if not traces:
            raise ConfigurationError("no trace carries output differences")
        rows = per_step_cv([t.y for t in traces])
        _emit(export.cv_csv(rows), args.out)
        if args.out:
            cvs = [r["cv"] for r in rows if r["cv"] is not None]
            print(f"per-step CV over {len(traces)} traces: median={float(np.median(cvs)):.4g}, wrote {args.out}")
        return
    wins = 0
    for i in range(args.runs):
        res = synth.factor_study(args.seed + i)
        wins += res["vary_strong"] > res["vary_weak"]
    print(f"factor study: strong-factor CV > weak-factor CV in {wins}/{args.runs} runs (seed {args.seed})")


def cmd_cfg_freq(args):
    weights = cfg_freq.FreqWeights(t0=args.t0, beta=args.beta)
    summary = cfg_freq.describe(load_vector(args.cond), load_vector(args.uncond), args.cutoff, weights, args.t)
    print(json.dumps(summary, indent=2))


def cmd_export_plot(args):
    if args.what == "schedule":
        text = export.schedule_csv(load_schedule(args.schedule))
    elif args.what == "fit":
        multi, uni = load_model(args.multi), load_model(args.uni)
        text = export.fit_eval_csv(load_trace_bundle(args.traces), multi, uni)
    else:
        traces = [t for t in load_trace_bundle(args.traces) if t.y is not None]
        if not traces:
            raise ConfigurationError("no trace carries output differences")
        text = export.cv_csv(per_step_cv([t.y for t in traces]))
    export.write_text(args.out, text)
    print(f"exported {args.what} ({text.count(chr(10)) - 1} rows) to {args.out}")


def cmd_synth(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces = synth.synthesize_traces(args.prompts, args.steps, args.seed)
    save_trace_bundle(out / "traces.json", traces)
    save_trace_bundle(out / "trace.json", [synth.synthesize_traces(1, args.steps, args.seed + 1, [0.8])[0]])
    bank, c_complex, c_simple = synth.synthesize_bank(seed=args.seed)
    save_bank(out / "bank.json", bank)
    save_vector(out / "embedding.json", synth.example_embedding((c_complex, c_simple), 0.8, args.seed))
    data = poly_fit.FitDataset.from_traces(traces)
    save_model(out / "model.json", poly_fit.fit(data, MULTIVARIATE12))
    save_model(out / "model_uni.json", poly_fit.fit(data, UNIVARIATE5))
    save_codebook(out / "codebook.json", scheduler.build_codebook(traces))
    print(f"wrote synthetic bundle ({args.prompts} prompts x {args.steps} steps, seed {args.seed}) to {out}")


# --- parser ----------------------------------------------------------------

def _add_pca_flags(p):
    p.add_argument("--preset", choices=sorted(PRESETS), default="custom")
    p.add_argument("--k", type=float)
    p.add_argument("--delta-min", type=float)
    p.add_argument("--delta-max", type=float)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--orientation", choices=ORIENTATIONS, default=COMPLEX_LOW)


def _add_estimate_flags(p):
    p.add_argument("--trace", required=True, help="trace bundle JSON")
    p.add_argument("--prompt-id", help="trace to use when the bundle holds several")
    p.add_argument("--model", help="fitted model JSON used to estimate output differences")
    p.add_argument("--codebook", help="CFG difference codebook JSON")
    p.add_argument("--estimator", choices=("model", "recorded"), default="model",
                   help="estimate main-path differences with --model or take recorded y")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cachesched", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("fit", help="fit a step-difference regression model")
    p.add_argument("--traces", required=True)
    p.add_argument("--kind", choices=sorted(COEFF_COUNT), default=MULTIVARIATE12)
    p.add_argument("--t-normalizer", type=float, help="step-index divisor (default T - 1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval-fit", help="MSE of a fitted model on traces")
    p.add_argument("--model", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--csv", help="write prompt_id,t,x,y,y_hat rows here")
    p.set_defaults(func=cmd_eval_fit)

    p = sub.add_parser("score-prompt", help="complexity score and threshold for one embedding")
    p.add_argument("--embedding", required=True, help="JSON file or inline comma-separated vector")
    p.add_argument("--bank", required=True)
    _add_pca_flags(p)
    p.set_defaults(func=cmd_score_prompt)

    p = sub.add_parser("bank-stats", help="distance statistics and silhouette of a bank")
    p.add_argument("--bank", required=True)
    p.set_defaults(func=cmd_bank_stats)

    p = sub.add_parser("codebook", help="average CFG differences into a codebook")
    p.add_argument("--traces", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("simulate", help="simulate one policy on one trace")
    p.add_argument("--policy", choices=scheduler.POLICIES, default=scheduler.PROMPTTEA)
    _add_estimate_flags(p)
    p.add_argument("--delta-main", type=float)
    p.add_argument("--delta-cfg", type=float)
    p.add_argument("--embedding", help="prompt embedding used to derive --delta-main")
    p.add_argument("--bank")
    p.add_argument("--cfg", dest="cfg", action="store_true", default=None, help="force the CFG path on")
    p.add_argument("--no-cfg", dest="cfg", action="store_false", help="force the CFG path off")
    p.add_argument("--out", help="schedule JSON (a .meta.json sidecar is written next to it)")
    _add_pca_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="CSV ablation table over several policy configs")
    p.add_argument("--configs", required=True)
    _add_estimate_flags(p)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze-cv", help="per-step CV of traces, or the synthetic factor study")
    p.add_argument("--traces")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--seed", type=int, default=synth.DEFAULT_SEED)
    p.add_argument("--runs", type=int, default=100)
    p.set_defaults(func=cmd_analyze_cv)

    p = sub.add_parser("cfg-freq", help="frequency-split unconditional reconstruction")
    p.add_argument("--cond", required=True)
    p.add_argument("--uncond", required=True)
    p.add_argument("--cutoff", type=float, default=cfg_freq.DEFAULT_CUTOFF)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--t0", type=int, default=25)
    p.add_argument("--t", type=int, default=0)
    p.set_defaults(func=cmd_cfg_freq)

    p = sub.add_parser("export-plot", help="CSV plot data from a schedule, fit pair or traces")
    esub = p.add_subparsers(dest="what", metavar="KIND", required=True)
    e = esub.add_parser("schedule")
    e.add_argument("--schedule", required=True)
    e.add_argument("--out", required=True)
    e = esub.add_parser("fit")
    e.add_argument("--multi", required=True)
    e.add_argument("--uni", required=True)
    e.add_argument("--traces", required=True)
    e.add_argument("--out", required=True)
    e = esub.add_parser("cv")
    e.add_argument("--traces", required=True)
    e.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_plot)

    p = sub.add_parser("synth", help="write a seeded synthetic bundle")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=synth.DEFAULT_SEED)
    p.add_argument("--prompts", type=int, default=20)
    p.add_argument("--steps", type=int, default=50)
    p.set_defaults(func=cmd_synth)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = None if argv is None else list(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args.func(args)
    except (CacheSchedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    try:
        code = run(argv)
    except SystemExit as exc:
        code = exc.code
    sys.exit(code)


if __name__ == "__main__":
    main()
