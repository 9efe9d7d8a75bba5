"""Command-line entry point.

Exit codes: 0 ok, 2 input error, 3 config error, 4 internal error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import ranker
from .config import PipelineConfig, load_config
from .errors import ConfigError, InputError, StageError
from .evaluation import (TimingRecord, UserAnnotations, fit_records, intervals_to_frames, pairwise_f1,
                         timing_run, write_report, write_rows_csv)
from .frame_quality import QualityScores, write_scores_csv
from .media_io import open_source
from .pipeline import Pipeline, load_model
from .segmentation import apply_splits
from .summarize import emit_summary, load_summary
from .synth import SynthSpec, generate

log = logging.getLogger("vidsum")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3, 4


# -- shared option handling ---------------------------------------------------------------

def _add_pipeline_opts(p: argparse.ArgumentParser):
    p.add_argument("video", help="Y4M file or image directory with frames.json")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--model", help="ranking model (JSON)")
    p.add_argument("--workers", type=int, help="worker processes (0 = all cores)")
    p.add_argument("--seed", type=int)
    p.add_argument("--fraction", type=float, help="summary length as a fraction of the video")
    p.add_argument("--cache-dir", help="cache directory (default: beside the output)")
    p.add_argument("--no-cache", action="store_true")


def _config(args) -> PipelineConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in ("model", "workers", "seed", "fraction"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "no_cache", False):
        overrides["cache"] = False
    return load_config(args.config, overrides)


def _pipeline(args, cfg: PipelineConfig, out: Path) -> Pipeline:
    source = open_source(args.video)
    cache_root = Path(args.cache_dir) if args.cache_dir else out.parent / ".vidsum-cache"
    return Pipeline(source, cfg, cache_root)


# -- subcommands ---------------------------------------------------------------------------

def cmd_summarize(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    model = load_model(cfg.model)
    pipe = _pipeline(args, cfg, out)
    if args.annotations:
        record, result = timing_run(lambda: pipe.summarize(model), pipe.source.duration, str(args.video))
    else:
        record, result = None, pipe.summarize(model)
    emit_summary(result.summary, out, cfg.include_frames)
    if args.report:
        report = {"n_frames": result.n_frames, "fps": result.fps,
                  "summary_frames": result.summary.total_frames, "W": result.summary.W,
                  "segments": len(result.segmentation), "stages": [list(s) for s in result.stage_log]}
        if args.annotations:
            ev = pairwise_f1(result.summary.frames(), UserAnnotations.load(args.annotations))
            ev.timing = record.to_dict()
            report["evaluation"] = ev.to_dict()
        write_report(args.report, report)
    print(f"{out}: {len(result.summary.selected)} segments, {result.summary.total_frames} of "
          f"{result.n_frames} frames (W={result.summary.W})")
    return EXIT_OK


def cmd_segment(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    pipe = _pipeline(args, cfg, out)
    analysis = pipe.analysis()
    seg, labels = pipe.segmentation(analysis)
    seg.save(out)
    if args.quality_csv:
        scores = [QualityScores(y, s, u, lab) for (y, s, u), lab in zip(analysis.scores.tolist(), labels)]
        write_scores_csv(args.quality_csv, scores)
    print(f"{out}: {len(seg)} segments covering {seg.covered} of {seg.n_frames} frames")
    return EXIT_OK


def _frame_targets(args, n_frames: int) -> np.ndarray | None:
    if args.annotations:
        ann = UserAnnotations.load(args.annotations)
        if ann.n_frames != n_frames:
            raise InputError(f"annotations cover {ann.n_frames} frames, video has {n_frames}")
        votes = np.zeros(n_frames)
        for frames in ann.frame_sets():
            votes[frames] += 1.0
        return votes / len(ann.users)
    if args.frame_scores:
        vals = np.asarray(json.loads(Path(args.frame_scores).read_text()), dtype=np.float64)
        if vals.shape != (n_frames,):
            raise InputError(f"frame scores need {n_frames} values, got {vals.shape}")
        return vals
    return None


def cmd_features(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    pipe = _pipeline(args, cfg, out)
    src = pipe.source
    if args.segment_seconds:
        step = max(1, int(round(args.segment_seconds * src.fps)))
        seg = apply_splits(src.n_frames, list(range(step, src.n_frames, step)), src.fps)
    else:
        seg, _ = pipe.segmentation()
    feats = pipe.segment_features(seg)
    targets = _frame_targets(args, src.n_frames)
    names = []
    base = [f"d{i}" for i in range(62) if not (cfg.exclude_faces and i in (59, 60))]
    for b in base:
        names += [f"{b}_mean", f"{b}_std"]
    with open(out, "w") as fh:
        header = ["start", "end"] + names + (["target"] if targets is not None else [])
        fh.write(",".join(header) + "\n")
        for s, row in zip(seg.segments, feats):
            vals = [str(s.start), str(s.end)] + [repr(float(v)) for v in row]
            if targets is not None:
                vals.append(repr(float(targets[s.start:s.end].mean())))
            fh.write(",".join(vals) + "\n")
    if args.frames_out:
        from .aesthetics import write_vectors_csv
        fv = pipe.frame_vectors(pipe.feature_frames(seg))
        order = sorted(fv)
        write_vectors_csv(args.frames_out, order, np.array([fv[i] for i in order]))
    print(f"{out}: {len(seg)} segments x {feats.shape[1]} features")
    return EXIT_OK


_GRID_KEYS = ("max_depth", "min_child_weight", "gamma", "subsample", "colsample_bytree", "n_rounds",
              "shrinkage", "n_trees", "reg_lambda")
_LEARNER_KEYS = {
    "cart": {"max_depth", "min_child_weight"},
    "forest": {"n_trees", "subsample", "colsample", "seed", "max_depth", "min_child_weight"},
    "boosted": {"n_rounds", "shrinkage", "seed", "max_depth", "min_child_weight", "gamma", "subsample",
                "colsample_bytree", "reg_lambda"},
}


def _parse_list(text: str, key: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if key in ("max_depth",) and tok.lower() == "none":
            out.append(None)
        elif key in ("max_depth", "n_rounds", "n_trees"):
            out.append(int(tok))
        else:
            out.append(float(tok))
    return out


def _learner_params(learner: str, params: dict) -> dict:
    params = dict(params)
    if learner == "forest" and "colsample_bytree" in params:
        params["colsample"] = params.pop("colsample_bytree")
    allowed = _LEARNER_KEYS[learner]
    return {k: v for k, v in params.items() if k in allowed}


def cmd_train(args) -> int:
    X, y, names = ranker.read_training_csv(args.features)
    keep = [i for i, n in enumerate(names) if n not in ("start", "end")]
    X = X[:, keep]
    if args.aesthetic_bit:
        y = (y >= 0.5).astype(np.float64)
    if args.learner not in _LEARNER_KEYS:
        raise ConfigError(f"unknown learner {args.learner!r}")
    grid = {}
    for key in _GRID_KEYS:
        raw = getattr(args, key)
        if raw is not None:
            try:
                grid[key] = _parse_list(raw, key)
            except ValueError:
                raise ConfigError(f"--{key.replace('_', '-')}: cannot parse {raw!r}") from None
    if args.learner == "boosted":
        for k, v in ranker.BOOSTED_DEFAULTS.items():
            grid.setdefault(k, [v])
    keys = sorted(grid)
    results = []
    best = None
    for combo in itertools.product(*(grid[k] for k in keys)):
        params = _learner_params(args.learner, dict(zip(keys, combo), seed=args.seed))
        cv = ranker.kfold_cv(X, y, args.k, args.learner, args.seed,
                             **{k: v for k, v in params.items() if k != "seed"})
        results.append({"params": params, "cv": cv.as_dict()})
        if best is None or cv.mean < best[0]:
            best = (cv.mean, params, cv)
    _, params, cv = best
    model = ranker.fit(args.learner, X, y, **params)
    model.save(args.out)
    report = {"learner": args.learner, "k": args.k, "best_params": params, "cv": cv.as_dict(),
              "grid": results if len(results) > 1 else []}
    if args.report:
        write_report(args.report, report)
    print(json.dumps({"learner": args.learner, "params": params,
                      "mse": {k: cv.as_dict()[k] for k in ("min", "max", "mean", "std")}}, sort_keys=True))
    return EXIT_OK


def _summary_frames(path) -> np.ndarray:
    summ = load_summary(path)
    return intervals_to_frames([(r.segment.start, r.segment.end) for r in summ.selected])


def cmd_evaluate(args) -> int:
    pairs = args.pairs
    if len(pairs) % 2:
        raise InputError("evaluate expects SUMMARY ANNOTATIONS pairs")
    rows, reports = [], []
    for summ_path, ann_path in zip(pairs[0::2], pairs[1::2]):
        summ = load_summary(summ_path)
        ev = pairwise_f1(_summary_frames(summ_path), UserAnnotations.load(ann_path))
        rep = {"summary": str(summ_path), "annotations": str(ann_path), **ev.to_dict()}
        reports.append(rep)
        rows.append({"video": str(summ_path), "duration": None, "time": None, "speed": None, "f1": ev.f1})
        if ev.empty_summary:
            log.warning("%s: empty machine summary, all terms are 0", summ_path)
        print(f"{summ_path}: F1 = {ev.f1:.6f} ({len(ev.f1_per_user)} users, {summ.total_frames} frames)")
    doc = reports[0] if len(reports) == 1 else {"videos": reports,
                                                "mean_f1": float(np.mean([r["f1"] for r in reports]))}
    if args.out:
        write_report(args.out, doc)
    if args.csv:
        write_rows_csv(args.csv, rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec.load(args.spec)
    truth = generate(spec, args.out_dir)
    print(f"{args.out_dir}: {truth['n_frames']} frames, {len(truth['boundaries'])} boundaries")
    return EXIT_OK


def bench_spec(duration: float, width: int, height: int, fps: float, seed: int, fmt: str = "y4m") -> dict:
    """Synthetic video of ``duration`` seconds: 10 s scenes plus one dark and one blurry span."""
    n_scenes = max(1, int(round(duration / 10.0)))
    scenes = [{"seconds": duration / n_scenes, "interest": round(0.2 + 0.6 * ((k * 7) % 5) / 4, 3)}
              for k in range(n_scenes)]
    inject = [{"kind": "dark", "start_seconds": 0.25 * duration, "seconds": min(2.0, 0.05 * duration)},
              {"kind": "blurry", "start_seconds": 0.6 * duration, "seconds": min(2.0, 0.05 * duration)}]
    return {"scenes": scenes, "width": width, "height": height, "fps": fps, "seed": seed,
            "format": fmt, "inject": inject}


def cmd_bench(args) -> int:
    cfg = _config(args).updated(cache=False)
    model = load_model(cfg.model)
    work = Path(args.work_dir)
    try:
        durations = [float(d) for d in args.durations.split(",")]
    except ValueError:
        raise ConfigError(f"--durations: cannot parse {args.durations!r}") from None
    records: list[TimingRecord] = []
    for i, dur in enumerate(durations):
        vdir = work / f"bench-{i:02d}"
        generate(SynthSpec.from_dict(bench_spec(dur, args.width, args.height, args.fps, cfg.seed + i)), vdir)

        def run(vdir=vdir):
            with open_source(vdir / "video.y4m") as src:
                return Pipeline(src, cfg).summarize(model)

        rec, _ = timing_run(run, dur, f"{dur:g}s")
        records.append(rec)
        print(f"{rec.label}: {rec.processing_seconds:.2f} s ({rec.speed_multiplier:.2f}x real time)")
    fit = fit_records(records) if len(records) >= 2 else None
    report = {"records": [r.to_dict() for r in records],
              "fit": None if fit is None else {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2},
              "mean_speed": float(np.mean([r.speed_multiplier for r in records]))}
    if args.out:
        write_report(args.out, report)
    if args.csv:
        write_rows_csv(args.csv, [{"video": r.label, "duration": r.video_seconds, "time": r.processing_seconds,
                                   "speed": r.speed_multiplier} for r in records])
    if fit is not None:
        print(f"fit: time = {fit.slope:.4f} * duration + {fit.intercept:.4f}, R^2 = {fit.r2:.4f}")
    return EXIT_OK


# -- parser and entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vidsum", description="Faster-than-real-time video summarization")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summarize", help="segment, rank and select a summary")
    _add_pipeline_opts(p)
    p.add_argument("--out", required=True, help="summary JSON")
    p.add_argument("--report", help="run report JSON (stages, timing, optional F1)")
    p.add_argument("--annotations", help="user summaries for an F1 readout in the report")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("segment", help="quality labels and segmentation only")
    _add_pipeline_opts(p)
    p.add_argument("--out", required=True, help="segmentation JSON")
    p.add_argument("--quality-csv", help="also write per-frame quality scores")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("features", help="segment-level feature CSV (training input)")
    _add_pipeline_opts(p)
    p.add_argument("--out", required=True)
    p.add_argument("--segment-seconds", type=float, help="fixed-length segments instead of the pipeline's")
    p.add_argument("--annotations", help="target = mean fraction of users selecting each frame")
    p.add_argument("--frame-scores", help="JSON list of per-frame scores; target = segment mean")
    p.add_argument("--frames-out", help="also write per-frame 62-dim vectors")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a tree model with k-fold cross-validation")
    p.add_argument("features", help="CSV: feature columns then 'target' ('start'/'end' columns are ignored)")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--learner", default="boosted", choices=sorted(_LEARNER_KEYS))
    p.add_argument("--k", type=int, default=10, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--aesthetic-bit", action="store_true", help="binarize targets at 0.5")
    p.add_argument("--report", help="CV report JSON")
    for key in _GRID_KEYS:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, help="value or comma-separated sweep")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="pairwise F1 of summaries against user annotations")
    p.add_argument("pairs", nargs="+", metavar="SUMMARY ANNOTATIONS")
    p.add_argument("--out", help="report JSON")
    p.add_argument("--csv", help="one row per video")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="render a synthetic test video with ground truth")
    p.add_argument("spec", help="scene spec JSON")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time the pipeline over synthetic durations and fit a line")
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--model")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--durations", default="15,30,60,90,120")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=360)
    p.add_argument("--fps", type=float, default=24.0)
    p.add_argument("--work-dir", required=True)
    p.add_argument("--out", help="report JSON")
    p.add_argument("--csv", help="duration/time/speed rows")
    p.set_defaults(func=cmd_bench)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (InputError, OSError)):
        return EXIT_INPUT
    return EXIT_INTERNAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="vidsum: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except Exception as exc:  # mapped onto the documented exit codes
        code = _exit_code(exc)
        print(f"vidsum: error: {exc}", file=sys.stderr)
        if code == EXIT_INTERNAL and args.verbose:
            raise
        return code


if __name__ == "__main__":
    sys.exit(main())
