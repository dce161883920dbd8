"""Command-line surface: simulate, train, identify, evaluate, bench, profile, serve.

Run as `python -m app.cli <command> ...`. Exit codes: 0 success, 2 input or parse
error, 3 evaluation range error.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from app.config import settings
from app.exceptions import InvalidInputError, WipinError
from app.models import NoisePreset
from app.schemas.identify import DecisionResponse
from app.schemas.pipeline import PipelineConfig
from app.schemas.simulation import CohortConfig
from app.services.classifier import build_identifier, identify, load_identifier, store_identifier, store_svr, train_svr
from app.services.csi_io import iter_dataset, load_csv, load_dataset, split_dataset, store_records
from app.services.harness import (
    DEFAULT_WINDOWS,
    bench_pipeline,
    build_feature_table,
    evaluate_drift,
    evaluate_rejection,
    evaluate_sampling_time,
    evaluate_svr,
    evaluate_transfer,
    evaluate_volume_sweep,
    run_pipeline,
    subject_profiles,
    write_report,
)
from app.services.simulator import (
    cohort_manifest,
    derive_rng,
    draw_body_profiles,
    generate_cohort,
    iter_cohort,
    profiles_from_manifest,
)

logger = logging.getLogger("app.cli")

VOLUME_KS = [2, 5, 10, 20, 30]
REJECTION_KS = [2, 10, 20, 29]


# --- argument helpers -----------------------------------------------------------------------

def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _seed(args: argparse.Namespace) -> int:
    return settings.SEED if args.seed is None else args.seed


def _jobs(args: argparse.Namespace) -> int:
    return settings.N_JOBS if args.jobs is None else args.jobs


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "config", None):
        cfg = PipelineConfig.model_validate_json(Path(args.config).read_text())
    else:
        cfg = PipelineConfig.from_settings(settings)
    if getattr(args, "window", None) is not None:
        cfg = cfg.model_copy(update={"window": args.window})
    return cfg


def _cohort_config(args: argparse.Namespace) -> CohortConfig:
    base = CohortConfig.model_validate_json(Path(args.config).read_text()) if args.config else CohortConfig()
    overrides = {
        "n_subjects": args.subjects,
        "sessions_per_subject": args.sessions,
        "duration": args.duration,
        "preset": args.preset,
        "seed": args.seed,
    }
    update = {k: v for k, v in overrides.items() if v is not None}
    # re-validate so overrides obey the same constraints as the file
    return CohortConfig.model_validate({**base.model_dump(), **update})


def _dataset(args: argparse.Namespace, attr: str = "dataset"):
    """Dataset from a directory, or a cohort simulated from the cohort flags."""
    directory = getattr(args, attr, None)
    if directory:
        return load_dataset(directory)
    cohort = _cohort_config(argparse.Namespace(**{**vars(args), "config": None, "seed": _seed(args)}))
    logger.info(f"No dataset given; simulating {cohort.n_subjects} subjects ({cohort.preset.value} preset)")
    ds, _ = generate_cohort(
        cohort.n_subjects, cohort.sessions_per_subject, cohort.duration, cohort.sample_rate,
        cohort.preset, cohort.seed, cohort.separation, cohort.max_retries,
        scenario=cohort.scenario, n_jobs=_jobs(args),
    )
    return ds


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or settings.OUTPUT_DIR)


# --- commands -------------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    cohort = _cohort_config(args)
    profiles = draw_body_profiles(
        cohort.n_subjects, derive_rng(cohort.seed, 0, 0), cohort.separation, cohort.max_retries
    )
    records = iter_cohort(
        profiles, cohort.sessions_per_subject, cohort.duration, cohort.sample_rate,
        cohort.preset, cohort.seed, scenario=cohort.scenario,
    )
    manifest = cohort_manifest(
        profiles, cohort.sessions_per_subject, cohort.duration, cohort.sample_rate,
        cohort.preset, cohort.seed, cohort.separation,
    )
    store_records(records, _out_dir(args), manifest)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    ds = load_dataset(args.dataset)
    if args.n_train is not None:
        ds, _ = split_dataset(ds, args.n_train, 0, _seed(args))
    table = build_feature_table(ds.records, cfg, n_jobs=_jobs(args))
    out = Path(args.out or Path(settings.OUTPUT_DIR, "model.json"))
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.target:
        profiles = profiles_from_manifest(ds.manifest)
        targets = [getattr(profiles[s - 1], args.target) for s in table.subjects]
        store_svr(train_svr(table.features, targets, cfg.train), out)
        logger.info(f"Trained {args.target} regressor on {len(table)} recordings -> {out}")
        return 0
    model = build_identifier(table.features, table.subjects, cfg.train, cfg.rejection_percentile, _jobs(args))
    store_identifier(model, out)
    logger.info(f"Trained {model.n_classes}-class identifier on {len(table)} recordings -> {out}")
    return 0


def cmd_identify(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    model = load_identifier(args.model)
    decision = identify(model, run_pipeline(load_csv(args.csv), cfg))
    response = DecisionResponse(
        decision=decision.kind, identity=decision.identity,
        confidence=decision.confidence, threshold=decision.threshold,
    )
    print(response.model_dump_json())
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    seed, jobs = _seed(args), _jobs(args)
    started = time.perf_counter()
    if args.protocol == "volume":
        report = evaluate_volume_sweep(_dataset(args), args.k or VOLUME_KS, args.draws, cfg, seed, args.n_train, args.n_test, jobs)
    elif args.protocol == "rejection":
        report = evaluate_rejection(
            _dataset(args), args.k or REJECTION_KS, args.draws, cfg, seed, args.n_train, args.n_test, jobs, args.threshold
        )
    elif args.protocol == "window":
        k = args.k[0] if args.k else None
        report = evaluate_sampling_time(
            _dataset(args), args.windows, cfg, seed, k, args.draws, args.n_train, args.n_test, jobs
        )
    elif args.protocol == "drift":
        report = evaluate_drift(_dataset(args), args.sessions_per_day, args.strategy, cfg, seed, jobs)
    elif args.protocol == "transfer":
        if not args.test_dataset:
            raise InvalidInputError("evaluate transfer needs --test-dataset")
        report = evaluate_transfer(_dataset(args), load_dataset(args.test_dataset), cfg, jobs)
    else:
        ds = _dataset(args)
        report = evaluate_svr(ds, profiles_from_manifest(ds.manifest), cfg, seed, args.n_train, args.n_test, jobs)
    write_report(report, _out_dir(args), args.stem or args.protocol, elapsed=time.perf_counter() - started)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    model = load_identifier(args.model)
    if args.csv:
        series = load_csv(args.csv)
    elif args.dataset:
        series = next(iter_dataset(args.dataset)).series
    else:
        cohort = _cohort_config(argparse.Namespace(**{**vars(args), "config": None, "seed": _seed(args)}))
        profiles = draw_body_profiles(cohort.n_subjects, derive_rng(cohort.seed, 0, 0), cohort.separation, cohort.max_retries)
        series = next(iter_cohort(profiles, 1, cohort.duration, cohort.sample_rate, cohort.preset, cohort.seed)).series
    report = bench_pipeline(series, model, cfg, args.reps)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.json").write_text(report.model_dump_json(indent=2) + "\n")
    logger.info(f"Median compute {report.compute_total_ms:.2f} ms over {report.n_reps} runs")
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    frame = subject_profiles(iter_dataset(args.dataset))
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "profiles.csv", index=False, float_format="%.12g", lineterminator="\n")
    logger.info(f"Wrote mean amplitude profiles of {len(frame)} subjects to {out / 'profiles.csv'}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    if args.model:
        settings.MODEL_PATH = args.model
    uvicorn.run("app.main:app", host=args.host, port=args.port, log_level=args.log_level.lower())
    return 0


# --- parser ---------------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed (default WIPIN_SEED)")
    parser.add_argument("--config", type=str, default=None, help="JSON config document")
    parser.add_argument("--out", type=str, default=None, help="output directory or file")
    parser.add_argument("--jobs", type=int, default=None, help="worker threads (default WIPIN_N_JOBS)")


def _add_cohort(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", type=NoisePreset, choices=list(NoisePreset), default=None)
    parser.add_argument("--subjects", type=int, default=None)
    parser.add_argument("--sessions", type=int, default=None)
    parser.add_argument("--duration", type=float, default=None, help="seconds per session")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wipin", description="Wi-Fi CSI person identification toolkit")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG, INFO, WARNING or ERROR")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="generate a synthetic cohort dataset")
    _add_common(simulate)
    _add_cohort(simulate)
    simulate.set_defaults(func=cmd_simulate)

    train = commands.add_parser("train", help="train an identifier (or a body-rate regressor)")
    _add_common(train)
    train.add_argument("--dataset", required=True)
    train.add_argument("--n-train", type=int, default=None, help="sessions per subject to train on (default all)")
    train.add_argument("--target", choices=["fat_rate", "muscle_rate"], default=None, help="train an SVR instead")
    train.set_defaults(func=cmd_train, window=None)

    ident = commands.add_parser("identify", help="identify the person in one CSI CSV recording")
    _add_common(ident)
    ident.add_argument("--model", required=True)
    ident.add_argument("--window", type=float, default=None, help="seconds of CSI to use")
    ident.add_argument("csv")
    ident.set_defaults(func=cmd_identify)

    evaluate = commands.add_parser("evaluate", help="run an evaluation protocol")
    evaluate.add_argument("protocol", choices=["volume", "rejection", "window", "drift", "transfer", "svr"])
    _add_common(evaluate)
    _add_cohort(evaluate)
    evaluate.add_argument("--dataset", default=None, help="dataset directory (default: simulate one)")
    evaluate.add_argument("--test-dataset", default=None, help="second dataset for transfer")
    evaluate.add_argument("--k", type=_ints, default=None, help="comma separated user volumes")
    evaluate.add_argument("--draws", type=int, default=100)
    evaluate.add_argument("--n-train", type=int, default=20)
    evaluate.add_argument("--n-test", type=int, default=10)
    evaluate.add_argument("--windows", type=_floats, default=list(DEFAULT_WINDOWS), help="comma separated seconds")
    evaluate.add_argument("--threshold", type=float, default=None, help="override the learned threshold")
    evaluate.add_argument("--sessions-per-day", type=int, default=10)
    evaluate.add_argument("--strategy", choices=["first-day", "cumulative"], default="cumulative")
    evaluate.add_argument("--stem", default=None, help="report file stem (default: protocol name)")
    evaluate.set_defaults(func=cmd_evaluate, window=None)

    bench = commands.add_parser("bench", help="time preprocess, features and identify")
    _add_common(bench)
    _add_cohort(bench)
    bench.add_argument("--model", required=True)
    bench.add_argument("--csv", default=None)
    bench.add_argument("--dataset", default=None)
    bench.add_argument("--window", type=float, default=0.2)
    bench.add_argument("--reps", type=int, default=100)
    bench.set_defaults(func=cmd_bench)

    profile = commands.add_parser("profile", help="per-subject mean raw amplitude table")
    _add_common(profile)
    profile.add_argument("--dataset", required=True)
    profile.set_defaults(func=cmd_profile)

    serve = commands.add_parser("serve", help="serve the REST identification API")
    serve.add_argument("--model", default=None, help="identifier JSON (default WIPIN_MODEL_PATH)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except WipinError as e:
        logger.error(str(e))
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return 2
    except (OSError, json.JSONDecodeError) as e:
        logger.error(str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
