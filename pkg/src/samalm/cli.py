"""Command-line entry point: ``samalm run | replay | report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from samalm.harness.config import ExperimentConfig, RunMode
from samalm.harness.export import recompute_from_csv
from samalm.harness.runner import run_batch
from samalm.llm.gateway import BackendConfig, Mode


def _load_config(path: str | None) -> ExperimentConfig:
    return ExperimentConfig.load(path) if path else ExperimentConfig()


def _backend_for(name: str | None, base: BackendConfig, transcript: str | None) -> BackendConfig:
    if name is None:
        return replace(base, transcript_path=transcript or base.transcript_path)
    mode = Mode(name)
    if mode is Mode.HTTP:
        env = BackendConfig.from_env()
        return replace(
            base,
            mode=mode,
            endpoint_url=env.endpoint_url or base.endpoint_url,
            api_key=env.api_key,
            model_name=env.model_name or base.model_name,
            transcript_path=transcript,
        )
    return replace(base, mode=mode, transcript_path=transcript or base.transcript_path)


def _print_report(report, out_dir: str | None) -> None:
    print(f"episodes={len(report.episodes)} successes={report.successes} SR={report.SR:.1f} SS={report.SS}")
    if report.aborted:
        print(f"ABORTED episodes: {report.aborted}", file=sys.stderr)
    if out_dir:
        print(f"artifacts written to {out_dir}")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    overrides = {}
    if args.mode:
        overrides["mode"] = RunMode(args.mode)
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["out_dir"] = args.out
    if args.no_transcripts:
        overrides["record_transcripts"] = False
    backend = _backend_for(args.backend, cfg.backend, args.transcript)
    if args.fault_mode:
        backend = replace(backend, scripted=replace(backend.scripted, fault_mode=args.fault_mode))
    cfg = replace(cfg, backend=backend, **overrides)
    report, _ = run_batch(cfg)
    _print_report(report, cfg.out_dir)
    return 1 if report.aborted else 0


def _recorded_config(transcript: str) -> str | None:
    """config.json written next to a recorded transcripts/ directory, if any."""
    path = Path(transcript)
    run_dir = path.parent if path.is_dir() else path.parent.parent
    candidate = run_dir / "config.json"
    return str(candidate) if candidate.exists() else None


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config or _recorded_config(args.transcript))
    backend = replace(cfg.backend, mode=Mode.REPLAY, transcript_path=args.transcript)
    cfg = replace(cfg, backend=backend, out_dir=args.out, record_transcripts=False)
    if args.episodes is not None:
        cfg = replace(cfg, episodes=args.episodes)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    report, _ = run_batch(cfg)
    _print_report(report, cfg.out_dir)
    return 1 if report.aborted else 0


def cmd_report(args: argparse.Namespace) -> int:
    in_dir = Path(args.in_dir)
    weights = None
    cfg_path = in_dir / "config.json"
    if cfg_path.exists():
        weights = ExperimentConfig.from_json(json.loads(cfg_path.read_text())).ss_weights
    result = recompute_from_csv(in_dir / "metrics.csv", *([weights] if weights else []))
    print(json.dumps(result, indent=2))
    if result.get("aborted"):
        return 1
    return 0 if result.get("consistent", True) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samalm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch of episodes")
    run.add_argument("--config")
    run.add_argument("--mode", choices=[m.value for m in RunMode])
    run.add_argument("--backend", choices=[m.value for m in Mode])
    run.add_argument("--episodes", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--transcript", help="transcript file or directory (required for replay)")
    run.add_argument(
        "--fault-mode",
        choices=["none", "random", "first_attempt", "always", "garbage", "zero"],
        help="scripted backend fault injection",
    )
    run.add_argument("--no-transcripts", action="store_true")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="re-run a batch from a recorded transcript")
    rep.add_argument("--transcript", required=True)
    rep.add_argument("--config", help="defaults to the config.json recorded next to the transcripts")
    rep.add_argument("--seed", type=int)
    rep.add_argument("--episodes", type=int)
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_replay)

    report = sub.add_parser("report", help="recompute metrics from an output directory")
    report.add_argument("--in", dest="in_dir", required=True)
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
