#!/usr/bin/env python3
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from config import LOG_LEVEL, ConfigError, load_config_file
from experiments import (
    ExperimentError,
    ExperimentKind,
    emit_report,
    resolve_config,
    resolve_output_root,
    run_experiment,
)
from rearrangement.run_index import RunRecord
from run_store import RunStore, RunStoreError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2

COMMAND_EXPERIMENTS = {
    "certify": (ExperimentKind.CERTIFY_SWEEP.value, ExperimentKind.COROLLARY1_SWEEP.value),
    "strip": (ExperimentKind.EULER_STRIP_RUN.value,),
    "disc": (ExperimentKind.EULER_DISC_CERTIFY.value,),
    "domain": (ExperimentKind.EULER_DOMAIN_CERTIFY.value,),
    "vp": (ExperimentKind.VP_BUILD_AND_CERTIFY.value,),
}


def print_outcome(record: RunRecord) -> int:
    print(f"📁 Run {record.run_id}: {record.certificate_count} certificates")
    if record.inconclusive_count:
        print(f"⚠️  {record.inconclusive_count} inconclusive")
    if record.violation_count:
        print(f"❌ {record.violation_count} violations")
        return EXIT_VIOLATIONS
    print("✅ 0 violations")
    return EXIT_OK


def run_command(command: str, config_path: Path, out: Optional[Path]) -> int:
    allowed = COMMAND_EXPERIMENTS[command]
    payload = load_config_file(config_path)
    experiment = payload.get("experiment", allowed[0])
    if experiment not in allowed:
        raise ExperimentError([f"experiment: {command!r} runs {list(allowed)}, config asks for {experiment!r}"])
    config = resolve_config(payload, experiment=experiment)
    store = RunStore(resolve_output_root(config.output_dir, out))
    print(f"🧮 Running {config.experiment} (seed {config.seed}, {config.trials} trials)...")
    record = run_experiment(config, store=store)
    if config.trials:
        emit_report(record, store)
    return print_outcome(record)


def run_report(run_dir: Path) -> int:
    run_dir = Path(run_dir)
    store = RunStore(run_dir.parent)
    record = store.load_record_from_dir(run_dir)
    for path in emit_report(record, store):
        print(f"📝 Wrote {path}")
    return print_outcome(record)


def build_parser() -> argparse.ArgumentParser:
    argument_parser = argparse.ArgumentParser(description="Certify rearrangement inequalities and stability bounds")
    subparsers = argument_parser.add_subparsers(dest="command")

    def add_config_arguments(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--config", type=Path, required=True, help="Path to the experiment JSON config")
        parser.add_argument("--out", type=Path, default=None, help="Output root (overrides RLAB_OUT)")

    certify_parser = subparsers.add_parser("certify", help="Run a certificate sweep")
    add_config_arguments(certify_parser)

    euler_parser = subparsers.add_parser("euler", help="2D Euler stability experiments")
    euler_subparsers = euler_parser.add_subparsers(dest="euler_command")
    for name, help_text in (
        ("strip", "Evolve perturbed shear flow on the periodic strip"),
        ("disc", "Certify radial steady states on the disc"),
        ("domain", "Certify the stream-function steady state on the disc"),
    ):
        add_config_arguments(euler_subparsers.add_parser(name, help=help_text))

    vp_parser = subparsers.add_parser("vp", help="Build a polytrope and certify global control")
    add_config_arguments(vp_parser)

    report_parser = subparsers.add_parser("report", help="Rewrite summary and plot CSVs of a run")
    report_parser.add_argument("run_dir", type=Path, help="Run directory containing record.json")
    return argument_parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s - %(levelname)s - %(message)s")
    argument_parser = build_parser()
    args = argument_parser.parse_args(argv)

    try:
        if args.command in ("certify", "vp"):
            return run_command(args.command, args.config, args.out)
        if args.command == "euler" and args.euler_command:
            return run_command(args.euler_command, args.config, args.out)
        if args.command == "report":
            return run_report(args.run_dir)
    except ExperimentError as exc:
        print("❌ invalid config:")
        for problem in exc.problems:
            print(f"   - {problem}")
        return EXIT_ERROR
    except (ConfigError, RunStoreError) as exc:
        print(f"❌ execution error: {exc}")
        return EXIT_ERROR
    except Exception as exc:  # pragma: no cover - runtime path
        logging.getLogger(__name__).exception("Run failed")
        print(f"❌ execution error: {exc}")
        return EXIT_ERROR
    argument_parser.print_help()
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
