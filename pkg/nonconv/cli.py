"""
Command line entry point.

    nonconv run <config.json> [--threads K] [--out DIR]
    nonconv list-suites
    nonconv describe <entity>
"""
import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from nonconv import __version__
from nonconv.catalog import describe
from nonconv.config import get_settings
from nonconv.exceptions import EXIT_OK, EXIT_RUNTIME_ERROR, ConfigInvalid, NonconvError, SuiteFailed
from nonconv.models import Suite
from nonconv.schemas.experiment import ExperimentConfig
from nonconv.suites import run_experiment
from nonconv.utils.logger import add_file_handler, set_level, setup_logger
from nonconv.utils.serialization import canonical_json

logger = setup_logger("nonconv.cli")


def load_config(path: str, seed_override: Optional[int] = None) -> ExperimentConfig:
    """Read and validate an experiment file; NONCONV_SEED replaces the seed when set."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = ExperimentConfig.model_validate_json(fh.read())
    except OSError as e:
        raise ConfigInvalid(f"cannot read config {path}: {e}")
    except ValidationError as e:
        raise ConfigInvalid(f"invalid config {path}: {e}")
    if seed_override is not None:
        config = config.model_copy(update={"seed": seed_override})
    return config


# ----------------------------------------------------------------------
# COMMANDS
# ----------------------------------------------------------------------

def run(path: str, threads: Optional[int] = None, out: Optional[str] = None) -> int:
    settings = get_settings()
    config = load_config(path, settings.SEED)
    reports, exit_code = run_experiment(config, out_dir=out, threads=threads or settings.THREADS)
    if exit_code != EXIT_OK:
        failed = ", ".join(r.suite.value for r in reports if r.verdict.value == "fail")
        raise SuiteFailed(f"suites failed: {failed}")
    return exit_code


def list_suites() -> str:
    return "\n".join(s.value for s in Suite)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonconv", description="Nonconventional sums laboratory.")
    parser.add_argument("--version", action="version", version=f"nonconv {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run the suites selected by an experiment file")
    run_parser.add_argument("config", help="Path to the experiment JSON file")
    run_parser.add_argument("--threads", type=int, default=None, help="Replica worker threads (default 1)")
    run_parser.add_argument("--out", default=None, help="Output directory (overrides output_dir)")

    commands.add_parser("list-suites", help="Print the available suites")

    describe_parser = commands.add_parser("describe", help="Describe a catalog model or function")
    describe_parser.add_argument("entity", help="Catalog name, e.g. two-state or product2")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    set_level(settings.LOG_LEVEL)
    if settings.LOG_FILE:
        add_file_handler(settings.LOG_FILE)

    try:
        if args.command == "run":
            return run(args.config, args.threads, args.out)
        if args.command == "list-suites":
            print(list_suites())
            return EXIT_OK
        if args.command == "describe":
            sys.stdout.write(canonical_json(describe(args.entity)))
            return EXIT_OK
    except NonconvError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return EXIT_RUNTIME_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
