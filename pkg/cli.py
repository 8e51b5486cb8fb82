# cli.py
"""Command-line entry point: `qec <subcommand> --config experiment.json [flags]`."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Mapping, Optional, Sequence

from errors import ConfigurationError, DomainError
from experiment_config import OUTPUT_FORMATS, ExperimentConfig, load_config
from pipeline import OUTPUT_DIR_ENV, SUBCOMMANDS, ExperimentPipeline

__all__ = ["build_argparser", "dispatch", "load_config", "main"]

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
WARNING_PREFIX = "WARNING: "

logger = logging.getLogger("qec")


def _log_line(message: str):
    if message.startswith(WARNING_PREFIX):
        logger.warning(message[len(WARNING_PREFIX):])
    else:
        logger.info(message)


def _status_line(message: str):
    logger.debug("status: %s", message)


def build_argparser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qec",
        description="Quantum enigma cipher simulator: keystream cipher, quantum-illumination "
        "channel, brute-force attacks and secrecy metrics.",
        epilog=f"Reports go to output.path, or to ${OUTPUT_DIR_ENV}/<subcommand>.<format> "
        "(default ~/.cache/qec_sim).",
    )
    p.add_argument("subcommand", metavar="SUBCOMMAND", help=f"one of: {', '.join(SUBCOMMANDS)}")
    p.add_argument("--config", help="Experiment JSON file (defaults apply when omitted)", default=None)
    p.add_argument("--seed", help="Master seed, overrides the config value", type=int, default=None)
    p.add_argument("--out", help="Report path, overrides output.path", default=None)
    p.add_argument("--format", help="Report format", choices=OUTPUT_FORMATS, default=None)
    p.add_argument("--trials", help="Monte-Carlo trials for simulate", type=int, default=None)
    p.add_argument("--threshold", help="Required P_e(Eve)/P_e(Alice) ratio for eta", type=float, default=None)
    p.add_argument("-v", "--verbose", help="Debug logging", action="store_true")
    return p


def _flag(flags: Any, name: str) -> Any:
    if flags is None:
        return None
    if isinstance(flags, Mapping):
        return flags.get(name)
    return getattr(flags, name, None)


def dispatch(
    subcommand: str,
    config: ExperimentConfig,
    flags: Any = None,
    pipeline: Optional[ExperimentPipeline] = None,
) -> int:
    """Run one subcommand; 0 on success, 1 on domain errors, 2 on configuration errors."""
    if subcommand not in SUBCOMMANDS:
        build_argparser().print_usage(sys.stderr)
        print(f"qec: unknown subcommand {subcommand!r} (choose from {', '.join(SUBCOMMANDS)})", file=sys.stderr)
        return 2

    pipeline = pipeline or ExperimentPipeline(_log_line, _status_line)
    try:
        config = config.with_overrides(
            seed=_flag(flags, "seed"),
            out=_flag(flags, "out"),
            fmt=_flag(flags, "format"),
            trials=_flag(flags, "trials"),
            threshold=_flag(flags, "threshold"),
        )
        result = pipeline.process(subcommand, config)
    except ConfigurationError as e:
        logger.error("configuration error: %s", e)
        return 2
    except DomainError as e:
        logger.error("%s failed: %s", subcommand, e)
        return 1
    except RuntimeError as e:
        # report could not be written
        logger.error("%s", e)
        return 1

    print(result.output_path)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_argparser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)

    try:
        config = load_config(args.config) if args.config else ExperimentConfig.from_dict({})
    except ConfigurationError as e:
        logger.error("configuration error: %s", e)
        return 2
    return dispatch(args.subcommand, config, args)


if __name__ == "__main__":
    sys.exit(main())
