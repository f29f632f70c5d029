"""
graspforge command line
    python -m cli.main <command> --config run.toml --out runs/r1 [--from runs/r0] [--seed N] [--workers N] [--force]
"""

import argparse
import logging
import sys
from pathlib import Path

import config
from cli.commands import COMMANDS
from cli.pipeline import Pipeline
from cli.run_config import load_run_config, write_run_config
from errors import ConfigError, RunDirectoryError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def build_parser():
    parser = argparse.ArgumentParser(prog='graspforge', description="Self-supervised planar grasp learning")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(name, help=(handler.__doc__ or "").strip().split("\n")[0] or None)
        sub.add_argument('--config', help="TOML run configuration (defaults when omitted)")
        sub.add_argument('--out', help="Run directory (default runs/<command>-seed<seed>)")
        sub.add_argument('--from', dest='sources', action='append', default=[],
                         help="Earlier run directory to read artifacts from (repeatable)")
        sub.add_argument('--seed', type=int, help="Override run.seed")
        sub.add_argument('--workers', type=int, help="Override run.workers")
        sub.add_argument('--force', action='store_true', help="Allow a non-empty run directory")
    return parser


def prepare_run_directory(path, force):
    """Create the run directory; refuse a non-empty one unless forced"""
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise RunDirectoryError(f"{path} is not empty (use --force to write into it)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def setup_logging(run_dir):
    logging.basicConfig(level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    handler = logging.FileHandler(run_dir / 'run.log')
    handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
    logging.getLogger().addHandler(handler)
    return handler


def main(argv=None):
    """
    Dispatch one subcommand

    Returns:
        0 on success, 2 on a configuration error, 1 on any other failure
    """
    args = build_parser().parse_args(argv)
    try:
        run_config = load_run_config(args.config).with_run(args.seed, args.workers)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        out = args.out or Path('runs') / f"{args.command}-seed{run_config.run.seed}"
        run_dir = prepare_run_directory(out, args.force)
    except RunDirectoryError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE

    handler = setup_logging(run_dir)
    try:
        logger.info("=" * 60)
        logger.info(f"graspforge {args.command} (seed {run_config.run.seed}, {run_config.run.workers} workers)")
        logger.info("=" * 60)
        config_text = write_run_config(run_dir / 'config.toml', run_config)
        pipeline = Pipeline(run_config, run_dir, args.sources, args.command, config_text)
        summary = COMMANDS[args.command](pipeline)
        print(summary)
        logger.info(summary)
        return EXIT_OK
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_FAILURE
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()


if __name__ == '__main__':
    sys.exit(main())
