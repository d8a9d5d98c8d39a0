"""Command-line interface for spacerank."""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from .bench import make_objective
from .config import (
    GenerationSettings,
    ScoreConfig,
    parse_budgets,
    parse_rates,
)
from .constants import (
    DEFAULT_N_BOOTSTRAP,
    DEFAULT_N_POSTERIOR_SAMPLES,
    DEFAULT_N_X_BATCHES,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_PER_RATE,
    DEFAULT_RATES,
    DEFAULT_SEED,
    DEFAULT_VARIANT,
    EXIT_INPUT_ERROR,
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    TOOL_NAME,
    TOOL_VERSION,
    VALID_OBJECTIVES,
    VALID_VARIANTS,
)
from .core import SpaceRankError
from .experiments import (
    available_experiments,
    load_experiment_spec,
    run_experiment,
    write_report,
)
from .file_utils import (
    MANIFEST_FILE,
    InputFormatError,
    RunManifest,
    ensure_directory_exists,
    format_csv,
    format_json,
    load_observations,
    load_space,
    read_manifest,
    save_csv,
    save_json,
    save_observations,
    save_run_manifest,
    save_space,
)
from .gp import fit
from .scoring import SCORE_COLUMNS, predicted_score
from .workflows import (
    TableSampler,
    one_shot_prune,
    rank_spaces_curve,
    tune_or_fix_curve,
)

logger = logging.getLogger(__name__)

RANK_COLUMNS = ["rank"] + SCORE_COLUMNS
PRUNE_CURVE_COLUMNS = ["step", "phase", "objective", "best"]


def setup_logging(verbose: bool, debug: bool) -> None:
    """Configure logging based on verbosity level.

    Args:
        verbose: If True, set INFO level logging.
        debug: If True, set DEBUG level logging (overrides verbose).
    """
    if debug:
        level = logging.DEBUG
    elif verbose:
        level = logging.INFO
    else:
        level = logging.WARNING

    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )


def _add_score_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--variant",
        choices=VALID_VARIANTS,
        default=DEFAULT_VARIANT,
        help=f"Score variant (default: {DEFAULT_VARIANT})",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=DEFAULT_SEED,
        help=f"Master random seed (default: {DEFAULT_SEED})",
    )
    parser.add_argument(
        "--nx",
        type=int,
        default=DEFAULT_N_X_BATCHES,
        help=f"Number of sampled batches (default: {DEFAULT_N_X_BATCHES})",
    )
    parser.add_argument(
        "--ny",
        type=int,
        default=DEFAULT_N_POSTERIOR_SAMPLES,
        help=f"Posterior samples per batch (default: {DEFAULT_N_POSTERIOR_SAMPLES})",
    )
    parser.add_argument(
        "--bootstrap",
        type=int,
        default=DEFAULT_N_BOOTSTRAP,
        help=f"Bootstrap resamples for median scores (default: {DEFAULT_N_BOOTSTRAP})",
    )
    parser.add_argument(
        "--include-noise",
        action="store_true",
        help="Sample noisy outcomes instead of the latent function",
    )


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--space", required=True, help="Search space JSON file")
    parser.add_argument("--data", required=True, help="Observation CSV file")
    parser.add_argument(
        "--negate",
        action="store_true",
        help="Negate the objective column (for metrics where higher is better)",
    )


def create_parser() -> argparse.ArgumentParser:
    """Create and configure argument parser.

    Returns:
        Configured ArgumentParser instance.
    """
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Predict how useful a search space is for a given tuning budget",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s score --space spaces/branin.json --data seeds.csv --budget 5
  %(prog)s rank --spaces x.json s1.json s2.json --data seeds.csv --budgets 1:100:8-log
  %(prog)s prune --objective hartmann6 --space spaces/hartmann6.json --b1 30 --b2 30
  %(prog)s tune-or-fix --space spaces/network_base.json --data runs.csv --dim r --fix 0
  %(prog)s reproduce --experiment branin-ranking --output-dir results

Exit codes:
  0  success
  2  invalid input or arguments
  3  model fitting or numerical failure, or interrupted
        """,
    )

    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Enable verbose output with progress bars",
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging (most verbose)",
    )
    parser.add_argument(
        "--threads",
        "-t",
        type=int,
        default=os.cpu_count() or 1,
        help="Maximum worker threads; results do not depend on it "
        "(default: available cores)",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {TOOL_VERSION}",
    )

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    score = subparsers.add_parser("score", help="Score one space at one budget")
    _add_data_options(score)
    score.add_argument("--budget", type=int, required=True, help="Evaluation budget")
    _add_score_options(score)

    rank = subparsers.add_parser("rank", help="Rank several spaces across budgets")
    rank.add_argument(
        "--spaces", nargs="+", required=True, help="Search space JSON files"
    )
    rank.add_argument("--data", required=True, help="Observation CSV file")
    rank.add_argument(
        "--base",
        help="Space the observations lie in (default: the first of --spaces)",
    )
    rank.add_argument(
        "--negate", action="store_true", help="Negate the objective column"
    )
    rank.add_argument(
        "--budgets",
        required=True,
        help="Budget list '1,5,25' or log sweep '1:100:8-log'",
    )
    _add_score_options(rank)

    prune = subparsers.add_parser(
        "prune", help="Spend b1 broadly, pick the best sub-space, spend b2 there"
    )
    source = prune.add_mutually_exclusive_group(required=True)
    source.add_argument(
        "--objective", choices=VALID_OBJECTIVES, help="Synthetic objective to run"
    )
    source.add_argument(
        "--table", help="Observation CSV of pre-collected evaluations to draw from"
    )
    prune.add_argument("--space", required=True, help="Base search space JSON file")
    prune.add_argument(
        "--negate", action="store_true", help="Negate the table's objective column"
    )
    prune.add_argument("--b1", type=int, required=True, help="Initial budget")
    prune.add_argument("--b2", type=int, required=True, help="Budget after pruning")
    prune.add_argument(
        "--rates",
        default=",".join(f"{r:g}" for r in DEFAULT_RATES),
        help="Reduction rates '0.1,0.5' or '0.1:0.9:0.1' (default: 0.1 to 0.9)",
    )
    prune.add_argument(
        "--per-rate",
        type=int,
        default=DEFAULT_PER_RATE,
        help=f"Candidate spaces per rate (default: {DEFAULT_PER_RATE})",
    )
    prune.add_argument(
        "--no-base",
        action="store_true",
        help="Do not score the base space alongside the candidates",
    )
    prune.add_argument(
        "--noise-sd",
        type=float,
        default=0.0,
        help="Observation noise of the synthetic objective (default: 0)",
    )
    prune.add_argument(
        "--output-dir",
        "-o",
        default=DEFAULT_OUTPUT_DIR,
        help=f"Output directory (default: {DEFAULT_OUTPUT_DIR})",
    )
    _add_score_options(prune)

    tune = subparsers.add_parser(
        "tune-or-fix", help="Decide whether to tune a dimension or fix it"
    )
    _add_data_options(tune)
    tune.add_argument("--dim", required=True, help="Dimension name")
    tune.add_argument(
        "--fix",
        type=float,
        action="append",
        default=[],
        help="Candidate fixed value (repeatable)",
    )
    tune.add_argument(
        "--budgets",
        required=True,
        help="Budget list '1,5,25' or log sweep '1:100:8-log'",
    )
    tune.add_argument(
        "--output-dir",
        "-o",
        default=DEFAULT_OUTPUT_DIR,
        help=f"Output directory (default: {DEFAULT_OUTPUT_DIR})",
    )
    _add_score_options(tune)

    reproduce = subparsers.add_parser(
        "reproduce", help="Run one of the shipped experiments"
    )
    reproduce.add_argument(
        "--experiment",
        required=True,
        help=f"Experiment name ({', '.join(available_experiments())})",
    )
    reproduce.add_argument(
        "--output-dir",
        "--out",
        "-o",
        default=DEFAULT_OUTPUT_DIR,
        help=f"Output directory (default: {DEFAULT_OUTPUT_DIR})",
    )

    return parser


def _score_config(args: argparse.Namespace) -> ScoreConfig:
    config = ScoreConfig(
        variant=args.variant,
        n_x_batches=args.nx,
        n_posterior_samples=args.ny,
        seed=args.seed,
        include_noise=args.include_noise,
        n_bootstrap=args.bootstrap,
        max_workers=max(1, args.threads),
    )
    config.validate()
    return config


def _manifest(
    args: argparse.Namespace, arguments: Dict[str, Any], inputs: List[str]
) -> RunManifest:
    manifest = RunManifest(command=args.command, seed=args.seed, arguments=arguments)
    for path in inputs:
        manifest.add_input(path)
    return manifest


def _prepare_output_dir(output_dir: str, manifest: RunManifest) -> None:
    """Create output_dir and warn before replacing artifacts of a different run."""
    ensure_directory_exists(output_dir)
    previous_path = os.path.join(output_dir, MANIFEST_FILE)
    if not os.path.isfile(previous_path):
        return
    try:
        previous = read_manifest(previous_path)
    except InputFormatError as e:
        logger.warning(f"Replacing artifacts with an unreadable manifest: {e}")
        return
    if format_json(previous) != format_json(manifest.to_dict()):
        command = previous.get("command") if isinstance(previous, dict) else None
        logger.warning(
            f"Replacing artifacts of a different '{command}' run in {output_dir}"
        )
    else:
        logger.info(f"Re-running the run recorded in {previous_path}")


def cmd_score(args: argparse.Namespace) -> int:
    """Score one space at one budget and print a CSV row."""
    config = _score_config(args)
    space = load_space(args.space)
    data = load_observations(args.data, space, negate=args.negate)
    model = fit(data, seed=config.seed)
    estimate = predicted_score(model, space, args.budget, data.incumbent, config)
    estimate = estimate.with_space_id(space.name)

    manifest = _manifest(
        args,
        {"budget": args.budget, "negate": args.negate, **config.to_dict()},
        [args.space, args.data],
    )
    sys.stdout.write(format_csv(SCORE_COLUMNS, [estimate.to_row()], manifest))
    return EXIT_OK


def cmd_rank(args: argparse.Namespace) -> int:
    """Rank spaces at every budget and print the long-format ranking CSV."""
    config = _score_config(args)
    budgets = parse_budgets(args.budgets)
    spaces = [load_space(path) for path in args.spaces]
    inputs = list(args.spaces) + [args.data]
    if args.base:
        base = load_space(args.base)
        inputs.append(args.base)
    else:
        base = spaces[0]
    data = load_observations(args.data, base, negate=args.negate)
    rankings = rank_spaces_curve(data, spaces, budgets, config, verbose=args.verbose)

    rows = [row for result in rankings for row in result.to_rows()]
    manifest = _manifest(
        args,
        {"budgets": budgets, "negate": args.negate, **config.to_dict()},
        inputs,
    )
    sys.stdout.write(format_csv(RANK_COLUMNS, rows, manifest))
    return EXIT_OK


def cmd_prune(args: argparse.Namespace) -> int:
    """Run one-shot pruning and write the result JSON and best-value curve."""
    config = _score_config(args)
    generation = GenerationSettings(
        rates=parse_rates(args.rates),
        per_rate=args.per_rate,
        include_base=not args.no_base,
    )
    generation.validate()
    base = load_space(args.space)
    inputs = [args.space]

    if args.table:
        table = load_observations(args.table, base, negate=args.negate)
        objective = None
        sampler = TableSampler(table)
        inputs.append(args.table)
    else:
        objective = make_objective(args.objective, args.noise_sd, args.seed)
        sampler = None

    result = one_shot_prune(
        objective,
        base,
        args.b1,
        args.b2,
        generation,
        config,
        seed=args.seed,
        sampler=sampler,
        verbose=args.verbose,
    )

    manifest = _manifest(
        args,
        {
            "objective": args.objective,
            "noise_sd": args.noise_sd,
            "b1": args.b1,
            "b2": args.b2,
            "rates": list(generation.rates),
            "per_rate": generation.per_rate,
            "include_base": generation.include_base,
            "negate": args.negate,
            **config.to_dict(),
        },
        inputs,
    )
    doc = result.to_dict()
    log = result.log
    best = log.best_curve
    rows = [
        {
            "step": i + 1,
            "phase": 1 if i < result.phase1.n else 2,
            "objective": float(y),
            "best": float(best[i]),
        }
        for i, y in enumerate(log.y)
    ]
    _prepare_output_dir(args.output_dir, manifest)
    save_json(os.path.join(args.output_dir, "prune_result.json"), doc)
    save_space(os.path.join(args.output_dir, "chosen_space.json"), result.chosen_space)
    save_observations(
        os.path.join(args.output_dir, "evaluations.csv"),
        log.to_dataset(base),
        manifest,
    )
    save_csv(
        os.path.join(args.output_dir, "prune_curve.csv"),
        PRUNE_CURVE_COLUMNS,
        rows,
        manifest,
    )
    save_run_manifest(args.output_dir, manifest)
    sys.stdout.write(format_json(doc))
    return EXIT_OK


def cmd_tune_or_fix(args: argparse.Namespace) -> int:
    """Compare tuning a dimension with fixing it, across budgets."""
    config = _score_config(args)
    budgets = parse_budgets(args.budgets)
    base = load_space(args.space)
    data = load_observations(args.data, base, negate=args.negate)
    results = tune_or_fix_curve(data, base, args.dim, args.fix, budgets, config)

    manifest = _manifest(
        args,
        {
            "dim": args.dim,
            "fix": list(args.fix),
            "budgets": budgets,
            "negate": args.negate,
            **config.to_dict(),
        },
        [args.space, args.data],
    )
    doc = {"dim": args.dim, "results": [result.to_dict() for result in results]}
    rows = [
        {**estimate.to_row(), "recommendation": result.recommendation}
        for result in results
        for _, estimate in result.scored
    ]
    _prepare_output_dir(args.output_dir, manifest)
    save_json(os.path.join(args.output_dir, "tune_or_fix.json"), doc)
    save_csv(
        os.path.join(args.output_dir, "tune_or_fix.csv"),
        SCORE_COLUMNS + ["recommendation"],
        rows,
        manifest,
    )
    save_run_manifest(args.output_dir, manifest)
    sys.stdout.write(format_json(doc))
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace) -> int:
    """Run a shipped experiment and write its artifacts."""
    spec = load_experiment_spec(args.experiment)
    manifest = RunManifest(
        command=args.command,
        seed=spec.seed,
        arguments={"experiment": spec.to_dict()},
    )
    _prepare_output_dir(args.output_dir, manifest)
    report = run_experiment(
        spec, max_workers=max(1, args.threads), verbose=args.verbose
    )
    write_report(report, args.output_dir, manifest)
    sys.stdout.write(format_json(report.to_dict()))
    if report.narrative:
        logger.info(report.narrative)
    return EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "rank": cmd_rank,
    "prune": cmd_prune,
    "tune-or-fix": cmd_tune_or_fix,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[list] = None) -> int:
    """Main entry point for CLI.

    Args:
        argv: Optional command-line arguments (uses sys.argv if not provided).

    Returns:
        Exit code (0 for success, 2 for invalid input, 3 for numerical failure or
        interruption).
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    setup_logging(verbose=args.verbose, debug=args.debug)

    logger.debug(f"Arguments: {args}")

    try:
        return COMMANDS[args.command](args)

    except FileNotFoundError as e:
        logger.error(str(e))
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    except (ArithmeticError, np.linalg.LinAlgError) as e:
        logger.error(f"Numerical error: {e}")
        print(f"Numerical Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR

    except ValueError as e:
        logger.error(f"Input error: {e}")
        print(f"Input Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    except SpaceRankError as e:
        logger.error(f"Error: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        print("\nInterrupted by user", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR

    except Exception as e:
        logger.exception("Unexpected error")
        print(f"Unexpected error: {e}", file=sys.stderr)
        if args.debug:
            raise
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
