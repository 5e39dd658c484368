"""Command-line entry point for the mrcap benchmark harness."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import structlog
from dotenv import load_dotenv

from . import __version__
from .config import ConfigurationError, HarnessConfig, load_config
from .error_handler import ErrorClassifier, ErrorContext, UsageError
from .logging_config import setup_default_logging
from .miniapps import MiniApp
from .power import PowerCapConfig, SimPowerModel
from .runtime import CombineScope

logger = structlog.get_logger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """Raises ``UsageError`` instead of exiting on bad flags."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    parser = _ArgumentParser(
        prog="mrcap-bench",
        description="Energy and power-capping benchmark for in-memory MapReduce mini-apps",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Environment Variables:
  MRCAP_POWERCAP_ROOT   Powercap sysfs root (default: /sys/class/powercap)
  MRCAP_RAPL_PACKAGE    RAPL package zone index (default: 0)
  MRCAP_SAMPLE_MS       Default sampling interval in ms (default: 100)
  MRCAP_LOG_LEVEL       Log level (default: INFO)
  MRCAP_LOG_FORMAT      console or json (default: console)

Examples:
  # Full matrix on the simulated backend
  mrcap-bench run --app all --total-words 4000000 --unique-words 72 \\
      --ranks 4 --caps none,140,120 --backend sim --reps 3 --out results.csv

  # Derived comparisons
  mrcap-bench summarize results.csv

  # Power-vs-time plot of the first replications
  mrcap-bench plot --traces results_traces --out fig1.svg
        """
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help="Set logging level (default: MRCAP_LOG_LEVEL or INFO)"
    )
    parser.add_argument("--version", action="version", version=f"mrcap-bench {__version__}")

    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    run = commands.add_parser("run", help="Run an (app x dataset x cap x rep) matrix")
    run.add_argument(
        "--app",
        default="all",
        help="map_shuffle, group_by_key, reduce_by_key or all (default: all)"
    )
    run.add_argument("--total-words", type=int, required=True, help="Words in the dataset")
    unique = run.add_mutually_exclusive_group()
    unique.add_argument("--unique-words", type=int, default=72, help="Vocabulary size (default: 72)")
    unique.add_argument(
        "--unique-words-sweep",
        type=_int_list,
        default=None,
        help="Comma-separated vocabulary sizes to sweep"
    )
    run.add_argument("--seed", type=int, default=0, help="Dataset seed (default: 0)")
    run.add_argument("--word-len", type=int, default=6, help="Characters per word (default: 6)")
    run.add_argument("--ranks", type=int, default=4, help="Number of ranks (default: 4)")
    run.add_argument(
        "--buffer-kvs",
        type=int,
        default=4096,
        help="Exchange buffer capacity in KVs per destination (default: 4096)"
    )
    run.add_argument(
        "--combine-scope",
        choices=[scope.value for scope in CombineScope],
        default=CombineScope.CHUNK.value,
        help="Combine each rank's whole chunk or each outgoing buffer (default: chunk)"
    )
    run.add_argument("--caps", default="none", help="Processor caps in watts, e.g. none,140,120")
    run.add_argument("--backend", choices=["sim", "rapl"], default="sim", help="Power backend (default: sim)")
    run.add_argument("--sim-model", type=Path, default=None, help="JSON file overriding the sim model")
    run.add_argument("--sample-ms", type=float, default=None, help="Sampling interval (default: 100)")
    run.add_argument("--reps", type=int, default=3, help="Replications per cell (default: 3)")
    run.add_argument("--out", type=Path, default=Path("results.csv"), help="Results CSV path")
    run.add_argument("--trace-dir", type=Path, default=None, help="Trace directory (default: <out>_traces)")
    run.add_argument("--validate", action="store_true", help="Check counts against the serial oracle")

    summarize = commands.add_parser("summarize", help="Derived comparisons and sweep table from a results CSV")
    summarize.add_argument("csv", type=Path, help="Results CSV written by 'run'")
    summarize.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Also write the summary as CSV (and <out>_sweep.csv for sweeps)"
    )

    plot = commands.add_parser("plot", help="Power-vs-time plot from trace files")
    plot.add_argument("--traces", type=Path, nargs="+", required=True, help="Trace files or directories")
    plot.add_argument("--out", type=Path, required=True, help="Output SVG path")
    plot.add_argument("--app", default=None, help="Only plot this app")
    plot.add_argument("--caps", default=None, help="Only plot these caps, e.g. none,120")
    plot.add_argument("--unique-words", type=int, default=None, help="Only plot runs with this vocabulary size")
    plot.add_argument("--all-reps", action="store_true", help="Plot every replication, not just the first")

    return parser


def _parse_caps(text: str) -> List[PowerCapConfig]:
    try:
        return PowerCapConfig.parse_list(text)
    except ConfigurationError as e:
        raise UsageError(str(e))


def _parse_app(name: str) -> str:
    apps = MiniApp.parse_list(name)
    if len(apps) != 1:
        raise UsageError(f"plot --app takes a single app name, got {name!r}")
    return apps[0].value


def _command_run(args: argparse.Namespace, harness: HarnessConfig) -> int:
    from .experiment import ExperimentConfig, run_matrix

    sim_model = SimPowerModel.from_file(args.sim_model) if args.sim_model else SimPowerModel()
    cfg = ExperimentConfig(
        apps=MiniApp.parse_list(args.app),
        total_words=args.total_words,
        unique_words=args.unique_words,
        unique_words_sweep=args.unique_words_sweep,
        seed=args.seed,
        word_len=args.word_len,
        ranks=args.ranks,
        buffer_capacity=args.buffer_kvs,
        combine_scope=CombineScope(args.combine_scope),
        caps=_parse_caps(args.caps),
        backend=args.backend,
        sim_model=sim_model,
        reps=args.reps,
        sample_ms=args.sample_ms if args.sample_ms is not None else harness.sample_ms,
        out=args.out,
        trace_dir=args.trace_dir,
        validate_counts=args.validate,
    )
    result = run_matrix(cfg, harness)
    print(f"Wrote {len(result.rows)} rows to {result.csv_path}")
    if result.failures:
        for failure in result.failures:
            print(
                f"FAILED {failure.app} unique_words={failure.unique_words} "
                f"cap={failure.cap} rep={failure.rep}: {failure.error}",
                file=sys.stderr,
            )
        return 1
    return 0


def _command_summarize(args: argparse.Namespace) -> int:
    from .experiment import cell_statistics, format_summary, read_results, summarize, sweep_summary

    summary = summarize(args.csv)
    rows = read_results(args.csv)
    sweep = sweep_summary(rows)
    print(format_summary(summary, cell_statistics(rows), sweep))
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        summary.to_csv(args.out, index=False, na_rep="n/a")
        logger.info("Summary written", out=str(args.out))
        if not sweep.empty:
            sweep_out = args.out.with_name(f"{args.out.stem}_sweep.csv")
            sweep.to_csv(sweep_out, index=False)
            logger.info("Sweep table written", out=str(sweep_out))
    return 0


def _command_plot(args: argparse.Namespace) -> int:
    from .experiment import collect_trace_files, render_power_plot

    caps = [cap.label for cap in _parse_caps(args.caps)] if args.caps else None
    out = render_power_plot(
        collect_trace_files(args.traces),
        args.out,
        caps=caps,
        app=_parse_app(args.app) if args.app else None,
        first_rep_only=not args.all_reps,
        unique_words=args.unique_words,
    )
    print(f"Wrote {out}")
    return 0


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI and return the process exit code.

    Usage errors exit with 2, every other failure with 1.
    """
    load_dotenv()
    args: Optional[argparse.Namespace] = None
    try:
        args = build_parser().parse_args(argv)
        harness = load_config()
        setup_default_logging(level=args.log_level or harness.log_level, log_format=harness.log_format)

        if args.command == "run":
            return _command_run(args, harness)
        if args.command == "summarize":
            return _command_summarize(args)
        return _command_plot(args)

    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else 0
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 130
    except Exception as e:
        info = ErrorClassifier.classify_error(
            e, ErrorContext(operation=getattr(args, "command", None) or "cli")
        )
        logger.debug("Command failed", category=info.category.value, error=str(e))
        print(f"Error: {info.format()}", file=sys.stderr)
        return info.exit_code


def cli_main() -> None:
    """Console-script entry point."""
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    cli_main()
