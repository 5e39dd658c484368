"""Sweep execution, result files, summaries and plots."""

from .plotting import collect_trace_files, load_traces, render_power_plot
from .results import (
    RESULT_FIELDS,
    SCHEMA_LINE,
    ResultRow,
    ResultWriter,
    read_results,
    read_trace,
    trace_filename,
    write_results,
    write_trace,
)
from .runner import BackendKind, ExperimentConfig, MatrixResult, run_cell, run_matrix
from .summary import cell_statistics, format_summary, summarize, summarize_frame, sweep_summary

__all__ = [
    # Runner
    "BackendKind",
    "ExperimentConfig",
    "MatrixResult",
    "run_cell",
    "run_matrix",

    # Files
    "RESULT_FIELDS",
    "SCHEMA_LINE",
    "ResultRow",
    "ResultWriter",
    "read_results",
    "write_results",
    "read_trace",
    "write_trace",
    "trace_filename",

    # Analysis
    "summarize",
    "summarize_frame",
    "cell_statistics",
    "sweep_summary",
    "format_summary",
    "collect_trace_files",
    "load_traces",
    "render_power_plot",
]
