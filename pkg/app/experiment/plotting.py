"""Power-vs-time plots: one processor/DRAM curve pair per cap, one panel per app and vocabulary size."""

from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import structlog  # noqa: E402

from ..error_handler import UsageError  # noqa: E402
from ..power.types import PowerDomain, PowerTrace  # noqa: E402
from .results import read_trace  # noqa: E402

logger = structlog.get_logger(__name__)

# Fixed salt and no date so identical inputs give identical SVG bytes.
SVG_HASH_SALT = "mrcap"

_CAP_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown"]


def _cap_sort_key(label: str) -> Tuple[int, float]:
    """Unlimited first, then descending watts."""
    if label == "none":
        return (0, 0.0)
    return (1, -float(label))


def collect_trace_files(paths: Iterable[Union[str, Path]]) -> List[Path]:
    """
    Expand directories to the ``*.csv`` trace files they contain.

    Raises:
        UsageError: If a path does not exist
    """
    files: List[Path] = []
    for entry in (Path(p) for p in paths):
        if entry.is_dir():
            files.extend(sorted(entry.glob("*.csv")))
        elif entry.exists():
            files.append(entry)
        else:
            raise UsageError(f"Trace path does not exist: {entry}")
    return files


def load_traces(
    trace_paths: Iterable[Union[str, Path]],
    caps: Optional[Sequence[str]] = None,
    app: Optional[str] = None,
    first_rep_only: bool = True,
    unique_words: Optional[int] = None,
) -> Dict[str, List[Tuple[str, PowerTrace]]]:
    """
    Read traces and group them into panels of ``(cap label, trace)`` pairs.

    Traces are filtered to ``caps``, ``app`` and ``unique_words`` when given,
    and to first replications unless ``first_rep_only`` is off. There is one
    panel per app; when the selection spans several vocabulary sizes there is
    one panel per (app, unique_words), titled ``"<app>, <U> unique words"``.
    """
    selected: List[Tuple[str, Optional[int], str, PowerTrace]] = []
    for path in sorted(Path(p) for p in trace_paths):
        meta, trace = read_trace(path)
        cap = meta.get("cap", "none")
        trace_app = meta.get("app", path.stem)
        trace_unique = int(meta["unique_words"]) if meta.get("unique_words") else None
        if first_rep_only and meta.get("first_rep", "1") != "1":
            continue
        if caps is not None and cap not in caps:
            continue
        if app is not None and trace_app != app:
            continue
        if unique_words is not None and trace_unique != unique_words:
            continue
        selected.append((trace_app, trace_unique, cap, trace))

    split_by_size = len({entry[1] for entry in selected}) > 1
    grouped: Dict[Tuple[str, int], List[Tuple[str, PowerTrace]]] = {}
    for trace_app, trace_unique, cap, trace in selected:
        grouped.setdefault((trace_app, trace_unique or 0), []).append((cap, trace))

    panels: Dict[str, List[Tuple[str, PowerTrace]]] = OrderedDict()
    for (panel_app, size), entries in sorted(grouped.items()):
        entries.sort(key=lambda entry: _cap_sort_key(entry[0]))
        title = f"{panel_app}, {size} unique words" if split_by_size else panel_app
        panels[title] = entries
    return panels


def _cap_legend(cap: str) -> str:
    return "uncapped" if cap == "none" else f"{cap} W cap"


def render_power_plot(
    trace_paths: Iterable[Union[str, Path]],
    out_path: Union[str, Path],
    caps: Optional[Sequence[str]] = None,
    app: Optional[str] = None,
    first_rep_only: bool = True,
    unique_words: Optional[int] = None,
) -> Path:
    """
    Draw processor (solid) and DRAM (dashed) power over time for each cap.

    Panels follow ``load_traces``, so a unique-words sweep never overlays
    two vocabulary sizes in one panel.

    Raises:
        UsageError: If no trace file was given
    """
    paths = list(trace_paths)
    if not paths:
        raise UsageError("At least one trace file is required to plot")

    panels = load_traces(
        paths, caps=caps, app=app, first_rep_only=first_rep_only, unique_words=unique_words
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    matplotlib.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    n_panels = max(1, len(panels))
    fig, axes = plt.subplots(1, n_panels, figsize=(5.0 * n_panels, 4.0), squeeze=False, sharey=True)

    try:
        if not panels or all(not trace.samples for entries in panels.values() for _, trace in entries):
            logger.warning("No samples to plot; writing placeholder", traces=len(paths))
            ax = axes[0][0]
            ax.text(
                0.5, 0.5, "no power samples recorded",
                ha="center", va="center", transform=ax.transAxes, color="tab:red",
            )
            ax.set_xlabel("time (s)")
            ax.set_ylabel("power (W)")
        else:
            for ax, (panel_app, entries) in zip(axes[0], panels.items()):
                for idx, (cap, trace) in enumerate(entries):
                    color = _CAP_COLORS[idx % len(_CAP_COLORS)]
                    for domain, style in ((PowerDomain.PROCESSOR, "-"), (PowerDomain.DRAM, "--")):
                        samples = trace.for_domain(domain)
                        if not samples:
                            continue
                        xs = [s.t_ms / 1000.0 for s in samples]
                        ys = [s.watts for s in samples]
                        # Extend the last step to the end of its interval.
                        xs.append(xs[-1] + trace.interval_ms / 1000.0)
                        ys.append(ys[-1])
                        name = "proc" if domain == PowerDomain.PROCESSOR else "DRAM"
                        ax.plot(
                            xs, ys, linestyle=style, color=color, drawstyle="steps-post",
                            label=f"{_cap_legend(cap)} ({name})",
                        )
                ax.set_title(panel_app)
                ax.set_xlabel("time (s)")
                ax.grid(True, alpha=0.3)
                ax.legend(fontsize="small")
            axes[0][0].set_ylabel("power (W)")

        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)

    logger.info("Power plot written", out=str(out_path), panels=len(panels))
    return out_path
