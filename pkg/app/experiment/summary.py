"""Derived comparisons between mini-apps from a results CSV.

Per (dataset, cap):
  reduce-stage overhead  = (GroupByKey - Map+Shuffle) / Map+Shuffle
  combiner savings       = (GroupByKey - ReduceByKey) / GroupByKey
for runtime and energy, plus joules saved, the shuffle-volume ratio and the
DRAM-fraction range. Replications are collapsed to their median first.

For unique-words sweeps, a second table lists each app's median runtime and
energy per vocabulary size next to the dataset's combinability, flagging the
size where each is lowest.
"""

from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
import structlog

from ..dataset import DatasetSpec, mean_combinability, min_word_len
from ..error_handler import UsageError
from ..miniapps import MiniApp
from .results import read_results

logger = structlog.get_logger(__name__)

DATASET_KEYS = ["backend", "total_words", "unique_words", "seed", "ranks", "cap_w"]

MS = MiniApp.MAP_SHUFFLE.value
GBK = MiniApp.GROUP_BY_KEY.value
RBK = MiniApp.REDUCE_BY_KEY.value

SUMMARY_COLUMNS = [
    *DATASET_KEYS,
    "reduce_overhead_runtime_pct",
    "reduce_overhead_energy_pct",
    "combiner_savings_runtime_pct",
    "combiner_savings_energy_pct",
    "joules_saved",
    "movement_reduction",
    "dram_fraction_min",
    "dram_fraction_max",
]

# A sweep varies unique_words with everything else fixed.
SWEEP_KEYS = ["backend", "total_words", "seed", "ranks", "cap_w", "app"]

SWEEP_COLUMNS = [
    *SWEEP_KEYS,
    "unique_words",
    "combinability",
    "runtime_ms_median",
    "energy_j_median",
    "min_runtime",
    "min_energy",
]


def _pct_change(numerator: pd.Series, denominator: pd.Series) -> pd.Series:
    return numerator / denominator.replace(0, np.nan) * 100.0


def cell_statistics(rows: pd.DataFrame) -> pd.DataFrame:
    """Min/median/max of runtime and energy over replications, per cell."""
    rows = rows.assign(energy_j=rows["proc_energy_j"] + rows["dram_energy_j"])
    grouped = rows.groupby(DATASET_KEYS + ["app"], sort=True, dropna=False)
    stats = grouped.agg(
        reps=("rep", "count"),
        runtime_ms_min=("runtime_ms", "min"),
        runtime_ms_median=("runtime_ms", "median"),
        runtime_ms_max=("runtime_ms", "max"),
        energy_j_min=("energy_j", "min"),
        energy_j_median=("energy_j", "median"),
        energy_j_max=("energy_j", "max"),
        shuffle_kvs=("shuffle_kvs", "median"),
        dram_fraction_min=("dram_fraction", "min"),
        dram_fraction_max=("dram_fraction", "max"),
    )
    return stats.reset_index()


def summarize_frame(rows: pd.DataFrame) -> pd.DataFrame:
    """
    Compute the comparison table from result rows.

    Missing comparators leave NaN in the affected columns.
    """
    if rows.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)

    cells = cell_statistics(rows)
    wide = cells.set_index(DATASET_KEYS + ["app"])[
        ["runtime_ms_median", "energy_j_median", "shuffle_kvs"]
    ].unstack("app")

    def column(metric: str, app: str) -> pd.Series:
        if (metric, app) in wide.columns:
            return wide[(metric, app)].astype(float)
        return pd.Series(np.nan, index=wide.index)

    t_ms, t_gbk, t_rbk = (column("runtime_ms_median", a) for a in (MS, GBK, RBK))
    e_ms, e_gbk, e_rbk = (column("energy_j_median", a) for a in (MS, GBK, RBK))
    kv_gbk, kv_rbk = column("shuffle_kvs", GBK), column("shuffle_kvs", RBK)

    summary = pd.DataFrame(index=wide.index)
    summary["reduce_overhead_runtime_pct"] = _pct_change(t_gbk - t_ms, t_ms)
    summary["reduce_overhead_energy_pct"] = _pct_change(e_gbk - e_ms, e_ms)
    summary["combiner_savings_runtime_pct"] = _pct_change(t_gbk - t_rbk, t_gbk)
    summary["combiner_savings_energy_pct"] = _pct_change(e_gbk - e_rbk, e_gbk)
    summary["joules_saved"] = e_gbk - e_rbk
    summary["movement_reduction"] = kv_gbk / kv_rbk.replace(0, np.nan)

    fractions = cells.groupby(DATASET_KEYS, dropna=False).agg(
        dram_fraction_min=("dram_fraction_min", "min"),
        dram_fraction_max=("dram_fraction_max", "max"),
    )
    summary = summary.join(fractions).reset_index()

    gaps = summary[summary.isna().any(axis=1)]
    if not gaps.empty:
        logger.warning(
            "Summary has gaps; some comparator apps are missing",
            incomplete_groups=len(gaps),
            apps_present=sorted(rows["app"].unique().tolist()),
        )
    return summary[SUMMARY_COLUMNS]


def sweep_summary(rows: pd.DataFrame) -> pd.DataFrame:
    """
    Runtime and energy against vocabulary size, per (dataset family, cap, app).

    Only groups run at two or more ``unique_words`` values appear. Each row
    carries the mean chunk combinability of its dataset, and ``min_runtime``
    / ``min_energy`` flag the vocabulary size with the lowest median within
    its group.
    """
    if rows.empty:
        return pd.DataFrame(columns=SWEEP_COLUMNS)

    cells = cell_statistics(rows)
    sizes = cells.groupby(SWEEP_KEYS, dropna=False)["unique_words"].transform("nunique")
    sweep = cells.loc[sizes > 1, SWEEP_KEYS + ["unique_words", "runtime_ms_median", "energy_j_median"]]
    if sweep.empty:
        return pd.DataFrame(columns=SWEEP_COLUMNS)

    sweep = sweep.sort_values(SWEEP_KEYS + ["unique_words"]).reset_index(drop=True)
    sweep["combinability"] = [
        _combinability(int(total), int(unique), int(seed), int(ranks))
        for total, unique, seed, ranks in sweep[["total_words", "unique_words", "seed", "ranks"]].itertuples(
            index=False
        )
    ]

    grouped = sweep.groupby(SWEEP_KEYS, dropna=False)
    sweep["min_runtime"] = sweep["runtime_ms_median"] == grouped["runtime_ms_median"].transform("min")
    sweep["min_energy"] = sweep["energy_j_median"] == grouped["energy_j_median"].transform("min")
    return sweep[SWEEP_COLUMNS]


@lru_cache(maxsize=256)
def _combinability(total_words: int, unique_words: int, seed: int, ranks: int) -> float:
    spec = DatasetSpec(
        total_words=total_words,
        unique_words=unique_words,
        seed=seed,
        word_len=min_word_len(unique_words),
    )
    return mean_combinability(spec, ranks)


def summarize(csv_path: Union[str, Path]) -> pd.DataFrame:
    """
    Summarize a results CSV.

    Raises:
        UsageError: If the file has no result rows
    """
    rows = read_results(csv_path)
    if rows.empty:
        raise UsageError(f"No result rows in {csv_path}")
    if GBK not in set(rows["app"]):
        logger.warning("No group_by_key rows; every comparison will be a gap", path=str(csv_path))
    return summarize_frame(rows)


def format_summary(
    summary: pd.DataFrame,
    stats: Optional[pd.DataFrame] = None,
    sweep: Optional[pd.DataFrame] = None,
) -> str:
    """Render the summary, and optionally per-cell statistics and the sweep table, as text."""
    parts: List[str] = [
        summary.to_string(index=False, na_rep="n/a", float_format=lambda v: f"{v:.2f}")
    ]
    if stats is not None and not stats.empty:
        parts.append("")
        parts.append(stats.to_string(index=False, na_rep="n/a", float_format=lambda v: f"{v:.3f}"))
    if sweep is not None and not sweep.empty:
        marked = sweep.assign(
            min_runtime=sweep["min_runtime"].map({True: "*", False: ""}),
            min_energy=sweep["min_energy"].map({True: "*", False: ""}),
        )
        parts.append("")
        parts.append("Unique-words sweep (* = lowest in group):")
        parts.append(marked.to_string(index=False, na_rep="n/a", float_format=lambda v: f"{v:.6g}"))
    return "\n".join(parts)
