"""Result rows and trace files in CSV form."""

import csv
from pathlib import Path
from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union

import pandas as pd
from pydantic import BaseModel, Field

from ..power.types import PowerDomain, PowerSample, PowerTrace

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# schema={SCHEMA_VERSION}"

TRACE_FIELDS = ["t_ms", "domain", "watts"]


class ResultRow(BaseModel):
    """One measured run of one matrix cell."""

    app: str
    backend: str
    total_words: int = Field(ge=1)
    unique_words: int = Field(ge=1)
    seed: int = Field(ge=0)
    ranks: int = Field(ge=1)
    cap_w: str
    rep: int = Field(ge=1)
    runtime_ms: float
    map_ms: float
    shuffle_ms: float
    reduce_ms: float
    proc_energy_j: float
    dram_energy_j: float
    dram_fraction: float = Field(ge=0, le=1)
    shuffle_kvs: int = Field(ge=0)
    shuffle_bytes: int = Field(ge=0)
    flush_count: int = Field(ge=0)
    avg_fill_ratio: float = Field(ge=0, le=1)


RESULT_FIELDS: List[str] = list(ResultRow.model_fields)

# Columns that depend only on the workload, never on wall-clock time.
COUNTED_FIELDS = ["shuffle_kvs", "shuffle_bytes", "flush_count", "avg_fill_ratio"]


class ResultWriter:
    """Appends result rows to a CSV file, flushing after every row."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._handle: Optional[TextIO] = None
        self._writer: Optional[csv.DictWriter] = None

    def __enter__(self) -> "ResultWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", newline="")
        self._handle.write(SCHEMA_LINE + "\n")
        self._writer = csv.DictWriter(self._handle, fieldnames=RESULT_FIELDS)
        self._writer.writeheader()
        return self

    def write(self, row: ResultRow) -> None:
        assert self._writer is not None and self._handle is not None
        self._writer.writerow(row.model_dump())
        self._handle.flush()

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def write_results(rows: Iterable[ResultRow], path: Union[str, Path]) -> Path:
    """Write rows to ``path`` in one go."""
    with ResultWriter(path) as writer:
        for row in rows:
            writer.write(row)
    return Path(path)


def read_results(path: Union[str, Path]) -> pd.DataFrame:
    """Load a results CSV; ``cap_w`` stays textual so ``none`` survives."""
    return pd.read_csv(
        path,
        comment="#",
        dtype={"cap_w": str, "app": str, "backend": str},
        keep_default_na=False,
        na_values=[""],
    )


def trace_filename(app: str, unique_words: int, cap_label: str, rep: int) -> str:
    return f"{app}_u{unique_words}_cap{cap_label}_rep{rep}.csv"


def write_trace(path: Union[str, Path], trace: PowerTrace, meta: Dict[str, object]) -> Path:
    """
    Write a trace with its metadata as ``# key=value`` comment lines.

    Metadata usually carries app, cap, rep, unique_words and first_rep.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        handle.write(SCHEMA_LINE + "\n")
        handle.write(f"# interval_ms={trace.interval_ms!r}\n")
        for key, value in meta.items():
            handle.write(f"# {key}={value}\n")
        writer = csv.writer(handle)
        writer.writerow(TRACE_FIELDS)
        for sample in trace.samples:
            writer.writerow([repr(float(sample.t_ms)), sample.domain.value, repr(float(sample.watts))])
    return path


def read_trace(path: Union[str, Path]) -> Tuple[Dict[str, str], PowerTrace]:
    """Load a trace file written by ``write_trace``."""
    meta: Dict[str, str] = {}
    with Path(path).open(newline="") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()

    body = pd.read_csv(
        path,
        comment="#",
        dtype={"t_ms": float, "domain": str, "watts": float},
        float_precision="round_trip",
    )
    trace = PowerTrace(interval_ms=float(meta.get("interval_ms", "100")))
    trace.samples.extend(
        PowerSample(t_ms=t_ms, domain=PowerDomain(domain), watts=watts)
        for t_ms, domain, watts in body[TRACE_FIELDS].itertuples(index=False)
    )
    return meta, trace
