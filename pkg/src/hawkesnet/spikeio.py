"""Spike-train file formats.

Two formats are supported:

* **dense CSV** -- a header row of unit ids followed by one row per time
  step, each cell 0 or 1.  This is the format every other command consumes.
* **event CSV** -- rows of ``unit_id,event_time`` (an optional header line
  is skipped), converted to dense form by binning: step t covers the
  half-open window [(t-1) * bin_width, t * bin_width), and a unit's cell is
  1 when *at least one* of its events lands in the window.  Extra events in
  an occupied cell are collapsed and counted as collisions.

Unit ids are 1-based in files.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .model import SpikeData

__all__ = [
    "write_dense_csv",
    "read_dense_csv",
    "write_truth_csv",
    "read_truth_csv",
    "read_event_csv",
    "bin_events",
    "BinReport",
]


def write_dense_csv(path: str, spikes: SpikeData) -> None:
    """Write a dense 0/1 matrix with a 1..p unit-id header."""
    ev = spikes.events
    lines = [",".join(str(j + 1) for j in range(ev.shape[1]))]
    for t in range(ev.shape[0]):
        lines.append(",".join(str(int(v)) for v in ev[t]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dense_csv(path: str) -> SpikeData:
    """Parse a dense spike CSV; malformed content raises ValueError."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: dense spike file needs a header and at least one row")
    header = lines[0].split(",")
    p = len(header)
    if len(set(header)) != p or any(not h.strip() for h in header):
        raise ValueError(f"{path}: header must list distinct, non-empty unit ids")
    rows = np.empty((len(lines) - 1, p), dtype=np.int8)
    for t, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        if len(cells) != p:
            raise ValueError(
                f"{path}: row {t + 2} has {len(cells)} cells, expected {p}"
            )
        for j, cell in enumerate(cells):
            if cell == "0":
                rows[t, j] = 0
            elif cell == "1":
                rows[t, j] = 1
            else:
                raise ValueError(
                    f"{path}: row {t + 2}, column {j + 1}: expected 0 or 1, got {cell!r}"
                )
    return SpikeData(events=rows, origin_label=f"file:{os.path.basename(path)}")


def write_truth_csv(path: str, theta: np.ndarray) -> None:
    """Write an interaction matrix with the same 1..p header style."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValueError(f"theta must be square, got shape {theta.shape}")
    lines = [",".join(str(j + 1) for j in range(theta.shape[1]))]
    for row in theta:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_truth_csv(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: truth file needs a header and at least one row")
    p = len(lines[0].split(","))
    if len(lines) - 1 != p:
        raise ValueError(f"{path}: expected {p} matrix rows, found {len(lines) - 1}")
    try:
        theta = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell in truth matrix: {exc}") from None
    if theta.shape != (p, p):
        raise ValueError(f"{path}: ragged truth matrix, got shape {theta.shape}")
    return theta


def read_event_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse ``unit_id,event_time`` rows into (units, times) arrays.

    A first line that does not parse as a data row is treated as a header.
    Unit ids must be integers >= 1, times finite and >= 0; anything else is
    a malformed-input error.
    """
    units: list[int] = []
    times: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != 2:
                raise ValueError(
                    f"{path}:{lineno}: expected 'unit_id,event_time', got {line!r}"
                )
            try:
                unit = int(cells[0])
                t = float(cells[1])
            except ValueError:
                if lineno == 1:  # header line
                    continue
                raise ValueError(
                    f"{path}:{lineno}: non-numeric event row {line!r}"
                ) from None
            if unit < 1:
                raise ValueError(f"{path}:{lineno}: unit ids are 1-based, got {unit}")
            if not math.isfinite(t) or t < 0:
                raise ValueError(f"{path}:{lineno}: event time must be finite and >= 0, got {t}")
            units.append(unit)
            times.append(t)
    return np.asarray(units, dtype=np.int64), np.asarray(times, dtype=np.float64)


@dataclass(frozen=True)
class BinReport:
    """What binning did: total events read, cells set, collapsed duplicates."""

    n_events: int
    n_collisions: int

    @property
    def collision_rate(self) -> float:
        return self.n_collisions / self.n_events if self.n_events else 0.0


def bin_events(
    units: np.ndarray,
    times: np.ndarray,
    bin_width: float,
    n_steps: int | None = None,
    n_units: int | None = None,
) -> tuple[SpikeData, BinReport]:
    """Bin (unit, time) events onto the unit grid.

    An event at time s lands in step floor(s / bin_width) + 1.  When
    ``n_steps``/``n_units`` are omitted they are inferred from the data,
    which requires at least one event; events beyond an explicit window are
    a hard error rather than silently dropped.
    """
    if bin_width <= 0 or not math.isfinite(bin_width):
        raise ValueError(f"bin_width must be finite and > 0, got {bin_width!r}")
    units = np.asarray(units, dtype=np.int64)
    times = np.asarray(times, dtype=np.float64)
    if units.shape != times.shape or units.ndim != 1:
        raise ValueError("units and times must be 1-dimensional and equally long")
    if units.size == 0 and (n_steps is None or n_units is None):
        raise ValueError(
            "cannot infer the grid from an empty event file; pass explicit steps and units"
        )
    idx = np.floor(times / bin_width).astype(np.int64)
    if n_steps is None:
        n_steps = int(idx.max()) + 1
    if n_units is None:
        n_units = int(units.max())
    if n_steps < 1 or n_units < 1:
        raise ValueError(f"grid must be non-empty, got steps={n_steps}, units={n_units}")
    if units.size:
        if int(units.max()) > n_units:
            raise ValueError(
                f"event for unit {int(units.max())} exceeds the declared {n_units} units"
            )
        if int(idx.max()) >= n_steps:
            bad = times[int(np.argmax(idx))]
            raise ValueError(
                f"event at time {bad} falls beyond the {n_steps}-step window "
                f"(bin_width={bin_width})"
            )
    events = np.zeros((n_steps, n_units), dtype=np.int8)
    collisions = 0
    for u, t in zip(units, idx):
        if events[t, u - 1]:
            collisions += 1
        else:
            events[t, u - 1] = 1
    return (
        SpikeData(events=events, origin_label="ingested"),
        BinReport(n_events=int(units.size), n_collisions=collisions),
    )
