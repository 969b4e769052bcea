"""CSV report writers and the one reader the CLI needs.

All floats are serialized with %.17g and a '.' decimal point, which
round-trips IEEE doubles exactly, so identical runs produce byte-identical
report bodies regardless of worker count or platform.  Timing never goes
into report CSVs; it lives in the run-summary sidecar, which is the one file
excluded from reproducibility comparisons.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .grid import GridFunction, GridSpec

VERIFICATION_HEADER = ("check_name", "instance_id", "lhs", "rhs", "slack", "outcome")
TRAJECTORY_HEADER = ("time", "node_index", "r", "value")
VALUE_HEADER = (
    "instance_id",
    "value",
    "gap_lattice",
    "gap_tail",
    "lattice_na",
    "lattice_nalpha",
    "steps",
    "horizon",
)
GAP_TABLE_HEADER = ("n", "gap")
OPERATOR_HEADER = ("row", "col", "value")
STATE_HEADER = ("r", "value")


def fmt(value: object) -> str:
    """Canonical cell text: %.17g floats, plain ints, strings as-is."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(cell) for cell in row])


def write_trajectory(path: str, times: np.ndarray, nodes: np.ndarray, states: np.ndarray) -> None:
    """One row per (time, node); states indexed [time, node]."""

    def rows() -> Iterable[Sequence[object]]:
        for t_idx in range(states.shape[0]):
            t = float(times[t_idx])
            for i in range(states.shape[1]):
                yield (t, i, float(nodes[i]), float(states[t_idx, i]))

    write_rows(path, TRAJECTORY_HEADER, rows())


def write_verification(path: str, rows: Iterable[Sequence[object]]) -> None:
    write_rows(path, VERIFICATION_HEADER, rows)


def write_operator_dump(path: str, matrix: np.ndarray) -> None:
    def rows() -> Iterable[Sequence[object]]:
        for i in range(matrix.shape[0]):
            for j in range(matrix.shape[1]):
                yield (i, j, float(matrix[i, j]))

    write_rows(path, OPERATOR_HEADER, rows())


def write_state(path: str, x: GridFunction) -> None:
    write_rows(
        path,
        STATE_HEADER,
        ((float(r), float(v)) for r, v in zip(x.spec.nodes, x.values)),
    )


def read_state(path: str, grid: GridSpec) -> GridFunction:
    """Parse an initial-state CSV; any shape or header defect is a config error."""
    try:
        with open(path, encoding="ascii", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != list(STATE_HEADER):
                raise ConfigError(
                    f"initial-state file {path} must start with header r,value"
                )
            rows = [row for row in reader if row]
    except OSError as exc:
        raise ConfigError(f"cannot read initial-state file {path}: {exc}") from exc
    if len(rows) != grid.node_count:
        raise ConfigError(
            f"initial-state file {path} has {len(rows)} rows, "
            f"grid expects {grid.node_count}"
        )
    values = np.empty(grid.node_count)
    for i, row in enumerate(rows):
        if len(row) != 2:
            raise ConfigError(f"initial-state file {path} row {i + 2}: need 2 columns")
        try:
            r, v = float(row[0]), float(row[1])
        except ValueError as exc:
            raise ConfigError(
                f"initial-state file {path} row {i + 2}: non-numeric cell"
            ) from exc
        if abs(r - grid.nodes[i]) > 1e-9 * max(1.0, grid.sbar):
            raise ConfigError(
                f"initial-state file {path} row {i + 2}: r = {r} does not match "
                f"grid node {grid.nodes[i]!r}"
            )
        values[i] = v
    return GridFunction(grid, values)


@dataclass(frozen=True)
class RunSummary:
    """Sidecar record: what ran, how it went, and under which config."""

    outcomes: tuple[tuple[str, str], ...]
    wall_seconds: float
    config_digest: str

    def exit_code(self) -> int:
        kinds = {outcome for _, outcome in self.outcomes}
        if "FAIL" in kinds:
            return 1
        if "INCONCLUSIVE" in kinds:
            return 3
        return 0


def write_run_summary(path: str, summary: RunSummary) -> None:
    def rows() -> Iterable[Sequence[object]]:
        yield ("config_digest", summary.config_digest)
        yield ("wall_seconds", summary.wall_seconds)
        for name, outcome in summary.outcomes:
            yield (f"outcome:{name}", outcome)

    write_rows(path, ("field", "value"), rows())
