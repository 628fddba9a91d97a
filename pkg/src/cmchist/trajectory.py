"""Trajectory container and I/O.

A trajectory is the observed sequence ``(X_0, a_0), ..., (X_n, a_n)``:
``n + 1`` records yielding ``n`` transitions.  Estimation needs at least
3 transitions, hence at least 4 records.

Two wire formats are supported and round-trip bit-for-bit to within
1e-12: JSON lines (one ``{"x": [...], "a": [...]}`` object per line) and
CSV with a ``x0,...,a0,...`` header.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DataError,
    DimensionMismatchError,
    NonFiniteCoordinateError,
    TooFewRecordsError,
    ZeroWidthAxisError,
)


@dataclass
class Trajectory:
    states: np.ndarray  # (n+1, d1)
    controls: np.ndarray  # (n+1, d2)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        if self.states.ndim != 2 or self.controls.ndim != 2:
            raise DimensionMismatchError("states and controls must be 2-d arrays")
        if len(self.states) != len(self.controls):
            raise DimensionMismatchError(
                f"{len(self.states)} states vs {len(self.controls)} controls"
            )
        if not np.isfinite(self.states).all() or not np.isfinite(self.controls).all():
            raise NonFiniteCoordinateError("trajectory contains NaN or infinity")
        if len(self.states) < 4:
            raise TooFewRecordsError(
                f"need at least 4 records (3 transitions), got {len(self.states)}"
            )

    @property
    def d1(self) -> int:
        return self.states.shape[1]

    @property
    def d2(self) -> int:
        return self.controls.shape[1]

    @property
    def n_transitions(self) -> int:
        return len(self.states) - 1

    def __len__(self) -> int:
        return len(self.states)

    def triples(self) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """The n transition triples (X_i, a_i, X_{i+1})."""
        for i in range(self.n_transitions):
            yield self.states[i], self.controls[i], self.states[i + 1]

    def triple_matrix(self) -> np.ndarray:
        """(n, 2*d1+d2) array of transition triples."""
        return np.hstack(
            [self.states[:-1], self.controls[:-1], self.states[1:]]
        )

    def pair_matrix(self) -> np.ndarray:
        """(n, d1+d2) array of (X_i, a_i) footprints, i < n."""
        return np.hstack([self.states[:-1], self.controls[:-1]])

    def in_unit_cube(self) -> bool:
        return bool(
            (self.states >= 0).all()
            and (self.states <= 1).all()
            and (self.controls >= 0).all()
            and (self.controls <= 1).all()
        )

    def rescale_to_unit(
        self,
        state_bounds: Sequence[tuple[float, float]] | None = None,
        control_bounds: Sequence[tuple[float, float]] | None = None,
        pad: float = 0.01,
    ) -> tuple["Trajectory", dict]:
        """Affinely map each axis into [0, 1].

        With explicit bounds, values are clipped-free mapped (callers own
        coverage).  Without bounds, per-axis min/max are inflated by
        ``pad`` of the range on each side so extremes land strictly
        inside the cube.  A constant axis has no usable range.

        Returns the rescaled trajectory together with the per-axis
        (lo, hi) ranges actually used, keyed ``state`` / ``control``,
        so positions can be mapped back to original coordinates.
        """
        states, smap = _rescale_axes(self.states, state_bounds, pad, "state")
        controls, cmap = _rescale_axes(self.controls, control_bounds, pad, "control")
        mapping = {"state": smap, "control": cmap}
        return Trajectory(states, controls, dict(self.meta)), mapping


def _rescale_axes(data, bounds, pad, label):
    out = np.empty_like(data)
    used = []
    for axis in range(data.shape[1]):
        col = data[:, axis]
        if bounds is None:
            lo, hi = col.min(), col.max()
            span = hi - lo
            lo, hi = lo - pad * span, hi + pad * span
        else:
            lo, hi = bounds[axis]
        if hi <= lo:
            raise ZeroWidthAxisError(
                f"zero-width axis: {label} axis {axis} has no range"
            )
        out[:, axis] = (col - lo) / (hi - lo)
        used.append((float(lo), float(hi)))
    return out, used


def save_jsonl(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w") as fh:
        for x, a in zip(traj.states, traj.controls):
            fh.write(json.dumps({"x": x.tolist(), "a": a.tolist()}) + "\n")


def load_jsonl(path: str | Path) -> Trajectory:
    states, controls = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                x, a = rec["x"], rec["a"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"line {lineno}: malformed record ({exc})") from exc
            states.append(x)
            controls.append(a)
    return _assemble(states, controls)


def save_csv(traj: Trajectory, path: str | Path) -> None:
    header = [f"x{j}" for j in range(traj.d1)] + [f"a{j}" for j in range(traj.d2)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x, a in zip(traj.states, traj.controls):
            # repr of a *python* float round-trips exactly; numpy scalar
            # reprs carry the dtype name and would not parse back
            writer.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in a])


def load_csv(path: str | Path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TooFewRecordsError("empty CSV file") from None
        d1 = sum(1 for h in header if h.startswith("x"))
        d2 = sum(1 for h in header if h.startswith("a"))
        if d1 + d2 != len(header) or d1 == 0 or d2 == 0:
            raise DataError(f"unrecognized CSV header: {header!r}")
        states, controls = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != d1 + d2:
                raise DimensionMismatchError(
                    f"row has {len(row)} fields, header promises {d1 + d2}"
                )
            values = [_parse_float(v) for v in row]
            states.append(values[:d1])
            controls.append(values[d1:])
    return _assemble(states, controls)


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"unparseable number: {text!r}") from None


def _assemble(states: list, controls: list) -> Trajectory:
    if len(states) < 4:
        raise TooFewRecordsError(
            f"need at least 4 records (3 transitions), got {len(states)}"
        )
    d1 = len(states[0]) if hasattr(states[0], "__len__") else None
    d2 = len(controls[0]) if hasattr(controls[0], "__len__") else None
    for i, (x, a) in enumerate(zip(states, controls)):
        if len(x) != d1 or len(a) != d2:
            raise DimensionMismatchError(
                f"record {i} has dims ({len(x)}, {len(a)}), expected ({d1}, {d2})"
            )
    return Trajectory(np.array(states, dtype=float), np.array(controls, dtype=float))


def load(path: str | Path) -> Trajectory:
    """Dispatch on file extension (.jsonl/.json vs .csv)."""
    suffix = Path(path).suffix.lower()
    if suffix in {".jsonl", ".json"}:
        return load_jsonl(path)
    if suffix == ".csv":
        return load_csv(path)
    raise DataError(f"unknown trajectory format: {suffix!r}")


def save(traj: Trajectory, path: str | Path) -> None:
    suffix = Path(path).suffix.lower()
    if suffix in {".jsonl", ".json"}:
        save_jsonl(traj, path)
    elif suffix == ".csv":
        save_csv(traj, path)
    else:
        raise DataError(f"unknown trajectory format: {suffix!r}")
