"""Trajectory capture and CSV export."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class RecordedTrajectory:
    columns: list[str]  # first column is "t"
    data: np.ndarray  # (n_samples, n_columns)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def to_csv(self, path: str | Path) -> None:
        """Full-double-precision CSV; header row mandatory."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "RecordedTrajectory":
        with open(path, encoding="utf-8") as fh:
            columns = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(columns, data)


class Recorder:
    """Captures configurable channels at every offered sample.

    Channel groups: ``states`` (every allocated state), ``gen`` (P_e and
    E_f per machine) and ``bus`` (voltage magnitude/angle per retained
    bus). ``decimation`` keeps every n-th sample.
    """

    def __init__(self, sysm, channels: tuple[str, ...] = ("states", "gen", "bus"),
                 decimation: int = 1):
        self._sysm = sysm
        self._channels = channels
        self._decimation = max(1, int(decimation))
        self._count = 0
        self._rows: list[np.ndarray] = []
        self.columns = ["t"]
        if "states" in channels:
            self.columns.extend(sysm.allocation.state_names)
        if "gen" in channels:
            for name in sysm.gen_names:
                self.columns.extend((f"{name}.p_e", f"{name}.e_f"))
        if "bus" in channels:
            for bus in sysm.y_red.bus_names:
                self.columns.extend((f"{bus}.v_mag", f"{bus}.v_ang"))

    def capture(self, t: float, x: np.ndarray) -> None:
        self._count += 1
        if (self._count - 1) % self._decimation:
            return
        parts = [np.array([t])]
        if "states" in self._channels:
            parts.append(np.asarray(x, dtype=float))
        if "gen" in self._channels or "bus" in self._channels:
            sig = self._sysm.observe(x)
            if "gen" in self._channels:
                parts.append(np.column_stack([sig["p_e"], sig["e_f"]]).ravel())
            if "bus" in self._channels:
                v = sig["v_retained"]
                parts.append(np.column_stack([np.abs(v), np.angle(v)]).ravel())
        self._rows.append(np.concatenate(parts))

    def finish(self) -> RecordedTrajectory:
        data = np.array(self._rows) if self._rows else np.zeros((0, len(self.columns)))
        return RecordedTrajectory(list(self.columns), data)
