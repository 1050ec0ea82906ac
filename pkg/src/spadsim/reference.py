"""Measured and simulated serial autocorrelation of the beam-splitter
generator at 14 detection rates, 1 kHz to 10 MHz, shipped as ``data/reference.csv``."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

SIM_ERROR = 1.1e-4
COLUMNS = ("meas", "sim1", "sim2", "sim3")
GRID_HZ = (1e3, 3e3, 1e4, 2e4, 5e4, 1e5, 2e5, 5e5, 1e6, 2e6, 3e6, 5e6, 7.5e6, 1e7)


@dataclass(frozen=True, eq=False)
class ReferenceTable:
    frequency_hz: np.ndarray
    a_meas: np.ndarray
    meas_err: np.ndarray
    a_sim1: np.ndarray
    a_sim2: np.ndarray
    a_sim3: np.ndarray
    sim_error: float = SIM_ERROR

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise ValueError(f"unknown reference column {name!r}; choose from {COLUMNS}")
        return getattr(self, f"a_{name}")

    def errors(self, name: str) -> np.ndarray:
        if name == "meas":
            return self.meas_err
        self.column(name)
        return np.full(self.frequency_hz.size, self.sim_error)

    def __len__(self):
        return self.frequency_hz.size


def table_text() -> str:
    return resources.files(__package__).joinpath("data/reference.csv").read_text()


def load_reference() -> ReferenceTable:
    rows = list(csv.DictReader(table_text().splitlines()))
    cols = {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
    return ReferenceTable(cols["frequency_hz"], cols["a_meas"], cols["meas_err"],
                          cols["a_sim1"], cols["a_sim2"], cols["a_sim3"])
