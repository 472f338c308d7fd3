"""Synthetic test feeders shipped with the package.

* ``feeder_2bus``: one overhead service line, one three-phase PV.
* ``feeder_4bus``: cable trunk and two overhead branches, one PV whose
  profile is read from ``feeder_4bus_pv.csv``; the upper voltage limit binds.
* ``feeder_15bus``: 10 kV source, 0.4 MVA transformer, 13 LV lines, 24
  hourly periods, six PV units; the voltage-unbalance limit (1.5 %) binds
  when the units are single-phase.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

SUITE = ("feeder_2bus", "feeder_4bus", "feeder_15bus")


def suite_path(name: str) -> Path:
    if name not in SUITE:
        raise KeyError(f"unknown suite feeder {name!r}; choose from {SUITE}")
    return Path(str(resources.files(__name__).joinpath(f"{name}.json")))


def load_suite(name: str):
    from ..io import load_network

    return load_network(suite_path(name))
