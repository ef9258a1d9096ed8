"""Uplink link budget and coverage scenarios."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from .errors import InvalidRepetitions, Unreachable
from .model import MAX_REPETITIONS, RadioConfig, Technology, data_dir

BANDWIDTH_HZ = {Technology.NBIOT: 15_000.0, Technology.LTEM: 180_000.0}


@dataclass(frozen=True)
class LinkBudget:
    coupling_loss_db: float
    bandwidth_hz: float
    tx_power_dbm: float = 23.0
    noise_figure_db: float = 5.0
    thermal_noise_dbm_hz: float = -174.0

    def __post_init__(self) -> None:
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")
        if not self.coupling_loss_db > 0:
            raise ValueError("coupling_loss_db must be > 0")

    @classmethod
    def for_technology(cls, technology: Technology, coupling_loss_db: float, **kw) -> "LinkBudget":
        return cls(coupling_loss_db, BANDWIDTH_HZ[Technology(technology)], **kw)

    @property
    def noise_floor_dbm(self) -> float:
        return self.thermal_noise_dbm_hz + 10 * math.log10(self.bandwidth_hz) + self.noise_figure_db


def rx_snr(budget: LinkBudget) -> float:
    """SNR (dB) at the receiver before any repetition gain."""
    return budget.tx_power_dbm - budget.coupling_loss_db - budget.noise_floor_dbm


def combined_snr(snr_db: float, repetitions: int) -> float:
    """Chase combining of ``repetitions`` blind copies: linear gain N."""
    if repetitions < 1:
        raise InvalidRepetitions(f"repetitions must be >= 1, got {repetitions}")
    return snr_db + 10 * math.log10(repetitions)


class ScenarioName(str, enum.Enum):
    GOOD = "good"
    BAD = "bad"
    EXTREME = "extreme"


@dataclass(frozen=True)
class CoverageScenario:
    name: ScenarioName
    mcl_db: float
    # technology -> (mcs, repetitions); a missing entry means unreachable
    assignments: Mapping[Technology, tuple[int, int]]

    def __post_init__(self) -> None:
        for mcs, reps in self.assignments.values():
            if not 1 <= reps <= MAX_REPETITIONS:
                raise InvalidRepetitions(f"{self.name.value}: repetitions {reps} outside [1, {MAX_REPETITIONS}]")

    def budget(self, technology: Technology) -> LinkBudget:
        return LinkBudget.for_technology(technology, self.mcl_db)


def load_scenarios(path: Path | None = None) -> dict[ScenarioName, CoverageScenario]:
    path = path or data_dir() / "scenarios.json"
    return _load_scenarios(str(path))


@lru_cache(maxsize=None)
def _load_scenarios(path: str) -> dict[ScenarioName, CoverageScenario]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))["scenarios"]
    out = {}
    for name, row in doc.items():
        assignments = {}
        for tech in Technology:
            entry = row.get(tech.value)
            if entry is not None:
                assignments[tech] = (int(entry["mcs"]), int(entry["repetitions"]))
        key = ScenarioName(name)
        out[key] = CoverageScenario(key, float(row["mcl_db"]), assignments)
    return out


def get_scenario(name: str | ScenarioName) -> CoverageScenario:
    try:
        key = ScenarioName(str(getattr(name, "value", name)).lower())
    except ValueError:
        raise ValueError(f"unknown scenario {name!r}; expected good, bad or extreme") from None
    return load_scenarios()[key]


def scenario_radio_config(scenario: CoverageScenario | str, technology: Technology, **overrides) -> RadioConfig:
    """Radio configuration for a named coverage scenario."""
    if not isinstance(scenario, CoverageScenario):
        scenario = get_scenario(scenario)
    technology = Technology(technology)
    if technology not in scenario.assignments:
        raise Unreachable(
            f"{technology.value} cannot reach the area with {scenario.mcl_db:g} dB coupling loss "
            f"(scenario {scenario.name.value})"
        )
    mcs, reps = scenario.assignments[technology]
    radio = RadioConfig.default(technology, mcs, reps)
    if overrides:
        radio = replace(radio, **overrides)
    return radio
