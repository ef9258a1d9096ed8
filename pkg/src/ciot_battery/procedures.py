"""Procedure energy from scripted message exchanges."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import EmptyScript, NegativeSize, ScriptError, TechnologyMismatch
from .model import DeviceProfile, GapModel, RadioConfig, Technology, TimerConfig, data_dir
from .states import (
    StateEnergyReport,
    ack_energy,
    default_gaps,
    part,
    rap_energy,
    rx_energy,
    tx_energy,
)

DELAY = "delay"
PROCEDURES = ("attach", "service_request", "release", "resume", "tau")
SCRIPT_DIRS = {Technology.NBIOT: "nbiot", Technology.LTEM: "ltem"}


class StepKind(str, enum.Enum):
    UL_DATA = "UL_DATA"
    DL_DATA = "DL_DATA"
    RAP = "RAP"
    DCI_RX = "DCI_RX"
    ACK_UL = "ACK_UL"


UPLINK = (StepKind.UL_DATA, StepKind.ACK_UL)


@dataclass(frozen=True)
class MessageStep:
    name: str
    kind: StepKind
    size_bits: int = 0
    # key into the device delay table; an explicit value wins
    delay_key: str | None = None
    delay_after_ms: float | None = None
    carries_payload: bool = False
    optional: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StepKind(self.kind))
        if self.size_bits < 0:
            raise NegativeSize(f"step {self.name!r}: size_bits must be >= 0")
        if self.delay_after_ms is not None and self.delay_after_ms < 0:
            raise NegativeSize(f"step {self.name!r}: delay_after_ms must be >= 0")

    def delay(self, profile: DeviceProfile) -> float:
        if self.delay_after_ms is not None:
            return self.delay_after_ms
        return profile.delay_ms(self.delay_key)


@dataclass(frozen=True)
class ProcedureScript:
    name: str
    technology: Technology
    steps: tuple[MessageStep, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "technology", Technology(self.technology))
        if not self.steps:
            raise EmptyScript(f"script {self.name!r} has no steps")
        if any(s.kind is StepKind.RAP for s in self.steps[1:]):
            raise ScriptError(f"script {self.name!r}: a random-access preamble must come first")

    @property
    def ul_bits(self) -> int:
        return sum(s.size_bits for s in self.steps if s.kind in UPLINK)

    @property
    def dl_bits(self) -> int:
        return sum(s.size_bits for s in self.steps if s.kind is StepKind.DL_DATA)

    def delays(self, profile: DeviceProfile) -> list[float]:
        """Delay after each step; nothing is charged after the final step."""
        out = [s.delay(profile) for s in self.steps]
        out[-1] = 0.0
        return out

    def with_payload(self, payload_bits: int) -> "ProcedureScript":
        """Attach user data to the payload-carrying step.

        Optional steps exist only to carry data and are dropped when there
        is nothing to send.
        """
        if payload_bits < 0:
            raise NegativeSize("payload_bits must be >= 0")
        steps = []
        for s in self.steps:
            if s.optional and payload_bits == 0:
                continue
            if s.carries_payload:
                s = replace(s, size_bits=s.size_bits + payload_bits)
            steps.append(s)
        return replace(self, steps=tuple(steps))

    def without_delays(self) -> "ProcedureScript":
        return replace(self, steps=tuple(replace(s, delay_after_ms=0) for s in self.steps))

    def to_dict(self) -> dict[str, Any]:
        steps = []
        for s in self.steps:
            d: dict[str, Any] = {"name": s.name, "kind": s.kind.value, "size_bits": s.size_bits}
            if s.delay_key is not None:
                d["delay_key"] = s.delay_key
            if s.delay_after_ms is not None:
                d["delay_after_ms"] = s.delay_after_ms
            if s.carries_payload:
                d["carries_payload"] = True
            if s.optional:
                d["optional"] = True
            steps.append(d)
        return {"name": self.name, "technology": self.technology.value, "steps": steps}


def concat_scripts(first: ProcedureScript, second: ProcedureScript,
                   link_delay_key: str | None = None, name: str | None = None) -> ProcedureScript:
    """Run ``second`` right after ``first``, joined by one delay."""
    if first.technology is not second.technology:
        raise TechnologyMismatch("cannot join scripts of different technologies")
    last = replace(first.steps[-1], delay_key=link_delay_key, delay_after_ms=None)
    return ProcedureScript(
        name or f"{first.name}+{second.name}",
        first.technology,
        first.steps[:-1] + (last,) + second.steps,
    )


_STEP_KEYS = {"name", "kind", "size_bits", "delay_key", "delay_after_ms", "carries_payload", "optional"}


def load_procedure_script(document: str | bytes | Mapping[str, Any] | Sequence[Any],
                          technology: Technology | str | None = None,
                          name: str = "script") -> ProcedureScript:
    """Parse a script document: ``{"name", "technology", "steps": [...]}`` or a bare step array."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    doc = json.loads(document) if isinstance(document, str) else document
    if isinstance(doc, Mapping):
        steps_doc = doc.get("steps")
        name = doc.get("name", name)
        technology = technology or doc.get("technology")
    else:
        steps_doc = doc
    if technology is None:
        raise ScriptError("script technology is not given")
    if not isinstance(steps_doc, list):
        raise ScriptError("script steps must be a list")
    if not steps_doc:
        raise EmptyScript(f"script {name!r} has no steps")
    steps = []
    for raw in steps_doc:
        unknown = set(raw) - _STEP_KEYS
        if unknown:
            raise ScriptError(f"unknown step field(s): {', '.join(sorted(unknown))}")
        try:
            steps.append(MessageStep(**raw))
        except TypeError as exc:
            raise ScriptError(str(exc)) from None
    return ProcedureScript(name, Technology(technology), tuple(steps))


@lru_cache(maxsize=None)
def _bundled_script(technology: Technology, name: str, root: str) -> ProcedureScript:
    path = Path(root) / "scripts" / SCRIPT_DIRS[technology] / f"{name}.json"
    return load_procedure_script(path.read_text(encoding="utf-8"))


def bundled_script(technology: Technology | str, name: str) -> ProcedureScript:
    if name not in PROCEDURES:
        raise ScriptError(f"unknown procedure {name!r}")
    return _bundled_script(Technology(technology), name, str(data_dir()))


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------


def dci_energy(profile: DeviceProfile, radio: RadioConfig, timers: TimerConfig | None = None,
               dci_sf: int = 1) -> StateEnergyReport:
    """Control-channel reception of ``dci_sf`` subframes per repetition."""
    t = Fraction(dci_sf * radio.t_sf_ms * radio.rep_ctrl)
    return StateEnergyReport.of(part("DCI", "active", profile.p_rx_mw, t))


def step_energy(step: MessageStep, profile: DeviceProfile, radio: RadioConfig,
                gaps: GapModel, dci_sf: int = 1) -> StateEnergyReport:
    # user data keeps the data-channel settings; signalling gets its own
    cfg = radio if step.carries_payload else radio.signalling()
    if step.kind is StepKind.RAP:
        return rap_energy(profile, radio)
    if step.kind is StepKind.DCI_RX:
        return dci_energy(profile, radio, dci_sf=dci_sf)
    if step.kind is StepKind.ACK_UL:
        return ack_energy(profile, radio, gaps)
    if step.kind is StepKind.UL_DATA:
        return tx_energy(profile, cfg, step.size_bits, gaps)
    return rx_energy(profile, cfg, step.size_bits, gaps)


def procedure_energy(script: ProcedureScript, profile: DeviceProfile, radio: RadioConfig,
                     timers: TimerConfig | None = None, gaps: GapModel | None = None,
                     dci_sf: int = 1) -> StateEnergyReport:
    """Messages plus DCIs plus inter-message delays at the device's delay power."""
    if script.technology is not profile.technology or script.technology is not radio.technology:
        raise TechnologyMismatch(
            f"script {script.name} is {script.technology.value}; profile {profile.technology.value}, "
            f"radio {radio.technology.value}"
        )
    gaps = default_gaps(radio, gaps)
    reports = []
    for step, delay in zip(script.steps, script.delays(profile)):
        reports.append(step_energy(step, profile, radio, gaps, dci_sf))
        reports.append(StateEnergyReport.of(part("DELAY", DELAY, profile.delay_power_mw, delay)))
    return StateEnergyReport.concat(reports)


def service_request_script(technology: Technology, payload_bits: int) -> ProcedureScript:
    return bundled_script(technology, "service_request").with_payload(payload_bits)


def attach_with_data_script(technology: Technology, payload_bits: int) -> ProcedureScript:
    """Attach followed by an uplink data transmission."""
    data = ProcedureScript(
        "data",
        technology,
        (
            MessageStep("DCI", StepKind.DCI_RX, 0, "DCI->Data(TX)", optional=True),
            MessageStep("UL data", StepKind.UL_DATA, 0, carries_payload=True, optional=True),
        ),
    )
    attach = bundled_script(technology, "attach")
    if payload_bits == 0:
        return attach
    return concat_scripts(attach, data.with_payload(payload_bits), "Data(RX)->DCI", name="attach+data")


def service_request_energy(profile: DeviceProfile, radio: RadioConfig, timers: TimerConfig | None,
                           payload_bits: int, gaps: GapModel | None = None,
                           dci_sf: int = 1) -> StateEnergyReport:
    script = service_request_script(profile.technology, payload_bits)
    return procedure_energy(script, profile, radio, timers, gaps, dci_sf)
