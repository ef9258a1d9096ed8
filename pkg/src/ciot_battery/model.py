"""Domain types, canonical units and data ingestion.

Canonical internal units are milliseconds, milliwatts and microjoules
(1 mW x 1 ms = 1 uJ).  Device profiles keep the unit in every field name,
mirroring the JSON documents they are loaded from.
"""

from __future__ import annotations

import bisect
import csv
import enum
import hashlib
import io
import json
import os
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import (
    ChecksumMismatch,
    InvalidRepetitions,
    InvalidTimer,
    MissingField,
    MonitoringExceedsPeriod,
    OnDurExceedsCycle,
    OrderingViolation,
    OutOfDomain,
    ProfileError,
    PtwExceedsCycle,
    TechnologyMismatch,
    UnitViolation,
)

MS_PER_HOUR = 3_600_000
MJ_PER_WH = 3_600_000.0
HOURS_PER_YEAR = 8760.0
MAX_REPETITIONS = 32
REFERENCE_TX_DBM = 23.0
RU_DURATIONS_MS = (1, 2, 4, 8, 16, 32)


class Technology(str, enum.Enum):
    NBIOT = "NBIOT"
    LTEM = "LTEM"


class RapFormat(str, enum.Enum):
    NB_FMT0 = "NB_FMT0"
    NB_FMT1 = "NB_FMT1"
    LTEM_FMT1 = "LTEM_FMT1"


class DelayMode(str, enum.Enum):
    AS_RX = "AS_RX"
    AS_CDRX_SLEEP = "AS_CDRX_SLEEP"


class PsMode(str, enum.Enum):
    PSM_IDRX = "PSM_IDRX"
    PSM_EDRX = "PSM_EDRX"
    EDRX_ONLY = "EDRX_ONLY"
    IDRX_ONLY = "IDRX_ONLY"


def data_dir() -> Path:
    """Location of bundled data; ``CIOT_DATA_DIR`` overrides it."""
    env = os.environ.get("CIOT_DATA_DIR")
    if env:
        return Path(env)
    return Path(str(resources.files("ciot_battery") / "data"))


# ---------------------------------------------------------------------------
# Device profile
# ---------------------------------------------------------------------------

_POWER_FIELDS = (
    "p_tx_mw",
    "p_rx_mw",
    "p_cdrx_sleep_mw",
    "p_edrx_sleep_mw",
    "p_psm_sleep_mw",
)
_SCALAR_FIELDS = _POWER_FIELDS + (
    "e_cdrx_ondur_mj",
    "t_cdrx_ondur_ms",
    "e_edrx_ondur_mj",
    "t_edrx_ondur_ms",
    "e_sync_mj",
    "t_sync_ms",
    "e_paging_mj",
    "e_idrx_sync_mj",
    "t_idrx_sync_ms",
)
# Tabulated as "N/A" for some devices; null in the document.
_NULLABLE_FIELDS = ("p_tx_gaps_mw", "p_rx_gaps_mw")


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    technology: Technology
    p_tx_mw: float
    tx_power_curve: tuple[tuple[float, float], ...]
    p_tx_gaps_mw: float | None
    p_rx_mw: float
    p_rx_gaps_mw: float | None
    p_cdrx_sleep_mw: float
    e_cdrx_ondur_mj: float
    t_cdrx_ondur_ms: float
    p_edrx_sleep_mw: float
    e_edrx_ondur_mj: float
    t_edrx_ondur_ms: float
    p_psm_sleep_mw: float
    e_sync_mj: float
    t_sync_ms: float
    e_paging_mj: float
    e_idrx_sync_mj: float
    t_idrx_sync_ms: float
    p_delay_mode: DelayMode
    delay_table_ms: Mapping[str, float]
    tx_power_curve_note: str = ""

    def __post_init__(self) -> None:
        for name in _SCALAR_FIELDS + _NULLABLE_FIELDS:
            value = getattr(self, name)
            if value is None and name in _NULLABLE_FIELDS:
                continue
            if not _is_number(value):
                raise UnitViolation(f"{name}: expected a number, got {value!r}")
            if value < 0:
                raise UnitViolation(f"{name}: must be >= 0, got {value}")
        for key, value in self.delay_table_ms.items():
            if not _is_number(value) or value < 0:
                raise UnitViolation(f"delay_table_ms[{key!r}]: must be a number >= 0")
        ladder = [
            ("p_psm_sleep_mw", self.p_psm_sleep_mw),
            ("p_edrx_sleep_mw", self.p_edrx_sleep_mw),
            ("p_cdrx_sleep_mw", self.p_cdrx_sleep_mw),
            ("p_rx_mw", self.p_rx_mw),
        ]
        for (lo_name, lo), (hi_name, hi) in zip(ladder, ladder[1:]):
            if lo > hi:
                raise OrderingViolation(f"{lo_name} ({lo}) exceeds {hi_name} ({hi})")
        self._check_curve()

    def _check_curve(self) -> None:
        prev = None
        for point in self.tx_power_curve:
            if len(point) != 2 or not all(_is_number(v) for v in point):
                raise UnitViolation(f"tx_power_curve: malformed point {point!r}")
            dbm, mw = point
            if mw < 0:
                raise UnitViolation(f"tx_power_curve: negative consumption at {dbm} dBm")
            if prev is not None:
                if dbm <= prev[0]:
                    raise OrderingViolation("tx_power_curve: dBm knots must be strictly increasing")
                if mw < prev[1]:
                    raise OrderingViolation(f"tx_power_curve: consumption decreases at {dbm} dBm")
            prev = point
            if dbm == REFERENCE_TX_DBM and mw != self.p_tx_mw:
                raise ProfileError(
                    f"tx_power_curve: {mw} mW at {REFERENCE_TX_DBM} dBm disagrees with p_tx_mw {self.p_tx_mw}"
                )

    @property
    def tx_gap_power_mw(self) -> float:
        return self.p_tx_gaps_mw or 0.0

    @property
    def rx_gap_power_mw(self) -> float:
        # no separate measurement: the receiver stays at RX level
        return self.p_rx_mw if self.p_rx_gaps_mw is None else self.p_rx_gaps_mw

    @property
    def delay_power_mw(self) -> float:
        if self.p_delay_mode is DelayMode.AS_RX:
            return self.p_rx_mw
        return self.p_cdrx_sleep_mw

    def delay_ms(self, transition: str | None) -> float:
        if transition is None:
            return 0.0
        return self.delay_table_ms.get(transition, 0.0)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "tx_power_curve":
                value = [list(p) for p in value]
            elif f.name == "delay_table_ms":
                value = dict(value)
            elif isinstance(value, enum.Enum):
                value = value.value
            out[f.name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def load_device_profile(document: str | bytes | Mapping[str, Any]) -> DeviceProfile:
    """Parse and validate a device profile JSON document."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"profile is not valid JSON: {exc}") from None
    else:
        doc = dict(document)
    if not isinstance(doc, dict):
        raise ProfileError("profile document must be a JSON object")

    required = ["name", "technology", "tx_power_curve", "p_delay_mode", "delay_table_ms"]
    required += list(_SCALAR_FIELDS) + list(_NULLABLE_FIELDS)
    missing = [k for k in required if k not in doc]
    if missing:
        raise MissingField(f"profile is missing field(s): {', '.join(missing)}")
    known = {f.name for f in fields(DeviceProfile)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ProfileError(f"unknown profile field(s): {', '.join(unknown)}")

    try:
        technology = Technology(doc["technology"])
        delay_mode = DelayMode(doc["p_delay_mode"])
    except ValueError as exc:
        raise ProfileError(str(exc)) from None
    curve = doc["tx_power_curve"]
    if not isinstance(curve, list):
        raise UnitViolation("tx_power_curve: expected a list of [dBm, mW] pairs")
    delays = doc["delay_table_ms"]
    if not isinstance(delays, dict):
        raise UnitViolation("delay_table_ms: expected an object")

    kwargs = {k: doc[k] for k in _SCALAR_FIELDS + _NULLABLE_FIELDS}
    return DeviceProfile(
        name=str(doc["name"]),
        technology=technology,
        tx_power_curve=tuple(tuple(p) if isinstance(p, list) else p for p in curve),
        p_delay_mode=delay_mode,
        delay_table_ms=dict(delays),
        tx_power_curve_note=doc.get("tx_power_curve_note", ""),
        **kwargs,
    )


def load_profile_file(path: str | Path) -> DeviceProfile:
    return load_device_profile(Path(path).read_text(encoding="utf-8"))


def bundled_profile_names(root: Path | None = None) -> list[str]:
    root = root or data_dir()
    return sorted(p.stem for p in (root / "profiles").glob("*.json"))


@lru_cache(maxsize=None)
def _bundled_profile(name: str, root: str) -> DeviceProfile:
    path = Path(root) / "profiles" / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no bundled profile named {name!r}")
    return load_profile_file(path)


def bundled_profile(name: str) -> DeviceProfile:
    return _bundled_profile(name, str(data_dir()))


def tx_power_consumption(profile: DeviceProfile, ul_power_dbm: float) -> float:
    """Modem consumption (mW) while transmitting at ``ul_power_dbm``.

    Piecewise-linear over the profile's curve; the reference level always
    maps to ``p_tx_mw`` even when no curve is present.
    """
    if ul_power_dbm == REFERENCE_TX_DBM:
        return profile.p_tx_mw
    curve = profile.tx_power_curve
    if not curve:
        raise OutOfDomain(f"{profile.name}: no TX power curve; only {REFERENCE_TX_DBM} dBm is defined")
    xs = [d for d, _ in curve]
    if ul_power_dbm < xs[0] or ul_power_dbm > xs[-1]:
        raise OutOfDomain(f"{ul_power_dbm} dBm outside curve domain [{xs[0]}, {xs[-1]}]")
    i = bisect.bisect_left(xs, ul_power_dbm)
    if xs[i] == ul_power_dbm:
        return curve[i][1]
    (x0, y0), (x1, y1) = curve[i - 1], curve[i]
    return y0 + (y1 - y0) * (ul_power_dbm - x0) / (x1 - x0)


# ---------------------------------------------------------------------------
# TBS tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TbsTable:
    technology: Technology
    entries: Mapping[tuple[int, int], int]

    def __post_init__(self) -> None:
        if not self.entries:
            raise OutOfDomain("empty TBS table")
        for key, bits in self.entries.items():
            if bits <= 0:
                raise ProfileError(f"TBS{key} must be strictly positive")
        for (mcs, units), bits in self.entries.items():
            below = self.entries.get((mcs - 1, units))
            if below is not None and below > bits:
                raise OrderingViolation(f"TBS decreases with MCS at ({mcs}, {units})")
        for mcs in self.mcs_values:
            row = sorted((u, b) for (m, u), b in self.entries.items() if m == mcs)
            for (u0, b0), (u1, b1) in zip(row, row[1:]):
                if b1 < b0:
                    raise OrderingViolation(f"TBS decreases with resource count at mcs {mcs}, units {u1}")

    @property
    def mcs_values(self) -> list[int]:
        return sorted({m for m, _ in self.entries})

    @property
    def units(self) -> list[int]:
        return sorted({u for _, u in self.entries})

    def lookup(self, mcs: int, units: int) -> int:
        try:
            return self.entries[(mcs, units)]
        except KeyError:
            raise OutOfDomain(
                f"({mcs}, {units}) outside the {self.technology.value} TBS table"
            ) from None

    @classmethod
    def from_csv(cls, technology: Technology, text: str) -> "TbsTable":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["mcs", "units", "tbs_bits"]:
            raise ProfileError(f"TBS CSV header must be mcs,units,tbs_bits (got {reader.fieldnames})")
        entries = {}
        for row in reader:
            entries[(int(row["mcs"]), int(row["units"]))] = int(row["tbs_bits"])
        return cls(technology, entries)


TBS_FILES = {Technology.NBIOT: "nbiot_npusch.csv", Technology.LTEM: "ltem_pusch.csv"}


def verify_manifest(directory: Path) -> dict[str, str]:
    """Check every file listed in ``MANIFEST.sha256``; return name -> digest."""
    manifest = directory / "MANIFEST.sha256"
    digests = {}
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        digest, name = line.split(maxsplit=1)
        name = name.lstrip("*")
        actual = hashlib.sha256((directory / name).read_bytes()).hexdigest()
        if actual != digest:
            raise ChecksumMismatch(f"{name}: sha256 {actual} does not match manifest {digest}")
        digests[name] = digest
    return digests


@lru_cache(maxsize=None)
def _load_tbs(technology: Technology, root: str) -> TbsTable:
    directory = Path(root) / "tbs"
    listed = verify_manifest(directory)
    name = TBS_FILES[technology]
    if name not in listed:
        raise ChecksumMismatch(f"{name} not listed in the TBS manifest")
    return TbsTable.from_csv(technology, (directory / name).read_text(encoding="utf-8"))


def tbs_table(technology: Technology) -> TbsTable:
    """Bundled (checksum-verified) TBS table for ``technology``."""
    return _load_tbs(Technology(technology), str(data_dir()))


def tbs_lookup(table: TbsTable, mcs: int, units: int) -> int:
    return table.lookup(mcs, units)


# ---------------------------------------------------------------------------
# Radio, traffic, battery, timers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadioConfig:
    technology: Technology
    mcs: int
    rep_data_ul: int = 1
    rep_data_dl: int = 1
    rep_ctrl: int = 1
    rep_rap: int = 1
    n_ru: int = 5
    t_ru_ms: int = 8
    n_sf: int = 5
    t_sf_ms: int = 1
    n_prb_ul: int = 1
    n_prb_dl: int = 1
    header_bits_ul: int = 40
    header_bits_dl: int = 40
    rap_format: RapFormat = RapFormat.NB_FMT1
    ul_tx_power_dbm: float = REFERENCE_TX_DBM
    # signalling messages run at this multiple of the data repetitions
    signalling_rep_factor: int = 2
    mcs_signalling: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "technology", Technology(self.technology))
        object.__setattr__(self, "rap_format", RapFormat(self.rap_format))
        for name in ("rep_data_ul", "rep_data_dl", "rep_ctrl", "rep_rap"):
            value = getattr(self, name)
            if not isinstance(value, int) or not 1 <= value <= MAX_REPETITIONS:
                raise InvalidRepetitions(f"{name}: must be an integer in [1, {MAX_REPETITIONS}], got {value!r}")
        if self.signalling_rep_factor < 1:
            raise InvalidRepetitions("signalling_rep_factor must be >= 1")
        for name in ("n_ru", "n_sf", "n_prb_ul", "n_prb_dl"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name}: must be >= 1")
        if self.t_sf_ms != 1:
            raise ValueError("t_sf_ms is fixed at 1 ms")
        if self.technology is Technology.NBIOT and self.t_ru_ms not in RU_DURATIONS_MS:
            raise ValueError(f"t_ru_ms must be one of {RU_DURATIONS_MS}")
        if self.header_bits_ul < 0 or self.header_bits_dl < 0:
            raise ValueError("header sizes must be >= 0")

    @property
    def ul_units(self) -> int:
        return self.n_ru if self.technology is Technology.NBIOT else self.n_prb_ul

    @property
    def dl_units(self) -> int:
        return self.n_sf if self.technology is Technology.NBIOT else self.n_prb_dl

    def signalling(self) -> "RadioConfig":
        """Configuration used for signalling messages."""
        f = self.signalling_rep_factor
        return replace(
            self,
            mcs=self.mcs if self.mcs_signalling is None else self.mcs_signalling,
            rep_data_ul=min(MAX_REPETITIONS, self.rep_data_ul * f),
            rep_data_dl=min(MAX_REPETITIONS, self.rep_data_dl * f),
        )

    @classmethod
    def default(cls, technology: Technology, mcs: int, repetitions: int = 1) -> "RadioConfig":
        """Validation settings: 5 RUs single-tone 15 kHz (NB-IoT), 1/6 PRB UL/DL (LTE-M)."""
        technology = Technology(technology)
        common = dict(
            rep_data_ul=repetitions,
            rep_data_dl=repetitions,
            rep_ctrl=repetitions,
            rep_rap=repetitions,
        )
        if technology is Technology.NBIOT:
            return cls(technology, mcs, n_ru=5, t_ru_ms=8, n_sf=5, n_prb_dl=1,
                       rap_format=RapFormat.NB_FMT1, **common)
        return cls(technology, mcs, n_sf=5, n_prb_ul=1, n_prb_dl=6,
                   rap_format=RapFormat.LTEM_FMT1, **common)


@dataclass(frozen=True)
class TrafficProfile:
    payload_bytes: int
    rate_per_hour: float

    def __post_init__(self) -> None:
        if self.payload_bytes < 0:
            raise ValueError("payload_bytes must be >= 0")
        if not self.rate_per_hour > 0:
            raise ValueError("rate_per_hour must be > 0")

    @classmethod
    def from_cycle_hours(cls, payload_bytes: int, cycle_hours: float) -> "TrafficProfile":
        return cls(payload_bytes, 1.0 / cycle_hours)

    @property
    def cycle_ms(self) -> float:
        # rounded so that 1/24 h^-1 maps to exactly 86 400 000 ms
        value = MS_PER_HOUR / self.rate_per_hour
        nearest = round(value)
        return float(nearest) if abs(value - nearest) < 1e-6 else value

    @property
    def payload_bits(self) -> int:
        return 8 * self.payload_bytes


@dataclass(frozen=True)
class BatteryConfig:
    capacity_wh: float = 5.0
    safety_factor: float = 1.0
    e_device_per_hour_mj: float = 0.0

    def __post_init__(self) -> None:
        if not self.capacity_wh > 0:
            raise ValueError("capacity_wh must be > 0")
        if not 0 < self.safety_factor <= 1:
            raise ValueError("safety_factor must be in (0, 1]")
        if self.e_device_per_hour_mj < 0:
            raise ValueError("e_device_per_hour_mj must be >= 0")


@dataclass(frozen=True)
class TimerConfig:
    t3324_ms: float = 60_000
    t3412_ms: float = 2 * MS_PER_HOUR
    idrx_cycle_ms: float = 2_560
    # None: use the profile's measured paging-occasion duration
    idrx_ondur_ms: float | None = None
    n_paging: int = 1
    edrx_cycle_ms: float = 20_480
    ptw_ms: float = 5_120
    cdrx_long_cycle_sf: int = 1024
    cdrx_ondur_sf: int = 8
    uss_period_sf: int = 10
    uss_monitor_sf: int = 1
    rrc_inactivity_ms: float = 20_000

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None and value < 0:
                raise InvalidTimer(f"{f.name}: must be >= 0")
        if self.t3412_ms <= 0:
            raise InvalidTimer("t3412_ms must be > 0")
        if self.t3324_ms > self.t3412_ms:
            raise InvalidTimer("t3324_ms must not exceed t3412_ms")
        if self.ptw_ms > self.edrx_cycle_ms:
            raise PtwExceedsCycle("ptw_ms must not exceed edrx_cycle_ms")
        if self.cdrx_ondur_sf > self.cdrx_long_cycle_sf:
            raise OnDurExceedsCycle("cdrx_ondur_sf must not exceed cdrx_long_cycle_sf")
        if self.uss_monitor_sf > self.uss_period_sf:
            raise MonitoringExceedsPeriod("uss_monitor_sf must not exceed uss_period_sf")
        if self.idrx_cycle_ms <= 0 or self.edrx_cycle_ms <= 0:
            raise InvalidTimer("DRX cycle lengths must be > 0")


@dataclass(frozen=True)
class GapModel:
    tx_max_continuous_ms: int = 256
    tx_gap_ms: int = 40
    dl_availability: Fraction = Fraction(14, 20)
    tx_gaps_enabled: bool = True

    def __post_init__(self) -> None:
        m = as_fraction(self.dl_availability)
        if not 0 < m <= 1:
            raise ValueError("dl_availability must be in (0, 1]")
        object.__setattr__(self, "dl_availability", m)
        if self.tx_max_continuous_ms <= 0 or self.tx_gap_ms < 0:
            raise ValueError("invalid TX gap constants")

    @classmethod
    def for_technology(cls, technology: Technology, **kw) -> "GapModel":
        return cls(tx_gaps_enabled=Technology(technology) is Technology.NBIOT, **kw)


def as_fraction(value: float | Fraction) -> Fraction:
    """Exact rational for ratios typed as decimals (0.7 -> 7/10)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(value).limit_denominator(1_000_000)


@dataclass(frozen=True)
class CycleSpec:
    device: DeviceProfile
    radio: RadioConfig
    traffic: TrafficProfile
    timers: TimerConfig = field(default_factory=TimerConfig)
    ps_mode: PsMode = PsMode.PSM_IDRX
    first_cycle_attach: bool = False
    downlink_availability: Fraction = Fraction(14, 20)
    tx_max_continuous_ms: int = 256
    tx_gap_ms: int = 40
    dci_sf: int = 1
    scenario: str | None = None

    def __post_init__(self) -> None:
        if self.device.technology is not self.radio.technology:
            raise TechnologyMismatch(
                f"device {self.device.name} is {self.device.technology.value}, "
                f"radio is {self.radio.technology.value}"
            )
        m = as_fraction(self.downlink_availability)
        if not 0 < m <= 1:
            raise ValueError("downlink_availability must be in (0, 1]")
        object.__setattr__(self, "downlink_availability", m)
        object.__setattr__(self, "ps_mode", PsMode(self.ps_mode))
        if self.dci_sf < 0:
            raise ValueError("dci_sf must be >= 0")

    @property
    def technology(self) -> Technology:
        return self.device.technology

    @property
    def cycle_ms(self) -> float:
        return self.traffic.cycle_ms

    def gap_model(self) -> GapModel:
        return GapModel.for_technology(
            self.technology,
            tx_max_continuous_ms=self.tx_max_continuous_ms,
            tx_gap_ms=self.tx_gap_ms,
            dl_availability=self.downlink_availability,
        )
