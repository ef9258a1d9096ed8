"""ciot-battery command line."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import CiotError, Unreachable
from .lifetime import (
    SWEEP_COLUMNS,
    SweepGrid,
    SweepRow,
    cycle_energy,
    hourly_energy,
    lifetime_hours,
    make_spec,
    resolve_profile,
    sweep,
)
from .linkbudget import combined_snr, load_scenarios, rx_snr
from .model import (
    MS_PER_HOUR,
    BatteryConfig,
    CycleSpec,
    PsMode,
    Technology,
    TimerConfig,
    data_dir,
)
from .oracle import build_timeline, compare, idle_trace, integrate, tx_burst_trace

EXIT_OK, EXIT_EXCEEDED, EXIT_CONFIG, EXIT_UNREACHABLE = 0, 1, 2, 3


class ConfigError(Exception):
    """Bad user input; the message names the offending field."""


@dataclass
class RunConfig:
    command: str = "estimate"
    device: str = "n211"
    profile: str | None = None
    scenario: str = "good"
    payload: int = 100
    cycle_hours: float = 24.0
    t3412_hours: float = 2.0
    t3324_s: float = 60.0
    ps_mode: str = "PSM_IDRX"
    rrc_inactivity_ms: float = 20_000.0
    first_cycle_attach: bool = False
    capacity_wh: float = 5.0
    safety_factor: float = 1.0
    e_device_mj: float = 0.0
    format: str = "text"
    out: str | None = None
    plot: str | None = None
    jobs: int = 1
    matrix: str | None = None
    phase: int = 0
    idle_only: bool = False
    burst_ms: int | None = None
    devices: list = field(default_factory=lambda: ["n211", "r410m-nbiot", "r410m-ltem"])
    scenarios: list = field(default_factory=lambda: ["good", "bad", "extreme"])
    payloads: list = field(default_factory=lambda: [10, 50, 100, 200, 500, 1000])
    cycles_hours: list = field(default_factory=lambda: [1, 2, 4, 6, 12, 24, 48])
    t3412_list_hours: list = field(default_factory=lambda: [2])

    def check(self) -> None:
        """Type-check every field before anything is computed."""
        for f in fields(self):
            value = getattr(self, f.name)
            kind = f.type if isinstance(f.type, str) else f.type.__name__
            if value is None:
                if "None" not in kind:
                    raise ConfigError(f"{f.name}: a value is required")
                continue
            if kind.startswith("bool"):
                ok = isinstance(value, bool)
            elif kind.startswith("int"):
                ok = isinstance(value, int) and not isinstance(value, bool)
            elif kind.startswith("float"):
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            elif kind.startswith("list"):
                ok = isinstance(value, list)
            else:
                ok = isinstance(value, str)
            if not ok:
                raise ConfigError(f"{f.name}: unexpected value {value!r} (expected {kind})")
        if self.format not in ("text", "csv", "json"):
            raise ConfigError(f"format: must be text, csv or json, got {self.format!r}")
        try:
            PsMode(self.ps_mode)
        except ValueError:
            choices = ", ".join(m.value for m in PsMode)
            raise ConfigError(f"ps_mode: must be one of {choices}, got {self.ps_mode!r}") from None
        if self.payload < 0:
            raise ConfigError("payload: must be >= 0 bytes")
        if not self.cycle_hours > 0:
            raise ConfigError("cycle_hours: must be > 0")
        if not self.t3412_hours > 0:
            raise ConfigError("t3412_hours: must be > 0")
        if self.t3324_s < 0:
            raise ConfigError("t3324_s: must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        if self.profile is not None and not Path(self.profile).is_file():
            raise ConfigError(f"profile: no such file {self.profile!r}")
        if self.matrix is not None and not Path(self.matrix).is_file():
            raise ConfigError(f"matrix: no such file {self.matrix!r}")

    @property
    def device_ref(self) -> str:
        return self.profile or self.device

    def timers(self) -> TimerConfig:
        return TimerConfig(
            t3324_ms=self.t3324_s * 1000,
            t3412_ms=self.t3412_hours * MS_PER_HOUR,
            rrc_inactivity_ms=self.rrc_inactivity_ms,
        )

    def battery(self) -> BatteryConfig:
        return BatteryConfig(self.capacity_wh, self.safety_factor, self.e_device_mj)

    def spec(self) -> CycleSpec:
        return make_spec(
            self.device_ref, self.scenario, self.payload, self.cycle_hours, self.t3412_hours,
            timers=self.timers(), ps_mode=PsMode(self.ps_mode),
            first_cycle_attach=self.first_cycle_attach,
        )


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    path = Path(cfg.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    # run metadata lives beside the data so the data itself stays byte-stable
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    Path(f"{path}.meta").write_text(
        f"# generated {stamp} by ciot-battery {__version__} ({cfg.command})\n", encoding="utf-8"
    )


def _csv(rows: list[dict[str, str]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _row_for(cfg: RunConfig, spec: CycleSpec) -> SweepRow:
    b = cycle_energy(spec)
    e_hour = hourly_energy(spec, b)
    return SweepRow(
        spec.device.name, spec.technology.value, cfg.scenario, cfg.payload,
        cfg.cycle_hours, cfg.t3412_hours, b, e_hour, lifetime_hours(e_hour, cfg.battery()),
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_estimate(cfg: RunConfig) -> int:
    row = _row_for(cfg, cfg.spec())
    rec = row.as_record()
    if cfg.format == "csv":
        _emit(_csv([rec], SWEEP_COLUMNS), cfg)
    elif cfg.format == "json":
        doc: dict[str, Any] = {k: rec[k] for k in SWEEP_COLUMNS[:6]}
        doc["technology"] = row.technology
        doc["breakdown_mj"] = {k: v / 1000 for k, v in row.breakdown.components().items()}
        doc["total_mj"] = row.breakdown.total / 1000
        doc["tau_count"] = row.breakdown.tau_count
        doc["e_hour_mj"] = row.e_hour_mj
        doc["lifetime_hours"] = row.lifetime_hours
        doc["lifetime_years"] = row.lifetime_years
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", cfg)
    else:
        b = row.breakdown
        lines = [
            f"device          {row.device} ({row.technology})",
            f"scenario        {cfg.scenario}",
            f"payload         {cfg.payload} B every {cfg.cycle_hours:g} h, T3412 {cfg.t3412_hours:g} h",
            "",
            f"{'component':<20}{'energy (mJ)':>14}",
        ]
        for name, value in b.components().items():
            lines.append(f"{name:<20}{value / 1000:>14.3f}")
        lines += [
            f"{'total':<20}{b.total / 1000:>14.3f}",
            "",
            f"TAU per cycle   {b.tau_count}",
            f"energy per hour {row.e_hour_mj:.3f} mJ",
            f"lifetime        {row.lifetime_hours:.1f} h ({row.lifetime_years:.2f} years)",
        ]
        _emit("\n".join(lines) + "\n", cfg)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    grid = SweepGrid(
        devices=[str(d) for d in cfg.devices],
        scenarios=[str(s) for s in cfg.scenarios],
        payloads=[int(p) for p in cfg.payloads],
        cycles_hours=[float(c) for c in cfg.cycles_hours],
        t3412_hours=[float(t) for t in cfg.t3412_list_hours],
        timers=cfg.timers(),
        battery=cfg.battery(),
        ps_mode=PsMode(cfg.ps_mode),
    )
    rows = sweep(grid, jobs=cfg.jobs)
    text = _csv([r.as_record() for r in rows], SWEEP_COLUMNS)
    _emit(text, cfg)
    if cfg.plot:
        from .plotting import render_all

        for path in render_all(text, cfg.plot):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_trace(cfg: RunConfig) -> int:
    if cfg.burst_ms is not None:
        if cfg.burst_ms < 0:
            raise ConfigError("burst_ms: must be >= 0")
        trace = tx_burst_trace(resolve_profile(cfg.device_ref), cfg.burst_ms)
    elif cfg.idle_only:
        trace = idle_trace(cfg.spec())
    else:
        trace = build_timeline(cfg.spec(), phase=cfg.phase)
    _emit(trace.to_csv(), cfg)
    print(f"# {trace.origin}: {float(integrate(trace)) / 1000:.3f} mJ over {float(trace.total_ms):.0f} ms",
          file=sys.stderr)
    return EXIT_OK


def load_matrix(path: str | None) -> dict[str, Any]:
    path = Path(path) if path else data_dir() / "acceptance_matrix.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"matrix: cannot read {path}: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("specs"), list):
        raise ConfigError("matrix: expected an object with a 'specs' list")
    return doc


SPEC_OVERRIDES = ("tx_gap_ms", "tx_max_continuous_ms", "downlink_availability", "dci_sf")


def matrix_spec(entry: dict[str, Any], cfg: RunConfig) -> CycleSpec:
    try:
        spec = make_spec(
            entry["device"], entry["scenario"], int(entry.get("payload_bytes", 100)),
            float(entry["cycle_hours"]), float(entry.get("t3412_hours", 2)),
            timers=cfg.timers(), ps_mode=PsMode(entry.get("ps_mode", cfg.ps_mode)),
        )
    except KeyError as exc:
        raise ConfigError(f"matrix spec: missing field {exc.args[0]}") from None
    extra = {k: entry[k] for k in SPEC_OVERRIDES if k in entry}
    return replace(spec, **extra) if extra else spec


def cmd_validate(cfg: RunConfig) -> int:
    doc = load_matrix(cfg.matrix)
    entries = doc["specs"]
    if not entries:
        raise ConfigError("matrix: the spec list is empty")
    tolerance = float(doc.get("tolerance", 0.01))
    results = []
    out = [f"{'spec':<44}{'model mJ':>14}{'oracle mJ':>14}{'rel.err':>11}  result"]
    for entry in entries:
        spec = matrix_spec(entry, cfg)
        c = compare(spec, phase=cfg.phase)
        name = (f"{entry['device']}/{entry['scenario']}/{spec.traffic.payload_bytes}B/"
                f"{entry['cycle_hours']}h/T3412={entry.get('t3412_hours', 2)}h")
        ok = c.relative_error <= tolerance
        results.append((c.relative_error, name))
        out.append(f"{name:<44}{float(c.model_uj) / 1000:>14.3f}{float(c.oracle_uj) / 1000:>14.3f}"
                   f"{c.relative_error:>11.2e}  {'PASS' if ok else 'FAIL'}")
    worst = max(results)
    failed = sum(1 for e, _ in results if e > tolerance)
    out.append(f"{len(results) - failed}/{len(results)} within {tolerance:.2%}; worst {worst[1]} ({worst[0]:.2e})")
    _emit("\n".join(out) + "\n", cfg)
    return EXIT_EXCEEDED if failed else EXIT_OK


def cmd_scenarios(cfg: RunConfig) -> int:
    lines = [f"{'scenario':<10}{'MCL dB':>8}  {'technology':<8}{'SNR dB':>9}{'mcs':>5}{'reps':>6}{'combined dB':>13}"]
    for name, sc in load_scenarios().items():
        for tech in Technology:
            snr = rx_snr(sc.budget(tech))
            if tech in sc.assignments:
                mcs, reps = sc.assignments[tech]
                lines.append(f"{name.value:<10}{sc.mcl_db:>8g}  {tech.value:<8}{snr:>9.2f}{mcs:>5}{reps:>6}"
                             f"{combined_snr(snr, reps):>13.2f}")
            else:
                lines.append(f"{name.value:<10}{sc.mcl_db:>8g}  {tech.value:<8}{snr:>9.2f}  unreachable")
    _emit("\n".join(lines) + "\n", cfg)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
    "validate": cmd_validate,
    "scenarios": cmd_scenarios,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _list(kind):
    def parse(text: str) -> list:
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ciot-battery", description="NB-IoT / LTE-M energy and battery lifetime model")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with run settings (flags override it)")
    common.add_argument("--format", choices=["text", "csv", "json"])
    common.add_argument("--out", help="write output here instead of stdout")

    spec = argparse.ArgumentParser(add_help=False)
    spec.add_argument("--device", help="bundled profile name (n211, r410m-nbiot, r410m-ltem)")
    spec.add_argument("--profile", help="device profile JSON file (overrides --device)")
    spec.add_argument("--scenario", choices=["good", "bad", "extreme"])
    spec.add_argument("--payload", type=int, help="uplink payload per cycle, bytes")
    spec.add_argument("--cycle-hours", type=float)
    spec.add_argument("--t3412-hours", type=float)
    spec.add_argument("--t3324-s", type=float)
    spec.add_argument("--ps-mode", choices=[m.value for m in PsMode])
    spec.add_argument("--rrc-inactivity-ms", type=float)
    spec.add_argument("--first-cycle-attach", action="store_const", const=True)
    spec.add_argument("--capacity-wh", type=float)
    spec.add_argument("--safety-factor", type=float)
    spec.add_argument("--e-device-mj", type=float, help="non-modem consumption per hour, mJ")

    sub.add_parser("estimate", parents=[common, spec], help="energy breakdown and lifetime of one spec")

    p = sub.add_parser("sweep", parents=[common, spec], help="grid sweep to CSV, optional SVG charts")
    p.add_argument("--devices", type=_list(str))
    p.add_argument("--scenarios", type=_list(str))
    p.add_argument("--payloads", type=_list(int))
    p.add_argument("--cycles-hours", type=_list(float))
    p.add_argument("--t3412-list-hours", type=_list(float))
    p.add_argument("--plot", metavar="DIR", help="write SVG charts into DIR")
    p.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("trace", parents=[common, spec], help="oracle power trace as CSV")
    p.add_argument("--phase", type=int, help="downlink grid phase at each reception")
    p.add_argument("--idle-only", action="store_const", const=True, help="trace only the sleep phase")
    p.add_argument("--burst-ms", type=int, help="trace a bare uplink burst of this many ms")

    p = sub.add_parser("validate", parents=[common, spec], help="model vs oracle over a spec matrix")
    p.add_argument("--matrix", help="matrix JSON (default: bundled acceptance matrix)")
    p.add_argument("--phase", type=int)

    sub.add_parser("scenarios", parents=[common], help="list coverage scenarios and link budgets")
    return parser


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
        for key, value in doc.items():
            name = key.replace("-", "_")
            if name not in _FIELD_NAMES or name == "command":
                raise ConfigError(f"config: unknown field {key!r}")
            merged[name] = value
    for key, value in vars(args).items():
        if key in _FIELD_NAMES and value is not None:
            merged[key] = value
    merged["command"] = args.command
    cfg = RunConfig(**merged)
    cfg.check()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except Unreachable as exc:
        print(f"unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CiotError, ValueError, OSError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
