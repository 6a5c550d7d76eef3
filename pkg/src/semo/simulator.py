"""Synthetic log generation with known ground-truth per-app power draw.

State of charge integrates piecewise between schedule events:

    dE/dt = -(baseline_mw + sum of running app powers + eps)   unplugged
    dE/dt = +5000 mW                                           plugged

where eps is one gaussian(0, sigma_mw) draw per sampling step, so noise
enters as power jitter and zero-noise level series stay monotone.  Energy
clamps to [0, full].  Emitted samples quantize the state exactly like a
real device would: level_pct = floor(100 * E / E_full) and charge_uah =
round(E / (nominal_voltage_mv/1000) * 1000).

Determinism: the gaussian stream is numpy's PCG64 generator seeded from
the scenario, which is stable across platforms, so equal scenarios give
byte-identical logs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ScenarioInvalid
from .recorder import LogRecord
from .sources import BatteryHealth, BatterySample, BatteryStatus, make_app_set

CHARGE_RATE_MW = 5000.0
SIM_TEMP_DC = 250  # emitted temperature: fixed nominal 25.0 °C


class EventKind(Enum):
    START = "start"
    STOP = "stop"
    PLUG_IN = "plug_in"
    PLUG_OUT = "plug_out"


@dataclass(frozen=True)
class ScheduleEvent:
    t_s: int
    kind: EventKind
    app: str | None = None


@dataclass(frozen=True)
class NoiseModel:
    sigma_mw: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    capacity_mah: float
    nominal_voltage_mv: int
    baseline_mw: float
    apps: dict[str, float]
    schedule: tuple[ScheduleEvent, ...]
    duration_s: int
    sample_interval_s: int = 60
    noise: NoiseModel = field(default_factory=NoiseModel)
    initial_level_pct: float = 100.0

    @property
    def full_energy_mwh(self) -> float:
        return self.capacity_mah * self.nominal_voltage_mv / 1000.0


def validate_scenario(scenario: Scenario) -> None:
    """Raise ScenarioInvalid with a reason on the first violated invariant."""

    def bad(reason: str):
        raise ScenarioInvalid(reason)

    if not (math.isfinite(scenario.capacity_mah) and scenario.capacity_mah > 0):
        bad(f"capacity_mah must be positive and finite: {scenario.capacity_mah}")
    if scenario.nominal_voltage_mv <= 0:
        bad(f"nominal_voltage_mv must be positive: {scenario.nominal_voltage_mv}")
    if not (math.isfinite(scenario.baseline_mw) and scenario.baseline_mw >= 0):
        bad(f"baseline_mw must be non-negative and finite: {scenario.baseline_mw}")
    for name, power in scenario.apps.items():
        if not name.strip():
            bad("app names must be non-empty")
        if not (math.isfinite(power) and power >= 0):
            bad(f"app power must be non-negative and finite: {name}={power}")
    if scenario.duration_s <= 0:
        bad(f"duration_s must be positive: {scenario.duration_s}")
    if scenario.sample_interval_s < 1:
        bad(f"sample_interval_s must be >= 1: {scenario.sample_interval_s}")
    if not (math.isfinite(scenario.noise.sigma_mw) and scenario.noise.sigma_mw >= 0):
        bad(f"noise sigma_mw must be non-negative and finite: {scenario.noise.sigma_mw}")
    if not 0 < scenario.initial_level_pct <= 100:
        bad(f"initial_level_pct must be in (0, 100]: {scenario.initial_level_pct}")

    running: set[str] = set()
    plugged = False
    last_t = 0
    for event in scenario.schedule:
        if event.t_s < 0:
            bad(f"schedule times must be non-negative: {event.t_s}")
        if event.t_s < last_t:
            bad(f"schedule times must be non-decreasing: {event.t_s} after {last_t}")
        last_t = event.t_s
        if event.kind in (EventKind.START, EventKind.STOP):
            if event.app is None:
                bad(f"{event.kind.value} event needs an app name")
            if event.app not in scenario.apps:
                bad(f"schedule references unknown app: {event.app!r}")
            if event.kind is EventKind.START:
                if event.app in running:
                    bad(f"app started twice without stop: {event.app!r}")
                running.add(event.app)
            else:
                if event.app not in running:
                    bad(f"stop for app that is not running: {event.app!r}")
                running.remove(event.app)
        elif event.kind is EventKind.PLUG_IN:
            if plugged:
                bad("plug_in while already plugged")
            plugged = True
        elif event.kind is EventKind.PLUG_OUT:
            if not plugged:
                bad("plug_out while not plugged")
            plugged = False


class _DeviceState:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.e_full = scenario.full_energy_mwh
        self.energy = self.e_full * scenario.initial_level_pct / 100.0
        self.running: set[str] = set()
        self.plugged = False

    def apply(self, event: ScheduleEvent) -> None:
        if event.kind is EventKind.START:
            self.running.add(event.app)
        elif event.kind is EventKind.STOP:
            self.running.discard(event.app)
        elif event.kind is EventKind.PLUG_IN:
            self.plugged = True
        else:
            self.plugged = False

    def integrate(self, dt_s: float, eps_mw: float) -> None:
        dt_h = dt_s / 3600.0
        if self.plugged:
            self.energy = min(self.e_full, self.energy + CHARGE_RATE_MW * dt_h)
        else:
            power = self.scenario.baseline_mw + sum(self.scenario.apps[a] for a in self.running) + eps_mw
            self.energy = max(0.0, self.energy - power * dt_h)

    def emit(self, t_s: int) -> LogRecord:
        sc = self.scenario
        level = math.floor(self.energy * 100.0 / self.e_full)
        charge_uah = round(self.energy * 1e6 / sc.nominal_voltage_mv)
        sample = BatterySample(
            ts_ms=t_s * 1000,
            level_pct=max(0, min(100, level)),
            voltage_mv=sc.nominal_voltage_mv,
            temp_dc=SIM_TEMP_DC,
            charge_uah=charge_uah,
            status=BatteryStatus.CHARGING if self.plugged else BatteryStatus.DISCHARGING,
            health=BatteryHealth.GOOD,
        )
        return LogRecord(sample=sample, apps=make_app_set(self.running))


def simulate(scenario: Scenario) -> list[LogRecord]:
    """Run a scenario and return its sampled log, first sample at t=0."""
    validate_scenario(scenario)
    state = _DeviceState(scenario)
    rng = np.random.Generator(np.random.PCG64(scenario.noise.seed))
    events = list(scenario.schedule)
    idx = 0
    interval = scenario.sample_interval_s
    n_steps = scenario.duration_s // interval

    records = []
    for k in range(n_steps + 1):
        t = k * interval
        while idx < len(events) and events[idx].t_s <= t:
            state.apply(events[idx])
            idx += 1
        records.append(state.emit(t))
        if k == n_steps:
            break
        t_next = t + interval
        eps = float(rng.normal(0.0, scenario.noise.sigma_mw))
        seg_start = t
        j = idx
        while j < len(events) and events[j].t_s < t_next:
            if events[j].t_s > seg_start:
                state.integrate(events[j].t_s - seg_start, eps)
                seg_start = events[j].t_s
            state.apply(events[j])
            j += 1
        idx = j
        if t_next > seg_start:
            state.integrate(t_next - seg_start, eps)
    return records


TABLE1_APPS = ("file download", "video streaming", "play games", "web browsing", "text message")

_TABLE1_POWERS_MW = {
    "file download": 1000.0,
    "video streaming": 750.0,
    "play games": 520.0,
    "web browsing": 330.0,
    "text message": 180.0,
}


def table1_scenario() -> Scenario:
    """Five named workloads with strictly decreasing powers.

    The schedule runs an idle warm-up, one solo segment per workload and
    pairwise overlaps, which keeps every app's on/off pattern distinct
    and the regression design full column rank.
    """
    events: list[ScheduleEvent] = []
    t = 1200
    for name in TABLE1_APPS:
        events.append(ScheduleEvent(t, EventKind.START, name))
        events.append(ScheduleEvent(t + 1200, EventKind.STOP, name))
        t += 1200
    for a, b in zip(TABLE1_APPS, TABLE1_APPS[1:]):
        events.append(ScheduleEvent(t, EventKind.START, a))
        events.append(ScheduleEvent(t, EventKind.START, b))
        events.append(ScheduleEvent(t + 900, EventKind.STOP, a))
        events.append(ScheduleEvent(t + 900, EventKind.STOP, b))
        t += 900
    return Scenario(
        capacity_mah=1500.0,
        nominal_voltage_mv=3700,
        baseline_mw=140.0,
        apps=dict(_TABLE1_POWERS_MW),
        schedule=tuple(events),
        duration_s=t,
        sample_interval_s=60,
        noise=NoiseModel(sigma_mw=0.0, seed=0),
        initial_level_pct=100.0,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    payload = {
        "capacity_mah": scenario.capacity_mah,
        "nominal_voltage_mv": scenario.nominal_voltage_mv,
        "baseline_mw": scenario.baseline_mw,
        "apps": dict(scenario.apps),
        "schedule": [
            {"t_s": e.t_s, "event": e.kind.value, **({"app": e.app} if e.app is not None else {})}
            for e in scenario.schedule
        ],
        "duration_s": scenario.duration_s,
        "sample_interval_s": scenario.sample_interval_s,
        "noise": {"sigma_mw": scenario.noise.sigma_mw, "seed": scenario.noise.seed},
        "initial_level_pct": scenario.initial_level_pct,
    }
    return payload


_REQUIRED_KEYS = {"capacity_mah", "nominal_voltage_mv", "baseline_mw", "apps", "schedule", "duration_s"}
_OPTIONAL_KEYS = {"sample_interval_s", "noise", "initial_level_pct"}


def scenario_from_dict(payload: dict) -> Scenario:
    if not isinstance(payload, dict):
        raise ScenarioInvalid("scenario must be a JSON object")
    keys = set(payload)
    missing = _REQUIRED_KEYS - keys
    unknown = keys - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if missing:
        raise ScenarioInvalid(f"scenario missing keys: {sorted(missing)}")
    if unknown:
        raise ScenarioInvalid(f"scenario has unknown keys: {sorted(unknown)}")

    try:
        events = []
        for entry in payload["schedule"]:
            kind = EventKind(entry["event"])
            events.append(ScheduleEvent(t_s=int(entry["t_s"]), kind=kind, app=entry.get("app")))
        noise_payload = payload.get("noise", {})
        noise = NoiseModel(
            sigma_mw=float(noise_payload.get("sigma_mw", 0.0)),
            seed=int(noise_payload.get("seed", 0)),
        )
        scenario = Scenario(
            capacity_mah=float(payload["capacity_mah"]),
            nominal_voltage_mv=int(payload["nominal_voltage_mv"]),
            baseline_mw=float(payload["baseline_mw"]),
            apps={str(k): float(v) for k, v in payload["apps"].items()},
            schedule=tuple(events),
            duration_s=int(payload["duration_s"]),
            sample_interval_s=int(payload.get("sample_interval_s", 60)),
            noise=noise,
            initial_level_pct=float(payload.get("initial_level_pct", 100.0)),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ScenarioInvalid(f"scenario does not match the schema: {exc}") from None
    validate_scenario(scenario)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioInvalid(f"scenario file is not valid JSON: {exc.msg}") from None
    return scenario_from_dict(payload)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
