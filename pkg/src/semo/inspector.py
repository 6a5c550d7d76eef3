"""Battery condition checks and the human-readable battery report."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .sources import BatteryHealth, BatterySample, BatteryStatus


class WarningKind(Enum):
    LOW_BATTERY = "LowBattery"
    OVERHEAT = "Overheat"
    UNHEALTHY_BATTERY = "UnhealthyBattery"
    VOLTAGE_OUT_OF_RANGE = "VoltageOutOfRange"


@dataclass(frozen=True)
class BatteryWarning:
    kind: WarningKind
    message: str
    # Configured limit that was crossed; None for kinds without a numeric limit.
    threshold: int | None


@dataclass(frozen=True)
class InspectorConfig:
    low_battery_pct: int = 15
    overheat_dc: int = 450
    voltage_min_mv: int = 3000
    voltage_max_mv: int = 4500

    def __post_init__(self):
        if not 0 < self.low_battery_pct < 100:
            raise ValueError(f"low_battery_pct must be in 1..99: {self.low_battery_pct}")
        if self.voltage_min_mv >= self.voltage_max_mv:
            raise ValueError("voltage_min_mv must be below voltage_max_mv")


# Low-battery reminders are pointless while on the charger.
_DRAINING = (BatteryStatus.DISCHARGING, BatteryStatus.NOT_CHARGING)
_HEALTHY = (BatteryHealth.GOOD, BatteryHealth.UNKNOWN)

DEFAULT_CONFIG = InspectorConfig()


def evaluate(sample: BatterySample, config: InspectorConfig = DEFAULT_CONFIG) -> list[BatteryWarning]:
    """Return the warnings a sample triggers, in WarningKind declaration order.

    Low battery fires strictly below the configured percent and only while
    draining; overheat strictly above the limit; voltage bounds are inclusive.
    Total and deterministic: no input raises.
    """
    warnings = []
    if sample.level_pct < config.low_battery_pct and sample.status in _DRAINING:
        warnings.append(
            BatteryWarning(
                kind=WarningKind.LOW_BATTERY,
                message=(
                    f"battery at {sample.level_pct}% "
                    f"(below {config.low_battery_pct}%), connect the charger"
                ),
                threshold=config.low_battery_pct,
            )
        )
    if sample.temp_dc > config.overheat_dc:
        warnings.append(
            BatteryWarning(
                kind=WarningKind.OVERHEAT,
                message=(
                    f"battery temperature {sample.temp_dc / 10:.1f} °C "
                    f"exceeds {config.overheat_dc / 10:.1f} °C"
                ),
                threshold=config.overheat_dc,
            )
        )
    if sample.health not in _HEALTHY:
        warnings.append(
            BatteryWarning(
                kind=WarningKind.UNHEALTHY_BATTERY,
                message=f"battery health is {sample.health.label}",
                threshold=None,
            )
        )
    if not config.voltage_min_mv <= sample.voltage_mv <= config.voltage_max_mv:
        crossed = (
            config.voltage_min_mv
            if sample.voltage_mv < config.voltage_min_mv
            else config.voltage_max_mv
        )
        warnings.append(
            BatteryWarning(
                kind=WarningKind.VOLTAGE_OUT_OF_RANGE,
                message=(
                    f"battery voltage {sample.voltage_mv} mV outside "
                    f"[{config.voltage_min_mv}, {config.voltage_max_mv}] mV"
                ),
                threshold=crossed,
            )
        )
    return warnings


def describe(sample: BatterySample) -> str:
    """Format the full battery report, one line per sample field."""
    when = datetime.fromtimestamp(sample.ts_ms / 1000, tz=timezone.utc)
    charge = "n/a" if sample.charge_uah is None else f"{sample.charge_uah} µAh"
    lines = [
        f"time: {when.isoformat(timespec='seconds')}",
        f"level: {sample.level_pct}%",
        f"voltage: {sample.voltage_mv} mV",
        f"temperature: {sample.temp_dc / 10:.1f} °C",
        f"charge: {charge}",
        f"status: {sample.status.label}",
        f"health: {sample.health.label}",
    ]
    return "\n".join(lines)
