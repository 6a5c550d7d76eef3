"""Input-validation helpers shared by the analyzer and the estimator."""

from __future__ import annotations

CHARGE_COUNTER_MODES = ("auto", "on", "off")


def check_records(records) -> list:
    """Materialize records and require strictly increasing timestamps."""
    records = list(records)
    for prev, cur in zip(records, records[1:]):
        if cur.sample.ts_ms <= prev.sample.ts_ms:
            raise ValueError(
                f"records must be sorted with strictly increasing ts_ms "
                f"({cur.sample.ts_ms} after {prev.sample.ts_ms})"
            )
    return records


def check_charge_counter_mode(mode: str) -> str:
    if mode not in CHARGE_COUNTER_MODES:
        raise ValueError(f"use_charge_counter must be one of {CHARGE_COUNTER_MODES}: {mode!r}")
    return mode


def check_positive(name: str, value) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive: {value}")
    return value
