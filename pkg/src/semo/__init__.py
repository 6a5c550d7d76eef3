"""semo: battery monitoring and per-application energy attribution.

Three cooperating pieces: an inspector that classifies battery state and
warns on critical conditions, a recorder that samples battery plus
running applications into an append-only JSONL log, and an analyzer that
decomposes observed drain into per-application rates and a ranking.  A
deterministic device simulator supplies logs with known ground truth so
the attribution accuracy is measurable.
"""

from .analyzer import (
    AttributionResult,
    DischargeInterval,
    EnergyAttributor,
    GroupRate,
    Grouping,
    INSEPARABLE_FLAG,
    PowerEstimate,
    attribute,
    build_intervals,
    export_csv,
    merge_identifiability_groups,
    rate_to_power,
)
from .clock import SimulatedClock, SystemClock
from .errors import (
    ChargeCounterUnavailable,
    DegenerateSystem,
    LogLocked,
    LogParseError,
    MalformedField,
    MissingField,
    NonMonotonicTimestamp,
    NotFittedError,
    ReplayExhausted,
    ScenarioInvalid,
    SemoError,
    TooFewSamples,
)
from .inspector import BatteryWarning, InspectorConfig, WarningKind, describe, evaluate
from .nnls import solve_nnls, weighted_sse
from .recorder import (
    LogRecord,
    LogWriter,
    RecorderConfig,
    curve_series,
    load_log,
    run_loop,
    sample_once,
    write_log,
)
from .simulator import (
    NoiseModel,
    Scenario,
    ScheduleEvent,
    EventKind,
    TABLE1_APPS,
    load_scenario,
    save_scenario,
    simulate,
    table1_scenario,
)
from .sources import (
    AppSet,
    BatteryHealth,
    BatterySample,
    BatteryStatus,
    FileTreeSource,
    ReplaySource,
    make_app_set,
    read_battery_sample,
    read_running_apps,
)

__version__ = "0.1.0"
