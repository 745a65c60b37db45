from .measure import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_N_MAX,
    DEFAULT_N_MIN,
    MEASUREMENT_LOCK,
    MeasurementLock,
    MeasurementSeries,
    PairedSample,
    measure_pair,
    measure_until_confident,
    t_quantile,
    t_quantile_table,
)
from .meters import (
    DEFAULT_RAPL_PATH,
    EnergyMeter,
    MockMeter,
    MockScenario,
    RaplMeter,
    ScriptedMeter,
    load_scenario,
    read_rapl,
)

__all__ = [
    "DEFAULT_ALPHA", "DEFAULT_BETA", "DEFAULT_N_MAX", "DEFAULT_N_MIN", "DEFAULT_RAPL_PATH",
    "EnergyMeter", "MEASUREMENT_LOCK", "MeasurementLock", "MeasurementSeries", "MockMeter",
    "MockScenario", "PairedSample", "RaplMeter", "ScriptedMeter", "load_scenario",
    "measure_pair", "measure_until_confident", "read_rapl", "t_quantile", "t_quantile_table",
]
