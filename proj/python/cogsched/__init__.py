"""Uplink cognitive-radio scheduling simulator."""

from ._core import (  # noqa: F401
    FramePlan,
    GainDistribution,
    InfeasibleError,
    LinkParams,
    Metrics,
    Policy,
    Scenario,
    ServiceTable,
    SimConfig,
    UserProfile,
    build_table,
    capped_power,
    choose_r,
    doic_plan,
    replay_trace,
    residual_time,
    run,
    subopt_plan,
    sweep,
    transmission_rate,
    update_x,
    update_y,
    validate,
    waiting_time,
    waiting_time_upper,
)

__version__ = "0.1.0"
