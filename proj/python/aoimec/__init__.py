"""Python access to the aoimec simulator, learners and oracles."""

from ._core import (
    ConfigError,
    DivergenceError,
    EnumerationCapError,
    FractionalMdp,
    GammaStar,
    IllegalActionError,
    InvalidArgument,
    LearnerConfig,
    MarkovGame,
    RuntimeFailure,
    Scenario,
    constant_wait_scan,
    exact_gamma_star,
    nash_deviation_scan,
    plot_svg,
    sample_budget,
    run_fnql,
    run_fql,
    run_sweep,
    run_training,
    simulate_baseline,
    trapezoid_area,
)

__all__ = [name for name in dir() if not name.startswith("_")]
