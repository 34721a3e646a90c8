"""Spreading processes over two-layer contact networks with mask-wearing
heterogeneity: analytic branching-process solver, configuration-model
generator, directed bond-percolation simulator and a sweep harness."""

from .analytic import (
    AnalyticReport,
    ConvergenceError,
    ExtinctionState,
    SizeState,
    analyze,
    build_jacobian,
    critical_scaling,
    emergence_probability,
    epidemic_size,
    extinction_step,
    size_step,
    solve_extinction,
    solve_size,
    spectral_radius,
)
from .harness import SweepAxis, SweepSpec, emit_csv, load_sweep, preset_sweep, run_sweep
from .model import (
    ColoredDegreePMF,
    DegreeMoments,
    DegreePMF,
    MaskSet,
    ScenarioConfig,
    ScenarioValidationError,
    TransmissibilityMatrices,
    build_transmissibility,
    colored_degree_pmf,
    degree_moments,
    load_scenario,
    scenario_errors,
    validate_scenario,
    with_axis_value,
)
from .netgen import (
    MultilayerGraph,
    dump_graph,
    generate_multilayer,
    load_graph,
    pair_stubs,
    sample_colored_degrees,
)
from .simulate import (
    OutbreakOutcome,
    TrialSummary,
    assign_masks,
    exact_small_graph_oracle,
    load_fixture,
    oracle_crosscheck,
    run_trials,
    spread_from_seed,
    spread_many,
)

__version__ = "0.1.0"
