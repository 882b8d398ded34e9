"""Supervisory multi-observer joint parameter and state estimation under bounded noise."""

from .engine import (
    ScenarioConfig,
    SimulationTrace,
    StageRecord,
    convergence_metrics,
    load_scenario,
    run_dynamic,
    run_scenario,
    run_static,
    scenario_from_dict,
)
from .lmi import (
    Certificate,
    CertificateReport,
    NsdVerdict,
    assemble_design_matrix,
    check_certificate,
    check_nsd,
    load_certificate,
    save_certificate,
    schur_gap,
    schur_reduce,
)
from .model import (
    ConfigurationError,
    InputComponent,
    InputSpec,
    NoiseBounds,
    ParameterBox,
    PlantConfig,
    SystemModel,
    benchmark_plant,
    bounded_noise_sequence,
    pe_input,
    sector_nonlinearity,
    signal_norm,
)
from .observer import (
    GainSchedule,
    ObserverBank,
    bank_step,
    observer_step,
    reinitialize_bank,
)
from .sampling import (
    SamplingState,
    covering_radius,
    equidistant_samples,
    grid_samples,
    zoom,
)
from .supervisor import (
    MonitoringState,
    PEAudit,
    Selection,
    pe_audit,
    produce_estimates,
    select_observer,
    squared_norms,
    update_monitoring,
)

__version__ = "0.1.0"
