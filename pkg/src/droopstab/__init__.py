"""Passivity-based stability assessment of droop-controlled DC microgrids.

Small-signal output impedances of a droop-controlled boost converter (four
droop laws: VI, VP, IV, PV), bus impedance composition with feeder and
constant power load, the +/-90 degree passivity criterion, minimum
droop-feedback filter search, and a nonlinear averaged time-domain
simulator with perturbation-injection impedance measurement for
cross-validation.
"""

from .control import (
    BandwidthInfeasible,
    ControllerSet,
    LoopBandwidths,
    design_controllers,
    droop_lpf,
    pi_coefficients,
)
from .impedance import (
    DEFAULT_CONVERTER_THRESHOLD_HZ,
    ConverterImpedanceModel,
    InconsistentDroopKind,
    UnsolvedOperatingPoint,
    analytic_output_impedance,
    converter_passivity_report,
)
from .network import (
    CPLParams,
    LineParams,
    MinLpfOutcome,
    NetworkOperatingPoint,
    bus_capacitor_impedance,
    bus_impedance,
    cpl_impedance,
    line_impedance,
    min_lpf_for_passivity,
    single_feeder_bus_impedance,
    solve_network_operating_point,
    system_passivity_check,
)
from .passivity import (
    DEFAULT_GRID,
    FrequencyGrid,
    PassivityReport,
    passivity_report,
)
from .plant import (
    ConverterParams,
    DroopKind,
    DroopSpec,
    NoRealSolution,
    NonViableDuty,
    OperatingPoint,
    solve_operating_point,
)
from .ratfun import (
    ComplexResponse,
    DegenerateLoop,
    DegenerateParallel,
    NearPole,
    RationalTF,
    freq_response,
    tf_add,
    tf_cancel_origin,
    tf_const,
    tf_div,
    tf_eval,
    tf_feedback,
    tf_mul,
    tf_parallel,
    tf_s,
    tf_scale,
    tf_sub,
)
from .scenarios import (
    ParseError,
    ScenarioConfig,
    ScenarioResult,
    SimSettings,
    ValidationError,
    default_config,
    emit_reports,
    load_config,
    run_scenario,
    run_scenario_matrix,
)
from .sim import (
    InjectionSetup,
    InvalidTimestep,
    OscillationVerdict,
    PoorExcitation,
    SimEvent,
    SimTrace,
    SweepPoint,
    UnstableBase,
    WindowTooShort,
    bus_injection_setup,
    converter_injection_setup,
    detect_oscillation,
    frequency_sweep_measured,
    measure_impedance_injection,
    measure_rlc_reference,
    rlc_reference_impedance,
    simulate,
    snapped_frequency,
    steady_state_vector,
    trace_to_csv,
)

__version__ = "0.1.0"
