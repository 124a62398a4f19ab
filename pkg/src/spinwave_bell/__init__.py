"""Monte Carlo simulator of heralded spin-wave qubit storage, two-stage
telecom wavelength conversion, photon-counting detection, and CHSH
Bell-inequality statistics."""

__version__ = "0.1.0"

from .analysis import (
    BellResult,
    CorrelationRecord,
    FringeFit,
    bell_result,
    bootstrap_sigma,
    chsh_S,
    correlation_E,
    fit_fringe,
)
from .channel import (
    ChannelSpec,
    ConversionChain,
    chain_to_channel,
    classical_contrast,
    delay_consistency,
)
from .counting import CountMatrix, DetectorBank, accumulate, simulate_clicks
from .engine import (
    Dataset,
    ExperimentConfig,
    MemoryParams,
    characterize_memory,
    reproduce_table,
    run_experiment,
)
from .memory import (
    AtomEnsemble,
    CoherenceCurve,
    LightShiftModel,
    MemoryModel,
    SpinWaveGeometry,
    TrapParams,
    coherence_factor,
    evolve_positions,
    sample_ensemble,
    spinwave_wavevectors,
)
from .qubit_state import (
    Arm,
    MeasurementSetting,
    TwoQubitState,
    apply_arm_channel,
    apply_werner,
    click_probabilities,
    correlation_expected,
    make_bell_phi_plus,
    rotate_arm,
)
