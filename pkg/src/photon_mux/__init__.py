"""Temporal loop multiplexing model for heralded photon-pair sources."""
from .engine import (
    HeraldedState,
    MuxPerformance,
    NoSolutionError,
    NonMonotoneError,
    SourceParams,
    SpatialParams,
    analytic_p_success,
    asymptotic_gain,
    heralded_idler_after_storage,
    improvement_factor,
    passes,
    p_noise,
    p_noise_t,
    p_success,
    p_success_t,
    performance,
    snr,
    solve_nbar_for_snr,
    spatial_improvement_factor,
    spatial_p_success,
    spatial_performance,
    truncation_delta,
    unswitched_performance,
    waiting_time,
)
from .fock import (
    DetectorModel,
    InvalidParameterError,
    JointPairState,
    PhotonNumberDist,
    binomial_loss,
    pnr_herald,
    thermal_pmf,
)
from .montecarlo import McConfig, McResult, run_mc

__version__ = "0.1.0"
