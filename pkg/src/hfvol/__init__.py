"""hfvol: large integrated volatility matrix estimation from noisy,
nonsynchronized high-frequency tick data.

Pipeline: tick panels (``panel``) are aligned on shifted pre-sampling grids
(``grids``), turned into an averaged realized volatility matrix with a
noise-corrected diagonal (``estimator``), and regularized by banding or
thresholding (``regularize``). A Monte Carlo engine (``simulate``) and a
study harness (``harness``) reproduce the estimator's finite-sample
behavior at desk scale.
"""

from ._backend import NUMBA_ENABLED, backend_name
from .estimator import (
    NoiseVarianceVector,
    VolMatrix,
    arvm_estimate,
    avg_realized_matrix,
    noise_variance,
    noise_variances,
    read_matrix_csv,
    realized_covol,
    realized_matrix,
    write_matrix_csv,
    write_matrix_triplets,
    write_noise_csv,
)
from .grids import GridSpec, SyncTable, make_grids, resolve_previous_ticks
from .harness import (
    CalibrationDemoReport,
    ConvergenceReport,
    ConvergenceSpec,
    ExperimentConfig,
    MpReport,
    MseTable,
    PermutationReport,
    derive_rep_seed,
    mse_l2,
    run_calibration_demo,
    run_convergence_study,
    run_mp_sanity,
    run_mse_study,
    run_permutation_study,
    select_band_oracle,
    select_threshold_oracle,
)
from .panel import (
    Panel,
    PanelDiagnostics,
    PanelFormatError,
    PrevTick,
    TickSeries,
    load_panel,
    previous_tick,
    validate_panel,
    write_panel,
)
from .regularize import (
    CalibrationResult,
    EigenDiagnostics,
    RegSpec,
    band,
    calibrate_threshold_lambda,
    eigen_diagnostics,
    operator_norm,
    quantile_threshold,
    threshold,
)
from .simulate import (
    NOISE_MULTIPLIERS,
    PathBundle,
    SimConfig,
    TruthBundle,
    add_noise,
    build_gamma,
    cholesky_factor,
    default_theta,
    desynchronize,
    integrated_truth,
    kappa_from_u,
    s_exp,
    sim_config_from_json,
    simulate_block3_batch,
    simulate_diag_vols,
    simulate_kappa_path,
    simulate_paths,
    simulate_prices,
    simulate_scenario,
)

__version__ = "0.1.0"
