"""Quickest change detection in statistically periodic processes.

Models a data stream whose per-sample distribution repeats with a fixed
period, and provides sequential detectors for the moment that law changes:
the posterior-probability rule for a known alternative, its robust variant
designed against a least favorable law, a cumulative-sum score test, mixture
rules for unknown changed slots or streams, and a classifier bank for joint
detection and isolation.  A Monte Carlo harness estimates false-alarm,
delay, run-length, and misclassification performance against the matching
first-order predictions.
"""

from .densities import (
    FITTED_RATE_FLOOR,
    FITTED_VARIANCE_FLOOR,
    Gaussian,
    Poisson,
    SlotDensity,
    density_from_dict,
    density_to_dict,
    kl,
    llr,
    log_density,
    sample,
)
from .detectors import (
    ClassifierBankDetector,
    CusumDetector,
    MixtureShiryaev,
    MultistreamMixture,
    ShiryaevDetector,
    StepResult,
    robust_shiryaev,
    run,
    write_trajectory_csv,
)
from .information import (
    DetectorKind,
    InfoReport,
    asymptotic_delay,
    info_matrix,
    info_multislot,
    info_multistream,
    info_number,
    info_report,
    per_slot_kl,
    threshold,
    window_size,
)
from .model import (
    ChangePointPrior,
    ClassBank,
    ExplicitPrior,
    GeometricPrior,
    IpidLaw,
    MultislotFamily,
    MultistreamConfig,
    PeriodicThresholds,
    post_change_law,
    prior_from_dict,
    prior_mass,
    survival,
    tail_exponent,
)
from .robust import (
    FiniteSlotFamily,
    IntervalSlotFamily,
    LflValidationReport,
    NoLeastFavorableError,
    UncertaintyFamily,
    dominance_check,
    select_lfl,
    validate_lfl,
)
from .simulate import (
    DrawnChange,
    FixedChange,
    InsufficientDataError,
    MonteCarloReport,
    NoChange,
    ScenarioSpec,
    WorstCaseDelayReport,
    estimate_add,
    estimate_arl,
    estimate_misclass,
    estimate_pfa,
    generate,
    generate_multistream,
    mexican_hat_wavelet,
    sample_law,
    sample_with_change,
    signal_law,
    trial_rng,
    worst_case_delay,
)
from .fit import (
    CycleSet,
    fit_gaussian,
    fit_poisson,
    median_smooth,
    read_cycles_csv,
    read_long_csv,
    resample_cycle,
    restrict_slots,
)

__version__ = "0.1.0"
