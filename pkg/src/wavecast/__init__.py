"""Online prediction of linear dynamical systems with phase-modulated wave-filters."""
from .hankel import FilterBank, build_hankel, compute_filter_bank, filter_l1_diagnostic, hankel_entry
from .lds import (
    LinearDynamicalSystem,
    NoiseSchedule,
    SystemBounds,
    diagonalize,
    gaussian_inputs,
    make_noise_schedule,
    random_rotation_lds,
    random_stable_lds,
    simulate,
)
from .pseudo_lds import (
    Dims,
    FeatureMap,
    FeatureVector,
    PseudoLDS,
    SeriesHistory,
    composite_norm,
    compute_features,
    gradient,
    loss,
    mixed_norm_2q,
    predict,
    regularizer,
)
from .learner import LearnerConfig, ftrl_step, project_onto_ball, regret_accounting, ridge_step
from .compilers import ar_compile, min_phase_polynomial, mu_vector, wavefilter_compile

__version__ = "0.1.0"
