"""Kernels, spectra, field synthesis and level-set geometry of random neural fields on spheres."""

from .errors import (
    ClassificationError,
    ConfigError,
    DomainError,
    NumericError,
    RangeError,
    RnfgeoError,
    SpectrumError,
)
from .kernels import (
    ActivationSpec,
    Calibration,
    KernelClass,
    KernelProfile,
    Regime,
    classify,
    compose_kernel,
    estimate_cri,
    kappa_prime_at_one,
    regime,
)
from .spectral import (
    PowerSpectrum,
    compute_spectrum,
    estimate_spectral_index,
    explained_variance,
    gegenbauer_eval,
    gegenbauer_integral,
    n_harmonics,
)
from .synthesis import FieldRealization, HarmonicCoefficients, SphericalGrid, sample_coefficients, synthesize
from .geometry import extract_level_set, length_vs_resolution, mean_nodal_length, theoretical_length
from .network import NetworkArchitecture, empirical_kernel, evaluate, sample_network

__version__ = "0.1.0"
