"""Lipschitz-bounded deep networks by direct parameterization.

Free parameters are mapped through a Cayley transform onto sandwich layers
whose explicit weights satisfy an LMI Lipschitz certificate by construction.
The package also provides an independent certifier, the converse
constructions, a Fourier-domain convolutional layer, a reverse-mode tape for
training and a gradient-ascent Lipschitz lower-bound estimator.
"""

from .cayley import CayleyFactors, cayley, cayley_complex, inverse_cayley
from .certify import (
    CertificateReport,
    assemble_H,
    certify_weights,
    check_certificate,
    chordal_blocks,
    weighted_spectral_report,
)
from .circconv import ConvParams, SpectrumCache, conv_dense_oracle, conv_forward, conv_realize
from .converse import linear_from_weight, params_from_lmi
from .estimator import LBDNRegressor
from .exceptions import (
    ConvergenceError,
    DimensionError,
    DivergenceError,
    DomainError,
    FormatVersionError,
    GradientError,
    InfeasibleError,
    InternalConsistencyError,
    LBDNError,
    NonInvertibleTransformError,
    SeedingError,
    SingularMatrixError,
)
from .lipest import empirical_lipschitz, tightness
from .sandwich import (
    DirectParams,
    ExplicitWeights,
    LayerParams,
    RealizedLayer,
    RealizedModel,
    explicit_forward,
    extract_weights,
    forward,
    init_params,
    random_params,
    realize,
    sandwich_apply,
)
from .train import TrainConfig, fit, lr_at, square_wave

__version__ = "0.1.0"

__all__ = [
    "CayleyFactors", "cayley", "cayley_complex", "inverse_cayley",
    "CertificateReport", "assemble_H", "certify_weights", "check_certificate", "chordal_blocks",
    "weighted_spectral_report",
    "ConvParams", "SpectrumCache", "conv_dense_oracle", "conv_forward", "conv_realize",
    "linear_from_weight", "params_from_lmi",
    "LBDNRegressor",
    "ConvergenceError", "DimensionError", "DivergenceError", "DomainError", "FormatVersionError",
    "GradientError", "InfeasibleError", "InternalConsistencyError", "LBDNError",
    "NonInvertibleTransformError", "SeedingError", "SingularMatrixError",
    "empirical_lipschitz", "tightness",
    "DirectParams", "ExplicitWeights", "LayerParams", "RealizedLayer", "RealizedModel",
    "explicit_forward", "extract_weights", "forward", "init_params", "random_params", "realize",
    "sandwich_apply",
    "TrainConfig", "fit", "lr_at", "square_wave",
]
