"""Discrete least-squares fitting of differential forms by averaging currents.

Modules
-------
exterior    multi-(co)vectors, wedge, compounds and the comass norm
simplicial  oriented simplices, chains, bodies, quadrature and averaging currents
spaces      Whitney and polynomial form spaces
fitting     Vandermonde systems, orthonormal bases, projector and interpolation
lebesgue    zero-norm and Lebesgue-constant estimators
mapping     pullback, renormalized configurations and transfer factors
cli         experiment driver
"""

from .errors import (
    ComassError,
    DegenerateSimplexError,
    DimensionError,
    FormcalcError,
    MappingError,
    NotDetermining,
    NotUnisolvent,
    NumericalFailure,
    QuadratureError,
    SamplingError,
)
from .exterior import (
    ComassOptions,
    MultiCovector,
    MultiVector,
    comass,
    comass_batch,
    compound_matrix,
    euclidean_norm,
    pairing,
    simple_vector,
    wedge,
)
from .fitting import (
    BumpForm,
    CurrentConfig,
    FittedBasis,
    KernelRep,
    OpNormOptions,
    gram,
    interpolate,
    kernel,
    lagrange_basis,
    operator_norm_lower_bound,
    orthonormalize,
    project,
    riesz_representer,
    vandermonde,
)
from .lebesgue import (
    EstimatorOptions,
    SupremumEstimate,
    lebesgue_continuity_probe,
    lebesgue_estimate,
    lebesgue_function,
    zero_norm_estimate,
)
from .mapping import (
    MapSpec,
    TransferFactors,
    measure_sandwich_check,
    pullback,
    pushforward_simplex,
    renormalize,
    theorem2_chain_check,
    transfer_factors,
)
from .simplicial import (
    AveragingCurrent,
    Body,
    Chain,
    OrientedSimplex,
    QuadratureRule,
    SamplingOptions,
    apply_current,
    hausdorff_measure,
    integrate,
    sample_averaging_current,
)
from .spaces import (
    BarycentricFrame,
    CallableForm,
    FormField,
    FormSpace,
    PolyForm,
    evaluate,
    face_currents,
    polynomial_basis,
    whitney_basis,
)

__version__ = "0.1.0"

__all__ = [
    "ComassError",
    "DegenerateSimplexError",
    "DimensionError",
    "FormcalcError",
    "MappingError",
    "NotDetermining",
    "NotUnisolvent",
    "NumericalFailure",
    "QuadratureError",
    "SamplingError",
    "ComassOptions",
    "MultiCovector",
    "MultiVector",
    "comass",
    "comass_batch",
    "compound_matrix",
    "euclidean_norm",
    "pairing",
    "simple_vector",
    "wedge",
    "BumpForm",
    "CurrentConfig",
    "FittedBasis",
    "KernelRep",
    "OpNormOptions",
    "gram",
    "interpolate",
    "kernel",
    "lagrange_basis",
    "operator_norm_lower_bound",
    "orthonormalize",
    "project",
    "riesz_representer",
    "vandermonde",
    "EstimatorOptions",
    "SupremumEstimate",
    "lebesgue_continuity_probe",
    "lebesgue_estimate",
    "lebesgue_function",
    "zero_norm_estimate",
    "MapSpec",
    "TransferFactors",
    "measure_sandwich_check",
    "pullback",
    "pushforward_simplex",
    "renormalize",
    "theorem2_chain_check",
    "transfer_factors",
    "AveragingCurrent",
    "Body",
    "Chain",
    "OrientedSimplex",
    "QuadratureRule",
    "SamplingOptions",
    "apply_current",
    "hausdorff_measure",
    "integrate",
    "sample_averaging_current",
    "BarycentricFrame",
    "CallableForm",
    "FormField",
    "FormSpace",
    "PolyForm",
    "evaluate",
    "face_currents",
    "polynomial_basis",
    "whitney_basis",
]
