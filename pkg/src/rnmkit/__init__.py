"""Numerical toolkit for correlation kernels of the random normal matrix
model near bulk singularities.

The pieces fit together in layers: ``potential`` classifies a weight at a
point and splits it into its canonical parts, ``quadrature`` turns the
rescaled weight into measures and moment matrices, ``kernels`` builds the
limiting and finite-n correlation kernels, ``ward`` checks them against the
Ward equation, ``sampler`` draws eigenvalue configurations for Monte Carlo
cross checks, and ``experiments`` packages the standard sweeps behind the
``rnmkit`` command line.
"""

from .errors import (
    ConfigError,
    DegenerateSingularityError,
    QuadratureError,
    RankDeficientError,
    RnmError,
    RootAtZeroError,
    TruncationInsufficientError,
)
from .potential import (
    CanonicalDecomposition,
    MixedPoly,
    Potential,
    canonical_decompose,
    ginibre_potential,
    mesoscopic_scale,
    ml_potential,
    modulus,
    normalize_modulus,
)
from .quadrature import (
    HomogeneousMeasure,
    MomentMatrix,
    RadialMeasure,
    RescaledMeasure,
    cholesky_floor,
    limit_measure,
    moment_matrix,
)
from .kernels import (
    FiniteRankKernel,
    MittagLefflerKernel,
    OrthonormalBasis,
    SeriesKernel,
    berezin,
    eval_R,
    finite_n_kernel,
    gram_bergman_kernel,
    mittag_leffler_kernel,
    orthonormalize,
    series_kernel_from_measure,
)
from .ward import (
    QuadSpec,
    cauchy_transform,
    coefficient_condition_defect,
    mass_one_defect,
    radial_cauchy_decomposition,
    ward_residual,
)
from .sampler import (
    EmpiricalDensity,
    GibbsEnsemble,
    RadialBump,
    SampleSet,
    empirical_density,
    integrated_autocorr_time,
    mcmc_run,
    metropolis_accept,
    ward_identity_mc,
)
from .experiments import (
    FieldGrid,
    SweepReport,
    SweepRow,
    asymptotic_ratio_table,
    default_threads,
    field_grid,
    limit_kernel,
    parallel_map,
    regenerate,
    scale_convergence,
    universality_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "CanonicalDecomposition",
    "ConfigError",
    "DegenerateSingularityError",
    "EmpiricalDensity",
    "FieldGrid",
    "FiniteRankKernel",
    "GibbsEnsemble",
    "HomogeneousMeasure",
    "MittagLefflerKernel",
    "MixedPoly",
    "MomentMatrix",
    "OrthonormalBasis",
    "Potential",
    "QuadSpec",
    "QuadratureError",
    "RadialBump",
    "RadialMeasure",
    "RankDeficientError",
    "RescaledMeasure",
    "RnmError",
    "RootAtZeroError",
    "SampleSet",
    "SeriesKernel",
    "SweepReport",
    "SweepRow",
    "TruncationInsufficientError",
    "asymptotic_ratio_table",
    "berezin",
    "canonical_decompose",
    "cauchy_transform",
    "cholesky_floor",
    "coefficient_condition_defect",
    "default_threads",
    "empirical_density",
    "eval_R",
    "field_grid",
    "finite_n_kernel",
    "ginibre_potential",
    "gram_bergman_kernel",
    "integrated_autocorr_time",
    "limit_kernel",
    "limit_measure",
    "mass_one_defect",
    "mcmc_run",
    "mesoscopic_scale",
    "metropolis_accept",
    "mittag_leffler_kernel",
    "ml_potential",
    "modulus",
    "moment_matrix",
    "normalize_modulus",
    "orthonormalize",
    "parallel_map",
    "radial_cauchy_decomposition",
    "regenerate",
    "scale_convergence",
    "series_kernel_from_measure",
    "universality_sweep",
    "ward_identity_mc",
    "ward_residual",
]
