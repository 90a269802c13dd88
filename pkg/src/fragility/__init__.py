"""Exceedance counts, fragility indices and cluster lengths under D-norm tail dependence."""

from fragility.cluster import (
    ClusterLengthDistribution,
    cluster_pmf,
    exchangeable_mean,
    mean_cluster_length,
    survival,
)
from fragility.dnorm import (
    DiscreteGenerator,
    DiscreteGeneratorNorm,
    DNorm,
    DNormError,
    EmpiricalGenerator,
    IIDUniformGenerator,
    IIDUniformNorm,
    LambdaNorm,
    MarshallOlkinNorm,
    MaxNorm,
    MonteCarloNorm,
    evaluate,
    make_xi_generator,
    max_moment,
    min_moment,
    norm_from_dict,
)
from fragility.exceedance import (
    UNDEFINED,
    AcdecDistribution,
    CountCoefficients,
    TailRatios,
    VanishingResult,
    acdec,
    coefficients,
    extended_fi,
    fragility_index,
    tail_mass_vanishes,
)

__version__ = "0.1.0"
