"""Normal and Edgeworth approximations for the sum of a simple random sample
drawn without replacement from a finite population of independent lattice
random elements, with exact oracles to check them against."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExceeded,
    CombinatorialOverflow,
    DegenerateDesign,
    NotScorePopulation,
    QuadratureFailure,
    RangeWarning,
    SampleSumError,
    SpecError,
    TooLarge,
    UnsupportedOrder,
    ZeroSpread,
    ZeroVariance,
)
from .population import (  # noqa: E402
    Design,
    LatticeDistribution,
    Population,
    PopulationElement,
    lindeberg,
    load_spec,
    moment_summary,
    population_from_spec,
    ratio_summary,
    score_summary,
)
from .expansion import (  # noqa: E402
    cdf_approximant,
    chf_approximant,
    edgeworth,
    q_series,
    score_cdf_approximant,
)
from .charfn import ChfEvaluator, hypergeometric_factor  # noqa: E402
from .oracle import (  # noqa: E402
    enumerate_subsets,
    exact_distribution,
    exact_moments,
    sample_srswor,
)
from .deviations import (  # noqa: E402
    TailRatioModel,
    ld_coefficients_general,
    ld_coefficients_scores,
    tail_ratio,
)
from .diagnostics import (  # noqa: E402
    chi_bounds,
    diagnostics_report,
    moment_expansion_check,
    rate_terms,
    sup_distance,
)
