"""Exact arithmetic and digit statistics for theta-expansions with theta^2 = 1/m."""

__version__ = "0.1.0"

from .quadfield import FieldMismatchError, QuadRat, Rational  # noqa: F401
from .expansion import (  # noqa: F401
    ConvergentPair,
    Cylinder,
    DigitSeq,
    EarlyTermination,
    TERMINATED,
    TRUNCATED,
    ThetaParams,
    convergents,
    cylinder,
    evaluate,
    expand,
    expand_ratio,
    first_digit,
    step,
)
from .measure import (  # noqa: F401
    MeasureValue,
    MixRate,
    child_ratio,
    gamma_cdf,
    gamma_cyl,
    gamma_density,
    gamma_quantile,
    lambda_cyl,
    mixing_rate,
    tail_p,
)
from .simulate import (  # noqa: F401
    ExceedanceCount,
    LilStatistic,
    RandomBits,
    SimConfig,
    StationarySampler,
    ThresholdFn,
    Trajectory,
    count_exceedances,
    lil_statistic,
    sample_stationary,
    simulate_trajectory,
)
from .evt import (  # noqa: F401
    DigitEvent,
    EmpiricalCDF,
    MixingEstimate,
    exact_max_law,
    frechet_cdf,
    mixing_probe,
    rate_probe,
    scaled_max_law,
)
