"""Numerical laboratory for the additive rate-distortion function of scalar
sources over a Gaussian test channel with MSE distortion."""

from . import ardf, estimation, information, numerics, refinement, sources
from .ardf import (
    RdCurve,
    RdPoint,
    ardf_at,
    ardf_curve,
    ardf_slope_at_dmax,
    ba_curve,
    blahut_arimoto_rdf,
    gaussian_rdf_rate,
    mixture_conditional_rdf,
    multiplicative_loss_sweep,
)
from .estimation import (
    ChannelPoint,
    EstimatorReport,
    conditional_mmse,
    linearity_test,
    lmmse,
    mmse,
    posterior_mean,
)
from .information import (
    MiEstimate,
    SeriesCoefficients,
    conditional_mutual_info,
    mmse_series,
    mutual_info,
    mutual_info_mc,
    mutual_info_series,
    series_coefficients,
    verify_immse,
)
from .numerics import (
    LimitEstimate,
    QuadratureResult,
    derivative,
    integrate_line,
    limit_at_zero,
    mc_mean,
    solve_monotone,
)
from .refinement import (
    RefinementComparison,
    RefinementSchedule,
    build_schedule,
    compare,
    joint_distortion,
    verify_lowrate_additivity,
)
from .sources import (
    MixtureSpec,
    SideInfoModel,
    SourceModel,
    discretize,
    finite_discrete,
    from_json_dict,
    gaussian,
    gaussian_mixture,
    load_source,
    tabulated,
    two_point,
    uniform,
)

__version__ = "0.1.0"
