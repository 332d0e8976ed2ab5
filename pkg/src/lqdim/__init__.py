"""L^q dimensions, convolutions and regularity of dyadic measures on the line."""

from .core import (
    INFINITY,
    DimensionEstimate,
    DyadicMeasure,
    DyadicSet,
    ball_mass,
    ball_masses,
    convolve,
    convolve_many,
    density_lq_norm,
    discretize,
    linf_dimension_estimate,
    linf_exponent,
    linf_norm,
    lq_dimension_estimate,
    lq_exponent,
    lq_norm,
    normalize_to_unit,
)
from .errors import (
    DegenerateInputError,
    InvalidArgumentError,
    LqdimError,
    PreconditionUnmet,
    ResourceLimitError,
    SpecInvalidError,
)
from .generators import (
    AffineMap,
    DigitPatternSpec,
    DiracSpec,
    ExplicitSpec,
    IFSSpec,
    LebesgueSpec,
    MeasureSpec,
    MoranSpec,
    MoranStage,
    ahlfors_constant,
    central_cantor,
    construction_intervals,
    factorial_blocks,
    generate,
    generate_ahlfors_example,
    generate_digit_blocks,
    generate_set,
    middle_thirds,
    sparse_digit_spec,
    spec_from_dict,
    spec_from_json,
    spec_to_json,
    validate_moran,
)
from .regularity import (
    RegularityReport,
    ahlfors_porosity_k,
    ahlfors_to_up_constants,
    check_ahlfors,
    check_doubling,
    check_dyadic_porosity,
    check_gap_chain,
    check_set_uniformly_perfect,
    check_uniformly_perfect,
    doubling_up_constants,
    estimate_lower_dimension,
    fit_ahlfors,
    fit_uniform_perfectness,
    regularity_report,
)
from .sumsets import (
    DerivationTree,
    ThicknessReport,
    astels_check,
    box_dimension_estimate,
    derive_thickness,
    interval_detect,
    lowerdim_to_up,
    nfold_sumset_experiment,
    sumset,
    thickness_to_up,
    up_to_lowerdim,
    up_to_thickness,
)
from .uniformity import (
    COUNT,
    LQ_NORM,
    UniformTree,
    branching_profile,
    branching_scale_set,
    is_uniform,
    saturation_check,
    uniformize,
)

__version__ = "0.1.0"
