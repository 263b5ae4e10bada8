"""Trajectory-driven letterform generation: mixture-model generalization,
a small backpropagation network for new letter variants, and simplified
vector art from recorded 3D tool paths."""

__version__ = "0.1.0"

from .trajectory import (  # noqa: E402
    BoundingBox,
    Trajectory,
    TrajectoryError,
    bounding_box,
    check_unit_range,
    format_trajectory,
    normalize_to_unit,
    parse_trajectory,
    resample_by_arclength,
)
from .gmm import (  # noqa: E402
    FitReport,
    GmmModel,
    extract_generalized_curve,
    fit_gmm,
    generalize_letter,
    log_likelihood,
)
from .neural import (  # noqa: E402
    MlpModel,
    PairDataset,
    TrainConfig,
    TrainReport,
    build_pairs,
    extrude_z,
    forward,
    generate_letter,
    init_mlp,
    split_train_test,
    train,
    train_cost,
)
from .biopsy import (  # noqa: E402
    ProjectionPlane,
    SplineCurve,
    interpolate_spline,
    project,
    sample_curve,
    simplify_rdp,
)
from .vectorize import VectorPath, export_svg, fit_bezier, to_dotted  # noqa: E402
