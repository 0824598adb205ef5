"""Parallel-in-time iterated extended and sigma-point Kalman smoothers."""
from .gaussmath import SingularMatrixError, psd_clip, spd_solve, symmetrize
from .iterated import IterationConfig, IterationError, IterationTrace, run_iterated
from .linearize import (
    LinearizationParams,
    NominalTrajectory,
    cubature_points,
    slr_linearize,
    slr_linearize_fn,
    taylor_linearize,
)
from .model import (
    StateSpaceModel,
    Trajectory,
    coordinated_turn_model,
    linear_gaussian_model,
    simulate,
)
from .parfilter import FilterElement, combine_filter, parallel_filter
from .parsmoother import SmootherElement, combine_smoother, parallel_smooth
from .scan import ScanPlan, inclusive_scan, parallel_combine_count, reverse_scan
from .sequential import Gaussian, kf_forward, rts_backward

__version__ = "0.1.0"
