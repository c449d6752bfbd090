"""Numerical laboratory for uniformly convex geodesic metric spaces.

Submodules: :mod:`~uconvex.spaces` (geodesic spaces), :mod:`~uconvex.means`
(p-means and Orlicz means), :mod:`~uconvex.convexity` (randomized
convexity checks and moduli), :mod:`~uconvex.sets` (hulls and
projections), :mod:`~uconvex.transport` (exact optimal transport),
:mod:`~uconvex.barycenters` and :mod:`~uconvex.sequences`.
"""

__version__ = "0.1.0"

from .barycenters import (  # noqa: E402
    BarycenterResult,
    barycenter_median,
    barycenter_orlicz,
    barycenter_p,
    circumcenter,
    fw_objective,
    jensen_contraction_check,
    variance,
)
from .convexity import (  # noqa: E402
    ModulusTable,
    check_busemann,
    check_clarkson,
    check_nearly_uniform,
    check_p_convexity,
    check_p_implies_pprime,
    estimate_modulus,
)
from .means import INF, OrliczFunction, l_mean, orlicz_mean, p_mean  # noqa: E402
from .reports import CheckReport  # noqa: E402
from .sequences import (  # noqa: E402
    SequenceSpec,
    asymptotic_center,
    banach_saks_experiment,
    coconvex_limit_probe,
    cone_counterexample_demo,
    dyadic_merge_probe,
    opial_check,
    weak_seq_limit_test,
)
from .sets import build_hull, dist_to_set, hull_distance, project_to_segment  # noqa: E402
from .spaces import ConePoint, Euclidean, EuclideanCone, LpSpace, ProductSpace, cone_ray_projection, parse_space  # noqa: E402
from .transport import DiscreteMeasure, wasserstein_inf, wasserstein_p  # noqa: E402
