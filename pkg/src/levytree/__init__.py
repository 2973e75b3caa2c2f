"""Tree graphical models for multivariate Levy processes."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ClampWarning,
    DomainError,
    LevyTreeError,
    NonUniqueTreeWarning,
    NumericalError,
    ValidationError,
)
from .measures import (  # noqa: E402
    ClaytonParams,
    HRParams,
    MarginalSpec,
    OrthantWeights,
    chi_closed_form,
    hr_bivariate_tail,
    hr_density,
    orthant_weight,
)
from .tree import (  # noqa: E402
    EdgeSpec,
    HeterogeneousStableModel,
    TreeModel,
    TreeTopology,
    dag_sem_support,
    random_tree,
    tree_metric_complete,
)
from .simulate import IncrementMatrix, SimConfig, rank_couple, sample_truncated_points, simulate_increments  # noqa: E402
from .estimate import ChiEstimate, chi_hat, empirical_cdf, gamma_hat_invert, m_hat  # noqa: E402
from .learn import LearnedTree, learn_tree, mst, recovery_study, subsample_stability  # noqa: E402
from .ci_check import HRDensity, Rectangle, factorization_residual, rectangle_ci_check  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
