"""Representative action-subset selection for families of stochastic bandits."""

from bandit_subset.reward_model import (
    ActionSpace,
    BanditInstance,
    DiscreteInstances,
    GaussianMixtureInstances,
    Gibbs,
    KernelSampledModel,
    LinearCanonicalModel,
    RBF,
    StandardNormalInstances,
    build_kernel_model,
    expected_reward,
    kernel_value,
    make_grid_space,
    make_orthonormal_space,
    make_sphere_clusters,
    sample_theta,
)
from bandit_subset.selection import (
    DistinctCount,
    Exact,
    Iterations,
    SelectionResult,
    ThompsonApprox,
    epsilon_net_select,
    exact_argmax,
    thompson_argmax,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSpace",
    "BanditInstance",
    "DiscreteInstances",
    "DistinctCount",
    "Exact",
    "GaussianMixtureInstances",
    "Gibbs",
    "Iterations",
    "KernelSampledModel",
    "LinearCanonicalModel",
    "RBF",
    "SelectionResult",
    "StandardNormalInstances",
    "ThompsonApprox",
    "build_kernel_model",
    "epsilon_net_select",
    "exact_argmax",
    "expected_reward",
    "kernel_value",
    "make_grid_space",
    "make_orthonormal_space",
    "make_sphere_clusters",
    "sample_theta",
    "thompson_argmax",
]
