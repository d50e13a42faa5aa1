"""Action spaces, bandit-instance distributions and reward models.

Two reward mechanisms are supported, and both reduce to the same linear form
``mu = features @ theta``:

* :class:`LinearCanonicalModel`: the features are the action vectors themselves
  and ``theta`` is the bandit instance, so ``mu_a = <a, theta>``.
* :class:`KernelSampledModel`: the features are the rows of a Cholesky factor
  ``L`` of a kernel matrix and the instance is a latent standard-normal vector
  ``z``, so the outcome function is ``f = L z ~ N(0, K)``.

Keeping one representation means every downstream routine (argmax oracles,
regret estimation, Gaussian widths) works on a ``(num_actions, dim)`` feature
matrix regardless of where the rewards come from.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from bandit_subset.geometry import Partition, pairwise_euclidean

# Seed of the dedicated stream that fixes the five sphere-cluster centers.
# 11 gives a minimum pairwise center distance of about 1.0 on the unit sphere.
SPHERE_CENTER_SEED = 11

JITTER_START = 1e-10
JITTER_GROWTH = 10.0
JITTER_MAX_ESCALATIONS = 8


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# action spaces


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    count: int


@dataclass(frozen=True)
class SphereClusters:
    centers: tuple
    spread: float


@dataclass(frozen=True)
class Orthonormal:
    n: int


@dataclass(frozen=True)
class Explicit:
    pass


Provenance = Union[Grid, SphereClusters, Orthonormal, Explicit]


@dataclass(frozen=True, eq=False)
class ActionSpace:
    """Finite, indexed set of action vectors in R^n.

    Indices ``0..N-1`` are stable; every other module refers to actions by
    index only.
    """

    actions: np.ndarray
    labels: tuple | None = None
    provenance: Provenance = field(default_factory=Explicit)

    def __post_init__(self):
        actions = np.asarray(self.actions, dtype=float)
        if actions.ndim == 1:
            actions = actions[:, None]
        if actions.ndim != 2 or actions.shape[0] < 1 or actions.shape[1] < 1:
            raise ValueError("an action space needs at least one action of dimension >= 1")
        if self.labels is not None and len(self.labels) != actions.shape[0]:
            raise ValueError("one label per action is required")
        object.__setattr__(self, "actions", _frozen(actions))

    @classmethod
    def explicit(cls, actions, labels=None) -> "ActionSpace":
        return cls(np.asarray(actions, dtype=float), None if labels is None else tuple(labels))

    def __len__(self) -> int:
        return self.actions.shape[0]

    @property
    def dim(self) -> int:
        return self.actions.shape[1]

    def distance_matrix(self) -> np.ndarray:
        return pairwise_euclidean(self.actions)

    def to_csv(self, path=None) -> str:
        """Write ``idx,x0,x1,...`` rows; returns the CSV text."""
        return _matrix_csv(self.actions, path)


def _matrix_csv(matrix: np.ndarray, path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["idx"] + [f"x{j}" for j in range(matrix.shape[1])])
    for i, row in enumerate(matrix):
        writer.writerow([i] + [repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def make_grid_space(lo: float, hi: float, count: int) -> ActionSpace:
    """Evenly spaced 1-D points with both endpoints included."""
    if count < 2 or not lo < hi:
        raise ValueError(f"degenerate grid ({lo}, {hi}, {count})")
    points = np.linspace(lo, hi, count)
    return ActionSpace(points[:, None], provenance=Grid(float(lo), float(hi), int(count)))


def make_orthonormal_space(n: int) -> ActionSpace:
    if n < 1:
        raise ValueError("n must be >= 1")
    return ActionSpace(np.eye(n), provenance=Orthonormal(int(n)))


def sphere_centers(num_centers: int = 5, dim: int = 3) -> np.ndarray:
    """The fixed cluster directions, drawn from ``SPHERE_CENTER_SEED``."""
    centers = np.random.default_rng(SPHERE_CENTER_SEED).standard_normal((num_centers, dim))
    return centers / np.linalg.norm(centers, axis=1, keepdims=True)


def make_sphere_clusters(
    spread: float,
    rng: np.random.Generator,
    num_centers: int = 5,
    points_per: int = 200,
    dim: int = 3,
) -> tuple[ActionSpace, Partition]:
    """Noisy copies of fixed unit directions, projected back onto the sphere.

    Gaussian noise with standard deviation ``spread`` is added to the center
    first, then the point is normalized. Returns the space and the partition
    given by the true cluster labels, with the action nearest each center as
    reference point.
    """
    if spread <= 0:
        raise ValueError("spread must be positive")
    centers = sphere_centers(num_centers, dim)
    noise = rng.standard_normal((num_centers, points_per, dim))
    points = centers[:, None, :] + spread * noise
    points = points / np.linalg.norm(points, axis=2, keepdims=True)
    points = points.reshape(num_centers * points_per, dim)
    labels = np.repeat(np.arange(num_centers), points_per)

    space = ActionSpace(
        points,
        provenance=SphereClusters(tuple(map(tuple, centers)), float(spread)),
    )
    refs = []
    for c in range(num_centers):
        members = np.flatnonzero(labels == c)
        gap = np.linalg.norm(points[members] - centers[c], axis=1)
        refs.append(int(members[np.argmin(gap)]))
    partition = Partition.from_labels(labels, space.distance_matrix(), reference_points=refs)
    return space, partition


# ---------------------------------------------------------------------------
# bandit instances


@dataclass(frozen=True, eq=False)
class BanditInstance:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(np.ravel(self.theta)))

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


class StandardNormalInstances:
    """theta ~ N(0, I_dim)."""

    finite_support = None

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)

    def sample_batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal((size, self.dim))

    def sample(self, rng: np.random.Generator) -> BanditInstance:
        return BanditInstance(self.sample_batch(rng, 1)[0])

    def describe(self) -> dict:
        return {"kind": "standard_normal", "dim": self.dim}


class DiscreteInstances:
    """Finitely supported instance distribution (small exact fixtures).

    Exposes ``finite_support`` so expectations can be computed exactly.
    """

    def __init__(self, support, weights=None):
        support = np.atleast_2d(np.asarray(support, dtype=float))
        if weights is None:
            weights = np.full(support.shape[0], 1.0 / support.shape[0])
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (support.shape[0],) or np.any(weights < 0):
            raise ValueError("weights must be a non-negative vector, one per support point")
        if not math.isclose(weights.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("weights must sum to 1")
        self.support = _frozen(support)
        self.weights = _frozen(weights)
        self.dim = support.shape[1]

    @property
    def finite_support(self):
        return self.support, self.weights

    def sample_batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(self.support.shape[0], size=size, p=self.weights)
        return np.array(self.support[idx])

    def sample(self, rng: np.random.Generator) -> BanditInstance:
        return BanditInstance(self.sample_batch(rng, 1)[0])

    def describe(self) -> dict:
        return {
            "kind": "discrete",
            "support": self.support.tolist(),
            "weights": self.weights.tolist(),
        }


class GaussianMixtureInstances:
    """theta = means[c] + scale * N(0, I) with c drawn from ``weights``."""

    finite_support = None

    def __init__(self, means, weights, scale: float):
        self.means = _frozen(np.atleast_2d(means))
        self.weights = _frozen(weights)
        if self.weights.shape != (self.means.shape[0],):
            raise ValueError("one weight per mixture component")
        if not math.isclose(self.weights.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("weights must sum to 1")
        self.scale = float(scale)
        self.dim = self.means.shape[1]

    def sample_batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(self.means.shape[0], size=size, p=self.weights)
        return self.means[comp] + self.scale * rng.standard_normal((size, self.dim))

    def sample(self, rng: np.random.Generator) -> BanditInstance:
        return BanditInstance(self.sample_batch(rng, 1)[0])

    def describe(self) -> dict:
        return {
            "kind": "gaussian_mixture",
            "means": self.means.tolist(),
            "weights": self.weights.tolist(),
            "scale": self.scale,
        }


def sample_theta(dim: int, rng: np.random.Generator) -> BanditInstance:
    return StandardNormalInstances(dim).sample(rng)


def instance_rng(seed: int) -> np.random.Generator:
    """Stream used for one bandit instance; traces record ``seed``."""
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class RBF:
    length_scale: float = 1.0

    def __post_init__(self):
        if not self.length_scale > 0:
            raise ValueError("length scale must be positive")

    def matrix(self, x, y) -> np.ndarray:
        sq = _sq_dists(x, y)
        return np.exp(-sq / (2.0 * self.length_scale**2))


@dataclass(frozen=True)
class Gibbs:
    """Non-stationary kernel with length scale ``base + amp * exp(-|a|^2)``."""

    base: float = 0.1
    amp: float = 0.9

    def __post_init__(self):
        if not self.base > 0 or self.amp < 0:
            raise ValueError("length-scale function must stay positive")

    def length_scale(self, x) -> np.ndarray:
        x = _as_points(x)
        return self.base + self.amp * np.exp(-np.sum(x**2, axis=1))

    def matrix(self, x, y) -> np.ndarray:
        lx = self.length_scale(x)[:, None]
        ly = self.length_scale(y)[None, :]
        denom = lx**2 + ly**2
        return np.sqrt(2.0 * lx * ly / denom) * np.exp(-_sq_dists(x, y) / denom)


KernelSpec = Union[RBF, Gibbs]


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x[:, None]
    return x


def _sq_dists(x, y) -> np.ndarray:
    x, y = _as_points(x), _as_points(y)
    if x.shape[1] != y.shape[1]:
        raise ValueError("dimension mismatch")
    sq = np.sum(x**2, 1)[:, None] + np.sum(y**2, 1)[None, :] - 2.0 * x @ y.T
    return np.maximum(sq, 0.0)


def kernel_value(spec: KernelSpec, a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return float(spec.matrix(a[None, :], b[None, :])[0, 0])


def jittered_cholesky(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor of ``matrix + jitter * I`` with escalating jitter."""
    jitter = JITTER_START * float(np.mean(np.diag(matrix)))
    eye = np.eye(matrix.shape[0])
    for _ in range(JITTER_MAX_ESCALATIONS + 1):
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= JITTER_GROWTH
    raise np.linalg.LinAlgError(
        f"Cholesky failed after {JITTER_MAX_ESCALATIONS} jitter escalations (last jitter {jitter / JITTER_GROWTH:g})"
    )


# ---------------------------------------------------------------------------
# reward models


class RewardModel:
    """Shared behaviour: ``mu = features @ theta`` with a pluggable sampler."""

    features: np.ndarray
    sampler: object
    name = "model"

    @property
    def num_actions(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def rewards(self, thetas) -> np.ndarray:
        """Expected rewards of every action; ``thetas`` is (dim,) or (M, dim)."""
        thetas = np.asarray(thetas, dtype=float)
        if thetas.shape[-1] != self.dim:
            raise ValueError(f"instance dimension {thetas.shape[-1]} != model dimension {self.dim}")
        return thetas @ self.features.T

    def expected_reward(self, index: int, instance: BanditInstance) -> float:
        if not 0 <= index < self.num_actions:
            raise IndexError(f"action index {index} out of range [0, {self.num_actions})")
        if instance.dim != self.dim:
            raise ValueError("instance dimension does not match the model")
        return float(np.dot(self.features[index], instance.theta))

    def sample_instance(self, rng: np.random.Generator) -> BanditInstance:
        return self.sampler.sample(rng)

    def sample_thetas(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sampler.sample_batch(rng, size)

    def with_sampler(self, sampler) -> "RewardModel":
        raise NotImplementedError


class LinearCanonicalModel(RewardModel):
    """mu_a(theta) = <a, theta>, theta ~ N(0, I) unless another sampler is given."""

    name = "linear"

    def __init__(self, space: ActionSpace, sampler=None):
        self.space = space
        self.features = space.actions
        self.sampler = sampler if sampler is not None else StandardNormalInstances(space.dim)
        if self.sampler.dim != space.dim:
            raise ValueError("sampler dimension does not match the action space")

    def distance_matrix(self) -> np.ndarray:
        return self.space.distance_matrix()

    def with_sampler(self, sampler) -> "LinearCanonicalModel":
        return LinearCanonicalModel(self.space, sampler)

    def describe(self) -> dict:
        return {"kind": "linear", "num_actions": self.num_actions, "dim": self.dim,
                "sampler": self.sampler.describe()}


class KernelSampledModel(RewardModel):
    """Outcome functions f ~ N(0, K) over a fixed grid, realized as f = L z."""

    name = "kernel"

    def __init__(self, space: ActionSpace, kernel: KernelSpec):
        self.space = space
        self.kernel = kernel
        self.kernel_matrix = _frozen(kernel.matrix(space.actions, space.actions))
        chol, jitter = jittered_cholesky(self.kernel_matrix)
        self.cholesky_factor = _frozen(chol)
        self.jitter = jitter
        self.features = self.cholesky_factor
        self.sampler = StandardNormalInstances(len(space))

    def distance_matrix(self) -> np.ndarray:
        """Process L2 distance sqrt(k(a,a) + k(b,b) - 2 k(a,b)), never grid coordinates."""
        k = self.kernel_matrix
        d = np.diag(k)
        sq = d[:, None] + d[None, :] - 2.0 * k
        out = np.sqrt(np.maximum(sq, 0.0))
        np.fill_diagonal(out, 0.0)
        return out

    def outcome_function(self, instance: BanditInstance) -> np.ndarray:
        return self.rewards(instance.theta)

    def kernel_csv(self, path=None) -> str:
        return _matrix_csv(self.kernel_matrix, path)

    def describe(self) -> dict:
        spec = {"kind": type(self.kernel).__name__.lower(), **self.kernel.__dict__}
        return {"kind": "kernel", "num_actions": self.num_actions, "kernel": spec,
                "jitter": self.jitter}


def build_kernel_model(grid: ActionSpace | Sequence[float] | np.ndarray, spec: KernelSpec) -> KernelSampledModel:
    if not isinstance(grid, ActionSpace):
        grid = ActionSpace(np.asarray(grid, dtype=float))
    if len(np.unique(grid.actions, axis=0)) != len(grid):
        raise ValueError("kernel grid points must be distinct")
    return KernelSampledModel(grid, spec)


def expected_reward(model: RewardModel, action_index: int, instance: BanditInstance) -> float:
    return model.expected_reward(action_index, instance)


def toy_model() -> LinearCanonicalModel:
    """Three actions in R^2 with theta uniform on the two coordinate axes."""
    space = ActionSpace.explicit([[1.0, 0.0], [0.9, 0.1], [-0.1, 1.0]], labels=("a1", "a2", "a3"))
    return LinearCanonicalModel(space, DiscreteInstances([[1.0, 0.0], [0.0, 1.0]]))
