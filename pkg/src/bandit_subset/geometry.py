"""Metric and measure machinery: nets, partitions, importance, and bound evaluators.

Functions here take precomputed distance matrices where a metric is needed,
so the same code serves Euclidean action spaces and kernel models (whose
metric is the process L2 distance). Models are used through duck typing:
anything with ``features``, ``rewards`` and ``sample_thetas`` works.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from bandit_subset.stats import MeanEstimate

DEFAULT_C = 3.0
DEFAULT_LOWER_C = 0.1
COVERING_THRESHOLD_C = 0.5
EXACT_COVER_MAX_POINTS = 20
_CHUNK = 4096


def pairwise_euclidean(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    sq = np.sum(points**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    out = np.sqrt(np.maximum(d2, 0.0))
    np.fill_diagonal(out, 0.0)
    return out


def l2_distance(a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def diameter(dist: np.ndarray, members=None) -> float:
    if members is not None:
        members = np.asarray(members, dtype=int)
        dist = dist[np.ix_(members, members)]
    return float(dist.max()) if dist.size else 0.0


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Partition:
    """Disjoint clusters of action indices covering ``0..N-1``."""

    clusters: tuple
    diameters: tuple
    reference_points: tuple | None = None

    @classmethod
    def from_labels(cls, labels, dist: np.ndarray, reference_points=None) -> "Partition":
        labels = np.asarray(labels, dtype=int)
        if labels.shape != (dist.shape[0],):
            raise ValueError("one label per action is required")
        order = np.unique(labels)
        clusters = tuple(tuple(int(i) for i in np.flatnonzero(labels == c)) for c in order)
        diams = tuple(diameter(dist, c) for c in clusters)
        refs = None if reference_points is None else tuple(int(r) for r in reference_points)
        part = cls(clusters, diams, refs)
        part.validate(dist)
        return part

    @classmethod
    def single(cls, dist: np.ndarray) -> "Partition":
        return cls.from_labels(np.zeros(dist.shape[0], dtype=int), dist)

    @property
    def epsilon(self) -> float:
        return max(self.diameters)

    @property
    def num_actions(self) -> int:
        return sum(len(c) for c in self.clusters)

    def __len__(self) -> int:
        return len(self.clusters)

    @property
    def labels(self) -> np.ndarray:
        out = np.empty(self.num_actions, dtype=int)
        for k, members in enumerate(self.clusters):
            out[list(members)] = k
        return out

    def validate(self, dist: np.ndarray, radius: float | None = None) -> None:
        """Raise ``ValueError`` if any structural invariant is broken.

        ``radius`` defaults to ``epsilon``; reference balls are closed.
        """
        flat = [i for c in self.clusters for i in c]
        if any(len(c) == 0 for c in self.clusters):
            raise ValueError("empty cluster")
        if sorted(flat) != list(range(dist.shape[0])):
            raise ValueError("clusters must be a disjoint cover of all action indices")
        for c, d in zip(self.clusters, self.diameters):
            if abs(diameter(dist, c) - d) > 1e-12:
                raise ValueError("stored diameter disagrees with the metric")
        if self.reference_points is not None:
            if len(self.reference_points) != len(self.clusters):
                raise ValueError("one reference point per cluster is required")
            eps = self.epsilon if radius is None else radius
            for c, r in zip(self.clusters, self.reference_points):
                if np.any(dist[r, list(c)] > eps + 1e-12):
                    raise ValueError("cluster is not inside the ball around its reference point")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["idx", "cluster"])
        for i, c in enumerate(self.labels):
            writer.writerow([i, int(c)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def greedy_epsilon_net(dist: np.ndarray, eps: float, start: int = 0) -> list[int]:
    """Farthest-point greedy net: every point ends up strictly within ``eps``.

    The size upper-bounds the covering number; it is not claimed minimal.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    net = [int(start)]
    nearest = dist[start].copy()
    while True:
        far = int(np.argmax(nearest))
        if nearest[far] < eps:
            return net
        net.append(far)
        np.minimum(nearest, dist[far], out=nearest)


def is_geometric_net(dist: np.ndarray, net, eps: float) -> bool:
    net = list(net)
    return bool(net) and bool(np.all(dist[net].min(axis=0) < eps))


def exact_covering_number(dist: np.ndarray, eps: float) -> int:
    """Smallest net drawn from the action set itself; exhaustive, small N only."""
    n = dist.shape[0]
    if n > EXACT_COVER_MAX_POINTS:
        raise ValueError(f"exhaustive covering search limited to {EXACT_COVER_MAX_POINTS} points")
    close = dist < eps
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            if np.all(close[list(subset)].any(axis=0)):
                return size
    return n


def partition_from_net(dist: np.ndarray, net: Sequence[int]) -> Partition:
    """Voronoi cells around the net points; ties go to the lowest action index."""
    net = sorted(int(i) for i in net)
    if not net:
        raise ValueError("net must be non-empty")
    # argmin over sorted columns returns the lowest-index net point on ties
    labels = np.argmin(dist[:, net], axis=1)
    part = Partition.from_labels(labels, dist)
    # each reference is a member of its own cell, so the closed eps-ball check
    # in validate() holds with eps = max diameter
    part = Partition(part.clusters, part.diameters, tuple(net[k] for k in np.unique(labels)))
    part.validate(dist)
    return part


# ---------------------------------------------------------------------------
# importance measure


@dataclass(frozen=True)
class ImportanceEstimate:
    counts: tuple
    samples: int

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.samples

    @property
    def standard_errors(self) -> np.ndarray:
        p = self.frequencies
        return np.sqrt(p * (1.0 - p) / self.samples)

    def merge(self, other: "ImportanceEstimate") -> "ImportanceEstimate":
        counts = tuple(a + b for a, b in zip(self.counts, other.counts))
        return ImportanceEstimate(counts, self.samples + other.samples)


def optimal_actions(model, thetas: np.ndarray) -> np.ndarray:
    """Exact argmax per row of ``thetas``; lowest index wins ties."""
    return np.argmax(model.rewards(thetas), axis=1)


def estimate_importance(model, partition: Partition, samples: int, rng: np.random.Generator) -> ImportanceEstimate:
    if samples < 1:
        raise ValueError("need at least one sample")
    labels = partition.labels
    counts = np.zeros(len(partition), dtype=np.int64)
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        best = optimal_actions(model, model.sample_thetas(rng, size))
        counts += np.bincount(labels[best], minlength=len(partition))
        done += size
    return ImportanceEstimate(tuple(int(c) for c in counts), samples)


def check_measure_net(subset, partition: Partition, importance: ImportanceEstimate, eps: float) -> bool:
    """True iff every cluster with estimated mass above ``eps`` meets ``subset``."""
    chosen = set(int(i) for i in subset)
    freqs = importance.frequencies
    return all(
        not (freq > eps) or bool(chosen.intersection(members))
        for members, freq in zip(partition.clusters, freqs)
    )


def coverage_probability(eps: float, k: int) -> float:
    """Lower bound on the chance that k samples form a measure eps-net."""
    return 1.0 - math.exp(-k * eps) / eps


def separation_violation_rate(model, partition: Partition, samples: int, rng: np.random.Generator) -> float:
    """Fraction of instances where some member of the winning cluster loses to an outsider."""
    labels = partition.labels
    violations = 0
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        mu = model.rewards(model.sample_thetas(rng, size))
        best_cluster = labels[np.argmax(mu, axis=1)]
        for k, members in enumerate(partition.clusters):
            rows = best_cluster == k
            if not rows.any():
                continue
            inside = mu[np.ix_(rows, list(members))].min(axis=1)
            outside_idx = np.flatnonzero(labels != k)
            if outside_idx.size == 0:
                continue
            outside = mu[np.ix_(rows, outside_idx)].max(axis=1)
            violations += int(np.sum(inside < outside))
        done += size
    return violations / samples


# ---------------------------------------------------------------------------
# Gaussian widths and expected maxima


def gaussian_width_mc(model, cluster, reference: int | None, samples: int, rng: np.random.Generator) -> MeanEstimate:
    """Monte-Carlo E max_{a in cluster} (mu_a - mu_ref); plain E max without a reference."""
    cluster = np.asarray(cluster, dtype=int)
    if cluster.size == 0 or samples < 1:
        raise ValueError("need a non-empty cluster and at least one sample")
    feats = np.asarray(model.features)[cluster]
    if reference is not None:
        feats = feats - np.asarray(model.features)[reference]
    est = None
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        vals = (model.sample_thetas(rng, size) @ feats.T).max(axis=1)
        chunk = MeanEstimate.from_samples(vals)
        est = chunk if est is None else est.merge(chunk)
        done += size
    return est


def second_moment_mc(model, samples: int, rng: np.random.Generator) -> MeanEstimate:
    """Monte-Carlo E max_a mu_a^2 over the full action set."""
    est = None
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        vals = (model.rewards(model.sample_thetas(rng, size)) ** 2).max(axis=1)
        chunk = MeanEstimate.from_samples(vals)
        est = chunk if est is None else est.merge(chunk)
        done += size
    return est


def max_gaussian_upper(sigma: float, count: int) -> float:
    """E max of ``count`` centered Gaussians with marginal sd <= sigma."""
    return sigma * math.sqrt(2.0 * math.log(count)) if count > 1 else 0.0


def iid_max_lower(count: int, sigma: float = 1.0) -> float:
    """Lower bound on E max of ``count`` i.i.d. N(0, sigma^2) variables."""
    return sigma * math.sqrt(math.log(count)) / math.sqrt(math.pi * math.log(2.0))


def width_upper_bound(dist: np.ndarray, cluster, reference: int | None) -> float:
    """sigma * sqrt(2 ln |r|), sigma the largest distance to the reference.

    Without a reference sigma is the cluster diameter, which bounds the
    increments mu_a - mu_b.
    """
    cluster = list(cluster)
    sigma = float(dist[reference, cluster].max()) if reference is not None else diameter(dist, cluster)
    return max_gaussian_upper(sigma, len(cluster))


# ---------------------------------------------------------------------------
# sampling correction


def expected_miss_mass(q, power: float) -> float:
    """sum_r q(r) (1 - q(r))^power."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or not math.isclose(q.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("q must be a probability vector")
    return float(np.sum(q * (1.0 - q) ** power))


def sampling_correction(q, k: int) -> float:
    """E_q[(1 - q(r))^{2K}], the chance-weighted cluster miss term."""
    return expected_miss_mass(q, 2 * k)


def miss_mass_maximum(m: int, power: int) -> float:
    """Closed-form max of sum q (1-q)^power over the m-simplex when m >= power + 1."""
    if m < power + 1:
        raise ValueError("closed form requires m >= power + 1")
    return (1.0 - 1.0 / m) ** power


def miss_mass_worst_case(m: int, power: int) -> float:
    """Upper bound m/(p+1) (p/(p+1))^p valid for every m."""
    return m / (power + 1) * (power / (power + 1)) ** power


def simplex_grid_max(m: int, power: int, step: float = 0.01) -> tuple[float, np.ndarray]:
    """Maximum of sum q (1-q)^power over the simplex grid with spacing ``step``.

    Exact over the grid via dynamic programming on integer units; entries
    equal to 1 are excluded (each q(r) must lie in [0, 1)).
    """
    units = int(round(1.0 / step))
    grid = np.arange(units + 1) / units
    f = grid * (1.0 - grid) ** power
    f[units] = -np.inf
    best = f.copy()
    choice = [np.arange(units + 1)]
    for _ in range(m - 1):
        new = np.full(units + 1, -np.inf)
        arg = np.zeros(units + 1, dtype=int)
        for s in range(units + 1):
            cand = f[: s + 1] + best[s::-1]
            j = int(np.argmax(cand))
            new[s], arg[s] = cand[j], j
        best = new
        choice.append(arg)
    # backtrack
    q = []
    s = units
    for arg in reversed(choice[1:]):
        j = int(arg[s])
        q.append(j)
        s -= j
    q.append(s)
    return float(best[units]), np.array(q[::-1]) / units


# ---------------------------------------------------------------------------
# bound reports


@dataclass
class BoundReport:
    """A computed bound next to the Monte-Carlo regret it is compared with."""

    name: str
    kind: str
    value: float
    components: dict = field(default_factory=dict)
    regret: MeanEstimate | None = None
    se_multiplier: float = 2.0

    @property
    def verdict(self) -> bool | None:
        if self.regret is None:
            return None
        slack = self.se_multiplier * self.regret.standard_error
        if self.kind == "upper":
            return bool(self.regret.mean - slack <= self.value)
        return bool(self.regret.mean + slack >= self.value)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "value": self.value,
            "components": {k: _jsonable(v) for k, v in self.components.items()},
            "regret": None if self.regret is None else self.regret.as_dict(),
            "se_multiplier": self.se_multiplier,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, MeanEstimate):
        return value.as_dict()
    return value


def _log_term(eps: float, m: int, c: float) -> float:
    return c * eps * math.sqrt(math.log(m)) if m > 1 else 0.0


def reference_set_bounds(widths: Sequence[float], m: int, eps: float, c: float = DEFAULT_C) -> tuple[float, float]:
    """Reference-set regret band: (max width + c eps sqrt(ln m), min width - c eps sqrt(ln m))."""
    widths = np.asarray(widths, dtype=float)
    term = _log_term(eps, m, c)
    return float(widths.max() + term), float(widths.min() - term)


def net_upper_bound(
    widths: Sequence[float],
    m: int,
    eps: float,
    correction: float,
    second_moment: float,
    c: float = DEFAULT_C,
    regret: MeanEstimate | None = None,
    se_multiplier: float = 2.0,
) -> BoundReport:
    widths = np.asarray(widths, dtype=float)
    values = [widths.max(), _log_term(eps, m, c), math.sqrt(correction * second_moment)]
    if not all(math.isfinite(v) for v in values):
        raise ValueError("bound components must be finite")
    return BoundReport(
        "net_upper",
        "upper",
        float(sum(values)),
        {
            "width_term": float(values[0]),
            "log_term": float(values[1]),
            "correction_term": float(values[2]),
            "correction": correction,
            "second_moment": second_moment,
            "m": m,
            "epsilon": eps,
            "C": c,
        },
        regret,
        se_multiplier,
    )


def covering_bound(
    dist: np.ndarray,
    eps: float,
    k: int,
    dim: int,
    c: float = DEFAULT_C,
    threshold_c: float = COVERING_THRESHOLD_C,
    regret: MeanEstimate | None = None,
    se_multiplier: float = 2.0,
) -> BoundReport:
    """Worst-case bound driven by the greedy covering estimate at scale ``eps``.

    The K threshold is ``threshold_c * (M^2 N / (eps^2 e) - 1)`` with M the
    diameter and N the greedy net size.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    n_actions = dist.shape[0]
    net = greedy_epsilon_net(dist, eps)
    cover = len(net)
    big_m = diameter(dist)
    threshold = threshold_c * (big_m**2 * cover / (eps**2 * math.e) - 1.0)
    width_factor = min(math.sqrt(dim), math.sqrt(0.5 * math.log(n_actions)) + 4.0)
    value = 2.0 * eps * width_factor + _log_term(eps, cover, c)
    return BoundReport(
        "covering",
        "upper",
        float(value),
        {
            "covering_estimate": cover,
            "diameter": big_m,
            "k_threshold": threshold,
            "k": k,
            "k_condition_met": bool(k >= threshold),
            "width_factor": width_factor,
            "epsilon": eps,
            "C": c,
        },
        regret,
        se_multiplier,
    )


def covering_threshold(dist: np.ndarray, eps: float, threshold_c: float = COVERING_THRESHOLD_C) -> int:
    cover = len(greedy_epsilon_net(dist, eps))
    raw = threshold_c * (diameter(dist) ** 2 * cover / (eps**2 * math.e) - 1.0)
    return max(1, math.ceil(raw))


def net_lower_bound(
    min_width: float,
    m: int,
    eps: float,
    correction: float,
    c: float = DEFAULT_C,
    c_lower: float = DEFAULT_LOWER_C,
) -> float:
    """c_lower * sqrt(correction) * (min width - c eps sqrt(ln m)), floored at zero."""
    return max(0.0, c_lower * math.sqrt(correction) * (min_width - _log_term(eps, m, c)))


def iid_case_bounds(n: int, subset_size: int) -> tuple[float, float]:
    """Regret band for any subset of size s among n i.i.d. standard normal actions (natural logs)."""
    if n < 2 or not 1 <= subset_size <= n:
        raise ValueError("need n >= 2 and 1 <= subset_size <= n")
    lower = iid_max_lower(n) - max_gaussian_upper(1.0, subset_size)
    upper = max_gaussian_upper(1.0, n) - iid_max_lower(subset_size)
    return lower, upper
