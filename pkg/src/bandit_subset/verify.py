"""Numerical checks of the coverage lemma, the regret bounds and the width bounds.

Each ``check_*`` function returns a :class:`CheckResult`; ``holds`` is True
only when every inequality it tests points the right way.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from bandit_subset import geometry
from bandit_subset.evaluation import estimate_regret
from bandit_subset.geometry import BoundReport, Partition
from bandit_subset.reward_model import (
    ActionSpace,
    GaussianMixtureInstances,
    LinearCanonicalModel,
    RBF,
    build_kernel_model,
    make_grid_space,
    make_orthonormal_space,
    make_sphere_clusters,
)
from bandit_subset.selection import Exact, Iterations, epsilon_net_select
from bandit_subset.stats import MeanEstimate

CHECKS = ("lemma1", "thm1", "thm2", "thm3", "thm5", "lemma_maxq", "iid_band", "widths")
MAX_SEPARATION_VIOLATION = 0.01


@dataclass
class CheckResult:
    name: str
    holds: bool
    details: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "check": self.name,
            "holds": self.holds,
            "details": {k: geometry._jsonable(v) for k, v in self.details.items()},
            "reports": [r.as_dict() for r in self.reports],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def load_preset(spec: str, rng: np.random.Generator):
    """``sphere:<spread>`` or ``rbf-grid:<n>:<length_scale>`` -> (model, partition or None)."""
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "sphere" and len(parts) == 1:
            space, partition = make_sphere_clusters(float(parts[0]), rng)
            return LinearCanonicalModel(space), partition
        if kind == "rbf-grid" and len(parts) == 2:
            model = build_kernel_model(make_grid_space(-5.0, 5.0, int(parts[0])), RBF(float(parts[1])))
            return model, None
    except ValueError as exc:
        raise ValueError(f"bad preset {spec!r}: {exc}") from None
    raise ValueError(f"unknown preset {spec!r}; expected sphere:<spread> or rbf-grid:<n>:<l>")


def _cluster_widths(model, partition: Partition, samples: int, rng) -> list[MeanEstimate]:
    refs = partition.reference_points or [None] * len(partition)
    return [geometry.gaussian_width_mc(model, c, r, samples, rng) for c, r in zip(partition.clusters, refs)]


# ---------------------------------------------------------------------------
# coverage


def coverage_model(weights=(0.35, 0.3, 0.25, 0.1), per_cluster: int = 3, separation: float = 5.0,
                 jitter: float = 0.05, seed: int = 0):
    """Four tight clusters around the basis vectors; theta favors cluster c with probability weights[c]."""
    m = len(weights)
    rng = np.random.default_rng(seed)
    centers = np.eye(m)
    points = np.repeat(centers, per_cluster, axis=0) + jitter * rng.standard_normal((m * per_cluster, m))
    labels = np.repeat(np.arange(m), per_cluster)
    sampler = GaussianMixtureInstances(separation * centers, np.asarray(weights, dtype=float), 1.0)
    model = LinearCanonicalModel(ActionSpace(points), sampler)
    partition = Partition.from_labels(labels, model.distance_matrix())
    return model, partition


def check_coverage(eps: float = 0.2, k: int = 30, runs: int = 2000, seed: int = 0,
                 importance_samples: int = 10**5) -> CheckResult:
    """Pass rate of the measure-net property over independent runs of the epsilon-net loop."""
    rng = np.random.default_rng(seed)
    model, partition = coverage_model()
    q = geometry.estimate_importance(model, partition, importance_samples, rng)
    passes = 0
    for _ in range(runs):
        sel = epsilon_net_select(model, Exact(), Iterations(k), rng)
        passes += geometry.check_measure_net(sel.chosen, partition, q, eps)
    rate = passes / runs
    p0 = geometry.coverage_probability(eps, k)
    se = math.sqrt(max(p0 * (1.0 - p0), 0.0) / runs)
    return CheckResult("lemma1", bool(rate >= p0 - 3.0 * se), {
        "pass_rate": rate, "runs": runs, "coverage_probability": p0, "binomial_se": se,
        "importance": q.frequencies, "eps": eps, "k": k,
    })


def check_max_correction(m: int, k: int, step: float = 0.01) -> CheckResult:
    """Compare the grid maximum of sum q (1-q)^K with its closed form."""
    grid, argmax = geometry.simplex_grid_max(m, k, step)
    uniform = geometry.expected_miss_mass(np.full(m, 1.0 / m), k)
    details = {"m": m, "k": k, "grid_max": grid, "grid_argmax": argmax, "uniform_value": uniform}
    if m >= k + 1:
        closed = geometry.miss_mass_maximum(m, k)
        details["closed_form"] = closed
        holds = abs(closed - grid) <= 1e-3 and grid <= closed + 1e-12
    else:
        worst = geometry.miss_mass_worst_case(m, k)
        details["worst_case_bound"] = worst
        holds = grid <= worst + 1e-12
    return CheckResult("lemma_maxq", bool(holds), details)


# ---------------------------------------------------------------------------
# widths


def check_iid_band(sizes=(2, 8, 64), samples: int = 10**5, seed: int = 0,
                   band_n: int = 16, band_s: int = 4) -> CheckResult:
    """E max of n i.i.d. normals against its band; subset regret against the i.i.d. regret band."""
    rng = np.random.default_rng(seed)
    holds = True
    rows = []
    for n in sizes:
        model = LinearCanonicalModel(make_orthonormal_space(n))
        est = geometry.gaussian_width_mc(model, range(n), None, samples, rng)
        lo, hi = geometry.iid_max_lower(n), geometry.max_gaussian_upper(1.0, n)
        ok = lo - 3 * est.standard_error <= est.mean <= hi + 3 * est.standard_error
        if n == 2:
            ok = ok and abs(est.mean - 1.0 / math.sqrt(math.pi)) <= 0.01
        holds &= ok
        rows.append({"n": n, "estimate": est.mean, "se": est.standard_error, "lower": lo, "upper": hi, "ok": ok})
    model = LinearCanonicalModel(make_orthonormal_space(band_n))
    reg = estimate_regret(model, range(band_s), samples, rng)
    lo, hi = geometry.iid_case_bounds(band_n, band_s)
    band_ok = lo - 3 * reg.standard_error <= reg.mean <= hi + 3 * reg.standard_error
    holds &= band_ok
    return CheckResult("iid_band", bool(holds), {
        "maxima": rows,
        "subset_band": {"n": band_n, "s": band_s, "regret": reg.mean, "se": reg.standard_error,
                        "lower": lo, "upper": hi, "ok": band_ok},
    })


def check_widths(clusters: int = 100, samples: int = 4000, seed: int = 0) -> CheckResult:
    """Random clusters of a sphere space: MC width <= sigma sqrt(2 ln |r|) + 3 SE."""
    rng = np.random.default_rng(seed)
    violations = []
    for i in range(clusters):
        spread = float(rng.uniform(0.02, 0.5))
        space, _ = make_sphere_clusters(spread, rng, num_centers=2, points_per=40)
        model = LinearCanonicalModel(space)
        dist = model.distance_matrix()
        size = int(rng.integers(1, 30))
        members = np.sort(rng.choice(len(space), size=size, replace=False))
        ref = int(rng.choice(members)) if i % 2 == 0 else None
        est = geometry.gaussian_width_mc(model, members, ref, samples, rng)
        bound = geometry.width_upper_bound(dist, members, ref)
        if est.mean > bound + 3 * est.standard_error:
            violations.append({"cluster": i, "estimate": est.mean, "bound": bound})
    return CheckResult("widths", not violations, {"clusters": clusters, "violations": violations})


# ---------------------------------------------------------------------------
# regret bounds


def check_reference_bounds(preset: str = "sphere:0.05", c: float = geometry.DEFAULT_C, seed: int = 0,
               width_samples: int = 10**4, eval_instances: int = 10**5) -> CheckResult:
    """Reference-set regret against the two-sided band; the lower side needs well-separated clusters."""
    rng = np.random.default_rng(seed)
    model, partition = load_preset(preset, rng)
    if partition is None or partition.reference_points is None:
        raise ValueError("thm1 needs a preset with a reference partition")
    widths = [w.mean for w in _cluster_widths(model, partition, width_samples, rng)]
    upper, lower = geometry.reference_set_bounds(widths, len(partition), partition.epsilon, c)
    regret = estimate_regret(model, partition.reference_points, eval_instances, rng)
    violation = geometry.separation_violation_rate(model, partition, eval_instances, rng)
    components = {"widths": widths, "m": len(partition), "epsilon": partition.epsilon, "C": c}
    reports = [BoundReport("reference_upper", "upper", upper, components, regret)]
    if violation < MAX_SEPARATION_VIOLATION:
        reports.append(BoundReport("reference_lower", "lower", lower, components, regret))
    return CheckResult("thm1", all(r.verdict for r in reports),
                       {"separation_violation_rate": violation, "lower_checked": len(reports) == 2},
                       reports)


def check_net_upper(preset: str = "sphere:0.05", k: int = 50, c: float = geometry.DEFAULT_C, reps: int = 30,
               seed: int = 0, width_samples: int = 10**4, importance_samples: int = 10**5,
               eval_instances: int = 10**4) -> CheckResult:
    """Epsilon-net output regret in every repetition against the composite upper bound."""
    rng = np.random.default_rng(seed)
    model, partition = load_preset(preset, rng)
    if partition is None:
        raise ValueError("thm2 needs a preset with a partition")
    widths = [w.mean for w in _cluster_widths(model, partition, width_samples, rng)]
    q = geometry.estimate_importance(model, partition, importance_samples, rng)
    correction = geometry.sampling_correction(q.frequencies, k)
    second = geometry.second_moment_mc(model, importance_samples, rng).mean
    reports = []
    for _ in range(reps):
        sel = epsilon_net_select(model, Exact(), Iterations(k), rng)
        regret = estimate_regret(model, sel.chosen, eval_instances, rng)
        reports.append(geometry.net_upper_bound(widths, len(partition), partition.epsilon,
                                                     correction, second, c, regret))
    return CheckResult("thm2", all(r.verdict for r in reports),
                       {"bound": reports[0].value, "max_regret": max(r.regret.mean for r in reports),
                        "reps": reps, "k": k}, reports)


def check_covering_tail(preset: str = "rbf-grid:500:1.0", eps_values=(0.4, 0.2, 0.1, 0.05), c: float = geometry.DEFAULT_C,
               seed: int = 0, eval_instances: int = 10**5) -> CheckResult:
    """Bound at each eps with K at its threshold: strictly decreasing and above the MC regret."""
    rng = np.random.default_rng(seed)
    model, _ = load_preset(preset, rng)
    dist = model.distance_matrix()
    reports = []
    for eps in eps_values:
        k = geometry.covering_threshold(dist, eps)
        sel = epsilon_net_select(model, Exact(), Iterations(k), rng)
        regret = estimate_regret(model, sel.chosen, eval_instances, rng)
        reports.append(geometry.covering_bound(dist, eps, k, model.dim, c, regret=regret))
    values = [r.value for r in reports]
    decreasing = all(b < a for a, b in zip(values, values[1:]))
    return CheckResult("thm3", bool(decreasing and all(r.verdict for r in reports)),
                       {"eps": list(eps_values), "bounds": values, "strictly_decreasing": decreasing,
                        "k": [r.components["k"] for r in reports]}, reports)


def two_cluster_model(radius: float = 1.0, offset: float = 0.01):
    """Two pairs of actions at +-radius e1, split by +-offset along e2."""
    pts = np.array([[radius, offset], [radius, -offset], [-radius, offset], [-radius, -offset]])
    model = LinearCanonicalModel(ActionSpace(pts))
    partition = Partition.from_labels([0, 0, 1, 1], model.distance_matrix(), reference_points=[0, 2])
    return model, partition


def check_net_lower(k: int = 1, c: float = 0.1, c_lower: float = geometry.DEFAULT_LOWER_C, runs: int = 200,
               seed: int = 0, width_samples: int = 10**5, eval_instances: int = 2000) -> CheckResult:
    """Expected epsilon-net regret on a well-separated two-cluster space against the lower bound."""
    rng = np.random.default_rng(seed)
    model, partition = two_cluster_model()
    violation = geometry.separation_violation_rate(model, partition, width_samples, rng)
    widths = [w.mean for w in _cluster_widths(model, partition, width_samples, rng)]
    q = geometry.estimate_importance(model, partition, width_samples, rng)
    correction = geometry.sampling_correction(q.frequencies, k)
    value = geometry.net_lower_bound(min(widths), len(partition), partition.epsilon, correction, c, c_lower)
    per_run = []
    for _ in range(runs):
        sel = epsilon_net_select(model, Exact(), Iterations(k), rng)
        per_run.append(estimate_regret(model, sel.chosen, eval_instances, rng).mean)
    regret = MeanEstimate.from_samples(per_run)
    report = BoundReport("net_lower", "lower", value,
                         {"min_width": min(widths), "m": len(partition), "epsilon": partition.epsilon,
                          "correction": correction, "C": c, "c": c_lower}, regret)
    applicable = violation < MAX_SEPARATION_VIOLATION
    return CheckResult("thm5", bool(applicable and report.verdict),
                       {"separation_violation_rate": violation, "applicable": applicable}, [report])


RUNNERS = {
    "lemma1": check_coverage,
    "thm1": check_reference_bounds,
    "thm2": check_net_upper,
    "thm3": check_covering_tail,
    "thm5": check_net_lower,
    "lemma_maxq": check_max_correction,
    "iid_band": check_iid_band,
    "widths": check_widths,
}
