"""Monte-Carlo regret estimation and the end-to-end experiment runners.

Every runner returns an :class:`ExperimentResult` whose ``rows`` follow the
fixed schema ``method,param,rep,regret_mean,regret_std,pulls,wallclock_ms``.
Randomness for repetition ``rep``, parameter ``j`` and stream ``s`` comes from
``default_rng([seed + rep, j, s])``, so results do not depend on how the
work is scheduled across workers.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as sps

from bandit_subset import geometry
from bandit_subset.policies import (
    cucb_init_rounds,
    enumerate_super_arms,
    run_cts,
    run_cucb,
    run_successive_halving,
    run_superarm_ts,
    run_superarm_ucb,
)
from bandit_subset.reward_model import (
    Gibbs,
    LinearCanonicalModel,
    RBF,
    build_kernel_model,
    make_grid_space,
    make_sphere_clusters,
)
from bandit_subset.selection import DistinctCount, Exact, Iterations, ThompsonApprox, epsilon_net_select
from bandit_subset.stats import MeanEstimate

COLUMNS = ("method", "param", "rep", "regret_mean", "regret_std", "pulls", "wallclock_ms")
MIN_SCALED_REPS = 10
_CHUNK = 2048


@dataclass(frozen=True)
class RegretEstimate(MeanEstimate):
    seed: int | None = None


def _check_subset(model, subset) -> np.ndarray:
    subset = np.asarray(sorted(set(int(i) for i in subset)), dtype=int)
    if subset.size == 0:
        raise ValueError("subset must be non-empty")
    if subset.min() < 0 or subset.max() >= model.num_actions:
        raise IndexError("subset index outside the action space")
    return subset


def _regret_samples(mu: np.ndarray, subsets) -> list[np.ndarray]:
    best = mu.max(axis=1)
    out = []
    for s in subsets:
        r = best - mu[:, s].max(axis=1)
        # a superset maximum of the same floats can never be smaller
        assert np.all(r >= 0.0)
        out.append(r)
    return out


def estimate_regrets(model, subsets, samples: int, rng: np.random.Generator, seed: int | None = None) -> list[RegretEstimate]:
    """Regret of several subsets on one shared set of evaluation instances.

    Finite-support instance distributions are enumerated exactly; the
    returned std/SE are then the population moments and zero respectively
    and ``samples`` is the support size.
    """
    subsets = [_check_subset(model, s) for s in subsets]
    if samples < 1:
        raise ValueError("need at least one evaluation instance")
    support = getattr(model.sampler, "finite_support", None)
    if support is not None:
        thetas, weights = support
        regrets = _regret_samples(model.rewards(thetas), subsets)
        out = []
        for r in regrets:
            mean = float(np.dot(weights, r))
            std = float(math.sqrt(max(np.dot(weights, (r - mean) ** 2), 0.0)))
            out.append(RegretEstimate(mean, std, 0.0, len(weights), seed))
        return out

    acc: list[MeanEstimate | None] = [None] * len(subsets)
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        mu = model.rewards(model.sample_thetas(rng, size))
        for i, r in enumerate(_regret_samples(mu, subsets)):
            chunk = MeanEstimate.from_samples(r)
            acc[i] = chunk if acc[i] is None else acc[i].merge(chunk)
        done += size
    return [RegretEstimate(e.mean, e.std, e.standard_error, e.samples, seed) for e in acc]


def estimate_regret(model, subset, samples: int, rng: np.random.Generator, seed: int | None = None) -> RegretEstimate:
    """Expected regret of restricting the model to ``subset``."""
    return estimate_regrets(model, [subset], samples, rng, seed)[0]


def exact_subset_value(model, subset) -> float:
    """E max_{a in subset} mu_a under a finitely supported instance distribution."""
    support = getattr(model.sampler, "finite_support", None)
    if support is None:
        raise ValueError("exact expectations need a finitely supported sampler")
    thetas, weights = support
    subset = _check_subset(model, subset)
    return float(np.dot(weights, model.rewards(thetas)[:, subset].max(axis=1)))


# ---------------------------------------------------------------------------
# configs


@dataclass
class ExperimentConfig:
    experiment: str = ""
    seed: int = 0
    repetitions: int = 1
    eval_instances: int = 10**5
    scale: int = 1
    output_dir: str | None = None
    workers: int = 1
    record_wallclock: bool = False

    def __post_init__(self):
        if self.repetitions < 1 or self.eval_instances < 1 or self.scale < 1:
            raise ValueError("repetitions, eval_instances and scale must be positive")

    @property
    def scaled_eval(self) -> int:
        return max(1, self.eval_instances // self.scale)

    @property
    def scaled_reps(self) -> int:
        if self.scale == 1:
            return self.repetitions
        return min(self.repetitions, max(MIN_SCALED_REPS, math.ceil(self.repetitions / self.scale)))

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class SuperarmConfig(ExperimentConfig):
    experiment: str = "superarm"
    repetitions: int = 50
    length_scales: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
    grid: tuple = (0.0, 2.0, 15)
    k: int = 5
    rounds: int = 3000
    exploration_scale: float = 1.0


@dataclass
class CombinatorialConfig(ExperimentConfig):
    experiment: str = "combinatorial"
    repetitions: int = 30
    length_scales: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
    grid: tuple = (-5.0, 5.0, 500)
    k: int = 10
    ts_rounds: int = 300
    rounds: int = 3000
    exploration_scale: float = 1.0
    duplicates_consume: bool = False


@dataclass
class SphereConfig(ExperimentConfig):
    experiment: str = "sphere"
    repetitions: int = 30
    eval_instances: int = 10**4
    spreads: tuple = (0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
    k: int = 10
    num_centers: int = 5
    points_per: int = 200
    width_samples: int = 10**4
    C: float = geometry.DEFAULT_C


@dataclass
class GibbsConfig(ExperimentConfig):
    experiment: str = "gibbs"
    repetitions: int = 10
    eval_instances: int = 1000
    grid: tuple = (0.0, 2.0, 1000)
    k: int = 5000


CONFIGS = {
    "superarm": SuperarmConfig,
    "combinatorial": CombinatorialConfig,
    "sphere": SphereConfig,
    "gibbs": GibbsConfig,
}


def make_config(experiment: str, **overrides) -> ExperimentConfig:
    try:
        cls = CONFIGS[experiment]
    except KeyError:
        raise ValueError(f"unknown experiment {experiment!r}") from None
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key, value in list(overrides.items()):
        if isinstance(value, list):
            overrides[key] = tuple(value)
    return cls(**overrides)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        return _rows_csv(COLUMNS, self.rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _rows_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _row(config, method, param, rep, est, pulls, elapsed_ms) -> dict:
    return {
        "method": method,
        "param": param,
        "rep": rep,
        "regret_mean": est.mean,
        "regret_std": est.std,
        "pulls": pulls,
        "wallclock_ms": round(elapsed_ms, 3) if config.record_wallclock else None,
        "regret_se": est.standard_error,
    }


def task_rng(seed: int, rep: int, param_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed + rep, param_index, stream])


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self.start) * 1000.0


def default_workers() -> int:
    env = os.environ.get("BANDIT_SUBSET_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_tasks(fn, tasks, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# super-arm comparison


def _superarm_task(args):
    config, j, length_scale, rep = args
    lo, hi, count = config.grid
    model = build_kernel_model(make_grid_space(lo, hi, int(count)), RBF(length_scale))
    arms = enumerate_super_arms(model.num_actions, config.k)
    budget = len(arms) * math.ceil(math.log2(len(arms)))
    outputs = {}
    with _Timer() as t:
        sel = epsilon_net_select(model, Exact(), DistinctCount(config.k), task_rng(config.seed, rep, j, 0))
    outputs["epsilon_net"] = (sel.chosen, sel.iterations_used, t.ms)
    with _Timer() as t:
        ts = run_superarm_ts(model, arms, config.rounds, task_rng(config.seed, rep, j, 1))
    outputs["ts"] = (ts.selected, ts.pulls, t.ms)
    with _Timer() as t:
        ucb = run_superarm_ucb(model, arms, config.rounds, config.exploration_scale, task_rng(config.seed, rep, j, 2))
    outputs["ucb"] = (ucb.selected, ucb.pulls, t.ms)
    with _Timer() as t:
        sh = run_successive_halving(model, arms, budget, task_rng(config.seed, rep, j, 3))
    outputs["sh"] = (sh.selected, sh.pulls, t.ms)

    sh_round_subsets = [arms[r["best_arm"]] for r in sh.rounds_log]
    subsets = [v[0] for v in outputs.values()] + sh_round_subsets
    ests = estimate_regrets(model, subsets, config.scaled_eval, task_rng(config.seed, rep, j, 9))
    rows = [
        _row(config, method, length_scale, rep, est, pulls, ms)
        for (method, (_, pulls, ms)), est in zip(outputs.items(), ests)
    ]
    sh_rows = [
        {"param": length_scale, "rep": rep, "round": r["round"], "cumulative_pulls": r["cumulative_pulls"],
         "survivors": r["survivors"], "regret_mean": est.mean}
        for r, est in zip(sh.rounds_log, ests[len(outputs):])
    ]
    return rows, sh_rows


def run_experiment_superarm(config: SuperarmConfig | None = None) -> ExperimentResult:
    """Epsilon Net (exhaustive oracle) against super-arm TS, UCB and Successive Halving."""
    config = config or SuperarmConfig()
    tasks = [(config, j, float(l), rep) for j, l in enumerate(config.length_scales)
             for rep in range(config.scaled_reps)]
    result = ExperimentResult(config)
    sh_rows = []
    for rows, trace in _run_tasks(_superarm_task, tasks, config.workers):
        result.rows.extend(rows)
        sh_rows.extend(trace)
    result.tables["superarm_sh_trace"] = (
        ("param", "rep", "round", "cumulative_pulls", "survivors", "regret_mean"), sh_rows)
    result.extras["trend"] = trend_statistics(result.rows)
    return result


# ---------------------------------------------------------------------------
# oracle-free comparison


def epsilon_net_ts_pulls(selection, ts_rounds: int, duplicates_consume: bool) -> int:
    """Base-arm pulls of EpsilonNet+TS: ``ts_rounds`` per counted oracle call."""
    calls = selection.iterations_used if duplicates_consume else len(selection.chosen)
    return ts_rounds * calls


def _combinatorial_task(args):
    config, j, length_scale, rep = args
    lo, hi, count = config.grid
    model = build_kernel_model(make_grid_space(lo, hi, int(count)), RBF(length_scale))
    n = model.num_actions
    outputs = {}
    with _Timer() as t:
        sel = epsilon_net_select(model, ThompsonApprox(config.ts_rounds), DistinctCount(config.k),
                                 task_rng(config.seed, rep, j, 0))
    outputs["epsilon_net_ts"] = (
        sel.chosen, epsilon_net_ts_pulls(sel, config.ts_rounds, config.duplicates_consume), t.ms)
    with _Timer() as t:
        cts = run_cts(model, n, config.k, config.rounds, task_rng(config.seed, rep, j, 1))
    outputs["cts"] = (cts.selected, cts.pulls, t.ms)
    with _Timer() as t:
        # initialization rounds come on top of the UCB-phase rounds
        cucb = run_cucb(model, n, config.k, config.rounds + cucb_init_rounds(n, config.k),
                        config.exploration_scale, task_rng(config.seed, rep, j, 2))
    outputs["cucb"] = (cucb.selected, cucb.pulls, t.ms)

    ests = estimate_regrets(model, [v[0] for v in outputs.values()], config.scaled_eval,
                            task_rng(config.seed, rep, j, 9))
    rows = [
        _row(config, method, length_scale, rep, est, pulls, ms)
        for (method, (_, pulls, ms)), est in zip(outputs.items(), ests)
    ]
    return rows, {"rep": rep, "param": length_scale, "oracle_calls": sel.iterations_used,
                  "distinct": len(sel.chosen), "complete": sel.complete}


def run_experiment_combinatorial(config: CombinatorialConfig | None = None) -> ExperimentResult:
    """EpsilonNet+TS against CTS and CUCB with semi-bandit feedback."""
    config = config or CombinatorialConfig()
    tasks = [(config, j, float(l), rep) for j, l in enumerate(config.length_scales)
             for rep in range(config.scaled_reps)]
    result = ExperimentResult(config)
    calls = []
    for rows, info in _run_tasks(_combinatorial_task, tasks, config.workers):
        result.rows.extend(rows)
        calls.append(info)
    result.extras["oracle_calls"] = calls
    return result


# ---------------------------------------------------------------------------
# sphere clusters


def _sphere_task(args):
    config, j, spread, rep = args
    space, partition = make_sphere_clusters(spread, task_rng(config.seed, rep, j, 0),
                                            config.num_centers, config.points_per)
    model = LinearCanonicalModel(space)
    with _Timer() as t:
        sel = epsilon_net_select(model, Exact(), Iterations(config.k), task_rng(config.seed, rep, j, 1))
    ests = estimate_regrets(model, [sel.chosen, partition.reference_points], config.scaled_eval,
                            task_rng(config.seed, rep, j, 9))
    widths = [
        geometry.gaussian_width_mc(model, c, r, config.width_samples, task_rng(config.seed, rep, j, 10 + i)).mean
        for i, (c, r) in enumerate(zip(partition.clusters, partition.reference_points))
    ]
    upper, lower = geometry.reference_set_bounds(widths, len(partition), partition.epsilon, config.C)
    rows = [
        _row(config, "epsilon_net", spread, rep, ests[0], sel.iterations_used, t.ms),
        _row(config, "reference_set", spread, rep, ests[1], 0, 0.0),
    ]
    bound = {"param": spread, "rep": rep, "epsilon": partition.epsilon, "max_width": max(widths),
             "reference_upper": upper, "reference_lower": lower}
    return rows, bound


def run_experiment_sphere(config: SphereConfig | None = None) -> ExperimentResult:
    """Epsilon-net regret on five sphere clusters as the spread grows."""
    config = config or SphereConfig()
    tasks = [(config, j, float(s), rep) for j, s in enumerate(config.spreads)
             for rep in range(config.scaled_reps)]
    result = ExperimentResult(config)
    bounds = []
    for rows, bound in _run_tasks(_sphere_task, tasks, config.workers):
        result.rows.extend(rows)
        bounds.append(bound)
    result.tables["sphere_bounds"] = (
        ("param", "rep", "epsilon", "max_width", "reference_upper", "reference_lower"), bounds)
    result.extras["monotonicity"] = endpoint_separation(result.rows, "epsilon_net")
    return result


# ---------------------------------------------------------------------------
# Gibbs kernel histogram


def _gibbs_task(args):
    config, rep = args
    lo, hi, count = config.grid
    model = build_kernel_model(make_grid_space(lo, hi, int(count)), Gibbs())
    with _Timer() as t:
        sel = epsilon_net_select(model, Exact(), Iterations(config.k), task_rng(config.seed, rep, 0, 0))
    est = estimate_regret(model, sel.chosen, config.scaled_eval, task_rng(config.seed, rep, 0, 9))
    return _row(config, "epsilon_net", config.k, rep, est, sel.iterations_used, t.ms), sel.counts(model.num_actions)


def run_experiment_gibbs(config: GibbsConfig | None = None) -> ExperimentResult:
    """Epsilon-net selection frequencies under the non-stationary Gibbs kernel."""
    config = config or GibbsConfig()
    tasks = [(config, rep) for rep in range(config.scaled_reps)]
    result = ExperimentResult(config)
    counts = []
    for row, c in _run_tasks(_gibbs_task, tasks, config.workers):
        result.rows.append(row)
        counts.append(c)
    counts = np.array(counts)
    freqs = counts / config.k
    lo, hi, count = config.grid
    xs = np.linspace(lo, hi, int(count))
    se = freqs.std(axis=0, ddof=1) / math.sqrt(len(freqs)) if len(freqs) > 1 else np.zeros(freqs.shape[1])
    hist = [
        {"idx": i, "x": float(xs[i]), "count": int(counts[:, i].sum()), "frequency": float(freqs[:, i].mean()),
         "frequency_se": float(se[i])}
        for i in range(counts.shape[1])
    ]
    result.tables["gibbs_histogram"] = (("idx", "x", "count", "frequency", "frequency_se"), hist)
    result.extras["counts"] = counts
    result.extras["half_split"] = half_split(counts)
    result.extras["edges_are_local_maxima"] = edges_are_local_maxima(counts.sum(axis=0))
    return result


def half_split(counts: np.ndarray) -> dict:
    """Right-half minus left-half selection frequency, per run and aggregated."""
    counts = np.atleast_2d(counts)
    mid = counts.shape[1] // 2
    totals = counts.sum(axis=1)
    diff = (counts[:, mid:].sum(axis=1) - counts[:, :mid].sum(axis=1)) / totals
    est = MeanEstimate.from_samples(diff)
    return {"per_run": diff.tolist(), "mean": est.mean, "standard_error": est.standard_error}


def smoothed_histogram(counts, window: int = 5) -> np.ndarray:
    """Centered moving average; windows are truncated (not padded) at the edges."""
    counts = np.asarray(counts, dtype=float)
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(counts)])
    idx = np.arange(counts.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, counts.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def edges_are_local_maxima(counts, window: int = 5) -> bool:
    s = smoothed_histogram(counts, window)
    return bool(s[0] > s[1] and s[-1] > s[-2])


# ---------------------------------------------------------------------------
# summaries


def summarize(rows) -> list[dict]:
    """Mean and spread across repetitions for each (method, param)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["method"], r["param"]), []).append(r["regret_mean"])
    out = []
    for (method, param), vals in groups.items():
        est = MeanEstimate.from_samples(vals)
        out.append({"method": method, "param": param, "mean": est.mean, "std": est.std,
                    "standard_error": est.standard_error, "reps": est.samples})
    return out


def endpoint_separation(rows, method: str) -> dict:
    """Spearman correlation of regret with the parameter and the endpoint gap in SEs."""
    mine = [r for r in rows if r["method"] == method]
    params = sorted({r["param"] for r in mine})
    if len(params) < 2:
        return {"spearman": float("nan"), "gap": 0.0, "gap_se": float("nan")}
    rho = sps.spearmanr([r["param"] for r in mine], [r["regret_mean"] for r in mine]).statistic
    first = MeanEstimate.from_samples([r["regret_mean"] for r in mine if r["param"] == params[0]])
    last = MeanEstimate.from_samples([r["regret_mean"] for r in mine if r["param"] == params[-1]])
    se = math.hypot(first.standard_error, last.standard_error)
    return {"spearman": float(rho), "first": first.mean, "last": last.mean,
            "gap": last.mean - first.mean, "gap_se": se}


def trend_statistics(rows) -> dict:
    return {m: endpoint_separation(rows, m) for m in sorted({r["method"] for r in rows})}


def paired_win_rate(rows, method: str, other: str, param) -> float:
    """Fraction of repetitions where ``method`` has regret <= ``other`` at ``param``."""
    a = {r["rep"]: r["regret_mean"] for r in rows if r["method"] == method and r["param"] == param}
    b = {r["rep"]: r["regret_mean"] for r in rows if r["method"] == other and r["param"] == param}
    reps = sorted(set(a) & set(b))
    if not reps:
        raise ValueError("no paired repetitions")
    return sum(a[k] <= b[k] for k in reps) / len(reps)


# ---------------------------------------------------------------------------
# output


RUNNERS = {
    "superarm": run_experiment_superarm,
    "combinatorial": run_experiment_combinatorial,
    "sphere": run_experiment_sphere,
    "gibbs": run_experiment_gibbs,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[config.experiment](config)


def manifest(config: ExperimentConfig) -> dict:
    reps = config.scaled_reps
    return {
        "experiment": config.experiment,
        "config": config.as_dict(),
        "repetition_seeds": [config.seed + r for r in range(reps)],
        "eval_instances_used": config.scaled_eval,
        "repetitions_used": reps,
    }


def write_outputs(result: ExperimentResult, output_dir) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.experiment
    written = []
    path = out / f"{name}.csv"
    path.write_text(result.to_csv())
    written.append(path)
    for table, (columns, rows) in result.tables.items():
        p = out / f"{table}.csv"
        p.write_text(_rows_csv(columns, rows))
        written.append(p)
    p = out / f"{name}_manifest.json"
    p.write_text(json.dumps(manifest(result.config), indent=2, sort_keys=True) + "\n")
    written.append(p)
    summary = {"summary": summarize(result.rows)}
    summary.update({k: v for k, v in result.extras.items() if k != "counts"})
    p = out / f"{name}_summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    written.append(p)
    return written


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    raise TypeError(f"cannot serialize {type(value)}")
