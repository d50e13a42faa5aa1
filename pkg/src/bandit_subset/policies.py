"""Baseline policies: super-arm TS/UCB, Successive Halving, and semi-bandit CTS/CUCB.

All of them face the same environment: every round draws a fresh bandit
instance, so the observed payoff is random through the instance alone.
Posteriors are Gaussian with an N(0, 1) prior and an assumed unit
observation variance.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bandit_subset.reward_model import BanditInstance, RewardModel

SUPERARM_CAP = 10**6


@dataclass(frozen=True)
class GaussianArmPosterior:
    """Conjugate posterior of one arm's mean payoff."""

    mean: float = 0.0
    variance: float = 1.0
    pulls: int = 0
    obs_var: float = 1.0

    def update(self, observation: float) -> "GaussianArmPosterior":
        prec = 1.0 / self.variance + 1.0 / self.obs_var
        mean = (self.mean / self.variance + observation / self.obs_var) / prec
        return GaussianArmPosterior(mean, 1.0 / prec, self.pulls + 1, self.obs_var)


class _Posteriors:
    """Vectorized N(0,1)-prior, unit-noise posteriors for many arms."""

    def __init__(self, n: int):
        self.sums = np.zeros(n)
        self.pulls = np.zeros(n, dtype=np.int64)

    @property
    def means(self) -> np.ndarray:
        return self.sums / (1.0 + self.pulls)

    @property
    def variances(self) -> np.ndarray:
        return 1.0 / (1.0 + self.pulls)

    def update(self, arms, observations) -> None:
        np.add.at(self.sums, arms, observations)
        np.add.at(self.pulls, arms, 1)

    def arm(self, i: int) -> GaussianArmPosterior:
        return GaussianArmPosterior(float(self.means[i]), float(self.variances[i]), int(self.pulls[i]))


@dataclass
class PolicyTrace:
    """Per-round log: ``round, arm_or_subset, payoff``."""

    rows: list = field(default_factory=list)

    def add(self, rnd: int, arm, payoff: float) -> None:
        self.rows.append((rnd, arm, payoff))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "arm_or_subset", "payoff"])
        for rnd, arm, payoff in self.rows:
            label = "|".join(str(i) for i in arm) if isinstance(arm, tuple) else str(arm)
            writer.writerow([rnd, label, repr(float(payoff))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass
class PolicyResult:
    """Outcome of a baseline run.

    ``selected`` is the output subset (sorted action indices). ``arm`` is the
    chosen super-arm position for super-arm policies, ``pulls`` counts
    super-arm pulls or base-arm observations depending on the policy.
    """

    selected: tuple
    pulls: int
    arm: int | None = None
    posterior_pulls: np.ndarray | None = None
    posterior_means: np.ndarray | None = None
    complete: bool = True
    trace: PolicyTrace | None = None
    rounds_log: list = field(default_factory=list)


def enumerate_super_arms(n: int, k: int, cap: int = SUPERARM_CAP) -> list[tuple]:
    """All sorted k-subsets of ``range(n)`` in lexicographic order."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= K <= N")
    total = math.comb(n, k)
    if total > cap:
        raise ValueError(f"C({n},{k}) = {total} exceeds the super-arm cap {cap}")
    return list(itertools.combinations(range(n), k))


def superarm_payoff(model: RewardModel, instance: BanditInstance, arm) -> float:
    mu = model.rewards(instance.theta)
    return float(max(mu[i] for i in arm))


def _arms_array(model, arms) -> np.ndarray:
    arr = np.asarray(arms, dtype=int)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.size and (arr.min() < 0 or arr.max() >= model.num_actions):
        raise IndexError("super-arm member outside the action space")
    return arr


def run_superarm_ts(model: RewardModel, arms, rounds: int, rng: np.random.Generator,
                    record_trace: bool = False) -> PolicyResult:
    """Thompson sampling over super-arms with bandit (max-payoff) feedback."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    arms_arr = _arms_array(model, arms)
    post = _Posteriors(len(arms_arr))
    trace = PolicyTrace() if record_trace else None
    for t in range(rounds):
        mu = model.rewards(model.sampler.sample_batch(rng, 1)[0])
        draws = post.means + np.sqrt(post.variances) * rng.standard_normal(len(arms_arr))
        a = int(np.argmax(draws))
        payoff = float(mu[arms_arr[a]].max())
        post.update(a, payoff)
        if trace is not None:
            trace.add(t, tuple(int(i) for i in arms_arr[a]), payoff)
    best = int(np.argmax(post.means))
    return PolicyResult(tuple(int(i) for i in arms_arr[best]), rounds, best,
                        post.pulls.copy(), post.means.copy(), trace=trace)


def _ucb_index(post: _Posteriors, t: int, scale: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        bonus = scale * np.sqrt(2.0 * math.log(max(t, 1)) / (1.0 + post.pulls))
    return np.where(post.pulls == 0, np.inf, post.means + bonus)


def run_superarm_ucb(model: RewardModel, arms, rounds: int, exploration_scale: float = 1.0,
                     rng: np.random.Generator | None = None, record_trace: bool = False) -> PolicyResult:
    """UCB over super-arms; untried arms have an infinite index.

    Returns the pulled arm with the best empirical mean payoff.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    arms_arr = _arms_array(model, arms)
    post = _Posteriors(len(arms_arr))
    trace = PolicyTrace() if record_trace else None
    for t in range(1, rounds + 1):
        mu = model.rewards(model.sampler.sample_batch(rng, 1)[0])
        a = int(np.argmax(_ucb_index(post, t, exploration_scale)))
        payoff = float(mu[arms_arr[a]].max())
        post.update(a, payoff)
        if trace is not None:
            trace.add(t - 1, tuple(int(i) for i in arms_arr[a]), payoff)
    pulled = post.pulls > 0
    empirical = np.where(pulled, post.sums / np.maximum(post.pulls, 1), -np.inf)
    best = int(np.argmax(empirical))
    return PolicyResult(tuple(int(i) for i in arms_arr[best]), rounds, best,
                        post.pulls.copy(), post.means.copy(), trace=trace)


def run_successive_halving(model: RewardModel, arms, budget: int, rng: np.random.Generator) -> PolicyResult:
    """Fixed-budget Successive Halving over super-arms.

    Round r gives each of the |S_r| survivors floor(budget / (|S_r| ceil(log2 N)))
    pulls, each against a fresh instance, then keeps the better half by
    cumulative empirical mean. ``rounds_log`` holds one entry per round with
    the cumulative pulls and the current best arm.
    """
    arms_arr = _arms_array(model, arms)
    n = len(arms_arr)
    if budget < 1:
        raise ValueError("budget must be positive")
    if n == 1:
        return PolicyResult(tuple(int(i) for i in arms_arr[0]), 0, 0, rounds_log=[])
    num_rounds = math.ceil(math.log2(n))
    sums = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    survivors = np.arange(n)
    used = 0
    log = []
    while len(survivors) > 1:
        per_arm = budget // (len(survivors) * num_rounds)
        if per_arm == 0:
            break
        pulled = np.repeat(survivors, per_arm)
        mu = model.rewards(model.sampler.sample_batch(rng, len(pulled)))
        payoffs = np.take_along_axis(mu, arms_arr[pulled], axis=1).max(axis=1)
        np.add.at(sums, pulled, payoffs)
        np.add.at(counts, pulled, 1)
        used += len(pulled)
        means = sums[survivors] / counts[survivors]
        # stable sort on -mean keeps lower positions first on ties
        order = np.argsort(-means, kind="stable")
        keep = math.ceil(len(survivors) / 2)
        survivors = np.sort(survivors[order[:keep]])
        leader = int(survivors[np.argmax(sums[survivors] / counts[survivors])])
        log.append({"round": len(log), "cumulative_pulls": used, "best_arm": leader,
                    "survivors": int(len(survivors))})
    complete = bool(log)
    if complete:
        best = int(survivors[np.argmax(sums[survivors] / counts[survivors])])
    else:
        best = int(survivors[0])
    return PolicyResult(tuple(int(i) for i in arms_arr[best]), used, best,
                        counts.copy(), None, complete=complete, rounds_log=log)


def top_k(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest values; lowest index wins ties."""
    return np.argsort(-values, kind="stable")[:k]


def run_cts(model: RewardModel, n: int, k: int, rounds: int, rng: np.random.Generator,
            record_trace: bool = False) -> PolicyResult:
    """Combinatorial TS with semi-bandit feedback and a top-K oracle."""
    if not 1 <= k <= n or n != model.num_actions:
        raise ValueError("need 1 <= K <= N = number of actions")
    post = _Posteriors(n)
    trace = PolicyTrace() if record_trace else None
    subset = np.arange(k)
    for t in range(rounds):
        mu = model.rewards(model.sampler.sample_batch(rng, 1)[0])
        draws = post.means + np.sqrt(post.variances) * rng.standard_normal(n)
        subset = top_k(draws, k)
        post.update(subset, mu[subset])
        if trace is not None:
            trace.add(t, tuple(sorted(int(i) for i in subset)), float(mu[subset].max()))
    return PolicyResult(tuple(sorted(int(i) for i in subset)), rounds * k, None,
                        post.pulls.copy(), post.means.copy(), trace=trace)


def cucb_init_rounds(n: int, k: int) -> int:
    return math.ceil(n / k)


def run_cucb(model: RewardModel, n: int, k: int, rounds: int, exploration_scale: float = 1.0,
             rng: np.random.Generator | None = None, record_trace: bool = False) -> PolicyResult:
    """Combinatorial UCB: a round-robin initialization, then top-K by UCB index.

    The last initialization subset is padded with the lowest-index arms so
    every round observes exactly K base arms.
    """
    if not 1 <= k <= n or n != model.num_actions:
        raise ValueError("need 1 <= K <= N = number of actions")
    init = cucb_init_rounds(n, k)
    if rounds < init:
        raise ValueError(f"{rounds} rounds cannot complete the {init}-round initialization")
    rng = rng if rng is not None else np.random.default_rng()
    post = _Posteriors(n)
    trace = PolicyTrace() if record_trace else None
    subset = np.arange(k)
    for t in range(1, rounds + 1):
        mu = model.rewards(model.sampler.sample_batch(rng, 1)[0])
        if t <= init:
            block = list(range((t - 1) * k, min(t * k, n)))
            pad = [i for i in range(n) if i not in block][: k - len(block)]
            subset = np.array(block + pad)
        else:
            subset = top_k(_ucb_index(post, t, exploration_scale), k)
        post.update(subset, mu[subset])
        if trace is not None:
            trace.add(t - 1, tuple(sorted(int(i) for i in subset)), float(mu[subset].max()))
    return PolicyResult(tuple(sorted(int(i) for i in subset)), rounds * k, None,
                        post.pulls.copy(), post.means.copy(), trace=trace)
