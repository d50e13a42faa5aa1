"""The epsilon-net subset selection loop and its inner argmax oracles.

Each iteration draws one bandit instance from the model's sampler, solves it
with the configured oracle and adds the winner to the chosen set. Iteration
``i`` is driven entirely by the stream ``default_rng(base + i)``, where
``base`` is drawn once from the caller's generator; the trace records that
seed so any single iteration can be replayed on its own.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from bandit_subset.reward_model import BanditInstance, RewardModel, instance_rng

_SEED_BOUND = 2**62
_BATCH = 256


@dataclass(frozen=True)
class Exact:
    """Exhaustive argmax over the full action set."""


@dataclass(frozen=True)
class ThompsonApprox:
    """Approximate argmax: the arm chosen in the last round of Gaussian Thompson sampling."""

    rounds: int = 300
    prior_mean: float = 0.0
    prior_var: float = 1.0
    obs_var: float = 1.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("ThompsonApprox needs at least one round")


OracleSpec = Union[Exact, ThompsonApprox]


@dataclass(frozen=True)
class Iterations:
    """Run exactly ``k`` instance draws."""

    k: int


@dataclass(frozen=True)
class DistinctCount:
    """Run until ``k`` distinct actions are chosen or ``max_iterations`` is hit."""

    k: int
    max_iterations: int | None = None

    @property
    def limit(self) -> int:
        return self.max_iterations if self.max_iterations is not None else 1000 * self.k


StopRule = Union[Iterations, DistinctCount]


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    seed: int
    index: int


@dataclass(frozen=True)
class SelectionResult:
    chosen: tuple
    trace: tuple = field(repr=False)
    iterations_used: int
    complete: bool = True
    oracle_pulls: int = 0

    @property
    def new_action_steps(self) -> int:
        """Iterations whose oracle call produced a not-yet-chosen action."""
        return len(self.chosen)

    def counts(self, num_actions: int) -> np.ndarray:
        return np.bincount([s.index for s in self.trace], minlength=num_actions)

    def as_dict(self) -> dict:
        return {
            "chosen": list(self.chosen),
            "iterations_used": self.iterations_used,
            "complete": self.complete,
            "trace": [{"iter": s.iteration, "seed": s.seed, "index": s.index} for s in self.trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


def exact_argmax(model: RewardModel, instance: BanditInstance) -> int:
    """Index of the best action for ``instance``; lowest index on ties."""
    return int(np.argmax(model.rewards(instance.theta)))


def thompson_argmax(
    model: RewardModel,
    instance: BanditInstance,
    spec: ThompsonApprox,
    rng: np.random.Generator,
) -> int:
    """Gaussian TS against the noiseless rewards of one instance.

    Every arm carries an independent N(prior_mean, prior_var) prior and the
    update assumes observation variance ``obs_var`` even though the observed
    value is the exact expected reward.
    """
    mu = model.rewards(instance.theta)
    n = mu.shape[0]
    if n == 1:
        return 0
    prior_prec = 1.0 / spec.prior_var
    weighted = np.full(n, spec.prior_mean * prior_prec)
    prec = np.full(n, prior_prec)
    arm = 0
    for _ in range(spec.rounds):
        draws = weighted / prec + rng.standard_normal(n) / np.sqrt(prec)
        arm = int(np.argmax(draws))
        weighted[arm] += mu[arm] / spec.obs_var
        prec[arm] += 1.0 / spec.obs_var
    return arm


def _solve_batch(model, oracle, seeds) -> list[int]:
    if isinstance(oracle, Exact):
        thetas = np.stack([model.sampler.sample_batch(instance_rng(int(s)), 1)[0] for s in seeds])
        return [int(i) for i in np.argmax(model.rewards(thetas), axis=1)]
    out = []
    for s in seeds:
        rng = instance_rng(int(s))
        inst = model.sampler.sample(rng)
        out.append(thompson_argmax(model, inst, oracle, rng))
    return out


def epsilon_net_select(
    model: RewardModel,
    oracle: OracleSpec,
    stop: StopRule,
    rng: np.random.Generator,
) -> SelectionResult:
    """Sample instances, solve each, and collect the optimal actions."""
    if stop.k < 1:
        raise ValueError("K must be >= 1")
    base = int(rng.integers(_SEED_BOUND))
    limit = stop.k if isinstance(stop, Iterations) else stop.limit
    pulls_per_call = oracle.rounds if isinstance(oracle, ThompsonApprox) else 0

    trace: list[TraceStep] = []
    chosen: list[int] = []
    seen: set[int] = set()
    done = False
    while not done and len(trace) < limit:
        start = len(trace)
        # exhaustive oracles are solved in vectorized batches; the distinct
        # stop rule still cuts the trace at the exact iteration
        width = min(_BATCH if isinstance(oracle, Exact) else 1, limit - start)
        seeds = [base + start + j for j in range(width)]
        for j, idx in enumerate(_solve_batch(model, oracle, seeds)):
            trace.append(TraceStep(start + j, seeds[j], idx))
            if idx not in seen:
                seen.add(idx)
                chosen.append(idx)
            if isinstance(stop, DistinctCount) and len(chosen) >= stop.k:
                done = True
                break

    complete = isinstance(stop, Iterations) or len(chosen) >= stop.k
    return SelectionResult(
        chosen=tuple(chosen),
        trace=tuple(trace),
        iterations_used=len(trace),
        complete=complete,
        oracle_pulls=pulls_per_call * len(trace),
    )


def selection_counts(model: RewardModel, k: int, rng: np.random.Generator) -> np.ndarray:
    """Per-action hit counts of one Iterations(k) run with the exact oracle."""
    result = epsilon_net_select(model, Exact(), Iterations(k), rng)
    return result.counts(model.num_actions)
