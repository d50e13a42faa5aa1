import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandit_subset import geometry
from bandit_subset.reward_model import (
    ActionSpace,
    BanditInstance,
    DiscreteInstances,
    LinearCanonicalModel,
    RBF,
    build_kernel_model,
    toy_model,
    instance_rng,
    make_grid_space,
    make_orthonormal_space,
)
from bandit_subset.selection import (
    DistinctCount,
    Exact,
    Iterations,
    ThompsonApprox,
    epsilon_net_select,
    exact_argmax,
    selection_counts,
    thompson_argmax,
)
from bandit_subset.verify import coverage_model

E1 = BanditInstance(np.array([1.0, 0.0]))
E2 = BanditInstance(np.array([0.0, 1.0]))


def test_exact_argmax_toy():
    model = toy_model()
    assert exact_argmax(model, E1) == 0
    assert exact_argmax(model, E2) == 2


def test_exact_argmax_ties_to_lowest_index():
    model = LinearCanonicalModel(ActionSpace(np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])))
    assert exact_argmax(model, E1) == 1


def test_thompson_finds_large_gap():
    model = LinearCanonicalModel(ActionSpace(np.array([[0.0], [5.0]])), DiscreteInstances([[1.0]]))
    inst = BanditInstance(np.array([1.0]))
    hits = sum(thompson_argmax(model, inst, ThompsonApprox(300), np.random.default_rng(s)) == 1 for s in range(200))
    assert hits / 200 >= 0.99


def test_thompson_toy():
    model = toy_model()
    hits = sum(thompson_argmax(model, E2, ThompsonApprox(300), np.random.default_rng(s)) == 2 for s in range(200))
    assert hits / 200 >= 0.95


def test_thompson_single_action():
    model = LinearCanonicalModel(ActionSpace(np.array([[1.0]])))
    assert thompson_argmax(model, BanditInstance(np.array([3.0])), ThompsonApprox(5), np.random.default_rng(0)) == 0


def test_thompson_needs_rounds():
    with pytest.raises(ValueError):
        ThompsonApprox(0)


def test_toy_distinct_two():
    res = epsilon_net_select(toy_model(), Exact(), DistinctCount(2), np.random.default_rng(0))
    assert sorted(res.chosen) == [0, 2] and res.complete


def test_single_iteration():
    model = LinearCanonicalModel(make_orthonormal_space(5))
    res = epsilon_net_select(model, Exact(), Iterations(1), np.random.default_rng(0))
    assert len(res.chosen) == 1 and res.iterations_used == 1


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        epsilon_net_select(toy_model(), Exact(), Iterations(0), np.random.default_rng(0))


def test_orthonormal_frequencies_uniform():
    model = LinearCanonicalModel(make_orthonormal_space(8))
    freq = selection_counts(model, 10**4, np.random.default_rng(3)) / 10**4
    assert np.all(np.abs(freq - 1 / 8) <= 0.02)


def test_trace_invariants_and_json():
    model = build_kernel_model(make_grid_space(0, 2, 15), RBF(1.0))
    res = epsilon_net_select(model, Exact(), Iterations(300), np.random.default_rng(2))
    idx = [s.index for s in res.trace]
    assert list(res.chosen) == list(dict.fromkeys(idx))
    assert len(res.chosen) <= res.iterations_used == 300
    assert res.counts(15).sum() == 300
    d = json.loads(res.to_json())
    assert set(d) == {"chosen", "iterations_used", "complete", "trace"}
    assert set(d["trace"][0]) == {"iter", "seed", "index"}


def test_trace_seed_replays_iteration():
    model = build_kernel_model(make_grid_space(0, 2, 15), RBF(0.5))
    res = epsilon_net_select(model, Exact(), Iterations(40), np.random.default_rng(9))
    for step in res.trace[::7]:
        inst = model.sampler.sample(instance_rng(step.seed))
        assert exact_argmax(model, inst) == step.index


def test_ts_trace_seed_replays_iteration():
    model = build_kernel_model(make_grid_space(0, 2, 15), RBF(0.5))
    spec = ThompsonApprox(50)
    res = epsilon_net_select(model, spec, Iterations(5), np.random.default_rng(9))
    assert res.oracle_pulls == 250
    for step in res.trace:
        rng = instance_rng(step.seed)
        inst = model.sampler.sample(rng)
        assert thompson_argmax(model, inst, spec, rng) == step.index


def test_distinct_stops_exactly():
    model = build_kernel_model(make_grid_space(0, 2, 15), RBF(0.5))
    res = epsilon_net_select(model, Exact(), DistinctCount(5), np.random.default_rng(4))
    assert len(res.chosen) == 5 and res.complete
    assert res.trace[-1].index == res.chosen[-1]
    assert res.trace[-1].index not in [s.index for s in res.trace[:-1]]


def test_distinct_incomplete_flag():
    res = epsilon_net_select(toy_model(), Exact(), DistinctCount(3, max_iterations=50), np.random.default_rng(0))
    assert not res.complete and res.iterations_used == 50 and sorted(res.chosen) == [0, 2]


def test_default_iteration_cap():
    assert DistinctCount(7).limit == 7000


def test_deterministic():
    model = build_kernel_model(make_grid_space(0, 2, 15), RBF(1.0))
    a = epsilon_net_select(model, ThompsonApprox(30), DistinctCount(4), np.random.default_rng(5))
    b = epsilon_net_select(model, ThompsonApprox(30), DistinctCount(4), np.random.default_rng(5))
    assert a == b


def test_trace_hits_converge_to_importance():
    model, part = coverage_model()
    q = geometry.estimate_importance(model, part, 10**5, np.random.default_rng(0)).frequencies
    n = 20000
    counts = selection_counts(model, n, np.random.default_rng(1))
    freq = np.array([counts[list(c)].sum() for c in part.clusters]) / n
    se = np.sqrt(q * (1 - q) / n) + np.sqrt(q * (1 - q) / 10**5)
    assert np.all(np.abs(freq - q) <= 3 * se)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.integers(0, 2**31))
def test_shift_invariance(shift, seed):
    base = np.random.default_rng(0).standard_normal((6, 2))
    a = LinearCanonicalModel(ActionSpace(base))
    b = LinearCanonicalModel(ActionSpace(base + np.array(shift)))
    ra = epsilon_net_select(a, Exact(), Iterations(20), np.random.default_rng(seed))
    rb = epsilon_net_select(b, Exact(), Iterations(20), np.random.default_rng(seed))
    assert [s.index for s in ra.trace] == [s.index for s in rb.trace]
