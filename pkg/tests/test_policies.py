from fractions import Fraction

import numpy as np
import pytest

from bandit_subset.policies import (
    GaussianArmPosterior,
    cucb_init_rounds,
    enumerate_super_arms,
    run_cts,
    run_cucb,
    run_successive_halving,
    run_superarm_ts,
    run_superarm_ucb,
    superarm_payoff,
    top_k,
)
from bandit_subset.reward_model import (
    ActionSpace,
    BanditInstance,
    DiscreteInstances,
    GaussianMixtureInstances,
    LinearCanonicalModel,
    RBF,
    build_kernel_model,
    toy_model,
    make_grid_space,
    make_orthonormal_space,
)


def noisy_two_arm_model():
    # payoff of arm 0 is theta ~ N(1, 1), arm 1 always 0
    return LinearCanonicalModel(ActionSpace(np.array([[1.0], [0.0]])),
                                GaussianMixtureInstances([[1.0]], [1.0], 1.0))


def separation_model():
    return LinearCanonicalModel(ActionSpace(np.array([[1.0], [0.9], [-1.0]])), DiscreteInstances([[1.0]]))


def test_enumerate_counts():
    assert len(enumerate_super_arms(15, 5)) == 3003
    assert enumerate_super_arms(3, 3) == [(0, 1, 2)]
    arms = enumerate_super_arms(4, 2)
    assert len(arms) == 6 and arms[0] == (0, 1)
    with pytest.raises(ValueError):
        enumerate_super_arms(40, 20)
    with pytest.raises(ValueError):
        enumerate_super_arms(3, 4)


def test_superarm_payoff_toy():
    model = toy_model()
    assert superarm_payoff(model, BanditInstance(np.array([0.0, 1.0])), (0, 2)) == 1.0
    thetas, weights = model.sampler.finite_support
    avg = sum(w * superarm_payoff(model, BanditInstance(t), (0, 1)) for t, w in zip(thetas, weights))
    assert avg == pytest.approx(0.55, abs=1e-12)
    inst = BanditInstance(np.array([0.3, -0.2]))
    assert superarm_payoff(model, inst, (1,)) == model.expected_reward(1, inst)


def test_posterior_closed_form_exact():
    obs = [Fraction(3, 2), Fraction(-1, 3), Fraction(2), Fraction(5, 7)]
    post = GaussianArmPosterior()
    for n, y in enumerate(obs, 1):
        post = post.update(float(y))
        assert post.pulls == n
        assert post.variance == pytest.approx(float(Fraction(1, 1 + n)), rel=1e-14)
        assert post.mean == pytest.approx(float(sum(obs[:n]) / (1 + n)), rel=1e-14)


def test_superarm_ts_separation():
    model = noisy_two_arm_model()
    hits = [run_superarm_ts(model, [(0,), (1,)], 3000, np.random.default_rng(s)).selected == (0,) for s in range(50)]
    assert np.mean(hits) >= 0.95


def test_superarm_ts_accounting():
    model = build_kernel_model(make_grid_space(0, 2, 6), RBF(1.0))
    arms = enumerate_super_arms(6, 2)
    res = run_superarm_ts(model, arms, 200, np.random.default_rng(0), record_trace=True)
    assert res.posterior_pulls.sum() == 200 and res.pulls == 200
    assert len(res.trace.rows) == 200
    assert run_superarm_ts(model, [(3, 4)], 10, np.random.default_rng(0)).selected == (3, 4)


def test_superarm_ucb_separation():
    model = noisy_two_arm_model()
    hits = [run_superarm_ucb(model, [(0,), (1,)], 3000, 1.0, np.random.default_rng(s)).selected == (0,) for s in range(50)]
    assert np.mean(hits) >= 0.95


def test_ucb_tries_every_arm_first():
    model = build_kernel_model(make_grid_space(0, 2, 8), RBF(1.0))
    arms = enumerate_super_arms(8, 3)
    res = run_superarm_ucb(model, arms, 40, 1.0, np.random.default_rng(0), record_trace=True)
    pulled = [r[1] for r in res.trace.rows]
    assert len(set(pulled)) == 40
    assert res.posterior_pulls.sum() == 40


def test_sh_budget_and_trace():
    arms = enumerate_super_arms(15, 5)
    budget = len(arms) * int(np.ceil(np.log2(len(arms))))
    assert budget == 36036
    model = build_kernel_model(make_grid_space(0, 2, 15), RBF(1.0))
    res = run_successive_halving(model, arms, budget, np.random.default_rng(0))
    assert res.complete and res.pulls <= budget
    assert [r["round"] for r in res.rounds_log] == list(range(len(res.rounds_log)))
    pulls = [r["cumulative_pulls"] for r in res.rounds_log]
    assert pulls == sorted(pulls) and res.rounds_log[-1]["survivors"] == 1


def test_sh_separation():
    model = noisy_two_arm_model()
    hits = [run_successive_halving(model, [(0,), (1,)], 200, np.random.default_rng(s)).selected == (0,)
            for s in range(50)]
    assert np.mean(hits) >= 0.95


def test_sh_edge_cases():
    model = noisy_two_arm_model()
    one = run_successive_halving(model, [(1,)], 10, np.random.default_rng(0))
    assert one.selected == (1,) and one.rounds_log == []
    arms = enumerate_super_arms(15, 5)
    small = run_successive_halving(build_kernel_model(make_grid_space(0, 2, 15), RBF(1.0)), arms, 100,
                                   np.random.default_rng(0))
    assert not small.complete and small.pulls == 0


def test_top_k_ties():
    assert list(top_k(np.array([1.0, 3.0, 3.0, 0.0]), 2)) == [1, 2]


def test_cts_all_arms_when_k_equals_n():
    model = LinearCanonicalModel(make_orthonormal_space(4))
    res = run_cts(model, 4, 4, 10, np.random.default_rng(0))
    assert res.selected == (0, 1, 2, 3) and res.pulls == 40


def test_cts_symmetric_arms_not_favoured():
    model = LinearCanonicalModel(make_orthonormal_space(8))
    seen = set()
    for s in range(50):
        seen.update(run_cts(model, 8, 2, 100, np.random.default_rng(s)).selected)
    assert len(seen) >= 4


def test_cts_separation():
    model = separation_model()
    hits = [run_cts(model, 3, 2, 200, np.random.default_rng(s)).selected == (0, 1) for s in range(50)]
    assert np.mean(hits) >= 0.95


def test_cucb_separation_and_accounting():
    model = separation_model()
    hits = [run_cucb(model, 3, 2, 200, 1.0, np.random.default_rng(s)).selected == (0, 1) for s in range(50)]
    assert np.mean(hits) >= 0.95
    assert cucb_init_rounds(500, 10) == 50
    res = run_cucb(model, 3, 2, 20, rng=np.random.default_rng(0))
    assert res.pulls == 40 and res.posterior_pulls.sum() == 40


def test_cucb_initialization_covers_all_arms():
    model = build_kernel_model(make_grid_space(-5, 5, 23), RBF(1.0))
    res = run_cucb(model, 23, 5, 5, rng=np.random.default_rng(0), record_trace=True)
    assert np.all(res.posterior_pulls >= 1)
    assert all(len(r[1]) == 5 for r in res.trace.rows)
    with pytest.raises(ValueError):
        run_cucb(model, 23, 5, 4, rng=np.random.default_rng(0))


def test_trace_csv():
    model = build_kernel_model(make_grid_space(0, 2, 5), RBF(1.0))
    res = run_cts(model, 5, 2, 3, np.random.default_rng(0), record_trace=True)
    lines = res.trace.to_csv().splitlines()
    assert lines[0] == "round,arm_or_subset,payoff"
    assert len(lines) == 4 and "|" in lines[1]


def test_out_of_range_arms_rejected():
    model = noisy_two_arm_model()
    with pytest.raises(IndexError):
        run_superarm_ts(model, [(0,), (2,)], 5, np.random.default_rng(0))
