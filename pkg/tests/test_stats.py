import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandit_subset.stats import MeanEstimate

floats = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(floats, min_size=1, max_size=30), st.lists(floats, min_size=1, max_size=30))
def test_merge_matches_pooled_samples(a, b):
    merged = MeanEstimate.from_samples(a).merge(MeanEstimate.from_samples(b))
    pooled = MeanEstimate.from_samples(a + b)
    assert merged.samples == pooled.samples
    assert merged.mean == pytest.approx(pooled.mean, abs=1e-9)
    assert merged.std == pytest.approx(pooled.std, rel=1e-6, abs=1e-6)


def test_single_sample_has_zero_spread():
    est = MeanEstimate.from_samples([2.5])
    assert (est.mean, est.std, est.standard_error) == (2.5, 0.0, 0.0)


def test_empty_rejected():
    with pytest.raises(ValueError):
        MeanEstimate.from_samples([])


def test_standard_error():
    est = MeanEstimate.from_samples(np.arange(10.0))
    assert est.standard_error == pytest.approx(np.std(np.arange(10.0), ddof=1) / np.sqrt(10))
