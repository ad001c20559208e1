import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rnfgeo.stats import jackknife, loglog_fit


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(2, 60), elements=st.floats(-1e3, 1e3)))
def test_jackknife_mean_is_standard_error(x):
    est, se = jackknife(x)
    assert est == pytest.approx(x.mean(), abs=1e-9)
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-7, abs=1e-9)


def test_jackknife_columns_and_custom_statistic():
    x = np.arange(20.0).reshape(10, 2)
    est, se = jackknife(x)
    assert est.shape == (2,) and se.shape == (2,)
    med, mse = jackknife(x[:, 0], statistic=np.median)
    assert med == 9.0 and mse > 0


def test_jackknife_single_sample():
    _, se = jackknife(np.array([1.0]))
    assert np.isnan(se)


def test_loglog_fit_exact():
    x = np.geomspace(1, 100, 10)
    slope, intercept, r2 = loglog_fit(x, 3 * x**-1.5)
    assert slope == pytest.approx(-1.5, abs=1e-12)
    assert math.exp(intercept) == pytest.approx(3, rel=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)
