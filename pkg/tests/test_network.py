import math

import numpy as np
import pytest

from rnfgeo.errors import DomainError
from rnfgeo.kernels import ActivationSpec
from rnfgeo.network import (
    NetworkArchitecture,
    empirical_kernel,
    evaluate,
    kernel_report_csv,
    pairs_at_angles,
    replica_products,
    sample_network,
)


def test_parameter_variances():
    act = ActivationSpec.relu()
    arch = NetworkArchitecture.build(act, [400, 300], gamma_b=0.2)
    net = sample_network(arch, 3)
    w0, w1, w2 = net.weights
    assert w0.shape == (400, 3) and w1.shape == (300, 400) and w2.shape == (1, 300)
    assert w0.var() == pytest.approx(0.8, rel=0.1)
    gw = arch.calibration.gamma_w
    assert w1.var() == pytest.approx(gw / 400, rel=0.05)
    wide = sample_network(NetworkArchitecture.build(act, [3000, 3000], gamma_b=0.2), 3)
    assert np.concatenate(wide.biases[:2]).var() == pytest.approx(0.2, rel=0.05)


def test_realization_deterministic():
    arch = NetworkArchitecture.build(ActivationSpec.tanh(), [20, 20])
    a, b = sample_network(arch, 7, 2), sample_network(arch, 7, 2)
    x = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    assert np.array_equal(evaluate(a, x), evaluate(b, x))
    assert not np.array_equal(evaluate(a, x), evaluate(sample_network(arch, 7, 3), x))


def test_evaluate_matches_manual_forward_pass():
    act = ActivationSpec.gaussian(1.0)
    arch = NetworkArchitecture.build(act, [5, 4], gamma_b=0.1)
    net = sample_network(arch, 1)
    x = np.array([0.6, 0.0, 0.8])
    h = net.weights[0] @ x + net.biases[0]
    h = net.weights[1] @ act(h) + net.biases[1]
    out = net.weights[2] @ act(h) + net.biases[2]
    assert evaluate(net, x[None, :])[0] == pytest.approx(out[0], abs=1e-14)


def test_points_must_be_unit_vectors():
    net = sample_network(NetworkArchitecture.build(ActivationSpec.relu(), [3]), 0)
    with pytest.raises(DomainError):
        evaluate(net, np.array([[1.0, 1.0, 0.0]]))
    with pytest.raises(DomainError):
        evaluate(net, np.array([[1.0, 0.0]]))


def test_architecture_validation():
    with pytest.raises(DomainError):
        NetworkArchitecture.build(ActivationSpec.relu(), [0])
    arch = NetworkArchitecture.build(ActivationSpec.relu(), [10, 40], d=3)
    assert arch.depth == 2 and arch.ambient_dim == 4
    assert arch.bias_allowance() == pytest.approx(0.125)


def test_pairs_have_requested_angles():
    us = np.cos(np.linspace(0, math.pi, 7))
    for x, y in pairs_at_angles(us, 4, seed=2):
        assert np.linalg.norm(x) == pytest.approx(1, abs=1e-14)
        assert np.linalg.norm(y) == pytest.approx(1, abs=1e-14)
    got = [float(np.dot(x, y)) for x, y in pairs_at_angles(us, 4, seed=2)]
    assert np.allclose(got, us, atol=1e-14)


def test_limit_kernel_with_bias():
    act = ActivationSpec.heaviside()
    arch = NetworkArchitecture.build(act, [10], gamma_b=0.3)
    u = 0.2
    inner = 0.3 + 0.7 * u
    expect = 0.3 + 0.7 * (1 - math.acos(inner) / math.pi)
    assert arch.limit_kernel(u) == pytest.approx(expect, abs=1e-15)


def test_methods_agree_small_network():
    arch = NetworkArchitecture.build(ActivationSpec.relu(), [30, 30], gamma_b=0.1)
    pairs = pairs_at_angles([1.0, 0.3, -0.6], 2, seed=1)
    ests = {m: empirical_kernel(arch, pairs, 1500, 5, method=m) for m in ("conditional", "direct", "explicit")}
    for k in range(3):
        c, d, e = (ests[m][k] for m in ("conditional", "direct", "explicit"))
        assert abs(c.empirical_cov - d.empirical_cov) < 3 * math.hypot(c.std_error, d.std_error)
        assert abs(c.empirical_cov - e.empirical_cov) < 3 * math.hypot(c.std_error, e.std_error)
        assert c.std_error < d.std_error


def test_wide_network_approaches_limit():
    arch = NetworkArchitecture.build(ActivationSpec.gaussian(1.0), [1000, 1000])
    pairs = pairs_at_angles(np.cos(np.linspace(0, math.pi, 5)), 2, seed=0)
    for e in empirical_kernel(arch, pairs, 200, 1):
        assert abs(e.empirical_cov - e.kappa_L) < 0.05


def test_replica_blocks_concatenate():
    arch = NetworkArchitecture.build(ActivationSpec.tanh(), [15])
    pairs = pairs_at_angles([0.5], 2)
    whole = replica_products(arch, pairs, range(10), 3)
    parts = np.concatenate([replica_products(arch, pairs, range(0, 4), 3), replica_products(arch, pairs, range(4, 10), 3)])
    assert np.array_equal(whole, parts)


def test_report_csv():
    arch = NetworkArchitecture.build(ActivationSpec.relu(), [5])
    text = kernel_report_csv(empirical_kernel(arch, pairs_at_angles([0.0], 2), 4, 0))
    lines = text.splitlines()
    assert lines[0] == "u,empirical_cov,std_error,kappa_L"
    assert len(lines) == 2


def test_empirical_kernel_errors():
    arch = NetworkArchitecture.build(ActivationSpec.relu(), [5])
    with pytest.raises(DomainError):
        empirical_kernel(arch, pairs_at_angles([0.0], 2), 1, 0)
    with pytest.raises(DomainError):
        empirical_kernel(arch, pairs_at_angles([0.0], 2), 4, 0, method="bogus")
    with pytest.raises(DomainError):
        pairs_at_angles([1.5])
