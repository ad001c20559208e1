import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from rnfgeo.errors import ClassificationError, DomainError
from rnfgeo.kernels import (
    ActivationSpec,
    Calibration,
    KernelClass,
    KernelProfile,
    Regime,
    classify,
    compose_kernel,
    estimate_cri,
    gaussian_pair_expectation,
    kappa_prime_at_one,
    kappa_single,
    regime,
)

A_SPARSE = 1.0 + math.sqrt(2.0)

ALL_ACTIVATIONS = [
    ActivationSpec.heaviside(),
    ActivationSpec.relu(),
    ActivationSpec.leaky_relu(0.2),
    ActivationSpec.gaussian(1.0),
    ActivationSpec.gaussian(A_SPARSE),
    ActivationSpec.gaussian(9.0),
    ActivationSpec.tanh(),
    ActivationSpec.logistic(),
    ActivationSpec.tabulated([(-2.0, -1.0), (0.0, 0.0), (1.0, 2.0), (3.0, 2.5)]),
]


def brute_pair(act, u):
    """E[sigma(Z1) sigma(u Z1 + sqrt(1-u^2) Z2)] by adaptive 2-D quadrature."""
    s = math.sqrt(max(0.0, 1.0 - u * u))

    def f(z2, z1):
        return act(z1) * act(u * z1 + s * z2) * math.exp(-0.5 * (z1 * z1 + z2 * z2)) / (2 * math.pi)

    val, _ = scipy.integrate.dblquad(f, -9, 9, -9, 9, epsabs=1e-11, epsrel=1e-11)
    return val


# ---------------------------------------------------------------------------
# activations and calibration


@pytest.mark.parametrize("a", [0.5, 1.0, A_SPARSE, 9.0])
def test_gaussian_second_moment_closed_form(a):
    act = ActivationSpec.gaussian(a)
    assert act.second_moment == pytest.approx(1.0 / math.sqrt(1.0 + 2.0 * a), rel=1e-14)


@pytest.mark.parametrize("act", ALL_ACTIVATIONS, ids=lambda a: a.name)
def test_second_moment_matches_direct_integral(act):
    direct, _ = scipy.integrate.quad(lambda z: act(z) ** 2 * math.exp(-0.5 * z * z), -12, 12,
                                     points=[0.0], limit=200)
    assert act.second_moment == pytest.approx(direct / math.sqrt(2 * math.pi), rel=1e-8)


def test_calibration_gamma_w():
    act = ActivationSpec.relu()
    cal = Calibration.for_activation(act, 0.3)
    assert cal.gamma_w == (1 - 0.3) / 0.5


@pytest.mark.parametrize("bad", [lambda: ActivationSpec.gaussian(0.0), lambda: ActivationSpec.leaky_relu(1.5),
                                 lambda: ActivationSpec.tabulated([(0, 1)]),
                                 lambda: ActivationSpec.tabulated([(0, 0), (0, 1)]),
                                 lambda: Calibration.for_activation(ActivationSpec.relu(), 1.0)])
def test_invalid_activation_parameters(bad):
    with pytest.raises(DomainError):
        bad()


# ---------------------------------------------------------------------------
# single-layer kernel


def test_gaussian_kernel_at_zero():
    act = ActivationSpec.gaussian(1.0)
    assert kappa_single(act, Calibration.for_activation(act), 0.0) == pytest.approx(math.sqrt(0.75), abs=1e-15)


def test_heaviside_and_relu_at_zero():
    h, r = ActivationSpec.heaviside(), ActivationSpec.relu()
    assert kappa_single(h, Calibration.for_activation(h), 0.0) == pytest.approx(0.5, abs=1e-15)
    assert kappa_single(r, Calibration.for_activation(r), 0.0) == pytest.approx(1 / math.pi, abs=1e-15)


@pytest.mark.parametrize("act", ALL_ACTIVATIONS, ids=lambda a: a.name)
@pytest.mark.parametrize("gb", [0.0, 0.1, 0.5])
def test_fixed_point_at_one(act, gb):
    assert abs(kappa_single(act, Calibration.for_activation(act, gb), 1.0) - 1.0) < 1e-12


@pytest.mark.parametrize("act", [ActivationSpec.heaviside(), ActivationSpec.relu(), ActivationSpec.leaky_relu(0.3),
                                 ActivationSpec.gaussian(1.0), ActivationSpec.gaussian(A_SPARSE),
                                 ActivationSpec.gaussian(9.0)], ids=lambda a: a.name)
def test_quadrature_agrees_with_closed_form(act):
    cal = Calibration.for_activation(act, 0.0)
    u = np.linspace(-1, 1, 101)
    closed = kappa_single(act, cal, u, method="closed")
    quad = kappa_single(act, cal, u, method="quadrature")
    assert np.max(np.abs(closed - quad)) < 1e-8


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("act", [ActivationSpec.tanh(), ActivationSpec.logistic(),
                                 ActivationSpec.tabulated([(-1.0, 0.0), (1.0, 1.0)])], ids=lambda a: a.name)
@pytest.mark.parametrize("u", [-0.7, 0.0, 0.4, 0.95])
def test_quadrature_against_adaptive_oracle(act, u):
    got = gaussian_pair_expectation(act, np.array([u]), "product")[0]
    assert got == pytest.approx(brute_pair(act, u), abs=1e-8)


def test_bias_folding():
    act = ActivationSpec.heaviside()
    for gb in (0.0, 0.25):
        cal = Calibration.for_activation(act, gb)
        u = np.linspace(-1, 1, 11)
        expect = gb + (1 - gb) * (1 - np.arccos(u) / math.pi)
        assert np.allclose(kappa_single(act, cal, u), expect, atol=1e-15)


@pytest.mark.parametrize("act", ALL_ACTIVATIONS, ids=lambda a: a.name)
def test_monotone_and_bounded(act):
    cal = Calibration.for_activation(act, 0.0)
    u = np.linspace(0.0, 1.0, 1001) if act.is_even else np.linspace(-1.0, 1.0, 1001)
    k = kappa_single(act, cal, u)
    assert np.all(np.diff(k) >= -1e-12)
    assert np.all(np.abs(k) <= 1 + 1e-12)


def test_gaussian_kernel_is_even():
    act = ActivationSpec.gaussian(2.0)
    cal = Calibration.for_activation(act)
    u = np.linspace(0, 1, 21)
    assert np.allclose(kappa_single(act, cal, u), kappa_single(act, cal, -u), atol=1e-15)


def test_domain_errors():
    act = ActivationSpec.relu()
    cal = Calibration.for_activation(act)
    with pytest.raises(DomainError):
        kappa_single(act, cal, 1.5)
    with pytest.raises(DomainError):
        kappa_single(act, cal, float("nan"))


@settings(max_examples=40, deadline=None)
@given(u=st.floats(-1.0, 1.0), gb=st.floats(0.0, 0.9))
def test_relu_closed_form_property(u, gb):
    act = ActivationSpec.relu()
    expect = gb + (1 - gb) * (math.sqrt(1 - u * u) + u * (math.pi - math.acos(u))) / math.pi
    assert kappa_single(act, Calibration.for_activation(act, gb), u) == pytest.approx(expect, abs=1e-14)


# ---------------------------------------------------------------------------
# composition and derived scalars


def test_compose_heaviside_by_hand():
    p = KernelProfile.build(ActivationSpec.heaviside(), 0.0, 2)
    assert p.eval(0.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    single = KernelProfile.build(ActivationSpec.heaviside())
    assert compose_kernel(single, 1) is single
    assert compose_kernel(single, 3).depth == 3


def test_composed_fixed_point():
    p = KernelProfile.build(ActivationSpec.gaussian(A_SPARSE), 0.0, 5)
    assert p.eval(1.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("a,expect", [(9.0, 81 / 19), (A_SPARSE, 1.0), (1.0, 1 / 3)])
def test_gaussian_kappa_prime_closed(a, expect):
    p = KernelProfile.build(ActivationSpec.gaussian(a))
    assert p.kappa_prime_1 == pytest.approx(expect, rel=1e-12)
    assert kappa_prime_at_one(p) == pytest.approx(expect, rel=1e-12)


def test_relu_kappa_prime_and_depth_three():
    assert kappa_prime_at_one(KernelProfile.build(ActivationSpec.relu())) == pytest.approx(1.0, rel=1e-12)
    p = KernelProfile.build(ActivationSpec.gaussian(1.0), 0.0, 3)
    assert kappa_prime_at_one(p) == pytest.approx(1 / 27, rel=1e-6)


def test_numeric_kappa_prime_against_finite_difference():
    act = ActivationSpec.tanh()
    p = KernelProfile.build(act)
    cal = p.calibration
    # independent estimate: central difference of kappa on the interior, extrapolated to u = 1
    us = np.array([1 - 4e-3, 1 - 2e-3, 1 - 1e-3])
    h = 1e-5
    slopes = (kappa_single(act, cal, us + h) - kappa_single(act, cal, us - h)) / (2 * h)
    fit = np.polyfit(1 - us, slopes, 2)
    assert p.kappa_prime_1 == pytest.approx(fit[-1], rel=1e-5)


def test_fractal_profile_has_no_derivative():
    p = KernelProfile.build(ActivationSpec.heaviside())
    assert p.klass is KernelClass.FRACTAL
    assert p.regime is None
    assert math.isinf(p.kappa_prime_1)
    with pytest.raises(ClassificationError):
        kappa_prime_at_one(p)


def test_heaviside_cri_and_coefficient():
    beta, c1 = estimate_cri(KernelProfile.build(ActivationSpec.heaviside()))
    assert beta == pytest.approx(0.5, abs=0.02)
    assert c1 == pytest.approx(math.sqrt(2) / math.pi, rel=0.01)


def test_relu_cri():
    beta, _ = estimate_cri(KernelProfile.build(ActivationSpec.relu()))
    assert beta == pytest.approx(1.5, abs=0.05)


@pytest.mark.parametrize("act", [ActivationSpec.gaussian(1.0), ActivationSpec.tanh()], ids=lambda a: a.name)
def test_smooth_activation_cri_is_two(act):
    p = KernelProfile.build(act)
    assert p.cri_beta == pytest.approx(2.0, abs=0.05)
    assert p.klass is KernelClass.KAC_RICE


def test_classify_and_regime():
    assert classify(0.5) is KernelClass.FRACTAL
    assert classify(1.5) is KernelClass.KAC_RICE
    assert classify(2.0) is KernelClass.KAC_RICE
    with pytest.raises(ClassificationError):
        classify(1.0)
    with pytest.raises(DomainError):
        classify(2.5)
    assert regime(1 / 3).value is Regime.LOW_DISORDER
    assert regime(1.0).value is Regime.SPARSE
    assert regime(81 / 19).value is Regime.HIGH_DISORDER
    with pytest.raises(DomainError):
        regime(0.0)


def test_profile_regimes_for_gaussian_family():
    labels = {a: KernelProfile.build(ActivationSpec.gaussian(a)).regime.value for a in (1.0, A_SPARSE, 9.0)}
    assert labels == {1.0: Regime.LOW_DISORDER, A_SPARSE: Regime.SPARSE, 9.0: Regime.HIGH_DISORDER}
