"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` (or
``python tests/test_acceptance.py``).  The Monte Carlo criteria take several
minutes on one core; ``-m "not slow"`` skips them.
"""

import math
import sys
import time

import numpy as np
import pytest
import scipy.special

from rnfgeo import experiments as ex
from rnfgeo.config import ExperimentConfig
from rnfgeo.geometry import replica_measurements
from rnfgeo.kernels import ActivationSpec, KernelProfile, estimate_cri, kappa_prime_at_one
from rnfgeo.network import NetworkArchitecture, empirical_kernel, pairs_at_angles
from rnfgeo.spectral import (
    PowerSpectrum,
    angular_rule,
    compute_spectrum,
    estimate_spectral_index,
    explained_variance,
    gegenbauer_eval,
    gegenbauer_integral,
)
from rnfgeo.stats import jackknife
from rnfgeo.synthesis import SphericalGrid

SPARSE = 1.0 + math.sqrt(2.0)
KAC_RICE = [ActivationSpec.relu(), ActivationSpec.leaky_relu(0.2), ActivationSpec.gaussian(1.0),
            ActivationSpec.gaussian(SPARSE), ActivationSpec.gaussian(9.0), ActivationSpec.tanh(),
            ActivationSpec.logistic()]


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line straight to the terminal, then assert."""
    start = time.perf_counter()

    def report(n, ok, detail):
        with capsys.disabled():
            tag = "PASS" if ok else "FAIL"
            sys.stdout.write(f"\n{tag} criterion {n}: {detail} [{time.perf_counter() - start:.1f}s]\n")
        assert ok, detail

    return report


def test_criterion_01_gaussian_closed_form(verdict):
    errs = []
    for a in (1.0, SPARSE, 9.0):
        prof = KernelProfile.build(ActivationSpec.gaussian(a))
        errs.append(abs(prof.kappa_prime_1 - a * a / (2 * a + 1)))
    verdict(1, max(errs) < 1e-8, f"max |kappa'(1) - a^2/(2a+1)| = {max(errs):.2e}")


def test_criterion_02_depth_power_law(verdict):
    worst = 0.0
    for act in KAC_RICE:
        k1 = KernelProfile.build(act).kappa_prime_1
        for L in range(1, 11):
            got = kappa_prime_at_one(KernelProfile.build(act, depth=L))
            worst = max(worst, abs(got - k1**L) / k1**L)
    verdict(2, worst < 1e-6, f"max relative error {worst:.2e} over {len(KAC_RICE)} activations, L<=10")


def test_criterion_03_cri(verdict):
    heav = [estimate_cri(KernelProfile.build(ActivationSpec.heaviside(), depth=L))[0] for L in (1, 2, 3)]
    relu = estimate_cri(KernelProfile.build(ActivationSpec.relu()))[0]
    ok = abs(heav[0] - 0.5) <= 0.02 and abs(relu - 1.5) <= 0.05
    ok &= all(abs(b - 0.5**L) <= 0.1 * 0.5**L for L, b in zip((1, 2, 3), heav))
    verdict(3, ok, "heaviside beta_L = " + ", ".join(f"{b:.4f}" for b in heav) + f"; relu beta = {relu:.4f}")


def test_criterion_04_spectral_index(verdict):
    parts, ok = [], True
    for act in (ActivationSpec.heaviside(), ActivationSpec.relu()):
        prof = KernelProfile.build(act)
        alpha = estimate_spectral_index(compute_spectrum(prof, 2, 512)).alpha
        gap = abs(alpha / 2 - prof.cri_beta)
        ok &= gap < 0.1
        parts.append(f"{act.name} alpha/2={alpha / 2:.4f} beta={prof.cri_beta:.4f}")
    verdict(4, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_05_kac_rice_oracle(verdict):
    worst = {0.0: 0.0, 1.0: 0.0}
    for act, param in (("relu", None), ("gaussian", 1.0)):
        cfg = ExperimentConfig(experiment="nodal", activation=act, activation_param=param, depths=(1, 2, 4),
                               levels=(0.0, 1.0), ell_max=64, n_theta=256, n_phi=512, n_replicas=200, seed=0)
        for r in ex.run_nodal_experiment(cfg):
            if r.quantity == "length":
                worst[r.u] = max(worst[r.u], r.rel_deviation)
    ok = worst[0.0] < 0.05 and worst[1.0] < 0.10
    verdict(5, ok, f"max relative deviation {worst[0.0]:.4f} at u=0, {worst[1.0]:.4f} at u=1")


@pytest.mark.slow
def test_criterion_06_three_regimes(verdict):
    depths = tuple(range(1, 9))
    parts, ok = [], True
    for a, reps in ((9.0, 8), (1.0, 50), (SPARSE, 50)):
        cfg = ExperimentConfig(experiment="nodal", activation="gaussian", activation_param=a, depths=depths,
                               levels=(0.0,), ell_max="auto", n_theta=256, n_phi=512, n_replicas=reps, seed=5)
        rows = [r for r in ex.run_nodal_experiment(cfg) if r.quantity == "length"]
        slope = np.polyfit(depths, np.log([r.measured for r in rows]), 1)[0]
        if a == SPARSE:
            ok &= abs(slope) < 0.02
            parts.append(f"a=1+sqrt2 slope={slope:+.4f}")
        else:
            target = 0.5 * math.log(a * a / (2 * a + 1))
            ok &= abs(slope - target) <= 0.15 * abs(target)
            parts.append(f"a={a:g} slope={slope:+.4f} target={target:+.4f}")
    verdict(6, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_07_fractal_divergence(verdict):
    ladder = (64, 128, 256, 512)
    heav = ExperimentConfig(experiment="fractal-scan", activation="heaviside", levels=(0.0,),
                            resolutions=ladder, band_limit="tied", n_replicas=20, seed=0)
    (_, _, rep), = ex.fractal_reports(heav)
    relu = ExperimentConfig(experiment="fractal-scan", activation="relu", levels=(0.0,),
                            resolutions=ladder, band_limit="fixed", ell_max=64, n_replicas=20, seed=0)
    (_, _, flat), = ex.fractal_reports(relu)
    (m_prev, _), (m_last, _) = flat.mean_lengths[-2:]
    change = abs(m_last - m_prev) / m_prev
    ok = rep.increasing and abs(rep.fitted_dimension - 1.5) <= 0.15 and change < 0.05
    lengths = ", ".join(f"{m:.3f}" for m, _ in rep.mean_lengths)
    verdict(7, ok, f"heaviside lengths [{lengths}] D={rep.fitted_dimension:.4f}; relu last change {change:.4%}")


def unit_variance_spectra():
    gen = np.random.default_rng(2024)
    out = {}
    for act in (ActivationSpec.relu(), ActivationSpec.heaviside(), ActivationSpec.gaussian(1.0)):
        out[act.name] = compute_spectrum(KernelProfile.build(act), 2, 32)
    C = np.zeros(33)
    C[1:] = 1.0
    out["flat"] = PowerSpectrum(2, C)
    out["random"] = PowerSpectrum(2, gen.exponential(size=33) * (1 + np.arange(33.0)) ** -2.5)
    return {k: PowerSpectrum(2, s.C / explained_variance(s), k) for k, s in out.items()}


@pytest.mark.slow
def test_criterion_08_excursion_area(verdict):
    us = [0.0, 1.0]
    target = 4 * math.pi * scipy.special.ndtr(-np.array(us))
    grid = SphericalGrid(128, 256)
    parts, ok = [], True
    for name, spec in unit_variance_spectra().items():
        _, areas = replica_measurements(spec, grid, us, range(300), 0, "plain")
        m, se = jackknife(areas)
        z = (m - target) / se
        ok &= bool(np.all(np.abs(z) <= 3))
        parts.append(f"{name} z=({z[0]:+.2f}, {z[1]:+.2f})")
    verdict(8, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_09_finite_width(verdict):
    us = np.cos(np.linspace(0, math.pi, 9))
    pairs = pairs_at_angles(us, 2, seed=1)
    worst, parts = 0.0, []
    for act in (ActivationSpec.heaviside(), ActivationSpec.relu(), ActivationSpec.gaussian(1.0)):
        for L in (1, 2, 4):
            arch = NetworkArchitecture.build(act, [1000] * L)
            err = max(abs(e.empirical_cov - e.kappa_L) for e in empirical_kernel(arch, pairs, 2000, 3))
            worst = max(worst, err)
        parts.append(act.name)
    verdict(9, worst < 0.05, f"sup |empirical - kappa_L| = {worst:.4f} over {', '.join(parts)}, L in 1,2,4")


def test_criterion_10_special_functions(verdict):
    rec = 0.0
    for d in (2, 3, 5):
        for theta in np.linspace(0.05, 1.5, 12):
            for ell in range(51):
                rec = max(rec, abs(gegenbauer_integral(ell, d, theta) - gegenbauer_eval(ell, d, math.cos(theta))))
    orth = 0.0
    for d in (2, 3, 5):
        t, w = angular_rule(512, d)
        G = np.array([gegenbauer_eval(ell, d, t) for ell in range(51)])
        gram = (G * w) @ G.T
        orth = max(orth, float(np.max(np.abs(gram - np.diag(np.diag(gram))))))
    t = np.linspace(-1 + 1e-3, 1, 2001)
    trip = {}
    for act in (ActivationSpec.gaussian(1.0), ActivationSpec.relu(), ActivationSpec.heaviside()):
        prof = KernelProfile.build(act)
        trip[act.name] = float(np.max(np.abs(compute_spectrum(prof, 2, 128).kernel(t) - prof.eval(t))))
    ok = rec < 1e-8 and orth < 1e-10
    ok &= trip["gaussian(1)"] < 1e-4 and trip["relu"] < 1e-4 and trip["heaviside"] < 1e-2
    detail = f"recurrence/integral {rec:.1e}; orthogonality {orth:.1e}; round trip " + ", ".join(
        f"{k} {v:.1e}" for k, v in trip.items())
    verdict(10, ok, detail)


@pytest.mark.slow
def test_criterion_11_variance_scan(verdict):
    cfg = ExperimentConfig(experiment="variance-scan", activation="gaussian", activation_param=9.0,
                           depths=tuple(range(1, 61)), ell_max=256)
    vals = [r.measured for r in ex.run_variance_scan(cfg)]
    below = next((L for L, v in enumerate(vals, 1) if v < 0.99), None)
    ok = ex.non_increasing_after_peak(vals) and below is not None
    verdict(11, ok, f"peak {max(vals):.6f} at L={int(np.argmax(vals)) + 1}; first L below 0.99: {below}; "
                    f"L=60 value {vals[-1]:.4f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
