"""Gegenbauer expansions of isotropic kernels on S^d.

A unit-variance isotropic covariance on S^d expands as

    kappa(t) = sum_l C_l n_{l,d} / omega_d G_{l;d}(t)

with G normalized to G(1) = 1.  This module evaluates G by recurrence and by
an integral representation, inverts the expansion by Gauss-Legendre
quadrature and fits the tail exponent of the resulting spectrum.
"""

from __future__ import annotations

import csv
import functools
import io
import math
import sys
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.special

from .errors import DomainError, NumericError, RangeError, SpectrumError

PSD_RTOL = 1e-10
INDEX_SKIP_RTOL = 1e-14
INDEX_MIN_POINTS = 8
MIN_NODES = 512
NODES_PER_ELL = 4


def n_harmonics(ell, d):
    """Dimension of the degree-``ell`` harmonic space on S^d (exact integer)."""
    ell, d = int(ell), int(d)
    if ell < 0 or d < 2:
        raise DomainError("n_harmonics needs ell >= 0 and d >= 2")
    if ell == 0:
        return 1
    n = (2 * ell + d - 1) * math.comb(ell + d - 2, ell - 1) // ell
    if n > sys.float_info.max:
        raise RangeError(f"n_harmonics({ell}, {d}) exceeds the floating-point range")
    return n


def sphere_volume(d):
    """Surface area omega_d of the unit sphere S^d in R^{d+1}."""
    if int(d) != d or d < 1:
        raise DomainError("sphere dimension must be a positive integer")
    return 2.0 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(np.abs(t) > 1.0):
        raise DomainError("Gegenbauer argument must lie in [-1, 1]")
    return t


def _gegenbauer_rows(ell_max, d, t):
    """Yield (ell, G_ell(t)) for ell = 0..ell_max.

    Normalized recurrence with lambda = (d - 1)/2:
    (l + 2 lambda) G_{l+1} = 2 (l + lambda) t G_l - l G_{l-1}.
    Normalized values stay in [-1, 1], so no rescaling is needed.
    """
    lam = 0.5 * (d - 1)
    g_prev, g = np.ones_like(t), t.copy()
    yield 0, g_prev
    if ell_max >= 1:
        yield 1, g
    for ell in range(1, ell_max):
        g_prev, g = g, (2.0 * (ell + lam) * t * g - ell * g_prev) / (ell + 2.0 * lam)
        yield ell + 1, g


def gegenbauer_eval(ell, d, t):
    """Normalized Gegenbauer polynomial G_{ell;d}(t), with G(1) = 1."""
    if int(ell) != ell or ell < 0:
        raise DomainError("degree must be a non-negative integer")
    if int(d) != d or d < 2:
        raise DomainError("d must be an integer >= 2")
    t = _check_t(t)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t)
    for _, g in _gegenbauer_rows(int(ell), int(d), tt):
        pass
    if ell == 0:
        g = np.ones_like(tt)
    return float(g[0]) if scalar else g.copy()


def gegenbauer_integral(ell, d, theta):
    """G_{ell;d}(cos theta) from its one-dimensional integral representation.

    G(cos th) = K / sin^{d-2}(th) * int_0^th cos((l + (d-1)/2) psi)
                (2 cos psi - 2 cos th)^{(d-3)/2} dpsi,
    K = 2^{3-d} (d-2)! / Gamma((d-1)/2)^2.

    The endpoint factor (th - psi)^{(d-3)/2} is handed to QUADPACK as an
    algebraic weight; the remaining integrand is smooth.
    """
    if int(ell) != ell or ell < 0 or int(d) != d or d < 2:
        raise DomainError("need integer ell >= 0 and d >= 2")
    if not 0.0 < theta < 0.5 * math.pi:
        raise DomainError("theta must lie in (0, pi/2)")
    nu = ell + 0.5 * (d - 1)
    expo = 0.5 * (d - 3)

    def smooth(psi):
        # (2 cos psi - 2 cos th) / (th - psi), written without cancellation
        h = 0.5 * (theta - psi)
        ratio = 2.0 * math.sin(0.5 * (theta + psi)) * np.sinc(h / math.pi)
        return math.cos(nu * psi) * ratio**expo

    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
        try:
            val, _ = scipy.integrate.quad(
                smooth, 0.0, theta, weight="alg", wvar=(0.0, expo),
                epsabs=1e-13, epsrel=1e-12, limit=400,
            )
        except scipy.integrate.IntegrationWarning as exc:
            raise NumericError(f"Gegenbauer integral did not converge: {exc}") from None
    const = 2.0 ** (3 - d) * math.factorial(d - 2) / math.gamma(0.5 * (d - 1)) ** 2
    return const * val / math.sin(theta) ** (d - 2)


@functools.lru_cache(maxsize=16)
def _angular_rule_cached(n, d):
    x, w = scipy.special.roots_legendre(n)
    theta = 0.5 * math.pi * (x + 1.0)
    t = np.cos(theta)
    wt = 0.5 * math.pi * w * np.sin(theta) ** (d - 1)
    t.setflags(write=False)
    wt.setflags(write=False)
    return t, wt


def angular_rule(n, d):
    """Nodes t_i and weights for int_{-1}^{1} f(t) (1 - t^2)^{d/2 - 1} dt.

    Gauss-Legendre in the angle theta = arccos t, where the weight becomes
    sin^{d-1}(theta) and arc-cosine type kernels are smooth.
    """
    return _angular_rule_cached(int(n), int(d))


@dataclass(frozen=True)
class PowerSpectrum:
    """Angular power spectrum C_0..C_{ell_max} on S^d."""

    d: int
    C: np.ndarray
    source: str = ""

    def __post_init__(self):
        c = np.array(self.C, dtype=float).ravel()
        if c.size == 0 or np.any(~np.isfinite(c)):
            raise DomainError("spectrum must be a non-empty finite sequence")
        if int(self.d) != self.d or self.d < 2:
            raise DomainError("spectrum dimension d must be an integer >= 2")
        c.setflags(write=False)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "d", int(self.d))

    @property
    def ell_max(self):
        return self.C.size - 1

    @property
    def n_ell(self):
        return np.array([n_harmonics(ell, self.d) for ell in range(self.C.size)], dtype=float)

    @property
    def min_allowed(self):
        return -PSD_RTOL * max(float(self.C.max()), 0.0)

    def check_psd(self):
        bad = np.flatnonzero(self.C < self.min_allowed)
        if bad.size:
            ell = int(bad[0])
            raise SpectrumError(f"C_{ell} = {self.C[ell]:.3e} is negative beyond tolerance")
        return self

    def normalized(self):
        """Copy with tolerated negative entries clamped to zero."""
        self.check_psd()
        return PowerSpectrum(self.d, np.clip(self.C, 0.0, None), self.source)

    def truncated(self, ell_max):
        if ell_max < 0 or ell_max > self.ell_max:
            raise DomainError("truncation degree out of range")
        return PowerSpectrum(self.d, self.C[: ell_max + 1], self.source)

    def kernel(self, t):
        """Evaluate sum_l C_l n_l / omega_d G_l(t)."""
        t = _check_t(t)
        tt = np.atleast_1d(t)
        scale = self.n_ell / sphere_volume(self.d)
        out = np.zeros_like(tt)
        for ell, g in _gegenbauer_rows(self.ell_max, self.d, tt):
            out += self.C[ell] * scale[ell] * g
        return float(out[0]) if t.ndim == 0 else out

    def to_csv(self, fh=None):
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ell", "C_ell", "n_ell"])
        for ell, c in enumerate(self.C):
            w.writerow([ell, f"{c:.17g}", n_harmonics(ell, self.d)])
        return buf.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text, d=2, source=""):
        rows = list(csv.DictReader(io.StringIO(text)))
        ells = [int(r["ell"]) for r in rows]
        if ells != list(range(len(ells))):
            raise DomainError("spectrum CSV must list ell = 0, 1, 2, ... in order")
        return cls(d, [float(r["C_ell"]) for r in rows], source)


def compute_spectrum(kernel, d, ell_max, n_nodes=None, source=None):
    """Invert the Gegenbauer expansion of ``kernel`` up to ``ell_max``.

    ``kernel`` is a KernelProfile or any vectorized callable on [-1, 1].
    Both the projection and the normalization integrals use the same
    rule from ``angular_rule``.
    """
    if int(ell_max) != ell_max or ell_max < 0:
        raise DomainError("ell_max must be a non-negative integer")
    if int(d) != d or d < 2:
        raise DomainError("d must be an integer >= 2")
    ell_max, d = int(ell_max), int(d)
    n = n_nodes or max(MIN_NODES, NODES_PER_ELL * ell_max)
    x, weight = angular_rule(n, d)
    kx = np.asarray(kernel(x), dtype=float)
    if kx.shape != x.shape or np.any(~np.isfinite(kx)):
        raise NumericError("kernel returned non-finite values on the quadrature nodes")
    kw = kx * weight
    omega = sphere_volume(d)
    C = np.empty(ell_max + 1)
    for ell, g in _gegenbauer_rows(ell_max, d, x):
        norm = float(np.dot(g * g, weight))
        if norm < 1e-300:
            raise RangeError(f"normalization integral underflows at ell = {ell}")
        C[ell] = omega / n_harmonics(ell, d) * float(np.dot(g, kw)) / norm
    if source is None:
        source = getattr(kernel, "label", "kernel")
    spec = PowerSpectrum(d, C, source)
    spec.check_psd()
    return spec


def explained_variance(spectrum):
    """Fraction of unit variance carried by degrees up to ell_max."""
    return float(np.dot(spectrum.C, spectrum.n_ell) / sphere_volume(spectrum.d))


@dataclass(frozen=True)
class SpectralIndexEstimate:
    alpha: float
    fit_range: tuple
    r_squared: float
    n_points: int = 0


def estimate_spectral_index(spectrum):
    """Fit C_l ~ l^{-(alpha + d)} over l in [ell_max/4, ell_max].

    Entries below 1e-14 max C (parity zeros, say) are left out.
    """
    if spectrum.ell_max < 64:
        raise DomainError("spectral index fit needs ell_max >= 64")
    lo, hi = math.ceil(spectrum.ell_max / 4), spectrum.ell_max
    ell = np.arange(lo, hi + 1)
    c = spectrum.C[lo : hi + 1]
    keep = c > INDEX_SKIP_RTOL * spectrum.C.max()
    if keep.sum() < INDEX_MIN_POINTS:
        raise NumericError(
            f"only {int(keep.sum())} usable C_l in [{lo}, {hi}]; need {INDEX_MIN_POINTS}"
        )
    lx, ly = np.log(ell[keep]), np.log(c[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    alpha = -slope - spectrum.d
    if not alpha > 0:
        raise NumericError(f"fitted spectral index {alpha:.4f} is not positive")
    return SpectralIndexEstimate(float(alpha), (lo, hi), float(r2), int(keep.sum()))
