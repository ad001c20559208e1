"""Gaussian fields on S^2 from an angular power spectrum.

Real orthonormal spherical harmonics on an equiangular grid.  Within degree
l the basis index m = 1..2l+1 runs zonal, cos(phi), sin(phi), cos(2 phi), ...
so coefficient (l, m) sits at flat position l^2 + m - 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DomainError, RangeError
from .spectral import PowerSpectrum

MAX_ELL = 10_000
# bytes allowed for a cached Legendre table
_TABLE_CACHE_BYTES = 64 * 2**20
# bytes allowed for one batch of per-order Fourier sums
_BATCH_BYTES = 640 * 2**20


@dataclass(frozen=True)
class SphericalGrid:
    """Equiangular grid: theta_i = (i + 1/2) pi / n_theta, phi_j = 2 pi j / n_phi."""

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if int(self.n_theta) != self.n_theta or self.n_theta < 4:
            raise DomainError("n_theta must be an integer >= 4")
        if int(self.n_phi) != self.n_phi or self.n_phi < 8 or self.n_phi % 2:
            raise DomainError("n_phi must be an even integer >= 8")

    @classmethod
    def square(cls, n_theta):
        return cls(int(n_theta), 2 * int(n_theta))

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    @property
    def theta(self):
        return (np.arange(self.n_theta) + 0.5) * math.pi / self.n_theta

    @property
    def phi(self):
        return np.arange(self.n_phi) * 2.0 * math.pi / self.n_phi

    @property
    def dtheta(self):
        return math.pi / self.n_theta

    @property
    def dphi(self):
        return 2.0 * math.pi / self.n_phi

    def quadrature_weights(self):
        """Per-node area weights sin(theta_i) dtheta dphi, shape (n_theta, 1)."""
        return (np.sin(self.theta) * self.dtheta * self.dphi)[:, None]

    def unit_vectors(self):
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)


@dataclass(frozen=True)
class HarmonicCoefficients:
    ell_max: int
    a: np.ndarray
    seed: int = 0
    replica: int = 0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != ((self.ell_max + 1) ** 2,):
            raise DomainError("coefficient array must have (ell_max + 1)^2 entries")
        object.__setattr__(self, "a", a)

    @staticmethod
    def index(ell, m):
        if not 1 <= m <= 2 * ell + 1:
            raise DomainError(f"m must lie in [1, {2 * ell + 1}] for ell = {ell}")
        return ell * ell + m - 1

    def get(self, ell, m):
        return float(self.a[self.index(ell, m)])

    @classmethod
    def single(cls, ell_max, ell, m, value=1.0):
        a = np.zeros((ell_max + 1) ** 2)
        a[cls.index(ell, m)] = value
        return cls(ell_max, a)


@dataclass(frozen=True)
class FieldRealization:
    grid: SphericalGrid
    values: np.ndarray
    spectrum_id: str = ""
    seed: int = 0
    replica_index: int = 0

    def to_csv(self, fh=None):
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "theta", "phi", "value"])
        th, ph = self.grid.theta, self.grid.phi
        for i in range(self.grid.n_theta):
            for j in range(self.grid.n_phi):
                w.writerow([i, j, f"{th[i]:.17g}", f"{ph[j]:.17g}", f"{self.values[i, j]:.17g}"])
        return buf.getvalue() if fh is None else None


def sample_coefficients(spectrum, seed, replica=0):
    """Independent a_{l,m} ~ N(0, C_l) from the keyed stream (seed, replica).

    Coefficient (l, m) uses counter word l^2 + m - 1, so a prefix of the
    coefficients does not depend on ell_max.
    """
    if spectrum.d != 2:
        raise DomainError("synthesis is implemented for S^2 only")
    spectrum = spectrum.normalized()
    L = spectrum.ell_max
    z = rng.normals(seed, replica, rng.SYNTHESIS, (L + 1) ** 2)
    ells = np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)
    return HarmonicCoefficients(L, z * np.sqrt(spectrum.C[ells]), int(seed), int(replica))


# ---------------------------------------------------------------------------
# associated Legendre tables


def _recurrence_coeffs(ell):
    k = np.arange(ell)
    a = np.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - k * k))
    b = np.sqrt(((ell - 1.0) ** 2 - k * k) / (4.0 * (ell - 1.0) ** 2 - 1.0))
    return a, b


def _legendre_rows(ell_max, theta):
    """Yield (l, lam) with lam[k, i] the orthonormal lambda_l^k(theta_i), k <= l.

    Y_l0 = lambda_l^0, and the cos/sin harmonics are sqrt(2) lambda_l^k
    times cos(k phi) / sin(k phi).  No Condon-Shortley phase.
    """
    x, s = np.cos(theta), np.sin(theta)
    prev2 = np.zeros((0, theta.size))
    prev = np.full((1, theta.size), 1.0 / math.sqrt(4.0 * math.pi))
    yield 0, prev
    for ell in range(1, ell_max + 1):
        cur = np.empty((ell + 1, theta.size))
        a, b = _recurrence_coeffs(ell)
        cur[: ell - 1] = a[: ell - 1, None] * (x * prev[: ell - 1] - b[: ell - 1, None] * prev2)
        cur[ell - 1] = a[ell - 1] * x * prev[ell - 1]
        cur[ell] = math.sqrt((2.0 * ell + 1.0) / (2.0 * ell)) * s * prev[ell - 1]
        prev2, prev = prev, cur
        yield ell, cur


_TABLE_CACHE = {}


def _legendre_blocks(ell_max, theta, block):
    """Yield (l0, l1, T) with T[k, l - l0, i] = lambda_l^k(theta_i)."""
    key = (ell_max, theta.size, float(theta[0]), float(theta[-1]), block)
    if key in _TABLE_CACHE:
        yield from _TABLE_CACHE[key]
        return
    size = (ell_max + 1) ** 2 * theta.size * 8 // 2
    keep = [] if size <= _TABLE_CACHE_BYTES else None
    rows = _legendre_rows(ell_max, theta)
    for l0 in range(0, ell_max + 1, block):
        l1 = min(l0 + block, ell_max + 1)
        T = np.zeros((l1, l1 - l0, theta.size))
        for ell in range(l0, l1):
            _, lam = next(rows)
            T[: ell + 1, ell - l0] = lam
        if keep is not None:
            keep.append((l0, l1, T))
        yield l0, l1, T
    if keep is not None:
        _TABLE_CACHE.clear()
        _TABLE_CACHE[key] = keep


def spherical_harmonic(ell, m, theta, phi):
    """Real orthonormal Y_{l,m} at points (theta, phi), m in 1..2l+1."""
    HarmonicCoefficients.index(ell, m)
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    flat = theta.ravel()
    for l, lam in _legendre_rows(ell, flat):
        pass
    k = m // 2
    val = lam[k].reshape(theta.shape)
    if m == 1:
        return val
    trig = np.cos(k * phi) if m % 2 == 0 else np.sin(k * phi)
    return math.sqrt(2.0) * val * trig


# ---------------------------------------------------------------------------
# synthesis


def _order_split(coeffs_list, ell_max):
    """Per-order coefficient arrays, shape (ell_max + 1, ell_max + 1, R) indexed [k, l, r]."""
    R = len(coeffs_list)
    cr = np.zeros((ell_max + 1, ell_max + 1, R))
    ci = np.zeros_like(cr)
    for r, c in enumerate(coeffs_list):
        for ell in range(c.ell_max + 1):
            row = c.a[ell * ell : (ell + 1) ** 2]
            cr[0, ell, r] = row[0]
            cr[1 : ell + 1, ell, r] = math.sqrt(2.0) * row[1::2]
            ci[1 : ell + 1, ell, r] = math.sqrt(2.0) * row[2::2]
    return cr, ci


def _fourier_fold(Fr, Fi, n_phi):
    """Map per-order sums F_k (cos part Fr, sin part Fi) to rfft bins.

    f(phi_j) = sum_k Fr_k cos(k phi_j) + Fi_k sin(k phi_j); orders at or beyond
    the Nyquist bin are aliased exactly onto the grid.
    """
    K = Fr.shape[0]
    nb = n_phi // 2 + 1
    X = np.zeros((nb,) + Fr.shape[1:], dtype=complex)
    k = np.arange(K)
    kk = k % n_phi
    mirror = kk > n_phi // 2
    kk = np.where(mirror, n_phi - kk, kk)
    # coefficient of exp(i k phi) in Re(...) form: Fr - i Fi, conjugated when mirrored
    Z = Fr - 1j * Fi
    Z[mirror] = np.conj(Z[mirror])
    edge = (kk == 0) | (kk == n_phi // 2)
    scale = np.where(edge, 1.0, 0.5).reshape((-1,) + (1,) * (Fr.ndim - 1))
    Z = Z * scale * n_phi
    # the real part only survives on the edge bins
    Z[edge] = Z[edge].real
    np.add.at(X, kk, Z)
    return X


def _order_sums(cr, ci, theta, ell_max):
    """F[k, i, r] = sum_l lambda_l^k(theta_i) c[k, l, r] on all rows of a symmetric grid.

    Only the northern half is tabulated: lambda_l^k(pi - theta) equals
    (-1)^(l + k) lambda_l^k(theta).
    """
    n = theta.size
    north = theta[: (n + 1) // 2]
    R = cr.shape[2]
    parity = (np.arange(ell_max + 1) % 2 == 0)[None, :, None]
    # columns: [even l | odd l] for the cos and sin parts
    c = np.concatenate([cr * parity, cr * ~parity, ci * parity, ci * ~parity], axis=2)
    acc = np.zeros((ell_max + 1, north.size, 4 * R))
    block = max(1, min(32, (32 * 2**20) // max(1, (ell_max + 1) * north.size * 8)))
    for l0, l1, T in _legendre_blocks(ell_max, north, block):
        acc[:l1] += np.matmul(T.transpose(0, 2, 1), c[:l1, l0:l1, :])
    ev_r, od_r, ev_i, od_i = (acc[:, :, j * R : (j + 1) * R] for j in range(4))
    sign = np.where(np.arange(ell_max + 1) % 2 == 0, 1.0, -1.0)[:, None, None]
    Fr = np.empty((ell_max + 1, n, R))
    Fi = np.empty_like(Fr)
    Fr[:, : north.size] = ev_r + od_r
    Fi[:, : north.size] = ev_i + od_i
    south = n // 2
    Fr[:, n - south :] = (sign * (ev_r - od_r))[:, :south][:, ::-1]
    Fi[:, n - south :] = (sign * (ev_i - od_i))[:, :south][:, ::-1]
    return Fr, Fi


def synthesize_many(coeffs_list, grid):
    """Fields for several coefficient sets at once, shape (R, n_theta, n_phi)."""
    if not coeffs_list:
        return np.zeros((0,) + grid.shape)
    ell_max = max(c.ell_max for c in coeffs_list)
    if ell_max > MAX_ELL:
        raise RangeError(f"ell_max = {ell_max} exceeds the stable Legendre range ({MAX_ELL})")
    out = np.empty((len(coeffs_list), grid.n_theta, grid.n_phi))
    step = max(1, min(len(coeffs_list), _BATCH_BYTES // _bytes_per_field(ell_max, grid)))
    for r0 in range(0, len(coeffs_list), step):
        batch = coeffs_list[r0 : r0 + step]
        cr, ci = _order_split(batch, ell_max)
        Fr, Fi = _order_sums(cr, ci, grid.theta, ell_max)
        X = _fourier_fold(Fr, Fi, grid.n_phi)
        f = np.fft.irfft(X, n=grid.n_phi, axis=0)
        out[r0 : r0 + len(batch)] = np.transpose(f, (2, 1, 0))
    return out


def _bytes_per_field(ell_max, grid):
    return (ell_max + 1) * grid.n_theta * 48 + grid.n_theta * grid.n_phi * 24


def synthesize(coeffs, grid, spectrum_id=""):
    values = synthesize_many([coeffs], grid)[0]
    return FieldRealization(grid, values, spectrum_id, coeffs.seed, coeffs.replica)


def sample_fields(spectrum, grid, seed, replicas):
    """Yield (replica, values) for the given replica indices, batched internally."""
    replicas = list(replicas)
    ell_max = spectrum.ell_max
    step = max(1, _BATCH_BYTES // _bytes_per_field(ell_max, grid))
    for r0 in range(0, len(replicas), step):
        ids = replicas[r0 : r0 + step]
        coeffs = [sample_coefficients(spectrum, seed, r) for r in ids]
        for r, values in zip(ids, synthesize_many(coeffs, grid)):
            yield r, values


def field_variance(realizations, point):
    """Unbiased sample variance of the field value at grid index ``point``."""
    if len(realizations) < 2:
        raise DomainError("need at least two realizations")
    i, j = point
    vals = np.array([f.values[i, j] for f in realizations])
    return float(np.var(vals, ddof=1))
