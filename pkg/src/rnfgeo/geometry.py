"""Level sets of gridded fields on S^2: boundary length, excursion area, scaling.

Cells of the equiangular grid are processed by marching squares with linear
interpolation along edges, periodic in phi.  The two polar caps are fans of
triangles joining the first (last) row to a pole vertex carrying the row
mean.  Segment lengths use ds^2 = dtheta^2 + sin^2(theta_mean) dphi^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from .errors import ConfigError, DomainError
from .spectral import PowerSpectrum, sphere_volume
from .stats import jackknife, loglog_fit
from .synthesis import FieldRealization, SphericalGrid, sample_coefficients, synthesize_many

# conditioned estimator: monopole-to-fluctuation variance ratio that switches it on
AUTO_MONOPOLE_RATIO = 0.05
DEFAULT_LEVELS = 32


@dataclass(frozen=True)
class LevelSetSummary:
    u: float
    total_length: float
    excursion_area: float
    n_segments: int
    resolution: tuple


@dataclass(frozen=True)
class ScalingReport:
    resolutions: list
    ell_max: list
    mean_lengths: list
    fitted_dimension: float
    r_squared: float
    raw_dimension: float
    u: float = 0.0
    samples: list = field(default_factory=list, repr=False)

    @property
    def increasing(self):
        means = [m for m, _ in self.mean_lengths]
        return all(b > a for a, b in zip(means, means[1:]))

    def rows(self):
        """CSV records (n_theta, n_phi, ell_max, u, replica, length, area)."""
        out = []
        for (nt, nphi), lmax, recs in zip(self.resolutions, self.ell_max, self.samples):
            for r, length, area in recs:
                out.append((nt, nphi, lmax, self.u, r, length, area))
        return out


# ---------------------------------------------------------------------------
# extraction


def _segment_length(th1, ph1, th2, ph2):
    tbar = 0.5 * (th1 + th2)
    return np.hypot(th1 - th2, np.sin(tbar) * (ph1 - ph2))


def _frac(s0, s1):
    with np.errstate(divide="ignore", invalid="ignore"):
        return s0 / (s0 - s1)


class _CellTable:
    """Corner extrema of every cell of one field, reused across levels."""

    def __init__(self, values, grid):
        v = np.asarray(values, dtype=float)
        if v.shape != grid.shape:
            raise DomainError(f"field shape {v.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        self.v, self.grid = v, grid
        right = np.roll(v, -1, axis=1)
        lo = np.minimum(v, right)
        hi = np.maximum(v, right)
        self.cmin = np.minimum(lo[:-1], lo[1:])
        self.cmax = np.maximum(hi[:-1], hi[1:])
        self.pole_n = float(v[0].mean())
        self.pole_s = float(v[-1].mean())
        self.tmin = (np.minimum(lo[0], self.pole_n), np.minimum(lo[-1], self.pole_s))
        self.tmax = (np.maximum(hi[0], self.pole_n), np.maximum(hi[-1], self.pole_s))
        th = grid.theta
        self.band = (np.cos(th[:-1]) - np.cos(th[1:])) * grid.dphi
        self.cap = (1.0 - math.cos(th[0])) * grid.dphi

    @property
    def vmin(self):
        return min(float(self.v.min()), self.pole_n, self.pole_s)

    @property
    def vmax(self):
        return max(float(self.v.max()), self.pole_n, self.pole_s)

    def area(self, u):
        g = self.grid
        # number of nodes strictly above u in every row
        cnt = np.count_nonzero(self.v > u, axis=1)
        quads = float(np.dot(self.band, 0.5 * (cnt[:-1] + cnt[1:])))
        caps = 0.0
        for pole, row_cnt in ((self.pole_n, cnt[0]), (self.pole_s, cnt[-1])):
            caps += self.cap * (g.n_phi * (pole > u) + 2.0 * row_cnt) / 3.0
        return quads + caps

    def length(self, u):
        total, nseg = self._quad_length(u)
        for south in (False, True):
            l, n = self._cap_length(u, south)
            total += l
            nseg += n
        return total, nseg

    def _quad_length(self, u):
        g, v = self.grid, self.v
        ii, jj = np.nonzero((self.cmin <= u) & (self.cmax > u))
        if ii.size == 0:
            return 0.0, 0
        jp = (jj + 1) % g.n_phi
        a, b = v[ii, jj] - u, v[ii, jp] - u
        c, d = v[ii + 1, jp] - u, v[ii + 1, jj] - u
        A, B, C, D = a > 0, b > 0, c > 0, d > 0
        cross = {"top": A != B, "right": B != C, "bottom": D != C, "left": A != D}
        dth, dph = g.dtheta, g.dphi
        th0 = g.theta[ii]
        zero = np.zeros_like(a)
        # (theta, phi) offsets from the cell's top-left corner
        pts = {
            "top": (zero, _frac(a, b) * dph),
            "right": (_frac(b, c) * dth, zero + dph),
            "bottom": (zero + dth, _frac(d, c) * dph),
            "left": (_frac(a, d) * dth, zero),
        }
        ncross = sum(m.astype(int) for m in cross.values())
        two = ncross == 2
        saddle = ncross == 4
        center_up = (a + b + c + d) > 0
        cut_bd = saddle & (center_up == A)
        cut_ac = saddle & ~(center_up == A)
        pairs = [
            ("top", "right", two | cut_bd),
            ("bottom", "left", two | cut_bd),
            ("top", "left", two | cut_ac),
            ("right", "bottom", two | cut_ac),
            ("top", "bottom", two),
            ("right", "left", two),
        ]
        total, nseg = 0.0, 0
        for e1, e2, allowed in pairs:
            m = allowed & cross[e1] & cross[e2]
            if not m.any():
                continue
            t1, p1 = pts[e1][0][m], pts[e1][1][m]
            t2, p2 = pts[e2][0][m], pts[e2][1][m]
            base = th0[m]
            total += float(np.sum(_segment_length(base + t1, p1, base + t2, p2)))
            nseg += int(m.sum())
        return total, nseg

    def _cap_length(self, u, south):
        g = self.grid
        k = 1 if south else 0
        jj = np.nonzero((self.tmin[k] <= u) & (self.tmax[k] > u))[0]
        if jj.size == 0:
            return 0.0, 0
        row = self.v[-1] if south else self.v[0]
        p = (self.pole_s if south else self.pole_n) - u
        a, b = row[jj] - u, row[(jj + 1) % g.n_phi] - u
        P, A, B = p > 0, a > 0, b > 0
        theta_row = g.theta[-1] if south else g.theta[0]
        pole_theta = math.pi if south else 0.0
        span = theta_row - pole_theta
        dph = g.dphi
        pa = (pole_theta + _frac(p, a) * span, np.zeros_like(a))
        ab = (np.full_like(a, theta_row), _frac(a, b) * dph)
        pb = (pole_theta + _frac(p, b) * span, np.full_like(a, dph))
        cross = {"pa": P != A, "ab": A != B, "pb": P != B}
        pts = {"pa": pa, "ab": ab, "pb": pb}
        total, nseg = 0.0, 0
        for e1, e2 in (("pa", "ab"), ("pa", "pb"), ("ab", "pb")):
            m = cross[e1] & cross[e2]
            if not m.any():
                continue
            total += float(np.sum(_segment_length(pts[e1][0][m], pts[e1][1][m], pts[e2][0][m], pts[e2][1][m])))
            nseg += int(m.sum())
        return total, nseg


def extract_level_set(field, u, grid=None):
    """Boundary length and excursion area of {T > u} for one field.

    ``field`` is a FieldRealization, or a raw value array together with ``grid``.
    """
    if not np.isfinite(u):
        raise DomainError("level u must be finite")
    if isinstance(field, FieldRealization):
        values, grid = field.values, field.grid
    else:
        values = field
        if grid is None:
            raise DomainError("a grid is required for raw value arrays")
    table = _CellTable(values, grid)
    length, nseg = table.length(float(u))
    return LevelSetSummary(float(u), float(length), float(table.area(float(u))), nseg, grid.shape)


# ---------------------------------------------------------------------------
# Monte Carlo


def theoretical_length(d, kappa_prime_1, L, u):
    """Expected boundary volume omega_{d-1} kappa'(1)^{L/2} exp(-u^2/2)."""
    if not kappa_prime_1 > 0:
        raise DomainError("kappa'(1) must be positive")
    return sphere_volume(d - 1) * kappa_prime_1 ** (0.5 * L) * math.exp(-0.5 * u * u)


def _monopole_split(spectrum):
    """(variance of the constant mode, variance of the rest) of a d = 2 spectrum."""
    c = np.clip(spectrum.C, 0.0, None)
    ell = np.arange(c.size)
    mono = c[0] / (4.0 * math.pi)
    rest = float(np.dot(c[1:], 2 * ell[1:] + 1)) / (4.0 * math.pi)
    return mono, rest


def choose_estimator(spectrum, estimator="auto"):
    if estimator not in ("auto", "plain", "conditioned"):
        raise DomainError(f"unknown estimator {estimator!r}")
    mono, rest = _monopole_split(spectrum)
    if estimator == "auto":
        estimator = "conditioned" if mono > AUTO_MONOPOLE_RATIO * rest else "plain"
    if estimator == "conditioned" and mono <= 0:
        estimator = "plain"
    return estimator


def _conditioned(table, us, sigma0, n_levels):
    """E[length], E[area] over the constant mode c ~ N(0, sigma0^2) given the rest.

    Level u for F + c is level u - c for F; lengths vanish outside the range
    of F, so a midpoint rule over [min F, max F] covers the integral.
    """
    lo, hi = table.vmin, table.vmax
    h = (hi - lo) / n_levels
    levels = lo + h * (np.arange(n_levels) + 0.5)
    lengths = np.array([table.length(v)[0] for v in levels])
    areas = np.array([table.area(v) for v in levels])
    out_len, out_area = [], []
    for u in us:
        w = h * np.exp(-0.5 * ((u - levels) / sigma0) ** 2) / (sigma0 * math.sqrt(2.0 * math.pi))
        below = scipy.special.ndtr((lo - u) / sigma0)  # P(u - c < min F)
        out_len.append(float(np.dot(w, lengths)))
        out_area.append(float(4.0 * math.pi * below + np.dot(w, areas)))
    return out_len, out_area


def replica_measurements(spectrum, grid, us, replicas, seed, estimator="auto", n_levels=DEFAULT_LEVELS):
    """Per-replica (length, area) at each level, arrays of shape (R, len(us)).

    The conditioned estimator synthesizes the field without its constant mode
    and averages length and area analytically over that mode; its replica
    values are conditional expectations with the same mean as the plain ones.
    """
    us = [float(u) for u in np.atleast_1d(us)]
    if not all(np.isfinite(us)):
        raise DomainError("levels must be finite")
    replicas = list(replicas)
    mode = choose_estimator(spectrum, estimator)
    spec = spectrum.normalized()
    sigma0 = math.sqrt(_monopole_split(spec)[0])
    if mode == "conditioned":
        C = spec.C.copy()
        C[0] = 0.0
        spec = PowerSpectrum(spec.d, C, spec.source)
    lengths = np.zeros((len(replicas), len(us)))
    areas = np.zeros_like(lengths)
    for k, values in enumerate(_fields(spec, grid, seed, replicas)):
        table = _CellTable(values, grid)
        if mode == "conditioned":
            lengths[k], areas[k] = _conditioned(table, us, sigma0, n_levels)
        else:
            for j, u in enumerate(us):
                lengths[k, j] = table.length(u)[0]
                areas[k, j] = table.area(u)
    return lengths, areas


def _fields(spectrum, grid, seed, replicas, batch=None):
    per = (spectrum.ell_max + 1) * grid.n_theta * 48 + grid.n_theta * grid.n_phi * 24
    batch = batch or max(1, min(64, (512 * 2**20) // per))
    for r0 in range(0, len(replicas), batch):
        coeffs = [sample_coefficients(spectrum, seed, r) for r in replicas[r0 : r0 + batch]]
        yield from synthesize_many(coeffs, grid)


def mean_nodal_length(spectrum, grid, u, n_replicas, seed, estimator="auto", n_levels=DEFAULT_LEVELS):
    """Monte Carlo mean of the level-u boundary length with its jackknife SE.

    ``u`` may be a scalar or a sequence; the result is (mean, se) or a list
    of such pairs.
    """
    if n_replicas < 2:
        raise DomainError("need at least two replicas")
    scalar = np.ndim(u) == 0
    lengths, _ = replica_measurements(spectrum, grid, u, range(n_replicas), seed, estimator, n_levels)
    mean, se = jackknife(lengths)
    pairs = [(float(m), float(s)) for m, s in zip(mean, se)]
    return pairs[0] if scalar else pairs


# ---------------------------------------------------------------------------
# resolution scaling


def tied_band_limit(n_theta):
    """Band limit used when it follows the grid: n_theta / 2 - 1."""
    return n_theta // 2 - 1


def check_doubling(resolutions):
    res = [int(r) for r in resolutions]
    if len(res) < 3:
        raise ConfigError("need at least three resolutions", "resolutions")
    for a, b in zip(res, res[1:]):
        if b != 2 * a:
            raise ConfigError(f"resolution ladder must double at each step ({a} -> {b})", "resolutions")
    return res


def length_vs_resolution(spectrum_for, u, resolutions, n_replicas, seed, estimator="auto", n_levels=DEFAULT_LEVELS):
    """Mean boundary length across a doubling ladder of grids n_theta x 2 n_theta.

    ``spectrum_for(n_theta)`` returns the spectrum used at that resolution.
    The dimension D comes from length ~ delta^(1 - D) with delta = pi / n_theta.
    """
    res = check_doubling(resolutions)
    grids, lmax, means, samples = [], [], [], []
    for nt in res:
        grid = SphericalGrid.square(nt)
        spec = spectrum_for(nt)
        lengths, areas = replica_measurements(spec, grid, [u], range(n_replicas), seed, estimator, n_levels)
        m, s = jackknife(lengths[:, 0])
        grids.append(grid.shape)
        lmax.append(spec.ell_max)
        means.append((float(m), float(s)))
        samples.append([(r, float(lengths[r, 0]), float(areas[r, 0])) for r in range(n_replicas)])
    delta = [math.pi / nt for nt in res]
    positive = all(m > 0 for m, _ in means)
    if positive:
        slope, _, r2 = loglog_fit(delta, [m for m, _ in means])
        raw = 1.0 - slope
    else:
        raw, r2 = float("nan"), 0.0
    D = min(max(raw, 1.0), 2.0) if np.isfinite(raw) else float("nan")
    return ScalingReport(grids, lmax, means, D, r2, raw, float(u), samples)
