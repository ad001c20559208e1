"""Infinite-width kernels of random networks on the sphere.

A single layer maps a correlation ``u`` to

    kappa(u) = gamma_b + gamma_w * E[sigma(Z1) sigma(u Z1 + sqrt(1 - u^2) Z2)]

with ``gamma_w = (1 - gamma_b) / E[sigma(Z)^2]`` so that ``kappa(1) = 1``.
Depth is function composition.  Besides plain evaluation every kernel exposes
its *deficit* ``g(t) = 1 - kappa(1 - t)``, computed without cancellation; the
deficit composes as ``g_L = g o g_{L-1}`` and drives the derivative at one and
the covariance regularity index (CRI) fits.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from .errors import ClassificationError, DomainError, NumericError

TOL_CLASS = 1e-6
TOL_REGIME = 1e-6

QUAD_RTOL = 1e-9
QUAD_ORDERS = (64, 128)
TABULATED_ORDERS = (32, 64)

DERIV_STEPS = (1e-7, 1e-8, 1e-9)
CRI_WINDOW = (1e-7, 1e-2)
CRI_POINTS = 50
CRI_MIN_R2 = 0.999
# residuals below this fraction of the deficit are derivative round-off, not signal
CRI_RESID_FLOOR = 1e-6
CRI_MIN_POINTS = 10
# first-stage slope below this is read as a fractal (beta < 1) kernel
_FRACTAL_SLOPE = 0.98

# quadrature nodes held in memory at once
_NODE_BUDGET = 2_000_000
# beyond this deficit argument 1 - rho is formed from the product expectation
_HALFSQ_MAX_T = 0.25
_LINEAR_T = 1e-16


class ActivationKind(str, enum.Enum):
    HEAVISIDE = "heaviside"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    GAUSSIAN = "gaussian"
    TANH = "tanh"
    LOGISTIC = "logistic"
    TABULATED = "tabulated"


class KernelClass(str, enum.Enum):
    FRACTAL = "fractal"
    KAC_RICE = "kac_rice"


class Regime(str, enum.Enum):
    LOW_DISORDER = "low_disorder"
    SPARSE = "sparse"
    HIGH_DISORDER = "high_disorder"


@dataclass(frozen=True)
class ActivationSpec:
    """Nonlinearity plus the information needed to integrate it.

    ``param`` is the slope for leaky ReLU and the width ``a`` for the Gaussian
    activation ``exp(-a x^2 / 2)``; ``points`` holds the knots of a tabulated
    (piecewise-linear, clamped) activation.
    """

    kind: ActivationKind
    param: float | None = None
    points: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        if self.kind is ActivationKind.GAUSSIAN:
            if self.param is None or not self.param > 0:
                raise DomainError("gaussian activation needs a > 0")
        elif self.kind is ActivationKind.LEAKY_RELU:
            if self.param is None or not 0 <= self.param < 1:
                raise DomainError("leaky ReLU slope must lie in [0, 1)")
        elif self.kind is ActivationKind.TABULATED:
            if self.points is None or len(self.points) < 2:
                raise DomainError("tabulated activation needs at least two points")
            pts = tuple(sorted((float(x), float(y)) for x, y in self.points))
            xs = [p[0] for p in pts]
            if len(set(xs)) != len(xs):
                raise DomainError("tabulated activation has repeated abscissae")
            object.__setattr__(self, "points", pts)
        if self.second_moment <= 0:
            raise DomainError(f"{self.name}: E[sigma(Z)^2] must be positive")

    # constructors
    @classmethod
    def heaviside(cls):
        return cls(ActivationKind.HEAVISIDE)

    @classmethod
    def relu(cls):
        return cls(ActivationKind.RELU)

    @classmethod
    def leaky_relu(cls, slope):
        return cls(ActivationKind.LEAKY_RELU, float(slope))

    @classmethod
    def gaussian(cls, a):
        return cls(ActivationKind.GAUSSIAN, float(a))

    @classmethod
    def tanh(cls):
        return cls(ActivationKind.TANH)

    @classmethod
    def logistic(cls):
        return cls(ActivationKind.LOGISTIC)

    @classmethod
    def tabulated(cls, points):
        return cls(ActivationKind.TABULATED, points=tuple(map(tuple, points)))

    @property
    def name(self):
        if self.kind is ActivationKind.LEAKY_RELU:
            return f"leaky_relu({self.param:g})"
        if self.kind is ActivationKind.GAUSSIAN:
            return f"gaussian({self.param:.17g})"
        if self.kind is ActivationKind.TABULATED:
            return f"tabulated({len(self.points)})"
        return self.kind.value

    @property
    def has_closed_form(self):
        return self.kind in (
            ActivationKind.HEAVISIDE,
            ActivationKind.RELU,
            ActivationKind.LEAKY_RELU,
            ActivationKind.GAUSSIAN,
        )

    @property
    def is_even(self):
        return self.kind is ActivationKind.GAUSSIAN

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k is ActivationKind.HEAVISIDE:
            return (x >= 0).astype(float)
        if k is ActivationKind.RELU:
            return np.maximum(x, 0.0)
        if k is ActivationKind.LEAKY_RELU:
            return np.where(x >= 0, x, self.param * x)
        if k is ActivationKind.GAUSSIAN:
            return np.exp(-0.5 * self.param * x * x)
        if k is ActivationKind.TANH:
            return np.tanh(x)
        if k is ActivationKind.LOGISTIC:
            return 0.5 * (1.0 + np.tanh(0.5 * x))
        xs, ys = zip(*self.points)
        return np.interp(x, xs, ys)

    @functools.cached_property
    def second_moment(self):
        """E[sigma(Z)^2] for a standard normal Z."""
        k = self.kind
        if k in (ActivationKind.HEAVISIDE, ActivationKind.RELU):
            return 0.5
        if k is ActivationKind.LEAKY_RELU:
            return 0.5 * (1.0 + self.param**2)
        if k is ActivationKind.GAUSSIAN:
            return 1.0 / math.sqrt(1.0 + 2.0 * self.param)
        return float(gaussian_pair_expectation(self, np.array([1.0]), "product")[0])

    # rate of the Gaussian envelope exp(-rate * s) along a ray, used to rescale
    # the radial rule; zero for activations without one
    def _envelope_rate(self, c1, c2, what):
        if self.kind is not ActivationKind.GAUSSIAN:
            return np.zeros(np.broadcast(c1, c2).shape)
        if what == "product":
            return self.param * (c1 * c1 + c2 * c2)
        # slowest of the three exponentials in (sigma(x) - sigma(y))^2
        return 2.0 * self.param * np.minimum(c1 * c1, c2 * c2)


@dataclass(frozen=True)
class Calibration:
    gamma_b: float
    gamma_w: float

    @classmethod
    def for_activation(cls, activation, gamma_b=0.0):
        gamma_b = float(gamma_b)
        if not 0.0 <= gamma_b < 1.0:
            raise DomainError("gamma_b must lie in [0, 1)")
        return cls(gamma_b, (1.0 - gamma_b) / activation.second_moment)


@dataclass(frozen=True)
class RegimeLabel:
    value: Regime
    kappa_prime_1: float


# ---------------------------------------------------------------------------
# quadrature


@functools.lru_cache(maxsize=None)
def _legendre_rule(n):
    return np.polynomial.legendre.leggauss(n)


@functools.lru_cache(maxsize=None)
def _laguerre_rule(n):
    return scipy.special.roots_laguerre(n)


def _angular_panels(psi, n, extra=None):
    # phi in [0, pi) cut where cos(phi) or cos(phi - psi) changes sign, plus
    # any caller-supplied breakpoints
    x, w = _legendre_rule(n)
    half = 0.5 * np.pi
    b = np.where(psi <= half, psi + half, psi - half)
    cuts = [np.zeros_like(psi), np.full_like(psi, half), b, np.full_like(psi, np.pi)]
    edges = np.sort(np.column_stack(cuts + ([] if extra is None else [extra])), axis=-1)
    lo, hi = edges[:, :-1], edges[:, 1:]
    mid, rad = 0.5 * (hi + lo), 0.5 * (hi - lo)
    phi = (mid[:, :, None] + rad[:, :, None] * x).reshape(len(psi), -1)
    wphi = (rad[:, :, None] * w).reshape(len(psi), -1)
    return np.cos(phi), np.cos(phi - psi[:, None]), wphi


def _polar_rule(activation, psi, n, what):
    """Nodes and weights for E[F(X, Y)] with corr(X, Y) = cos(psi).

    Writing (Z1, Z2) in polar form, X = r cos(phi) and Y = r cos(phi - psi).
    Folding phi and phi + pi leaves phi in [0, pi) and r over the whole real
    line.  The angular range is cut where either argument changes sign, so
    activations with a kink or jump at zero are integrated panel-wise.  The
    radial part, in s = r^2 / 2, carries the weight exp(-s) and uses
    Gauss-Laguerre, rescaled to the Gaussian envelope of the activation when
    it has one.  Tabulated activations use Gauss-Legendre panels in r split at
    the kink radii of each ray instead.
    """
    if activation.kind is ActivationKind.TABULATED:
        c1, c2, wphi = _angular_panels(psi, n, _kink_crossings(activation, psi))
        r, wr = _kinked_radial_rule(activation, c1, c2, n)
    else:
        c1, c2, wphi = _angular_panels(psi, n)
    if activation.kind is not ActivationKind.TABULATED:
        s0, ws0 = _laguerre_rule(n)
        lam = 1.0 / (1.0 + activation._envelope_rate(c1, c2, what))[:, :, None]
        s = lam * s0
        wr = lam * ws0 * np.exp((1.0 - lam) * s0)
        r = np.sqrt(2.0 * s)
    return r * c1[:, :, None], r * c2[:, :, None], wphi[:, :, None] * wr / (2.0 * np.pi)


_R_MAX = 12.0


def _kink_crossings(activation, psi):
    # angles where a kink of sigma(r cos phi) meets one of sigma(r cos(phi - psi)):
    # x_j cos(phi - psi) = x_k cos(phi)
    knots = np.array([p[0] for p in activation.points])
    xj, xk = np.meshgrid(knots, knots, indexing="ij")
    xj, xk = xj.ravel(), xk.ravel()
    num = xk - xj * np.cos(psi)[:, None]
    den = xj * np.sin(psi)[:, None]
    return np.mod(np.arctan2(num, den), np.pi)


def _kinked_radial_rule(activation, c1, c2, n):
    knots = np.array([p[0] for p in activation.points])
    with np.errstate(divide="ignore"):
        radii = np.concatenate(
            [np.abs(knots / c1[..., None]), np.abs(knots / c2[..., None])], axis=-1
        )
    radii = np.sort(np.clip(np.nan_to_num(radii, posinf=_R_MAX), 0.0, _R_MAX), axis=-1)
    shape = radii.shape[:-1]
    edges = np.concatenate([np.zeros(shape + (1,)), radii, np.full(shape + (1,), _R_MAX)], axis=-1)
    lo, hi = edges[..., :-1], edges[..., 1:]
    x, w = _legendre_rule(n)
    mid, rad = 0.5 * (hi + lo), 0.5 * (hi - lo)
    r = (mid[..., None] + rad[..., None] * x).reshape(shape + (-1,))
    wr = (rad[..., None] * w).reshape(shape + (-1,)) * r * np.exp(-0.5 * r * r)
    return r, wr


def _pair_expectation_fixed(activation, psi, n, what):
    xr, yr, w = _polar_rule(activation, psi, n, what)
    sx, sy = activation(xr), activation(yr)
    mx, my = activation(-xr), activation(-yr)
    if what == "product":
        f = sx * sy + mx * my
    else:
        f = 0.5 * ((sx - sy) ** 2 + (mx - my) ** 2)
    return np.sum(f * w, axis=(1, 2))


def gaussian_pair_expectation(activation, u, what="product", orders=None, rtol=None, psi=None):
    """E[sigma(X) sigma(Y)] ("product") or E[(sigma(X) - sigma(Y))^2] / 2 ("halfsq").

    X, Y are standard normal with correlation ``u`` (or angle ``psi``, which
    takes precedence and avoids forming 1 - t near u = 1).  Successive orders
    of the polar rule are compared until the relative change drops below
    ``rtol``; for "product" the change is measured against E[sigma^2].
    """
    tabulated = activation.kind is ActivationKind.TABULATED
    if orders is None:
        orders = TABULATED_ORDERS if tabulated else QUAD_ORDERS
    rtol = QUAD_RTOL if rtol is None else rtol
    if psi is None:
        psi = np.arccos(np.clip(np.atleast_1d(np.asarray(u, dtype=float)), -1.0, 1.0))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    out = np.empty_like(psi)
    per_u = 3 * orders[-1] ** 2
    if tabulated:
        k = len(activation.points)
        per_u = (k * k + 3) * (2 * k + 1) * orders[-1] ** 2
    step = max(1, _NODE_BUDGET // per_u)
    for start in range(0, len(psi), step):
        chunk = psi[start : start + step]
        prev = _pair_expectation_fixed(activation, chunk, orders[0], what)
        for n in orders[1:]:
            cur = _pair_expectation_fixed(activation, chunk, n, what)
            if what == "product":
                scale = np.abs(_pair_expectation_fixed(activation, np.zeros(1), n, what)[0])
            else:
                scale = np.abs(cur)
            ok = np.abs(cur - prev) <= rtol * np.maximum(scale, 1e-300)
            prev = cur
            if np.all(ok):
                break
        else:
            raise NumericError(
                f"{activation.name}: pair expectation did not converge to rtol={rtol:g} "
                f"with orders {orders}"
            )
        out[start : start + len(chunk)] = prev
    return out


# ---------------------------------------------------------------------------
# closed forms (normalized, without bias: rho(1) = 1)


def _theta_minus_sin(theta):
    # theta - sin(theta), series for small arguments to avoid cancellation
    theta = np.asarray(theta, dtype=float)
    t2 = theta * theta
    series = theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)))
    return np.where(theta < 1e-2, series, theta - np.sin(theta))


def _closed_rho(activation, u):
    k = activation.kind
    if k is ActivationKind.HEAVISIDE:
        return 1.0 - np.arccos(u) / np.pi
    if k in (ActivationKind.RELU, ActivationKind.LEAKY_RELU):
        s = 0.0 if k is ActivationKind.RELU else activation.param
        a, b = 0.25 * (1 + s) ** 2, 0.25 * (1 - s) ** 2
        abs_corr = (2.0 / np.pi) * (np.sqrt(1.0 - u * u) + u * np.arcsin(u))
        return (a * u + b * abs_corr) / (a + b)
    if k is ActivationKind.GAUSSIAN:
        a = activation.param
        return 1.0 / np.sqrt(1.0 + a * a * (1.0 - u * u) / (1.0 + 2.0 * a))
    return None


def _closed_rho_deficit(activation, t):
    """1 - rho(1 - t) for t in [0, 2], free of cancellation."""
    k = activation.kind
    theta = 2.0 * np.arcsin(np.sqrt(0.5 * t))  # arccos(1 - t)
    if k is ActivationKind.HEAVISIDE:
        return theta / np.pi
    if k in (ActivationKind.RELU, ActivationKind.LEAKY_RELU):
        s = 0.0 if k is ActivationKind.RELU else activation.param
        a, b = 0.25 * (1 + s) ** 2, 0.25 * (1 - s) ** 2
        abs_def = t + (2.0 / np.pi) * (_theta_minus_sin(theta) - t * theta)
        return (a * t + b * abs_def) / (a + b)
    if k is ActivationKind.GAUSSIAN:
        a = activation.param
        x = a * a * t * (2.0 - t) / (1.0 + 2.0 * a)
        r = np.sqrt(1.0 + x)
        return x / (r * (1.0 + r))
    return None


def _closed_rho_prime_one(activation):
    k = activation.kind
    if k is ActivationKind.HEAVISIDE:
        return math.inf
    if k in (ActivationKind.RELU, ActivationKind.LEAKY_RELU):
        return 1.0
    if k is ActivationKind.GAUSSIAN:
        a = activation.param
        return a * a / (2.0 * a + 1.0)
    return None


def _use_closed(activation, method):
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and not activation.has_closed_form:
        raise DomainError(f"{activation.name} has no closed-form kernel")
    return activation.has_closed_form and method != "quadrature"


def _check_unit_interval(u, what="u"):
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(np.abs(u) > 1.0):
        raise DomainError(f"{what} must lie in [-1, 1]")
    return u


def kappa_single(activation, calibration, u, method="auto"):
    """Single-layer kernel kappa(u); scalar in, scalar out."""
    u = _check_unit_interval(u)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if _use_closed(activation, method):
        rho = _closed_rho(activation, u)
    else:
        rho = gaussian_pair_expectation(activation, u, "product") / activation.second_moment
    val = calibration.gamma_b + (1.0 - calibration.gamma_b) * rho
    return float(val[0]) if scalar else val


def kappa_deficit(activation, calibration, t, method="auto"):
    """g(t) = 1 - kappa(1 - t) for t in [0, 2]."""
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 2):
        raise DomainError("deficit argument t must lie in [0, 2]")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if _use_closed(activation, method):
        d = _closed_rho_deficit(activation, t)
    else:
        m2 = activation.second_moment
        # below _LINEAR_T the angle is too small to resolve; scale linearly
        tiny = (t > 0) & (t < _LINEAR_T)
        teval = np.where(tiny, _LINEAR_T, t)
        psi = 2.0 * np.arcsin(np.sqrt(0.5 * teval))
        near = teval <= _HALFSQ_MAX_T
        d = np.empty_like(t)
        if np.any(near):
            d[near] = gaussian_pair_expectation(activation, None, "halfsq", psi=psi[near]) / m2
        d[tiny] *= t[tiny] / _LINEAR_T
        if np.any(~near):
            far = gaussian_pair_expectation(activation, None, "product", psi=psi[~near])
            d[~near] = (m2 - far) / m2
    val = (1.0 - calibration.gamma_b) * d
    return float(val[0]) if scalar else val


# ---------------------------------------------------------------------------
# profiles


def _richardson_at_zero(steps, values):
    """Extrapolate D(t) = k + A t^p + ... to t = 0 from three geometric steps.

    The exponent p is read off the ratio of successive differences, so the
    same rule covers analytic kernels (p = 1) and ReLU-type ones (p = 1/2).
    """
    d1, d2, d3 = values
    delta1, delta2 = d1 - d2, d2 - d3
    if abs(delta2) <= 1e-15 * abs(d3) or delta1 * delta2 <= 0:
        return d3
    q = delta2 / delta1
    if not 0 < q < 1:
        return d3
    return d3 - delta2 * q / (1.0 - q)


def _loglog_fit(x, y):
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 0.0
    return slope, intercept, r2


@dataclass(frozen=True)
class KernelProfile:
    """Depth-L kernel with its derived scalars.

    ``kappa_prime_1`` is the single-layer derivative at one (infinite for the
    fractal class); ``cri_beta`` and ``c1`` describe the depth-L kernel via
    kappa_L(1 - t) = p(t) -/+ c1 t^beta.  ``regime`` is ``None`` for fractal
    kernels, where the derivative at one diverges.
    """

    activation: ActivationSpec
    calibration: Calibration
    depth: int = 1
    method: str = "auto"
    kappa_prime_1: float = field(init=False)
    cri_beta: float = field(init=False)
    c1: float = field(init=False)
    klass: KernelClass = field(init=False)
    regime: RegimeLabel | None = field(init=False)

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise DomainError("depth must be a positive integer")
        _use_closed(self.activation, self.method)
        set_ = functools.partial(object.__setattr__, self)
        set_("depth", int(self.depth))
        set_("kappa_prime_1", self._single_layer_prime())
        beta, c1 = estimate_cri(self)
        set_("cri_beta", beta)
        set_("c1", c1)
        set_("klass", classify(beta))
        set_("regime", regime(self.kappa_prime_1) if self.klass is KernelClass.KAC_RICE else None)

    @classmethod
    def build(cls, activation, gamma_b=0.0, depth=1, method="auto"):
        return cls(activation, Calibration.for_activation(activation, gamma_b), depth, method)

    def single(self, u):
        return kappa_single(self.activation, self.calibration, u, self.method)

    def single_deficit(self, t):
        return kappa_deficit(self.activation, self.calibration, t, self.method)

    def eval(self, u):
        """kappa_L(u) by literal L-fold application."""
        u = _check_unit_interval(u)
        scalar = u.ndim == 0
        v = np.atleast_1d(u)
        for _ in range(self.depth):
            v = np.clip(self.single(v), -1.0, 1.0)
        return float(v[0]) if scalar else v

    __call__ = eval

    def deficit(self, t):
        """1 - kappa_L(1 - t), composed as g(g(...g(t)))."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        v = np.atleast_1d(t)
        for _ in range(self.depth):
            v = np.clip(self.single_deficit(v), 0.0, 2.0)
        return float(v[0]) if scalar else v

    @property
    def kappa_prime_L(self):
        """Theoretical depth-L derivative at one, kappa'(1)^L."""
        return self.kappa_prime_1**self.depth

    @property
    def label(self):
        b = self.calibration.gamma_b
        return f"{self.activation.name}_gb{b:g}_L{self.depth}"

    def _single_layer_prime(self):
        if _use_closed(self.activation, self.method):
            return (1.0 - self.calibration.gamma_b) * _closed_rho_prime_one(self.activation)
        lo, hi = CRI_WINDOW
        t = np.geomspace(lo, hi, CRI_POINTS)
        slope, _, r2 = _loglog_fit(t, self.single_deficit(t))
        if slope < _FRACTAL_SLOPE:
            return math.inf
        return _numeric_prime(self.single_deficit, 1.0)


def _numeric_prime(deficit, scale):
    steps = np.array(DERIV_STEPS) * scale
    vals = deficit(steps) / steps
    return float(_richardson_at_zero(steps, vals))


def _derivative_at_one(profile):
    if profile.depth == 1 and _use_closed(profile.activation, profile.method):
        return profile.kappa_prime_1
    scale = 1.0 / max(1.0, profile.kappa_prime_L)
    return _numeric_prime(profile.deficit, scale)


def compose_kernel(profile, depth):
    """Apply ``profile`` ``depth`` times; a single-layer input gives depth ``depth``."""
    if int(depth) != depth or depth < 1:
        raise DomainError("composition depth must be a positive integer")
    if depth == 1:
        return profile
    return KernelProfile(profile.activation, profile.calibration, profile.depth * int(depth), profile.method)


def kappa_prime_at_one(profile):
    """One-sided derivative of kappa_L at u = 1."""
    if profile.klass is KernelClass.FRACTAL:
        raise ClassificationError(
            f"{profile.label}: fractal-class kernel, derivative at 1 diverges"
        )
    return _derivative_at_one(profile)


def _cri_window(profile):
    lo, hi = CRI_WINDOW
    kL = profile.kappa_prime_L
    if math.isfinite(kL) and kL > 1.0:
        lo, hi = lo / kL, hi / kL
    return np.geomspace(lo, hi, CRI_POINTS)


def estimate_cri(profile):
    """Fit (beta, c1) of kappa_L(1 - t) = p(t) +/- c1 t^beta near t = 0.

    The polynomial part is 1 for fractal kernels and 1 - kappa_L'(1) t for
    Kac-Rice kernels.  ``c1`` is returned as a magnitude.
    """
    t = _cri_window(profile)
    g = profile.deficit(t)
    if np.any(g <= 0):
        raise NumericError(f"{profile.label}: kernel deficit vanishes near u = 1")
    slope, intercept, r2 = _loglog_fit(t, g)
    if slope < _FRACTAL_SLOPE and not math.isfinite(profile.kappa_prime_1):
        if r2 < CRI_MIN_R2:
            raise NumericError(f"{profile.label}: no clean power law (R^2 = {r2:.6f})")
        return _checked_beta(profile, slope), float(np.exp(intercept))
    k = _derivative_at_one(profile)
    r = np.abs(g - k * t)
    keep = r > CRI_RESID_FLOOR * g
    if keep.sum() < CRI_MIN_POINTS:
        raise NumericError(f"{profile.label}: no clean power law (deficit linear to round-off)")
    slope, intercept, r2 = _loglog_fit(t[keep], r[keep])
    if r2 < CRI_MIN_R2:
        raise NumericError(f"{profile.label}: no clean power law (R^2 = {r2:.6f})")
    return min(_checked_beta(profile, slope), 2.0), float(np.exp(intercept))


def _checked_beta(profile, beta):
    if not 0.0 < beta <= 2.5:
        raise NumericError(f"{profile.label}: CRI estimate {beta:.4f} outside (0, 2.5]")
    return float(beta)


def classify(beta):
    if not 0.0 < beta <= 2.0:
        raise DomainError("CRI must lie in (0, 2]")
    if beta < 1.0 - TOL_CLASS:
        return KernelClass.FRACTAL
    if beta > 1.0 + TOL_CLASS:
        return KernelClass.KAC_RICE
    raise ClassificationError(f"boundary CRI {beta!r}: class undefined at beta = 1")


def regime(kappa_prime_1):
    if not kappa_prime_1 > 0:
        raise DomainError("kappa'(1) must be positive")
    if kappa_prime_1 < 1.0 - TOL_REGIME:
        value = Regime.LOW_DISORDER
    elif kappa_prime_1 > 1.0 + TOL_REGIME:
        value = Regime.HIGH_DISORDER
    else:
        value = Regime.SPARSE
    return RegimeLabel(value, float(kappa_prime_1))
