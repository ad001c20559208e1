"""Finite-width random networks on the sphere and their empirical covariance.

Layers follow T_0 = W0 x + b1 and T_s = W_s sigma(T_{s-1}) + b_{s+1}, with
W0 ~ N(0, 1 - gamma_b), hidden weights ~ N(0, gamma_w / n_s) and biases
~ N(0, gamma_b).  The scalar output converges to a Gaussian field with
covariance kappa_L(gamma_b + (1 - gamma_b) <x, y>).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DomainError
from .kernels import ActivationSpec, Calibration, KernelProfile
from .stats import jackknife

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class NetworkArchitecture:
    input_dim: int
    widths: tuple
    activation: ActivationSpec
    calibration: Calibration

    def __post_init__(self):
        widths = tuple(int(w) for w in np.atleast_1d(self.widths))
        if not widths or any(w < 1 for w in widths):
            raise DomainError("widths must be positive integers")
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise DomainError("input dimension must be a positive integer")
        object.__setattr__(self, "widths", widths)

    @classmethod
    def build(cls, activation, widths, d=2, gamma_b=0.0):
        return cls(d, tuple(np.atleast_1d(widths)), activation, Calibration.for_activation(activation, gamma_b))

    @property
    def depth(self):
        return len(self.widths)

    @property
    def output_dim(self):
        return 1

    @property
    def ambient_dim(self):
        return self.input_dim + 1

    def profile(self):
        return KernelProfile(self.activation, self.calibration, self.depth)

    def limit_kernel(self, u):
        """Covariance of the infinite-width limit at correlation u."""
        gb = self.calibration.gamma_b
        return self.profile().eval(gb + (1.0 - gb) * np.asarray(u, dtype=float))

    def bias_allowance(self):
        """Size of the finite-width bias budget, sum over layers of 1/n_s."""
        return float(sum(1.0 / w for w in self.widths))


@dataclass(frozen=True)
class NetworkRealization:
    architecture: NetworkArchitecture
    weights: tuple
    biases: tuple
    seed: int = 0


def sample_network(arch, seed, replica=0):
    """All weights and biases of one network from the keyed stream (seed, replica)."""
    gen = rng.generator(seed, replica, rng.NETWORK)
    gb, gw = arch.calibration.gamma_b, arch.calibration.gamma_w
    sizes = (arch.ambient_dim,) + arch.widths + (1,)
    weights, biases = [], []
    for s in range(len(sizes) - 1):
        n_in, n_out = sizes[s], sizes[s + 1]
        var = 1.0 - gb if s == 0 else gw / n_in
        weights.append(gen.standard_normal((n_out, n_in)) * math.sqrt(var))
        biases.append(gen.standard_normal(n_out) * math.sqrt(gb))
    return NetworkRealization(arch, tuple(weights), tuple(biases), int(seed))


def _check_points(points, dim):
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != dim:
        raise DomainError(f"points must have {dim} coordinates")
    if np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > UNIT_TOL):
        raise DomainError("points must have unit norm (tolerance 1e-12)")
    return x


def evaluate(net, points):
    """Network output at each point, shape (P,)."""
    arch = net.architecture
    x = _check_points(points, arch.ambient_dim)
    h = net.weights[0] @ x.T + net.biases[0][:, None]
    for W, b in zip(net.weights[1:], net.biases[1:]):
        h = W @ arch.activation(h) + b[:, None]
    return h[0]


def _last_hidden(arch, x, gen):
    """Post-activations of the last hidden layer at the points x, shape (n_L, P).

    Each layer is drawn from its exact law given the previous one: rows of
    W sigma(h) + b are iid N(0, gamma_w / n Phi^T Phi + gamma_b), and the
    Gram square root comes from a QR factor of Phi.
    """
    gb, gw = arch.calibration.gamma_b, arch.calibration.gamma_w
    P = x.shape[0]
    n1 = arch.widths[0]
    h = gen.standard_normal((n1, arch.ambient_dim)) @ x.T * math.sqrt(1.0 - gb)
    h += gen.standard_normal((n1, 1)) * math.sqrt(gb)
    for n_out in arch.widths[1:]:
        phi = arch.activation(h)
        r = np.linalg.qr(phi, mode="r")
        h = gen.standard_normal((n_out, r.shape[0])) @ r * math.sqrt(gw / phi.shape[0])
        h += gen.standard_normal((n_out, 1)) * math.sqrt(gb)
    return arch.activation(h)


@dataclass(frozen=True)
class KernelEstimate:
    u: float
    empirical_cov: float
    std_error: float
    kappa_L: float


def pairs_at_angles(us, d=2, seed=0, random_orientation=True):
    """Point pairs (x, y) on S^d with <x, y> = u for each u."""
    us = np.asarray(us, dtype=float)
    if np.any(np.abs(us) > 1):
        raise DomainError("correlations must lie in [-1, 1]")
    gen = rng.generator(seed, 0, rng.POINTS)
    pairs = []
    for u in us:
        if random_orientation:
            q, _ = np.linalg.qr(gen.standard_normal((d + 1, 2)))
            e1, e2 = q[:, 0], q[:, 1]
        else:
            e1, e2 = np.eye(d + 1)[-1], np.eye(d + 1)[0]
        x = e1
        y = u * e1 + math.sqrt(max(0.0, 1.0 - u * u)) * e2
        pairs.append((x / np.linalg.norm(x), y / np.linalg.norm(y)))
    return pairs


def _pair_points(arch, point_pairs):
    pts = np.array([p for pair in point_pairs for p in pair])
    return _check_points(pts, arch.ambient_dim)


def replica_products(arch, point_pairs, replicas, seed, method="conditional"):
    """Per-replica covariance samples for each pair, shape (len(replicas), P).

    ``method="conditional"`` returns the exact output covariance given the
    last hidden layer, gamma_b + gamma_w mean_j sigma_j(x) sigma_j(y), which
    has the same mean as T(x) T(y) and far less noise.  ``method="direct"``
    returns the product of sampled outputs; ``method="explicit"`` does the
    same with fully materialized weight matrices.
    """
    if method not in ("conditional", "direct", "explicit"):
        raise DomainError(f"unknown method {method!r}")
    pts = _pair_points(arch, point_pairs)
    npair = len(point_pairs)
    ix, iy = np.arange(0, 2 * npair, 2), np.arange(1, 2 * npair, 2)
    gb, gw = arch.calibration.gamma_b, arch.calibration.gamma_w
    replicas = list(replicas)
    samples = np.empty((len(replicas), npair))
    for k, r in enumerate(replicas):
        if method == "explicit":
            out = evaluate(sample_network(arch, seed, r), pts)
            samples[k] = out[ix] * out[iy]
            continue
        gen = rng.generator(seed, r, rng.NETWORK)
        phi = _last_hidden(arch, pts, gen)
        if method == "conditional":
            samples[k] = gb + gw * np.mean(phi[:, ix] * phi[:, iy], axis=0)
        else:
            out = gen.standard_normal(phi.shape[0]) @ phi * math.sqrt(gw / phi.shape[0])
            out += gen.standard_normal() * math.sqrt(gb)
            samples[k] = out[ix] * out[iy]
    return samples


def summarize_kernel(arch, point_pairs, samples):
    """KernelEstimate per pair from replica samples, jackknife standard errors."""
    pts = _pair_points(arch, point_pairs)
    mean, se = jackknife(samples)
    us = np.einsum("ij,ij->i", pts[0::2], pts[1::2]).clip(-1.0, 1.0)
    kap = np.atleast_1d(arch.limit_kernel(us))
    return [KernelEstimate(float(u), float(m), float(s), float(k)) for u, m, s, k in zip(us, mean, se, kap)]


def empirical_kernel(arch, point_pairs, n_replicas, seed, method="conditional"):
    """Monte Carlo covariance of the network output for each point pair.

    See ``replica_products`` for the three methods.  Standard errors are
    jackknife over replicas.
    """
    if n_replicas < 2:
        raise DomainError("need at least two replicas")
    samples = replica_products(arch, point_pairs, range(n_replicas), seed, method)
    return summarize_kernel(arch, point_pairs, samples)


def kernel_report_csv(estimates, fh=None):
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "empirical_cov", "std_error", "kappa_L"])
    for e in estimates:
        w.writerow([f"{e.u:.17g}", f"{e.empirical_cov:.17g}", f"{e.std_error:.17g}", f"{e.kappa_L:.17g}"])
    return buf.getvalue() if fh is None else None
