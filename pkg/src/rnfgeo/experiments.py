"""Experiment drivers: turn an ExperimentConfig into result tables.

Monte Carlo work is split into contiguous replica blocks that run through a
process pool; results are gathered by replica index, so the output does not
depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from . import geometry, network
from .kernels import KernelClass, KernelProfile, kappa_prime_at_one
from .spectral import compute_spectrum, explained_variance
from .stats import jackknife
from .synthesis import SphericalGrid, sample_coefficients, synthesize

log = logging.getLogger(__name__)

SCHEMA = 1
AUTO_START = 64
DECREASE_TOL = 1e-12


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    quantity: str
    activation: str
    gamma_b: float
    L: int
    u: float | None
    ell_max: int | None
    n_theta: int | None
    n_phi: int | None
    n_replicas: int | None
    measured: float
    std_error: float | None = None
    theory: float | None = None
    note: str = ""

    @property
    def rel_deviation(self):
        if self.theory is None or self.theory == 0:
            return None
        return abs(self.measured - self.theory) / abs(self.theory)

    COLUMNS = ("experiment", "quantity", "activation", "gamma_b", "L", "u", "ell_max", "n_theta",
               "n_phi", "n_replicas", "measured", "std_error", "theory", "rel_deviation", "note")

    def record(self):
        return [_cell(getattr(self, c)) for c in self.COLUMNS]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ResultRow.COLUMNS)
    for r in rows:
        w.writerow(r.record())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# parallel plumbing


def default_workers():
    return os.cpu_count() or 1


def parallel_map(fn, tasks, workers=1):
    """[fn(*t) for t in tasks], in task order, optionally on a process pool."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def replica_blocks(n, workers):
    """Contiguous replica index ranges, one per worker."""
    k = max(1, min(workers, n))
    edges = np.linspace(0, n, k + 1).round().astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


# ---------------------------------------------------------------------------
# shared helpers


def profile_for(cfg, L):
    return KernelProfile.build(cfg.activation_spec(), cfg.gamma_b, L, cfg.kernel_method)


def auto_band_limit(profile, start, cap, deficit, d=2):
    """Smallest start * 2^k (at most cap) whose spectrum explains 1 - deficit of the variance."""
    lmax = min(start, cap)
    while True:
        spec = compute_spectrum(profile, d, lmax, source=profile.label)
        if explained_variance(spec) >= 1.0 - deficit or lmax >= cap:
            return spec
        lmax = min(2 * lmax, cap)


def spectrum_and_grid(cfg, profile):
    """Band-limited spectrum and grid for one depth, honouring ``ell_max = auto``."""
    if not cfg.auto_band_limit:
        spec = compute_spectrum(profile, cfg.d, cfg.ell_max, source=profile.label)
        return spec, SphericalGrid(cfg.n_theta, cfg.n_phi)
    spec = auto_band_limit(profile, AUTO_START, cfg.ell_max_cap, cfg.variance_deficit, cfg.d)
    scale = 1
    while cfg.n_theta * scale < 2 * spec.ell_max:
        scale *= 2
    return spec, SphericalGrid(cfg.n_theta * scale, cfg.n_phi * scale)


def _measure_block(spec, grid, us, replicas, seed, estimator, n_levels):
    return geometry.replica_measurements(spec, grid, us, replicas, seed, estimator, n_levels)


def measure_replicas(spec, grid, us, n_replicas, seed, estimator, n_levels, workers=1):
    tasks = [(spec, grid, us, blk, seed, estimator, n_levels) for blk in replica_blocks(n_replicas, workers)]
    parts = parallel_map(_measure_block, tasks, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# ---------------------------------------------------------------------------
# experiments


def run_nodal_experiment(cfg, workers=1):
    """Mean boundary length and excursion area per (L, u) with their theory values."""
    cfg.validate()
    rows = []
    us = sorted(set(cfg.levels))
    for L in sorted(set(cfg.depths)):
        prof = profile_for(cfg, L)
        smooth = prof.klass is KernelClass.KAC_RICE
        if not smooth:
            log.warning("%s is in the fractal class; length theory column left empty", prof.label)
        spec, grid = spectrum_and_grid(cfg, prof)
        lengths, areas = measure_replicas(spec, grid, us, cfg.n_replicas, cfg.seed,
                                          cfg.estimator, cfg.n_levels, workers)
        lm, ls = jackknife(lengths)
        am, as_ = jackknife(areas)
        note = geometry.choose_estimator(spec, cfg.estimator)
        common = dict(experiment="nodal", activation=cfg.activation_spec().name, gamma_b=float(cfg.gamma_b),
                      L=L, ell_max=spec.ell_max, n_theta=grid.n_theta, n_phi=grid.n_phi,
                      n_replicas=cfg.n_replicas, note=note)
        for j, u in enumerate(us):
            theory = geometry.theoretical_length(2, prof.kappa_prime_1, L, u) if smooth else None
            rows.append(ResultRow(quantity="length", u=float(u), measured=float(lm[j]),
                                  std_error=float(ls[j]), theory=theory, **common))
            rows.append(ResultRow(quantity="area", u=float(u), measured=float(am[j]), std_error=float(as_[j]),
                                  theory=4.0 * math.pi * float(scipy.special.ndtr(-u)), **common))
    return rows


def _fractal_task(cfg, L, u):
    prof = profile_for(cfg, L)
    cache = {}

    def spectrum_for(nt):
        lmax = geometry.tied_band_limit(nt) if cfg.band_limit == "tied" else cfg.ell_max
        if lmax not in cache:
            cache[lmax] = compute_spectrum(prof, 2, lmax, source=prof.label)
        return cache[lmax]

    report = geometry.length_vs_resolution(spectrum_for, u, cfg.resolutions, cfg.n_replicas, cfg.seed,
                                           cfg.estimator, cfg.n_levels)
    return prof, report


def fractal_reports(cfg, workers=1):
    """[(L, profile, ScalingReport)] for every depth and level."""
    cfg.validate()
    tasks = [(cfg, L, float(u)) for L in sorted(set(cfg.depths)) for u in sorted(set(cfg.levels))]
    out = parallel_map(_fractal_task, tasks, workers)
    return [(t[1], prof, rep) for t, (prof, rep) in zip(tasks, out)]


def target_dimension(profile, d=2):
    """Expected boundary dimension: d - beta^L for fractal kernels, d - 1 otherwise."""
    if profile.klass is KernelClass.FRACTAL:
        return d - profile.cri_beta
    return d - 1.0


def run_fractal_experiment(cfg, workers=1):
    name = cfg.activation_spec().name
    rows = []
    for L, prof, rep in fractal_reports(cfg, workers):
        rows.extend(_fractal_rows(cfg, name, L, prof, rep))
    return rows


def samples_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["resolution_ntheta", "resolution_nphi", "ell_max", "u", "replica", "length", "area"])
    for rep in reports:
        for rec in rep.rows():
            w.writerow([_cell(v) for v in rec])
    return buf.getvalue()


def _variance_task(cfg, L):
    prof = profile_for(cfg, L)
    spec = compute_spectrum(prof, cfg.d, cfg.ell_max, source=prof.label)
    return explained_variance(spec)


def run_variance_scan(cfg, workers=1):
    """Explained variance per depth; rows past the maximum that fall below it are flagged."""
    cfg.validate()
    depths = sorted(set(cfg.depths))
    values = parallel_map(_variance_task, [(cfg, L) for L in depths], workers)
    peak = int(np.argmax(values))
    name = cfg.activation_spec().name
    rows = []
    for k, (L, v) in enumerate(zip(depths, values)):
        note = "decreasing" if k > peak and v < values[peak] - DECREASE_TOL else ""
        rows.append(ResultRow("variance-scan", "explained_variance", name, float(cfg.gamma_b), L, None,
                              cfg.ell_max, None, None, None, float(v), note=note))
    return rows


def non_increasing_after_peak(values, tol=DECREASE_TOL):
    values = list(values)
    peak = int(np.argmax(values))
    tail = values[peak:]
    return all(b <= a + tol for a, b in zip(tail, tail[1:]))


def kernel_table(cfg):
    """Tabulated kappa_L over [-1, 1] with the depth-L scalars repeated on each row."""
    cfg.validate()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "u", "kappa_L", "kappa_prime_1", "kappa_prime_L", "cri", "c1", "class", "regime"])
    us = np.linspace(-1.0, 1.0, cfg.n_points)
    for L in sorted(set(cfg.depths)):
        prof = profile_for(cfg, L)
        kl = prof.eval(us)
        kpl = kappa_prime_at_one(prof) if prof.klass is KernelClass.KAC_RICE else math.inf
        reg = prof.regime.value.value if prof.regime is not None else ""
        for u, k in zip(us, kl):
            w.writerow([L, _cell(float(u)), _cell(float(k)), _cell(prof.kappa_prime_1), _cell(float(kpl)),
                        _cell(prof.cri_beta), _cell(prof.c1), prof.klass.value, reg])
    return buf.getvalue()


def spectrum_table(cfg):
    cfg.validate()
    prof = profile_for(cfg, cfg.depths[0])
    return compute_spectrum(prof, cfg.d, cfg.ell_max, source=prof.label).to_csv()


def simulate_field(cfg):
    cfg.validate()
    prof = profile_for(cfg, cfg.depths[0])
    spec, grid = spectrum_and_grid(cfg, prof)
    coeffs = sample_coefficients(spec, cfg.seed, cfg.replica)
    return synthesize(coeffs, grid, spectrum_id=prof.label)


def network_angles(n):
    return np.cos(np.linspace(0.0, math.pi, n))


def run_network_check(cfg, workers=1):
    cfg.validate()
    L = cfg.depths[0]
    arch = network.NetworkArchitecture.build(cfg.activation_spec(), [cfg.width] * L, cfg.d, cfg.gamma_b)
    pairs = network.pairs_at_angles(network_angles(cfg.n_angles), cfg.d, cfg.seed)
    tasks = [(arch, pairs, blk, cfg.seed, cfg.network_method) for blk in replica_blocks(cfg.n_replicas, workers)]
    samples = np.concatenate(parallel_map(network.replica_products, tasks, workers))
    return network.summarize_kernel(arch, pairs, samples)


# ---------------------------------------------------------------------------
# subcommand dispatch


@dataclass
class Output:
    body: str
    extra: dict = field(default_factory=dict)  # path suffix -> csv text


def render(cfg, workers=1):
    """CSV text (without the schema header) for the experiment named in cfg."""
    exp = cfg.experiment
    if exp == "kernel":
        return Output(kernel_table(cfg))
    if exp == "spectrum":
        return Output(spectrum_table(cfg))
    if exp == "simulate":
        return Output(simulate_field(cfg).to_csv())
    if exp == "nodal":
        return Output(rows_csv(run_nodal_experiment(cfg, workers)))
    if exp == "variance-scan":
        return Output(rows_csv(run_variance_scan(cfg, workers)))
    if exp == "network-check":
        return Output(network.kernel_report_csv(run_network_check(cfg, workers)))
    if exp == "fractal-scan":
        results = fractal_reports(cfg, workers)
        name = cfg.activation_spec().name
        rows = [r for L, prof, rep in results for r in _fractal_rows(cfg, name, L, prof, rep)]
        extra = {}
        if cfg.samples_output:
            depths = sorted({L for L, _, _ in results})
            for L in depths:
                key = "" if len(depths) == 1 else f"_L{L}"
                extra[key] = samples_csv([rep for LL, _, rep in results if LL == L])
        return Output(rows_csv(rows), extra)
    raise ValueError(exp)


def _fractal_rows(cfg, name, L, prof, rep):
    common = dict(experiment="fractal-scan", activation=name, gamma_b=float(cfg.gamma_b), L=L, u=rep.u,
                  n_replicas=cfg.n_replicas)
    rows = []
    for (nt, nphi), lmax, (m, s) in zip(rep.resolutions, rep.ell_max, rep.mean_lengths):
        rows.append(ResultRow(quantity="length", ell_max=lmax, n_theta=nt, n_phi=nphi,
                              measured=m, std_error=s, **common))
    note = f"raw={rep.raw_dimension!r};r2={rep.r_squared!r};increasing={str(rep.increasing).lower()}"
    rows.append(ResultRow(quantity="dimension", ell_max=None, n_theta=None, n_phi=None,
                          measured=rep.fitted_dimension, theory=target_dimension(prof), note=note, **common))
    return rows
