"""Invariant-measure estimation, pi-averages, and mixing-rate diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Optional

import numpy as np

from . import rng
from .engine import SimConfig, em_stream, tile_starts
from .fields import CoefficientSet
from .interp import grid_axes
from .torus import Torus, wrap


@dataclass
class InvariantMeasureEstimate:
    torus: Torus
    bins: tuple
    mass: np.ndarray            # normalized histogram, shape bins
    burn_in: float
    total_time: float
    epsilon: float

    def bin_centers(self) -> np.ndarray:
        axes = [ax + 0.5 * (tau / g) for ax, g, tau in
                zip(grid_axes(self.torus, self.bins), self.bins, self.torus.periods)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def uniform_measure(torus: Torus, bins) -> InvariantMeasureEstimate:
    """Exact uniform (Lebesgue) measure, for divergence-form drifts."""
    bins = tuple(bins)
    mass = np.full(bins, 1.0 / np.prod(bins))
    return InvariantMeasureEstimate(torus=torus, bins=bins, mass=mass,
                                    burn_in=0.0, total_time=math.inf, epsilon=0.0)


def default_starts(cset: CoefficientSet, n: int, seed: int) -> np.ndarray:
    """Deterministic uniform draws over the fundamental cell."""
    gen = rng.block_generator(rng.stage_seed(seed, "starts"), 0)
    return gen.random((n, cset.dim)) * cset.torus.periods


def estimate_invariant(cset: CoefficientSet, config: SimConfig, bins,
                       burn_in: Optional[float] = None, starts=None,
                       threads: int = 1) -> InvariantMeasureEstimate:
    """Occupation histogram of the wrapped process, pooled over paths and
    post-burn-in steps.  Pooling over independent starts is legitimate since
    the invariant measure is unique."""
    bins = tuple(int(b) for b in bins)
    if burn_in is None:
        burn_in = max(1.0, 0.05 * config.horizon)
    if burn_in >= config.horizon:
        raise ValueError("burn_in must be below the horizon")
    if starts is None:
        starts = default_starts(cset, config.n_paths, config.seed)
        all_starts = np.asarray(starts, float)
    else:
        all_starts = tile_starts(starts, config.n_paths, cset.dim)
    k_burn = int(math.ceil(burn_in / config.step))
    widths = cset.torus.periods / np.asarray(bins)
    nbins = int(np.prod(bins))

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        counts = np.zeros(nbins, dtype=np.int64)
        for k, x in em_stream(cset, config, all_starts[sl], gen):
            if k <= k_burn:
                continue
            idx = np.floor(wrap(x, cset.torus) / widths).astype(int)
            np.clip(idx, 0, np.asarray(bins) - 1, out=idx)
            counts += np.bincount(
                np.ravel_multi_index(tuple(idx.T), bins), minlength=nbins)
        return counts

    parts = rng.map_blocks(run_block, rng.path_blocks(all_starts.shape[0]), threads)
    counts = np.sum(parts, axis=0)
    total = counts.sum()
    if total == 0:
        raise ValueError("no post-burn-in samples; increase the horizon")
    return InvariantMeasureEstimate(
        torus=cset.torus, bins=bins,
        mass=(counts / total).reshape(bins),
        burn_in=burn_in,
        total_time=all_starts.shape[0] * (config.horizon - k_burn * config.step),
        epsilon=config.epsilon)


def pi_average(measure: InvariantMeasureEstimate, field_fn: Callable) -> np.ndarray:
    """Histogram quadrature sum_bins mass * field(bin center); linear in the
    field."""
    vals = np.asarray(field_fn(measure.bin_centers()))
    w = measure.mass.ravel()
    out = np.tensordot(w, vals, axes=(0, 0))
    return out


def birkhoff_average(cset: CoefficientSet, f: Callable, config: SimConfig,
                     burn_in: Optional[float] = None,
                     threads: int = 1):
    """Per-path time average of f over [burn_in, horizon]; returns the
    cross-path mean and stderr, component-wise."""
    if burn_in is None:
        burn_in = max(1.0, 0.05 * config.horizon)
    k_burn = int(math.ceil(burn_in / config.step))
    starts = default_starts(cset, config.n_paths, config.seed)

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        acc = None
        count = 0
        for k, x in em_stream(cset, config, starts[sl], gen):
            if k <= k_burn:
                continue
            v = np.asarray(f(wrap(x, cset.torus)), float)
            acc = v.copy() if acc is None else acc + v
            count += 1
        return acc / count

    parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
    per_path = np.concatenate([p.reshape(p.shape[0], -1) for p in parts], axis=0)
    mean = per_path.mean(axis=0)
    err = per_path.std(axis=0, ddof=1) / math.sqrt(per_path.shape[0]) \
        if per_path.shape[0] > 1 else np.zeros_like(mean)
    return mean, err


# ---------------------------------------------------------------------------
# mixing rate

@dataclass
class MixingDiagnostic:
    time_grid: np.ndarray
    tv_estimates: np.ndarray     # normalized to [0, 1]
    stderr: np.ndarray
    fitted_rate_gamma: float
    fitted_prefactor_Gamma: float
    fit_r2: float
    resolvable: bool


def mixing_rate(cset: CoefficientSet, f: Callable, start_pair, config: SimConfig,
                time_grid=None, f_sup: Optional[float] = None,
                threads: int = 1) -> MixingDiagnostic:
    """Decay of |E f(X(x1,t)) - E f(X(x2,t))| on a time grid, a lower-bound
    surrogate for total-variation distance, with a log-linear rate fit."""
    if time_grid is None:
        time_grid = np.linspace(config.step, config.horizon, 24)
    time_grid = np.asarray(time_grid, float)
    t_idx = np.array([int(round(t / config.step)) for t in time_grid])
    if np.any(t_idx > config.n_steps):
        raise ValueError("time_grid exceeds the horizon")
    x1, x2 = np.asarray(start_pair[0], float), np.asarray(start_pair[1], float)

    def run_start(x0, tag):
        starts = np.tile(x0, (config.n_paths, 1))
        sums = np.zeros(len(t_idx))
        sqs = np.zeros(len(t_idx))
        lookup = {int(k): i for i, k in enumerate(t_idx)}
        seed = rng.stage_seed(config.seed, tag)
        cfg = dc_replace(config, seed=seed)

        def run_block(block):
            b, sl = block
            gen = rng.block_generator(seed, b)
            s = np.zeros(len(t_idx))
            q = np.zeros(len(t_idx))
            for k, x in em_stream(cset, cfg, starts[sl], gen):
                if k in lookup:
                    v = np.asarray(f(wrap(x, cset.torus)))
                    s[lookup[k]] += v.sum()
                    q[lookup[k]] += (v * v).sum()
            return s, q

        for s, q in rng.map_blocks(run_block, rng.path_blocks(config.n_paths),
                                   threads):
            sums += s
            sqs += q
        mean = sums / config.n_paths
        var = np.maximum(sqs / config.n_paths - mean ** 2, 0.0)
        return mean, np.sqrt(var / config.n_paths)

    m1, e1 = run_start(x1, "mix-x1")
    m2, e2 = run_start(x2, "mix-x2")
    gap = np.abs(m1 - m2)
    err = np.sqrt(e1 ** 2 + e2 ** 2)
    if f_sup is None:
        probe = default_starts(cset, 4096, 12345)
        f_sup = float(np.max(np.abs(f(wrap(probe, cset.torus)))))
    f_sup = max(f_sup, 1e-300)

    usable = gap > 3.0 * err
    resolvable = int(usable.sum()) >= 3
    if resolvable:
        t_u, g_u = time_grid[usable], gap[usable]
        w = (g_u / err[usable]) ** 2
        coef, res = _weighted_linfit(t_u, np.log(g_u), w)
        gamma_hat, log_pref = -coef[0], coef[1]
        r2 = res
    else:
        gamma_hat, log_pref, r2 = math.nan, math.nan, math.nan
    return MixingDiagnostic(
        time_grid=time_grid,
        tv_estimates=np.clip(gap / (2.0 * f_sup), 0.0, 1.0),
        stderr=err / (2.0 * f_sup),
        fitted_rate_gamma=gamma_hat,
        fitted_prefactor_Gamma=math.exp(log_pref) / (2.0 * f_sup)
        if resolvable else math.nan,
        fit_r2=r2, resolvable=resolvable)


def _weighted_linfit(x, y, w):
    """Weighted least squares y ~ a*x + b; returns ((a, b), r2)."""
    W = np.sqrt(w)
    A = np.stack([x * W, W], axis=1)
    coef, *_ = np.linalg.lstsq(A, y * W, rcond=None)
    yhat = coef[0] * x + coef[1]
    ss_res = float(np.sum(w * (y - yhat) ** 2))
    ybar = float(np.sum(w * y) / np.sum(w))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef, r2


def pi_epsilon_convergence(cset: CoefficientSet, epsilons, config: SimConfig,
                           bins, burn_in: Optional[float] = None,
                           threads: int = 1) -> dict:
    """Discrete L1 distance between pi_eps and pi_0 histograms per epsilon."""
    epsilons = list(epsilons)
    if 0.0 not in epsilons:
        epsilons = [0.0] + epsilons
    measures = {}
    for eps in epsilons:
        cfg = dc_replace(config, epsilon=eps,
                         seed=rng.stage_seed(config.seed, f"pi-eps-{eps}"))
        measures[eps] = estimate_invariant(cset, cfg, bins, burn_in=burn_in,
                                           threads=threads)
    ref = measures[0.0].mass
    return {eps: float(np.abs(m.mass - ref).sum())
            for eps, m in measures.items() if eps != 0.0}


# ---------------------------------------------------------------------------
# exports

def histogram_csv(measure: InvariantMeasureEstimate, path):
    n = measure.torus.dim
    centers = measure.bin_centers()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"bin_index_{i + 1}" for i in range(n)]
                   + [f"center_{i + 1}" for i in range(n)] + ["mass"])
        flat = measure.mass.ravel()
        for j in range(flat.shape[0]):
            idx = np.unravel_index(j, measure.bins)
            w.writerow(list(idx) + [repr(float(c)) for c in centers[j]]
                       + [repr(float(flat[j]))])


def mixing_csv(diag: MixingDiagnostic, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "estimate", "stderr"])
        for t, v, e in zip(diag.time_grid, diag.tv_estimates, diag.stderr):
            w.writerow([repr(float(t)), repr(float(v)), repr(float(e))])
