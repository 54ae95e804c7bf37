"""Euler-Maruyama simulation of the scaled and original-scale diffusions.

The scaled process solves dX = (b(X) + eps*c(X)) dt + sigma(X) dB; the
original-scale process is obtained exactly by the rescaling identity
X_orig(x, t) = eps * X_scaled(x/eps, t/eps^2), never by discretizing the stiff
eps^{-1} b drift directly.

Positions are accumulated unwrapped in R^n; coefficients are evaluated on the
wrapped point, which is exact by periodicity.  Paths are simulated in fixed
blocks with counter-based per-block noise streams, so results are bit
identical for any worker count.
"""

from __future__ import annotations

import csv
import gzip
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import rng
from .fields import CoefficientSet
from .torus import Torus, wrap


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Discretization budget for one simulation stage.

    step and horizon are in scaled-process time units; epsilon = 0 selects
    the limiting dynamics without the eps*c drift term.
    """

    step: float
    horizon: float
    n_paths: int
    seed: int
    epsilon: float = 0.0
    store_stride: int = 1

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise ValueError("step and horizon must be positive")
        if self.step > self.horizon:
            raise ValueError("step must not exceed horizon")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.step)))


@dataclass
class PathBatch:
    config: SimConfig
    torus: Torus
    starts: np.ndarray           # (P, n)
    times: np.ndarray            # (K,)
    states: np.ndarray           # (P, K, n) unwrapped

    def wrapped(self) -> np.ndarray:
        return wrap(self.states, self.torus)


@dataclass
class JacobianBatch:
    times: np.ndarray
    states: np.ndarray           # (P, K, n, n)


def tile_starts(starts, n_paths: int, dim: int) -> np.ndarray:
    """Expand starts to one row per path: each given start is replicated
    n_paths times, in start-major order."""
    s = np.atleast_2d(np.asarray(starts, float))
    if s.shape[1] != dim:
        raise ValueError(f"starts must have dimension {dim}")
    return np.repeat(s, n_paths, axis=0)


def em_stream(cset: CoefficientSet, config: SimConfig, starts_block: np.ndarray,
              gen: np.random.Generator):
    """Generate (step_index, unwrapped_states) along one block of EM paths.

    Yields k = 0 first with the exact starts.  The yielded array is reused
    in place; consumers that store it must copy.
    """
    x = np.array(starts_block, dtype=float, copy=True)
    h = config.step
    sqrt_h = math.sqrt(h)
    eps = config.epsilon
    m = cset.noise_dim
    torus = cset.torus
    yield 0, x
    for k in range(1, config.n_steps + 1):
        xw = wrap(x, torus)
        drift = cset.drift_b(xw)
        if eps != 0.0:
            drift = drift + eps * cset.drift_c(xw)
        sig = cset.sigma(xw)
        xi = gen.standard_normal((x.shape[0], m))
        x += drift * h + np.einsum("pij,pj->pi", sig, xi) * sqrt_h
        if not np.all(np.isfinite(x)):
            bad = np.flatnonzero(~np.isfinite(x).all(axis=1))
            raise EngineError(
                f"nonfinite state at step {k} for block-local paths {bad[:8].tolist()}")
        yield k, x


def _stored_indices(config: SimConfig) -> np.ndarray:
    idx = np.arange(0, config.n_steps + 1, config.store_stride)
    if idx[-1] != config.n_steps:
        idx = np.append(idx, config.n_steps)
    return idx


def simulate_scaled(cset: CoefficientSet, config: SimConfig, starts,
                    threads: int = 1) -> PathBatch:
    """EM paths of the scaled process from the expanded start list."""
    all_starts = tile_starts(starts, config.n_paths, cset.dim)
    keep = _stored_indices(config)
    keep_set = set(keep.tolist())

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        out = np.empty((sl.stop - sl.start, len(keep), cset.dim))
        pos = 0
        for k, x in em_stream(cset, config, all_starts[sl], gen):
            if k in keep_set:
                out[:, pos] = x
                pos += 1
        return out

    parts = rng.map_blocks(run_block, rng.path_blocks(all_starts.shape[0]), threads)
    return PathBatch(
        config=config, torus=cset.torus, starts=all_starts,
        times=keep * config.step, states=np.concatenate(parts, axis=0))


def simulate_original(cset: CoefficientSet, epsilon: float, config: SimConfig,
                      starts, threads: int = 1) -> PathBatch:
    """Paths of the original-scale process X(x,t) = eps * Xbar(x/eps, t/eps^2).

    config.horizon is in original time; config.step stays in scaled time.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive for the original scale")
    scaled = replace(config, epsilon=epsilon, horizon=config.horizon / epsilon ** 2)
    s = np.atleast_2d(np.asarray(starts, float)) / epsilon
    batch = simulate_scaled(cset, scaled, s, threads=threads)
    return PathBatch(
        config=config,
        torus=Torus(cset.torus.periods * epsilon),
        starts=batch.starts * epsilon,
        times=batch.times * epsilon ** 2,
        states=batch.states * epsilon)


# ---------------------------------------------------------------------------
# Jacobian flow

def _jac_b(cset: CoefficientSet, xw: np.ndarray, fd: float) -> np.ndarray:
    if cset.jac_b is not None:
        return cset.jac_b(xw)
    n = cset.dim
    out = np.empty((xw.shape[0], n, n))
    for j in range(n):
        ej = np.zeros(n)
        ej[j] = fd
        out[:, :, j] = (cset.drift_b(xw + ej) - cset.drift_b(xw - ej)) / (2 * fd)
    return out


def _jac_sigma(cset: CoefficientSet, xw: np.ndarray, fd: float) -> np.ndarray:
    """(P, m, n, n): for each noise index j the matrix d_k sigma_{ij}."""
    if cset.jac_sigma is not None:
        return cset.jac_sigma(xw)
    n, m = cset.dim, cset.noise_dim
    out = np.empty((xw.shape[0], m, n, n))
    for k in range(n):
        ek = np.zeros(n)
        ek[k] = fd
        ds = (cset.sigma(xw + ek) - cset.sigma(xw - ek)) / (2 * fd)  # (P,n,m)
        out[:, :, :, k] = np.transpose(ds, (0, 2, 1))
    return out


def jacobian_stream(cset: CoefficientSet, config: SimConfig,
                    starts_block: np.ndarray, gen: np.random.Generator,
                    fd_step: float = 1e-5):
    """Joint EM of state and flow Jacobian with shared noise increments."""
    x = np.array(starts_block, dtype=float, copy=True)
    P, n = x.shape
    m = cset.noise_dim
    J = np.broadcast_to(np.eye(n), (P, n, n)).copy()
    h = config.step
    sqrt_h = math.sqrt(h)
    yield 0, x, J
    for k in range(1, config.n_steps + 1):
        xw = wrap(x, cset.torus)
        drift = cset.drift_b(xw)
        if config.epsilon != 0.0:
            drift = drift + config.epsilon * cset.drift_c(xw)
        sig = cset.sigma(xw)
        db = _jac_b(cset, xw, fd_step)
        dsig = _jac_sigma(cset, xw, fd_step)
        xi = gen.standard_normal((P, m))
        dJ = np.einsum("pik,pkl->pil", db, J) * h
        dJ += np.einsum("pjik,pkl,pj->pil", dsig, J, xi) * sqrt_h
        x += drift * h + np.einsum("pij,pj->pi", sig, xi) * sqrt_h
        J += dJ
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(J))):
            raise EngineError(f"nonfinite state or Jacobian at step {k}")
        yield k, x, J


def simulate_jacobian(cset: CoefficientSet, config: SimConfig, starts,
                      threads: int = 1, fd_step: float = 1e-5):
    """(PathBatch, JacobianBatch) with the same noise for state and flow."""
    all_starts = tile_starts(starts, config.n_paths, cset.dim)
    keep = _stored_indices(config)
    keep_set = set(keep.tolist())
    n = cset.dim

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        xs = np.empty((P, len(keep), n))
        js = np.empty((P, len(keep), n, n))
        pos = 0
        for k, x, J in jacobian_stream(cset, config, all_starts[sl], gen, fd_step):
            if k in keep_set:
                xs[:, pos] = x
                js[:, pos] = J
                pos += 1
        return xs, js

    parts = rng.map_blocks(run_block, rng.path_blocks(all_starts.shape[0]), threads)
    states = np.concatenate([p[0] for p in parts], axis=0)
    jacs = np.concatenate([p[1] for p in parts], axis=0)
    batch = PathBatch(config=config, torus=cset.torus, starts=all_starts,
                      times=keep * config.step, states=states)
    return batch, JacobianBatch(times=keep * config.step, states=jacs)


# ---------------------------------------------------------------------------
# hitting-time and Hoermander-region diagnostics

@dataclass
class HittingReport:
    starts: np.ndarray
    fractions: np.ndarray        # per start
    time_quantiles: np.ndarray   # per start: [q25, q50, q90] of entry time
    horizon: float


def hitting_diagnostic(cset: CoefficientSet, region, config: SimConfig,
                       start_grid, threads: int = 1) -> HittingReport:
    """Per-start fraction of paths entering region before the horizon, with
    empirical quantiles of the entry time (detected step-wise)."""
    starts = np.atleast_2d(np.asarray(start_grid, float))
    all_starts = tile_starts(starts, config.n_paths, cset.dim)

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        entry = np.full(P, np.inf)
        for k, x in em_stream(cset, config, all_starts[sl], gen):
            inside = region.contains(wrap(x, cset.torus), cset.torus)
            fresh = inside & ~np.isfinite(entry)
            entry[fresh] = k * config.step
        return entry

    parts = rng.map_blocks(run_block, rng.path_blocks(all_starts.shape[0]), threads)
    entry = np.concatenate(parts).reshape(starts.shape[0], config.n_paths)
    hit = np.isfinite(entry)
    fractions = hit.mean(axis=1)
    quantiles = np.full((starts.shape[0], 3), np.nan)
    for i in range(starts.shape[0]):
        if hit[i].any():
            quantiles[i] = np.quantile(entry[i][hit[i]], [0.25, 0.5, 0.9])
    return HittingReport(starts=starts, fractions=fractions,
                         time_quantiles=quantiles, horizon=config.horizon)


@dataclass
class HoermanderReport:
    time_grid: np.ndarray
    sup_estimates: np.ndarray    # per t: sup over starts of E[|J|_HS 1{t <= tau_U}]
    stderr: np.ndarray
    min_estimate: float
    satisfied: bool              # min over t below 1 beyond one stderr


def a4_diagnostic(cset: CoefficientSet, config: SimConfig, region_U,
                  start_grid, time_grid, threads: int = 1) -> HoermanderReport:
    """Monte Carlo probe of the flow-contraction condition on the declared
    Hoermander region: sup_x E[ |J_x(t)|_HS 1{tau_U >= t} ] per t."""
    starts = np.atleast_2d(np.asarray(start_grid, float))
    all_starts = tile_starts(starts, config.n_paths, cset.dim)
    t_idx = np.array([int(round(t / config.step)) for t in time_grid])
    if np.any(t_idx > config.n_steps):
        raise ValueError("time_grid exceeds the horizon")

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        entry_step = np.full(P, np.iinfo(np.int64).max)
        vals = np.zeros((P, len(t_idx)))
        lookup = {int(k): i for i, k in enumerate(t_idx)}
        for k, x, J in jacobian_stream(cset, config, all_starts[sl], gen):
            inside = region_U.contains(wrap(x, cset.torus), cset.torus)
            fresh = inside & (entry_step == np.iinfo(np.int64).max)
            entry_step[fresh] = k
            if k in lookup:
                i = lookup[k]
                alive = entry_step >= k  # tau_U >= t
                hs = np.sqrt(np.sum(J * J, axis=(1, 2)))
                vals[:, i] = np.where(alive & (k > 0), hs, 0.0)
        return vals

    parts = rng.map_blocks(run_block, rng.path_blocks(all_starts.shape[0]), threads)
    vals = np.concatenate(parts).reshape(starts.shape[0], config.n_paths, len(t_idx))
    means = vals.mean(axis=1)                      # (starts, t)
    errs = vals.std(axis=1, ddof=1) / math.sqrt(config.n_paths)
    sup_idx = means.argmax(axis=0)
    sup = means[sup_idx, np.arange(len(t_idx))]
    sup_err = errs[sup_idx, np.arange(len(t_idx))]
    i_min = int(np.argmin(sup))
    return HoermanderReport(
        time_grid=np.asarray(time_grid, float),
        sup_estimates=sup, stderr=sup_err,
        min_estimate=float(sup[i_min]),
        satisfied=bool(sup[i_min] + sup_err[i_min] < 1.0))


# ---------------------------------------------------------------------------
# exports

def dump_paths_csv(batch: PathBatch, path, gzipped: bool = False):
    """CSV `path,time,x1..xn` of the unwrapped trajectories."""
    opener = gzip.open if gzipped else open
    n = batch.states.shape[2]
    with opener(path, "wt", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "time"] + [f"x{i + 1}" for i in range(n)])
        for p in range(batch.states.shape[0]):
            for j, t in enumerate(batch.times):
                w.writerow([p, repr(float(t))]
                           + [repr(float(v)) for v in batch.states[p, j]])


def summary_json(batch: PathBatch, path, runtime_s: float):
    with open(path, "w") as fh:
        json.dump({
            "config": {
                "step": batch.config.step, "horizon": batch.config.horizon,
                "n_paths": batch.config.n_paths, "seed": batch.config.seed,
                "epsilon": batch.config.epsilon,
                "store_stride": batch.config.store_stride,
            },
            "n_paths_total": int(batch.states.shape[0]),
            "n_stored_times": int(batch.times.shape[0]),
            "runtime_s": runtime_s,
        }, fh, indent=2)
