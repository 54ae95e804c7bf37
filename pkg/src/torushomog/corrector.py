"""Cell-problem correctors via time integration of the centered semigroup.

The corrector against a centered target g is estimated on a regular grid as
the Monte Carlo time integral  -int_0^T E[ g(X(x,t)) - pi(g) ] dt, with a
truncation horizon chosen from the fitted mixing rate.  All grid nodes share
the same noise increments (common random numbers), which makes the estimated
field smooth in x and finite differences of it well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import rng
from .engine import SimConfig
from .fields import CoefficientSet
from .interp import grid_points, periodic_interp
from .torus import Torus, wrap


@dataclass
class CorrectorField:
    torus: Torus
    shape: tuple                     # grid shape
    values: np.ndarray               # (*shape, k)
    stderr: np.ndarray               # (*shape, k)
    truncation_T: float
    n_paths: int
    path_integrals: Optional[np.ndarray] = None   # (P, nodes, k)
    jacobian: Optional[np.ndarray] = None         # (*shape, k, n)
    jacobian_stderr: Optional[np.ndarray] = None
    richardson_ratio: Optional[float] = None
    stencil_step: Optional[float] = None

    @property
    def n_components(self) -> int:
        return self.values.shape[-1]

    def __call__(self, points) -> np.ndarray:
        return periodic_interp(self.values, self.torus, points)

    def jacobian_at(self, points) -> np.ndarray:
        if self.jacobian is None:
            raise ValueError("call differentiate() first")
        return periodic_interp(self.jacobian, self.torus, points)

    def shifted(self, offset) -> "CorrectorField":
        """Gauge shift by a constant per component.  Correctors are defined
        up to additive constants; derivatives and hence everything downstream
        are unchanged, so the Jacobian is carried over untouched."""
        off = np.broadcast_to(np.asarray(offset, float),
                              (self.values.shape[-1],))
        return CorrectorField(
            torus=self.torus, shape=self.shape,
            values=self.values + off, stderr=self.stderr,
            truncation_T=self.truncation_T, n_paths=self.n_paths,
            path_integrals=self.path_integrals,
            jacobian=self.jacobian, jacobian_stderr=self.jacobian_stderr,
            richardson_ratio=self.richardson_ratio,
            stencil_step=self.stencil_step)


def truncation_horizon(gamma: float, Gamma: float, sup_target: float,
                       tail_tol: float) -> float:
    """Smallest T with Gamma * sup|g| * exp(-gamma T) / gamma <= tail_tol."""
    if gamma <= 0 or not math.isfinite(gamma):
        raise ValueError("need a positive finite mixing rate")
    Gamma = max(Gamma, 1.0)
    sup_target = max(sup_target, 1e-300)
    return max(math.log(Gamma * sup_target / (gamma * tail_tol)) / gamma,
               1.0 / gamma)


def _as_components(vals: np.ndarray) -> np.ndarray:
    v = np.asarray(vals, float)
    return v[:, None] if v.ndim == 1 else v


def solve_corrector(cset: CoefficientSet, target: Callable, pi_target,
                    shape, config: SimConfig, gamma: float,
                    Gamma: float = 1.0, tail_tol: float = 1e-3,
                    value_tol: Optional[float] = None,
                    threads: int = 1, keep_paths: bool = True) -> CorrectorField:
    """Estimate the corrector of `target` on a regular grid.

    pi_target is the invariant average to subtract (vector or scalar);
    config.horizon is ignored in favour of the mixing-based truncation.
    """
    shape = tuple(int(g) for g in shape)
    nodes = grid_points(cset.torus, shape)          # (G, n)
    G = nodes.shape[0]
    pi_t = np.atleast_1d(np.asarray(pi_target, float))
    probe = target(nodes)
    k = 1 if np.asarray(probe).ndim == 1 else np.asarray(probe).shape[1]
    if pi_t.shape != (k,):
        raise ValueError(f"pi_target must have {k} component(s)")
    sup_g = float(np.max(np.abs(_as_components(probe) - pi_t)))
    T = truncation_horizon(gamma, Gamma, sup_g, tail_tol)
    h = config.step
    K = max(1, int(math.ceil(T / h)))
    m = cset.noise_dim
    P = config.n_paths

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        Pb = sl.stop - sl.start
        x = np.broadcast_to(nodes, (Pb, G, cset.dim)).copy()
        acc = np.zeros((Pb, G, k))
        for step in range(K + 1):
            xw = wrap(x.reshape(-1, cset.dim), cset.torus)
            gt = _as_components(target(xw)).reshape(Pb, G, k) - pi_t
            w = 0.5 if step in (0, K) else 1.0
            acc += (w * h) * gt
            if step == K:
                break
            drift = cset.drift_b(xw)
            sig = cset.sigma(xw)
            xi = gen.standard_normal((Pb, 1, m))     # shared across nodes
            dx = drift.reshape(Pb, G, cset.dim) * h
            dx += np.einsum("pgij,pqj->pgi", sig.reshape(Pb, G, cset.dim, m),
                            xi) * math.sqrt(h)
            x += dx
            if not np.all(np.isfinite(x)):
                raise RuntimeError(f"nonfinite corrector path at step {step + 1}")
        return acc

    parts = rng.map_blocks(run_block, rng.path_blocks(P), threads)
    integrals = np.concatenate(parts, axis=0)        # (P, G, k)
    values = -integrals.mean(axis=0)
    stderr = integrals.std(axis=0, ddof=1) / math.sqrt(P) if P > 1 \
        else np.zeros_like(values)
    if value_tol is not None and float(stderr.max()) > value_tol:
        raise RuntimeError(
            f"corrector stderr {stderr.max():.3g} exceeds requested "
            f"tolerance {value_tol:.3g} at this budget")
    return CorrectorField(
        torus=cset.torus, shape=shape,
        values=values.reshape(shape + (k,)),
        stderr=stderr.reshape(shape + (k,)),
        truncation_T=T, n_paths=P,
        path_integrals=integrals if keep_paths else None)


def corrector_csv(field: CorrectorField, path):
    """CSV `node_index_1..n, x_1..n, value_1..k, stderr_1..k` in row-major
    node order; Jacobian entries appended column-wise when present."""
    import csv as _csv
    n = field.torus.dim
    k = field.n_components
    nodes = grid_points(field.torus, field.shape)
    vals = field.values.reshape(-1, k)
    errs = field.stderr.reshape(-1, k)
    jac = field.jacobian.reshape(-1, k * n) if field.jacobian is not None else None
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        header = [f"node_index_{i + 1}" for i in range(n)] \
            + [f"x_{i + 1}" for i in range(n)] \
            + [f"value_{j + 1}" for j in range(k)] \
            + [f"stderr_{j + 1}" for j in range(k)]
        if jac is not None:
            header += [f"jac_{j + 1}_{i + 1}" for j in range(k) for i in range(n)]
        w.writerow(header)
        for r in range(nodes.shape[0]):
            idx = np.unravel_index(r, field.shape)
            row = list(idx) + [repr(float(v)) for v in nodes[r]] \
                + [repr(float(v)) for v in vals[r]] \
                + [repr(float(v)) for v in errs[r]]
            if jac is not None:
                row += [repr(float(v)) for v in jac[r]]
            w.writerow(row)


def _roll_diff(arr: np.ndarray, axis: int, s: int, spacing: float) -> np.ndarray:
    return (np.roll(arr, -s, axis=axis) - np.roll(arr, s, axis=axis)) \
        / (2 * s * spacing)


def differentiate(field: CorrectorField, stencil_nodes: int = 1) -> CorrectorField:
    """Periodic central differences of the grid values; returns a copy with
    the Jacobian filled in.

    The convergence diagnostic compares stencils at 1x, 2x and 4x the base
    width; for a smooth field the ratio of successive differences is ~4.
    """
    n = field.torus.dim
    shape = field.shape
    spacing = [tau / g for tau, g in zip(field.torus.periods, shape)]
    vals = field.values                               # (*shape, k)

    def jac_at(s: int) -> np.ndarray:
        return np.stack(
            [_roll_diff(vals, axis=i, s=s, spacing=spacing[i]) for i in range(n)],
            axis=-1)                                  # (*shape, k, n)

    s = int(stencil_nodes)
    if s < 1 or any(4 * s >= g // 2 for g in shape):
        raise ValueError("stencil too wide for this grid")
    j1, j2, j4 = jac_at(s), jac_at(2 * s), jac_at(4 * s)
    d12 = float(np.max(np.abs(j2 - j1)))
    d24 = float(np.max(np.abs(j4 - j2)))
    ratio = d24 / d12 if d12 > 0 else math.nan

    jerr = None
    if field.path_integrals is not None:
        P = field.path_integrals.shape[0]
        per_path = -field.path_integrals.reshape((P,) + shape + (vals.shape[-1],))
        jac_paths = np.stack(
            [_roll_diff(per_path, axis=1 + i, s=s, spacing=spacing[i])
             for i in range(n)], axis=-1)
        jerr = jac_paths.std(axis=0, ddof=1) / math.sqrt(P) if P > 1 \
            else np.zeros_like(j1)

    return CorrectorField(
        torus=field.torus, shape=shape, values=field.values,
        stderr=field.stderr, truncation_T=field.truncation_T,
        n_paths=field.n_paths, path_integrals=field.path_integrals,
        jacobian=j1, jacobian_stderr=jerr,
        richardson_ratio=ratio, stencil_step=s * min(spacing))


def poisson_residual(cset: CoefficientSet, field: CorrectorField,
                     target: Callable, pi_target, probe_times,
                     config: SimConfig, probe_nodes=None,
                     threads: int = 1) -> dict:
    """Check (P_t beta - beta) / t ~ target - pi(target) at small t.

    Returns per-time sup residual together with the Monte Carlo noise floor;
    the deterministic part of the residual shrinks linearly in t.
    """
    if probe_nodes is None:
        probe_nodes = grid_points(cset.torus, tuple(max(g // 4, 2)
                                                    for g in field.shape))
    probe_nodes = np.atleast_2d(np.asarray(probe_nodes, float))
    pi_t = np.atleast_1d(np.asarray(pi_target, float))
    rhs = _as_components(target(probe_nodes)) - pi_t
    beta0 = field(probe_nodes)
    out = {}
    for t in probe_times:
        K = max(1, int(round(t / config.step)))
        h = t / K
        G = probe_nodes.shape[0]
        m = cset.noise_dim

        def run_block(block, K=K, h=h):
            b, sl = block
            gen = rng.block_generator(rng.stage_seed(config.seed, f"res-{t}"), b)
            Pb = sl.stop - sl.start
            x = np.broadcast_to(probe_nodes, (Pb, G, cset.dim)).copy()
            for _ in range(K):
                xw = wrap(x.reshape(-1, cset.dim), cset.torus)
                drift = cset.drift_b(xw).reshape(Pb, G, cset.dim)
                sig = cset.sigma(xw).reshape(Pb, G, cset.dim, m)
                xi = gen.standard_normal((Pb, 1, m))
                x += drift * h + np.einsum("pgij,pqj->pgi", sig, xi) * math.sqrt(h)
            return field(wrap(x.reshape(-1, cset.dim), cset.torus)) \
                .reshape(Pb, G, -1)

        parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
        vals = np.concatenate(parts, axis=0)          # (P, G, k)
        pt_beta = vals.mean(axis=0)
        noise = vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])
        resid = (pt_beta - beta0) / t - rhs
        out[float(t)] = {
            "sup_residual": float(np.max(np.abs(resid))),
            "noise_floor": float(np.max(noise) / t),
        }
    return out
