"""Monte Carlo Feynman-Kac solvers for the original-scale process and its
homogenized limit.

The multiscale solvers simulate in the scaled frame (step sizes stay O(1))
and map states back with the exact rescaling identity; killing exponents are
accumulated in scaled time, where the singular eps^{-1} potential term turns
into a bounded eps * d term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import rng
from .corrector import CorrectorField
from .effective import EffectiveModel
from .fields import CoefficientSet
from .torus import wrap


@dataclass(frozen=True)
class DomainSpec:
    """Bounded domain given by a signed distance (negative inside)."""
    dist: Callable
    grad: Optional[Callable] = None     # unit outward normal of the distance
    name: str = "domain"

    def contains(self, pts) -> np.ndarray:
        return np.asarray(self.dist(np.atleast_2d(pts))) < 0.0

    def normal(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.grad is not None:
            return np.asarray(self.grad(pts), float)
        out = np.empty_like(pts)
        for i in range(pts.shape[1]):
            e = np.zeros(pts.shape[1])
            e[i] = 1e-6
            out[:, i] = (self.dist(pts + e) - self.dist(pts - e)) / 2e-6
        nrm = np.linalg.norm(out, axis=1, keepdims=True)
        return out / np.maximum(nrm, 1e-300)


def ball_domain(center, radius: float) -> DomainSpec:
    center = np.asarray(center, float)

    def dist(pts):
        return np.linalg.norm(np.atleast_2d(pts) - center, axis=1) - radius

    def grad(pts):
        d = np.atleast_2d(pts) - center
        return d / np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)

    return DomainSpec(dist=dist, grad=grad, name=f"ball(r={radius})")


def box_domain(lo, hi) -> DomainSpec:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)

    def dist(pts):
        p = np.atleast_2d(pts)
        return np.maximum(lo - p, p - hi).max(axis=1)

    return DomainSpec(dist=dist, name="box")


@dataclass
class FeynmanKacEstimate:
    value: float
    stderr: float
    n_paths: int
    exited_fraction: float = 1.0
    mean_exit_time: float = math.nan
    truncation_bias_bound: float = 0.0
    exponent_std: float = 0.0


def _sup_on_probes(fn, pts):
    return float(np.max(np.abs(np.asarray(fn(pts))))) if fn is not None else 0.0


def solve_elliptic(cset: CoefficientSet, epsilon: float, domain: DomainSpec,
                   f: Callable, g: Callable, x0, config, t_max: float = None,
                   e_field: Callable = None, threads: int = 1
                   ) -> FeynmanKacEstimate:
    """Killed exit-problem representation
    u(x) = E[ int_0^tau f(X_t) e^{zeta_t} dt + g(X_tau) e^{zeta_tau} ]
    with zeta_t = int_0^t e(X_s / eps) ds, requiring sup e = -alpha < 0.

    Paths still inside the domain at t_max are censored; the reported bias
    bound e^{-alpha t_max} (sup|g| + sup|f| / alpha) covers their
    contribution.  Exit is detected stepwise (O(sqrt(step)) boundary bias).
    """
    x0 = np.asarray(x0, float)
    if not bool(domain.contains(x0[None])[0]):
        raise ValueError("x0 must lie inside the domain")
    if e_field is None:
        e_field = cset.potential_e
    cell_probe = rng.block_generator(rng.stage_seed(config.seed, "probe"), 0) \
        .random((4096, cset.dim)) * cset.torus.periods
    e_probe = np.asarray(e_field(cell_probe))
    alpha = -float(e_probe.max())
    if alpha <= 0:
        raise ValueError("killing potential must be strictly negative")
    if t_max is None:
        t_max = 20.0 / alpha
    # supremum bounds for the truncation estimate, probed over the domain
    box = x0 + (cell_probe / cset.torus.periods - 0.5) \
        * (2 * np.abs(domain.dist(x0[None])[0]) + 4.0)
    box = box[domain.contains(box)]
    sup_g = _sup_on_probes(g, box) if len(box) else _sup_on_probes(g, x0[None])
    sup_f = _sup_on_probes(f, box) if len(box) else _sup_on_probes(f, x0[None])
    bias = math.exp(-alpha * t_max) * (sup_g + sup_f / alpha)

    h_s = config.step                      # scaled-frame step
    dt = epsilon ** 2 * h_s                # original-frame step
    K = int(math.ceil(t_max / dt))
    m = cset.noise_dim
    start_scaled = x0 / epsilon

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        x = np.tile(start_scaled, (P, 1))
        zeta = np.zeros(P)
        val = np.zeros(P)
        alive = np.ones(P, bool)
        exit_t = np.full(P, math.nan)
        sqrt_h = math.sqrt(h_s)
        for k in range(K):
            xw = wrap(x, cset.torus)
            ev = e_field(xw[alive])
            # exact step integral of f e^{zeta} for frozen f, e: this makes
            # the (e=-1, f=1, g=1) telescoping identity hold pathwise
            val[alive] += f(epsilon * x[alive]) * np.exp(zeta[alive]) \
                * np.where(np.abs(ev) > 1e-14, np.expm1(ev * dt) / np.where(
                    np.abs(ev) > 1e-14, ev, 1.0), dt)
            zeta[alive] += ev * dt
            drift = cset.drift_b(xw)
            if epsilon != 0.0:
                drift = drift + epsilon * cset.drift_c(xw)
            sig = cset.sigma(xw)
            xi = gen.standard_normal((P, m))
            x += np.where(alive[:, None],
                          drift * h_s
                          + np.einsum("pij,pj->pi", sig, xi) * sqrt_h, 0.0)
            crossed = alive & ~np.asarray(domain.contains(epsilon * x))
            if crossed.any():
                val[crossed] += g(epsilon * x[crossed]) * np.exp(zeta[crossed])
                exit_t[crossed] = (k + 1) * dt
                alive[crossed] = False
            if not alive.any():
                break
        return val, alive, exit_t

    parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
    val = np.concatenate([p[0] for p in parts])
    censored = np.concatenate([p[1] for p in parts])
    exit_t = np.concatenate([p[2] for p in parts])
    P = len(val)
    return FeynmanKacEstimate(
        value=float(val.mean()),
        stderr=float(val.std(ddof=1)) / math.sqrt(P) if P > 1 else 0.0,
        n_paths=P,
        exited_fraction=float(1.0 - censored.mean()),
        mean_exit_time=float(np.nanmean(exit_t)) if np.isfinite(exit_t).any()
        else math.nan,
        truncation_bias_bound=bias)


def solve_elliptic_extrapolated(cset: CoefficientSet, epsilon: float,
                                domain: DomainSpec, f: Callable, g: Callable,
                                x0, config, t_max: float = None,
                                e_field: Callable = None,
                                threads: int = 1) -> FeynmanKacEstimate:
    """Step-halving extrapolation of the exit problem with coupled noise.

    Runs a coarse path at config.step and a fine path at config.step / 2
    driven by the same Brownian increments, then extrapolates the O(sqrt(h))
    stepwise-exit bias per path pair: u = (sqrt2 * u_fine - u_coarse) /
    (sqrt2 - 1).  The coupling keeps the pair difference small, so the
    extrapolation does not blow up the statistical error.
    """
    x0 = np.asarray(x0, float)
    if not bool(domain.contains(x0[None])[0]):
        raise ValueError("x0 must lie inside the domain")
    if e_field is None:
        e_field = cset.potential_e
    probe = rng.block_generator(rng.stage_seed(config.seed, "probe"), 0) \
        .random((4096, cset.dim)) * cset.torus.periods
    alpha = -float(np.asarray(e_field(probe)).max())
    if alpha <= 0:
        raise ValueError("killing potential must be strictly negative")
    if t_max is None:
        t_max = 20.0 / alpha

    h_c = config.step
    h_f = 0.5 * h_c
    dt_c = epsilon ** 2 * h_c
    dt_f = epsilon ** 2 * h_f
    K = int(math.ceil(t_max / dt_c))
    m = cset.noise_dim
    start_scaled = x0 / epsilon

    def advance(x, zeta, val, alive, xi, h_s, dt, sqrt_h):
        xw = wrap(x, cset.torus)
        ev = e_field(xw)
        val[alive] += f(epsilon * x[alive]) * np.exp(zeta[alive]) \
            * np.where(np.abs(ev[alive]) > 1e-14,
                       np.expm1(ev[alive] * dt)
                       / np.where(np.abs(ev[alive]) > 1e-14, ev[alive], 1.0),
                       dt)
        zeta[alive] += ev[alive] * dt
        drift = cset.drift_b(xw)
        if epsilon != 0.0:
            drift = drift + epsilon * cset.drift_c(xw)
        sig = cset.sigma(xw)
        x += np.where(alive[:, None],
                      drift * h_s + np.einsum("pij,pj->pi", sig, xi) * sqrt_h,
                      0.0)
        crossed = alive & ~np.asarray(domain.contains(epsilon * x))
        if crossed.any():
            val[crossed] += g(epsilon * x[crossed]) * np.exp(zeta[crossed])
            alive[crossed] = False

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        xc = np.tile(start_scaled, (P, 1))
        xf = xc.copy()
        zc, zf = np.zeros(P), np.zeros(P)
        vc, vf = np.zeros(P), np.zeros(P)
        ac, af = np.ones(P, bool), np.ones(P, bool)
        for k in range(K):
            xi1 = gen.standard_normal((P, m))
            xi2 = gen.standard_normal((P, m))
            advance(xf, zf, vf, af, xi1, h_f, dt_f, math.sqrt(h_f))
            advance(xf, zf, vf, af, xi2, h_f, dt_f, math.sqrt(h_f))
            advance(xc, zc, vc, ac, (xi1 + xi2) / math.sqrt(2.0),
                    h_c, dt_c, math.sqrt(h_c))
            if not (ac.any() or af.any()):
                break
        return vc, vf, ac | af

    parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
    vc = np.concatenate([p[0] for p in parts])
    vf = np.concatenate([p[1] for p in parts])
    censored = np.concatenate([p[2] for p in parts])
    r = math.sqrt(2.0)
    per_path = (r * vf - vc) / (r - 1.0)
    P = len(per_path)
    return FeynmanKacEstimate(
        value=float(per_path.mean()),
        stderr=float(per_path.std(ddof=1)) / math.sqrt(P) if P > 1 else 0.0,
        n_paths=P,
        exited_fraction=float(1.0 - censored.mean()),
        truncation_bias_bound=math.exp(-alpha * t_max))


def solve_elliptic_homogenized(model: EffectiveModel, domain: DomainSpec,
                               f: Callable, g: Callable, x0, config,
                               pi_e: float, t_max: float = None,
                               threads: int = 1) -> FeynmanKacEstimate:
    """Same exit problem for the constant-coefficient effective diffusion
    with constant killing rate pi_e < 0."""
    x0 = np.asarray(x0, float)
    n = len(x0)
    if pi_e >= 0:
        raise ValueError("pi_e must be negative")
    alpha = -pi_e
    if t_max is None:
        t_max = 20.0 / alpha
    h = config.step
    K = int(math.ceil(t_max / h))
    L = model.chol()
    bvec = model.drift_b

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        x = np.tile(x0, (P, 1))
        val = np.zeros(P)
        alive = np.ones(P, bool)
        exit_t = np.full(P, math.nan)
        step_int = math.expm1(pi_e * h) / pi_e
        for k in range(K):
            t = k * h
            val[alive] += f(x[alive]) * math.exp(pi_e * t) * step_int
            xi = gen.standard_normal((P, n))
            x += np.where(alive[:, None], bvec * h + math.sqrt(h) * xi @ L.T, 0.0)
            crossed = alive & ~np.asarray(domain.contains(x))
            if crossed.any():
                val[crossed] += g(x[crossed]) * math.exp(pi_e * (k + 1) * h)
                exit_t[crossed] = (k + 1) * h
                alive[crossed] = False
            if not alive.any():
                break
        return val, alive, exit_t

    parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
    val = np.concatenate([p[0] for p in parts])
    censored = np.concatenate([p[1] for p in parts])
    exit_t = np.concatenate([p[2] for p in parts])
    P = len(val)
    return FeynmanKacEstimate(
        value=float(val.mean()),
        stderr=float(val.std(ddof=1)) / math.sqrt(P) if P > 1 else 0.0,
        n_paths=P,
        exited_fraction=float(1.0 - censored.mean()),
        mean_exit_time=float(np.nanmean(exit_t)) if np.isfinite(exit_t).any()
        else math.nan,
        truncation_bias_bound=0.0)


def solve_parabolic(cset: CoefficientSet, epsilon: float, f: Callable,
                    g: Callable, x0, t: float, config,
                    d_field: Callable = None, e_field: Callable = None,
                    delta_cv: Optional[CorrectorField] = None,
                    threads: int = 1) -> FeynmanKacEstimate:
    """Finite-horizon representation with a fast-oscillating killing term:
    u(t, x) = E[ g(X_t) e^{zeta_t} + int_0^t f(X_s) e^{zeta_s} ds ],
    zeta accumulating eps^{-1} d + e along the path.  In scaled time the
    exponent increment per step is (eps * d + eps^2 * e) * step, which stays
    bounded as eps -> 0.

    With delta_cv, the d part of the exponent is rewritten through the
    corrector's Ito identity (boundary terms plus an explicit stochastic
    integral), trading the ergodic-average fluctuation for the martingale
    one; both forms agree up to discretization error.
    """
    x0 = np.asarray(x0, float)
    if d_field is None:
        d_field = cset.potential_d
    if e_field is None:
        e_field = cset.potential_e
    h_s = config.step
    T_s = t / epsilon ** 2
    K = max(1, int(round(T_s / h_s)))
    h_s = T_s / K
    dt = epsilon ** 2 * h_s
    m = cset.noise_dim
    start_scaled = x0 / epsilon
    use_cv = delta_cv is not None
    if use_cv and delta_cv.jacobian is None:
        raise ValueError("delta_cv needs differentiate() applied first")

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        x = np.tile(start_scaled, (P, 1))
        zeta = np.zeros(P)
        run = np.zeros(P)
        sqrt_h = math.sqrt(h_s)
        if use_cv:
            delta0 = delta_cv(wrap(x, cset.torus))[:, 0]
        for k in range(K):
            xw = wrap(x, cset.torus)
            run += f(epsilon * x) * np.exp(zeta) * dt
            inc = epsilon ** 2 * e_field(xw) * h_s
            if not use_cv:
                inc = inc + epsilon * d_field(xw) * h_s
            drift = cset.drift_b(xw)
            if epsilon != 0.0:
                drift = drift + epsilon * cset.drift_c(xw)
            sig = cset.sigma(xw)
            xi = gen.standard_normal((P, m))
            if use_cv:
                gd = delta_cv.jacobian_at(xw)[:, 0, :]
                inc = inc - epsilon * np.einsum(
                    "pi,pij,pj->p", gd, sig, xi) * sqrt_h
                inc = inc - epsilon ** 2 * np.einsum(
                    "pi,pi->p", gd, cset.drift_c(xw)) * h_s
            zeta += inc
            x += drift * h_s + np.einsum("pij,pj->pi", sig, xi) * sqrt_h
        if use_cv:
            zeta += epsilon * (delta_cv(wrap(x, cset.torus))[:, 0] - delta0)
        return g(epsilon * x) * np.exp(zeta) + run, zeta

    parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
    val = np.concatenate([p[0] for p in parts])
    zeta = np.concatenate([p[1] for p in parts])
    z_std = float(zeta.std(ddof=1)) if len(zeta) > 1 else 0.0
    if z_std > 2.0:
        warnings.warn(
            f"killing-exponent std {z_std:.2f}: the exponential weights are "
            "degenerate and the estimate may be unreliable", RuntimeWarning)
    P = len(val)
    return FeynmanKacEstimate(
        value=float(val.mean()),
        stderr=float(val.std(ddof=1)) / math.sqrt(P) if P > 1 else 0.0,
        n_paths=P, exponent_std=z_std)


def solve_parabolic_homogenized(model: EffectiveModel, f: Callable,
                                g: Callable, x0, t: float, config,
                                potential: float = 0.0,
                                threads: int = 1) -> FeynmanKacEstimate:
    """Finite-horizon functional of the effective Gaussian diffusion with the
    constant effective potential in the exponent."""
    x0 = np.asarray(x0, float)
    n = len(x0)
    h = config.step
    K = max(1, int(round(t / h)))
    h = t / K
    L = model.chol()
    bvec = model.parabolic_drift if model.parabolic_drift is not None \
        else model.drift_b

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        x = np.tile(x0, (P, 1))
        run = np.zeros(P)
        for k in range(K):
            run += f(x) * math.exp(potential * k * h) * h
            xi = gen.standard_normal((P, n))
            x += bvec * h + math.sqrt(h) * xi @ L.T
        return g(x) * math.exp(potential * t) + run

    parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
    val = np.concatenate(parts)
    P = len(val)
    return FeynmanKacEstimate(
        value=float(val.mean()),
        stderr=float(val.std(ddof=1)) / math.sqrt(P) if P > 1 else 0.0,
        n_paths=P)


def step_extrapolate(value_h: FeynmanKacEstimate,
                     value_h2: FeynmanKacEstimate,
                     order: float = 0.5) -> FeynmanKacEstimate:
    """Richardson extrapolation of two estimates at steps h and h/2 with a
    leading error of the given order (0.5 for stepwise exit detection)."""
    r = 2.0 ** order
    value = (r * value_h2.value - value_h.value) / (r - 1.0)
    stderr = math.sqrt((r * value_h2.stderr) ** 2 + value_h.stderr ** 2) \
        / (r - 1.0)
    return FeynmanKacEstimate(
        value=value, stderr=stderr,
        n_paths=value_h.n_paths + value_h2.n_paths,
        exited_fraction=min(value_h.exited_fraction, value_h2.exited_fraction),
        mean_exit_time=value_h2.mean_exit_time,
        truncation_bias_bound=max(value_h.truncation_bias_bound,
                                  value_h2.truncation_bias_bound))


def boundary_nondegeneracy(model: EffectiveModel, domain: DomainSpec,
                           boundary_pts, normal_fn: Callable) -> float:
    """min over boundary probes of n^T a_eff n; must be positive for the
    exit problem to be well posed."""
    pts = np.atleast_2d(np.asarray(boundary_pts, float))
    nrm = np.asarray(normal_fn(pts), float)
    return float(np.min(np.einsum("pi,ij,pj->p", nrm, model.cov_a, nrm)))


def study_csv(rows: list, path):
    """CSV `epsilon,x...,u_eps,stderr_eps,u0,stderr_0,gap,z`; one row per
    (epsilon, point)."""
    import csv as _csv
    if not rows:
        raise ValueError("empty study table")
    n = len(rows[0]["x"])
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["epsilon"] + [f"x_{i + 1}" for i in range(n)]
                   + ["u_eps", "stderr_eps", "u0", "stderr_0", "gap", "z"])
        for r in rows:
            gap = abs(r["u_eps"] - r["u0"])
            sig = math.sqrt(r["stderr_eps"] ** 2 + r["stderr_0"] ** 2)
            w.writerow([repr(float(r["epsilon"]))]
                       + [repr(float(v)) for v in r["x"]]
                       + [repr(float(r["u_eps"])), repr(float(r["stderr_eps"])),
                          repr(float(r["u0"])), repr(float(r["stderr_0"])),
                          repr(gap), repr(gap / sig if sig > 0 else math.inf)])


def epsilon_convergence_table(solver: Callable, epsilons, limit_value: float,
                              limit_stderr: float = 0.0) -> dict:
    """Run `solver(eps)` per epsilon and tabulate gaps to the limit value.

    Returns rows eps -> (value, stderr, gap, gap_sigma) plus a verdict that
    the smallest-eps gap is within 3 combined sigma or smaller than every
    larger-eps gap."""
    rows = {}
    for eps in sorted(epsilons, reverse=True):
        est = solver(eps)
        gap = abs(est.value - limit_value)
        sig = math.sqrt(est.stderr ** 2 + limit_stderr ** 2)
        rows[eps] = {"value": est.value, "stderr": est.stderr,
                     "gap": gap, "gap_sigma": gap / sig if sig > 0 else math.inf}
    gaps = [rows[e]["gap"] for e in sorted(rows, reverse=True)]
    ok = rows[min(rows)]["gap_sigma"] <= 3.0 \
        or gaps[-1] < min(gaps[:-1] + [math.inf])
    return {"rows": rows, "converged": bool(ok)}
