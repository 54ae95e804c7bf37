"""Functional-CLT checks for the rescaled process against an effective model.

All simulation runs in the scaled frame and is mapped to the original frame
by the exact rescaling identity, so epsilon only changes the horizon and the
strength of the slow drift term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import rng
from .corrector import CorrectorField
from .effective import EffectiveModel
from .engine import SimConfig, em_stream, simulate_original, tile_starts
from .ergodic import default_starts, _weighted_linfit
from .fields import CoefficientSet
from .torus import wrap


@dataclass
class CltReport:
    epsilon: float
    times: np.ndarray
    mean: np.ndarray                 # (K, n) empirical mean of the rescaled law
    cov: np.ndarray                  # (K, n, n)
    cov_model: np.ndarray            # (K, n, n) a_eff * t
    linearity_r2: float              # fit of tr cov against t
    ks_pvalues: np.ndarray           # per coordinate, terminal marginals
    increment_corr: float            # max abs lag-1 correlation of increments
    n_paths: int

    @property
    def normality_ok(self) -> bool:
        return bool(np.all(self.ks_pvalues > 0.01))


def verify_clt(cset: CoefficientSet, model: EffectiveModel, epsilon: float,
               times, config: SimConfig, start=None, pi0_b=None,
               threads: int = 1) -> CltReport:
    """Compare the law of X_orig(t) - x - drift*t with N(0, a_eff t).

    `times` are original-frame times.  The KS normality test whitens the
    terminal displacements with their empirical mean and covariance, so it
    probes the Gaussian *shape* only; the covariance scale is judged by the
    linearity fit and by comparison with `model` (the displacement keeps an
    O(epsilon) location/scale offset from a non-stationary start that would
    otherwise dominate the test at large path counts).
    """
    n = cset.dim
    times = np.sort(np.asarray(times, float))
    if start is None:
        start = np.zeros(n)
    if pi0_b is None:
        pi0_b = np.zeros(n)
    pi0_b = np.asarray(pi0_b, float)
    scaled_step_per_store = max(
        1, int(round(float(times[0]) / epsilon ** 2 / config.step)))
    cfg = dc_replace(config, horizon=float(times[-1]),
                     store_stride=scaled_step_per_store)
    batch = simulate_original(cset, epsilon, cfg, np.atleast_2d(start),
                              threads=threads)
    idx = [int(np.argmin(np.abs(batch.times - t))) for t in times]
    t_used = batch.times[idx]
    disp = batch.states[:, idx] - batch.starts[:, None, :] \
        - pi0_b[None, None, :] * t_used[None, :, None]
    P = disp.shape[0]
    mean = disp.mean(axis=0)
    centered = disp - mean[None]
    cov = np.einsum("pki,pkj->kij", centered, centered) / (P - 1)
    cov_model = model.cov_a[None] * t_used[:, None, None]

    tr = np.einsum("kii->k", cov)
    _, r2 = _weighted_linfit(t_used, tr, np.ones_like(t_used))
    # r2 from linear fit through the origin is more honest here:
    slope = float(np.dot(t_used, tr) / np.dot(t_used, t_used))
    resid = tr - slope * t_used
    r2 = 1.0 - float(np.sum(resid ** 2) / max(np.sum((tr - tr.mean()) ** 2),
                                              1e-300))

    L = np.linalg.cholesky(cov[-1])
    white = np.linalg.solve(L, centered[:, -1].T).T
    ks = np.array([stats.kstest(white[:, i], "norm").pvalue for i in range(n)])

    inc = np.diff(disp, axis=1)                      # (P, K-1, n)
    max_corr = 0.0
    if inc.shape[1] >= 2:
        for i in range(n):
            a_, b_ = inc[:, :-1, i].ravel(), inc[:, 1:, i].ravel()
            r = np.corrcoef(a_, b_)[0, 1]
            max_corr = max(max_corr, abs(float(r)))
    return CltReport(epsilon=epsilon, times=t_used, mean=mean, cov=cov,
                     cov_model=cov_model, linearity_r2=r2, ks_pvalues=ks,
                     increment_corr=max_corr, n_paths=P)


def clt_csv(report: CltReport, path):
    """CSV `epsilon,t,i,j,emp_cov,stderr,target` over stored times and
    covariance entries."""
    import csv as _csv
    n = report.cov.shape[1]
    P = report.n_paths
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["epsilon", "t", "i", "j", "emp_cov", "stderr", "target"])
        for k, t in enumerate(report.times):
            c = report.cov[k]
            for i in range(n):
                for j in range(n):
                    se = math.sqrt((c[i, i] * c[j, j] + c[i, j] ** 2)
                                   / max(P - 1, 1))
                    w.writerow([repr(float(report.epsilon)), repr(float(t)),
                                i + 1, j + 1, repr(float(c[i, j])),
                                repr(float(se)),
                                repr(float(report.cov_model[k, i, j]))])


def clt_json(report: CltReport, path):
    import json
    with open(path, "w") as fh:
        json.dump({
            "epsilon": report.epsilon,
            "linearity_r2": report.linearity_r2,
            "ks_pvalues": report.ks_pvalues.tolist(),
            "increment_corr": report.increment_corr,
            "n_paths": report.n_paths,
            "normality_ok": report.normality_ok,
        }, fh, indent=2)


def quadratic_variation_check(cset: CoefficientSet, beta: CorrectorField,
                              model: EffectiveModel, config: SimConfig,
                              tol_sigmas: float = 3.0,
                              threads: int = 1) -> dict:
    """Time-average of the corrected quadratic-variation integrand
    (I - Dbeta) a (I - Dbeta)^T along paths vs the model matrix."""
    if beta.jacobian is None:
        raise ValueError("beta needs differentiate() applied first")
    n = cset.dim
    starts = default_starts(cset, config.n_paths, config.seed)
    cfg = dc_replace(config, n_paths=1)
    I = np.eye(n)

    def run_block(block):
        b, sl = block
        gen = rng.block_generator(config.seed, b)
        P = sl.stop - sl.start
        acc = np.zeros((P, n, n))
        for k, x in em_stream(cset, cfg, starts[sl], gen):
            if k == cfg.n_steps:
                break
            xw = wrap(x, cset.torus)
            M = I - beta.jacobian_at(xw)
            acc += np.einsum("pij,pjk,plk->pil", M, cset.a(xw), M)
        return acc * (cfg.step / cfg.horizon)

    parts = rng.map_blocks(run_block, rng.path_blocks(config.n_paths), threads)
    vals = np.concatenate(parts, axis=0)
    est = vals.mean(axis=0)
    err = vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])
    z = (est - model.cov_a) / np.sqrt(err ** 2 + model.cov_a_stderr ** 2 + 1e-300)
    return {"estimate": est, "stderr": err, "z": z,
            "max_abs_z": float(np.max(np.abs(z))),
            "passed": bool(np.max(np.abs(z)) <= tol_sigmas)}


def semigroup_convergence(cset: CoefficientSet, model: EffectiveModel,
                          f: Callable, t_grid, epsilons, probes,
                          config: SimConfig, pi0_b=None,
                          threads: int = 1) -> dict:
    """sup over (t, x) of |P^eps_t f(x) - P^0_t f(x)| per epsilon, where the
    eps = 0 reference is the effective Gaussian semigroup."""
    probes = np.atleast_2d(np.asarray(probes, float))
    t_grid = np.sort(np.asarray(t_grid, float))
    n = cset.dim
    if pi0_b is None:
        pi0_b = np.zeros(n)
    L = model.chol()

    def reference(t):
        gen = rng.block_generator(rng.stage_seed(config.seed, "sg-ref"), 0)
        z = gen.standard_normal((config.n_paths, n))
        pts = probes[:, None, :] + np.asarray(pi0_b) * t \
            + math.sqrt(t) * z[None] @ L.T
        return np.asarray(f(pts.reshape(-1, n))).reshape(len(probes), -1).mean(axis=1)

    ref = np.stack([reference(t) for t in t_grid])   # (T, probes)
    gaps = {}
    for eps in sorted(epsilons):
        cfg = dc_replace(config, horizon=float(t_grid[-1]),
                         seed=rng.stage_seed(config.seed, f"sg-{eps}"))
        stride = max(1, int(round(float(t_grid[0]) / eps ** 2 / config.step)))
        cfg = dc_replace(cfg, store_stride=stride)
        batch = simulate_original(cset, eps, cfg, probes, threads=threads)
        idx = [int(np.argmin(np.abs(batch.times - t))) for t in t_grid]
        vals = np.asarray(f(batch.states[:, idx].reshape(-1, n)))
        vals = vals.reshape(len(probes), config.n_paths, len(idx))
        est = vals.mean(axis=1).T                    # (T, probes)
        se = vals.std(axis=1, ddof=1).T / math.sqrt(config.n_paths)
        gaps[eps] = {
            "sup_gap": float(np.max(np.abs(est - ref))),
            "noise_floor": float(np.max(se)),
        }
    return gaps


def weak_error_fit(cset: CoefficientSet, phi: Callable, exact: float,
                   horizon: float, steps, n_paths: int, seed: int,
                   start=None, threads: int = 1) -> dict:
    """Fitted order of |E phi(X_T) - exact| against the step size."""
    if start is None:
        start = np.zeros(cset.dim)
    errs, ses = [], []
    steps = sorted(steps, reverse=True)
    for i, h in enumerate(steps):
        cfg = SimConfig(step=h, horizon=horizon, n_paths=n_paths,
                        seed=rng.stage_seed(seed, f"weak-{i}"),
                        store_stride=10 ** 9)
        from .engine import simulate_scaled
        batch = simulate_scaled(cset, cfg, np.atleast_2d(start), threads=threads)
        vals = np.asarray(phi(batch.states[:, -1]))
        errs.append(abs(float(vals.mean()) - exact))
        ses.append(float(vals.std(ddof=1)) / math.sqrt(len(vals)))
    errs, ses = np.array(errs), np.array(ses)
    usable = errs > 2 * ses
    if usable.sum() >= 3:
        coef, r2 = _weighted_linfit(np.log(np.array(steps)[usable]),
                                    np.log(errs[usable]),
                                    np.ones(int(usable.sum())))
        order, fit_r2 = float(coef[0]), r2
    else:
        order, fit_r2 = math.nan, math.nan
    return {"steps": list(steps), "errors": errs, "stderr": ses,
            "order": order, "r2": fit_r2,
            "resolvable": bool(usable.sum() >= 3)}
