"""Effective (homogenized) coefficients from corrector fields or long-time
covariance growth, with cross-checks between the two routes."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Optional

import numpy as np

from .corrector import CorrectorField, differentiate
from .engine import SimConfig, simulate_scaled
from .ergodic import InvariantMeasureEstimate, default_starts
from .fields import CoefficientSet
from .interp import periodic_interp


@dataclass
class EffectiveModel:
    cov_a: np.ndarray                  # (n, n) effective diffusion matrix
    cov_a_stderr: np.ndarray
    drift_b: np.ndarray                # (n,) effective drift (eps*c route)
    drift_b_stderr: np.ndarray
    parabolic_drift: Optional[np.ndarray] = None   # includes the grad-delta term
    parabolic_drift_stderr: Optional[np.ndarray] = None
    effective_potential: Optional[float] = None
    effective_potential_stderr: Optional[float] = None
    min_eigenvalue: float = 0.0
    psd_repaired: bool = False
    provenance: str = ""

    def chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov_a)


def _repair_psd(mat: np.ndarray):
    """Symmetrize and clip tiny negative eigenvalues; large ones are an error."""
    sym = 0.5 * (mat + mat.T)
    w, v = np.linalg.eigh(sym)
    if w.min() < -1e-8:
        raise ValueError(
            f"effective diffusion matrix not PSD (min eig {w.min():.3g})")
    repaired = bool(w.min() < 0)
    if repaired:
        sym = (v * np.maximum(w, 0.0)) @ v.T
        sym = 0.5 * (sym + sym.T)
    return sym, float(w.min()), repaired


def _quadrature(n, w, a, c, e_vals, db, gd):
    """Raw pi-quadrature of the effective integrands for one jacobian sample.

    db is (N, n, n); gd is (N, n) or None.  Returns a dict of plain arrays.
    """
    M = np.eye(n) - db
    cov = np.einsum("n,nij,njk,nlk->il", w, M, a, M)
    drift = np.einsum("n,nij,nj->i", w, M, c)
    out = {"cov": cov, "drift": drift}
    if gd is not None:
        out["corr"] = np.einsum("n,nij,njk,nk->i", w, M, a, gd)
        out["pot"] = float(
            np.einsum("n,ni,nij,nj->", w, gd, a, gd) / 2.0
            - np.einsum("n,ni,ni->", w, gd, c)
            + (np.dot(w, e_vals) if e_vals is not None else 0.0))
    return out


def _group_jacobians(field: CorrectorField, n_groups: int, pts):
    """Jacobian-at-pts for path-group subestimates, plus the full-sample one.

    Requires the per-path integrals kept by solve_corrector; group g uses a
    contiguous slice of paths so common-random-number structure is preserved.
    """
    if field.jacobian is None:
        raise ValueError("corrector needs differentiate() applied first")
    full = periodic_interp(field.jacobian, field.torus, pts)
    if field.path_integrals is None or n_groups < 2:
        return full, None
    P = field.path_integrals.shape[0]
    n_groups = min(n_groups, P)
    bounds = np.linspace(0, P, n_groups + 1).astype(int)
    groups = []
    for g in range(n_groups):
        sub = field.path_integrals[bounds[g]:bounds[g + 1]]
        vals = (-sub.mean(axis=0)).reshape(field.values.shape)
        sub_field = CorrectorField(
            torus=field.torus, shape=field.shape, values=vals,
            stderr=np.zeros_like(vals), truncation_T=field.truncation_T,
            n_paths=sub.shape[0])
        jac = differentiate(sub_field).jacobian
        groups.append(periodic_interp(jac, field.torus, pts))
    return full, groups


def effective_from_corrector(cset: CoefficientSet, beta: CorrectorField,
                             pi: InvariantMeasureEstimate,
                             delta: Optional[CorrectorField] = None,
                             e_field: Optional[Callable] = None,
                             n_groups: int = 16) -> EffectiveModel:
    """Quadrature of the corrector-route integrands against the measure.

    cov = pi[(I - Dbeta) a (I - Dbeta)^T], drift = pi[(I - Dbeta) c]; when a
    scalar corrector `delta` is supplied, the parabolic drift subtracts
    pi[(I - Dbeta) a grad(delta)] and the effective potential
    pi[ grad(delta)^T a grad(delta) / 2 + e - grad(delta)^T c ] is filled in.

    Monte Carlo noise enters the quadratic integrands as an O(1/paths) bias;
    it is removed by Richardson extrapolation between the full-sample
    estimate and the mean over path-group subestimates, whose spread also
    gives the stderr.  This needs no independence assumptions and respects
    the common-random-number correlations across grid nodes.
    """
    n = cset.dim
    pts = pi.bin_centers()
    w = pi.mass.ravel()
    a = cset.a(pts)
    c = cset.drift_c(pts)
    e_vals = np.asarray(e_field(pts), float) if e_field is not None else None

    db_full, db_groups = _group_jacobians(beta, n_groups, pts)
    if delta is not None:
        gd_full, gd_groups = _group_jacobians(delta, n_groups, pts)
        gd_full = gd_full[:, 0, :]
        gd_groups = [g[:, 0, :] for g in gd_groups] if gd_groups else None
    else:
        gd_full, gd_groups = None, None

    full = _quadrature(n, w, a, c, e_vals, db_full, gd_full)
    if db_groups is not None:
        B = len(db_groups)
        groups = [_quadrature(n, w, a, c, e_vals, db_groups[g],
                              gd_groups[g] if gd_groups else None)
                  for g in range(B)]
        est, err = {}, {}
        for key in full:
            gv = np.array([gr[key] for gr in groups])
            gm = gv.mean(axis=0)
            # bias is ~1/P: group estimates carry B times the full-sample bias
            est[key] = (B * full[key] - gm) / (B - 1)
            err[key] = gv.std(axis=0, ddof=1) / math.sqrt(B)
    else:
        est = full
        err = {key: np.zeros_like(np.asarray(v, float)) for key, v in full.items()}

    cov_sym, min_eig, repaired = _repair_psd(est["cov"])
    model = EffectiveModel(
        cov_a=cov_sym, cov_a_stderr=np.asarray(err["cov"]),
        drift_b=est["drift"], drift_b_stderr=np.asarray(err["drift"]),
        min_eigenvalue=min_eig, psd_repaired=repaired,
        provenance="corrector")
    if delta is not None:
        model = dc_replace(
            model,
            parabolic_drift=est["drift"] - est["corr"],
            parabolic_drift_stderr=np.sqrt(
                np.asarray(err["drift"]) ** 2 + np.asarray(err["corr"]) ** 2),
            effective_potential=float(est["pot"]),
            effective_potential_stderr=float(err["pot"]))
    return model


def effective_from_longtime(cset: CoefficientSet, config: SimConfig,
                            t_grid, pi0_b=None, starts=None,
                            threads: int = 1) -> EffectiveModel:
    """Slope of the displacement covariance: cov(X_t - X_0 - pi(b) t) ~ a_eff t.

    Pools path increments between consecutive times of t_grid, skipping the
    first interval as burn-in; beyond the mixing time the increments are
    independent, so the pooled covariance has an honest stderr.  Starts
    default to independent uniform draws (one path each).
    """
    n = cset.dim
    if pi0_b is None:
        pi0_b = np.zeros(n)
    pi0_b = np.asarray(pi0_b, float)
    t_grid = np.sort(np.asarray(t_grid, float))
    if len(t_grid) < 3:
        raise ValueError("need at least three checkpoint times")
    cfg = dc_replace(config, horizon=float(t_grid[-1]))
    if starts is None:
        starts = default_starts(cset, config.n_paths, config.seed)
        cfg = dc_replace(cfg, n_paths=1)
    stride = max(1, int(round(float(t_grid[1] - t_grid[0]) / config.step)))
    cfg = dc_replace(cfg, store_stride=stride)
    batch = simulate_scaled(cset, cfg, starts, threads=threads)
    P = batch.states.shape[0]

    idx = sorted({int(np.argmin(np.abs(batch.times - t))) for t in t_grid})
    incs = []
    for j0, j1 in zip(idx[1:-1], idx[2:]):           # first interval = burn-in
        dt = batch.times[j1] - batch.times[j0]
        d = (batch.states[:, j1] - batch.states[:, j0] - pi0_b * dt) \
            / math.sqrt(dt)
        incs.append(d - d.mean(axis=0))
    pooled = np.concatenate(incs, axis=0)            # (P * K, n)
    N = pooled.shape[0]
    cov = pooled.T @ pooled / (N - len(incs))
    cov_err = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov ** 2)
                      / (N - len(incs)))
    cov_sym, min_eig, repaired = _repair_psd(cov)
    return EffectiveModel(
        cov_a=cov_sym, cov_a_stderr=cov_err,
        drift_b=pi0_b.copy(), drift_b_stderr=np.zeros(n),
        min_eigenvalue=min_eig, psd_repaired=repaired,
        provenance="longtime")


def cross_check(model_a: EffectiveModel, model_b: EffectiveModel,
                tol_sigmas: float = 3.0) -> dict:
    """Entrywise z-scores between two effective-diffusion estimates."""
    diff = model_a.cov_a - model_b.cov_a
    sig = np.sqrt(model_a.cov_a_stderr ** 2 + model_b.cov_a_stderr ** 2)
    z = diff / np.maximum(sig, 1e-300)
    return {
        "z": z,
        "max_abs_z": float(np.max(np.abs(z))),
        "passed": bool(np.max(np.abs(z)) <= tol_sigmas),
    }


def flux_identity_gap(cset: CoefficientSet, beta: CorrectorField,
                      pi: InvariantMeasureEstimate,
                      cov_a: np.ndarray) -> float:
    """Consistency identity of the centered cell problem:
    cov_a - pi(a) should equal pi( Dbeta a Dbeta^T - Dbeta a - a Dbeta^T );
    returns the max-abs entrywise gap."""
    pts = pi.bin_centers()
    w = pi.mass.ravel()
    a = cset.a(pts)
    db = beta.jacobian_at(pts)
    lhs = cov_a - np.einsum("n,nij->ij", w, a)
    cross = np.einsum("n,nik,nkj->ij", w, db, a)
    rhs = np.einsum("n,nik,nkl,njl->ij", w, db, a, db) - cross - cross.T
    return float(np.max(np.abs(lhs - rhs)))
