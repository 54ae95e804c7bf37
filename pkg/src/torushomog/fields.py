"""Periodic coefficient fields: catalog, divergence-form drifts, validation.

All field callables are vectorized over a batch of points:

    sigma(x)   : (N, n) -> (N, n, m)
    drift(x)   : (N, n) -> (N, n)
    scalar(x)  : (N, n) -> (N,)

Coefficients are evaluated on wrapped points by the simulation engine, so
closures only need to be correct on the fundamental cell; the catalog fields
wrap internally and are therefore periodic everywhere.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .interp import grid_points, periodic_interp
from .torus import Torus, periodic_distance, wrap


# ---------------------------------------------------------------------------
# regions on the torus

@dataclass(frozen=True)
class Ball:
    """Open ball around a point, with periodic distance."""

    center: tuple
    radius: float

    def contains(self, pts, torus: Torus) -> np.ndarray:
        c = np.asarray(self.center, float)
        return periodic_distance(np.atleast_2d(pts), c, torus) < self.radius


@dataclass(frozen=True)
class WholeCell:
    def contains(self, pts, torus: Torus) -> np.ndarray:
        return np.ones(np.atleast_2d(pts).shape[0], dtype=bool)


@dataclass(frozen=True)
class EmptyRegion:
    def contains(self, pts, torus: Torus) -> np.ndarray:
        return np.zeros(np.atleast_2d(pts).shape[0], dtype=bool)


# ---------------------------------------------------------------------------
# coefficient sets

@dataclass(frozen=True)
class CoefficientSet:
    """The problem data sigma, b, c, d, e on a torus."""

    torus: Torus
    sigma: Callable[[np.ndarray], np.ndarray]
    drift_b: Callable[[np.ndarray], np.ndarray]
    drift_c: Callable[[np.ndarray], np.ndarray]
    potential_d: Callable[[np.ndarray], np.ndarray]
    potential_e: Callable[[np.ndarray], np.ndarray]
    label: str
    noise_dim: int
    # optional analytic Jacobians for the flow equation; finite differences
    # are used when absent
    jac_b: Optional[Callable] = None
    jac_sigma: Optional[Callable] = None

    @property
    def dim(self) -> int:
        return self.torus.dim

    def a(self, pts: np.ndarray) -> np.ndarray:
        """Diffusion matrix a = sigma sigma^T, shape (N, n, n)."""
        s = self.sigma(np.atleast_2d(pts))
        return np.einsum("pij,pkj->pik", s, s)


def zero_vector(dim: int) -> Callable:
    return lambda pts: np.zeros((np.atleast_2d(pts).shape[0], dim))


def zero_scalar() -> Callable:
    return lambda pts: np.zeros(np.atleast_2d(pts).shape[0])


def const_scalar(v: float) -> Callable:
    return lambda pts: np.full(np.atleast_2d(pts).shape[0], float(v))


def const_vector(v) -> Callable:
    v = np.asarray(v, float)
    return lambda pts: np.broadcast_to(v, (np.atleast_2d(pts).shape[0],) + v.shape).copy()


# ---------------------------------------------------------------------------
# catalog

@lru_cache(maxsize=1)
def bump_normalizer() -> float:
    """beta such that int_0^10 btilde = 0 for the degenerate 2d example:
    beta = 10 / int_{-1}^{1} exp(-1/(1-u^2)) du."""
    val, _ = quad(lambda u: math.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0,
                  epsabs=1e-12, epsrel=1e-12)
    return 10.0 / val


def _btilde(u: np.ndarray) -> np.ndarray:
    """Zero-mean periodic profile: 1 off (4,6), smooth negative dip inside."""
    u = np.mod(u, 10.0)
    out = np.ones_like(u)
    s = (u - 5.0) ** 2
    inside = s < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        dip = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - s, 1.0)), 0.0)
    return out - bump_normalizer() * dip


def _paper2d_psi(s: np.ndarray) -> np.ndarray:
    """a = psi(s) I2 with psi = exp(-2/(9-s)) on s < 9, else 0."""
    inside = s < 9.0
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(inside, np.exp(-2.0 / np.where(inside, 9.0 - s, 1.0)), 0.0)


def builtin(label: str, **params) -> CoefficientSet:
    """Assemble a catalog coefficient set.

    Labels: constant_identity, sine_1d, paper_2d_degenerate.
    Custom divergence-form sets are built with divergence_form_drift directly.
    """
    if label == "constant_identity":
        dim = int(params.pop("dim", 2))
        periods = params.pop("periods", (1.0,) * dim)
        scale = float(params.pop("sigma_scale", 1.0))
        e_const = float(params.pop("e_const", 0.0))
        _reject_extra(params)
        torus = Torus(np.asarray(periods, float))
        eye = np.eye(dim) * scale

        def sigma(pts):
            pts = np.atleast_2d(pts)
            return np.broadcast_to(eye, (pts.shape[0], dim, dim)).copy()

        return CoefficientSet(
            torus=torus, sigma=sigma,
            drift_b=zero_vector(dim), drift_c=zero_vector(dim),
            potential_d=zero_scalar(), potential_e=const_scalar(e_const),
            label=label, noise_dim=dim,
            jac_b=lambda pts: np.zeros((np.atleast_2d(pts).shape[0], dim, dim)),
            jac_sigma=lambda pts: np.zeros(
                (np.atleast_2d(pts).shape[0], dim, dim, dim)),
        )

    if label == "sine_1d":
        c_const = float(params.pop("c_const", 0.0))
        d_amp = float(params.pop("d_amp", 0.0))
        e_const = float(params.pop("e_const", 0.0))
        _reject_extra(params)
        torus = Torus(np.array([1.0]))
        two_pi = 2.0 * math.pi

        def a_of(x):
            return 2.0 + np.sin(two_pi * x)

        def sigma(pts):
            x = np.atleast_2d(pts)[:, 0]
            return np.sqrt(a_of(x))[:, None, None]

        def drift_b(pts):
            # divergence-form: b = a'/2
            x = np.atleast_2d(pts)[:, 0]
            return (math.pi * np.cos(two_pi * x))[:, None]

        def potential_d(pts):
            x = np.atleast_2d(pts)[:, 0]
            return d_amp * np.sin(two_pi * x)

        return CoefficientSet(
            torus=torus, sigma=sigma, drift_b=drift_b,
            drift_c=const_vector([c_const]),
            potential_d=potential_d, potential_e=const_scalar(e_const),
            label=label, noise_dim=1,
        )

    if label == "paper_2d_degenerate":
        e_const = float(params.pop("e_const", 0.0))
        _reject_extra(params)
        torus = Torus(np.array([10.0, 10.0]))

        def _centered(pts):
            w = wrap(np.atleast_2d(pts), torus)
            return w - 5.0

        def sigma(pts):
            z = _centered(pts)
            s = np.sum(z * z, axis=1)
            phi = np.sqrt(_paper2d_psi(s))
            out = np.zeros((z.shape[0], 2, 2))
            out[:, 0, 0] = phi
            out[:, 1, 1] = phi
            return out

        def drift_b(pts):
            z = _centered(pts)
            s = np.sum(z * z, axis=1)
            psi = _paper2d_psi(s)
            inside = s < 9.0
            with np.errstate(divide="ignore"):
                dpsi_ds = np.where(
                    inside, psi * (-2.0 / np.where(inside, (9.0 - s) ** 2, 1.0)), 0.0)
            # b_i = (1/2) d_i psi + bbar_i, with d_i psi = dpsi_ds * 2 z_i
            grad = dpsi_ds[:, None] * 2.0 * z
            w = wrap(np.atleast_2d(pts), torus)
            bbar = np.stack([_btilde(w[:, 1]), _btilde(w[:, 0])], axis=1)
            return 0.5 * grad + bbar

        return CoefficientSet(
            torus=torus, sigma=sigma, drift_b=drift_b,
            drift_c=zero_vector(2),
            potential_d=zero_scalar(), potential_e=const_scalar(e_const),
            label=label, noise_dim=2,
        )

    raise ValueError(f"unknown coefficient catalog label: {label!r}")


def _reject_extra(params: dict):
    if params:
        raise ValueError(f"unknown catalog parameters: {sorted(params)}")


# ---------------------------------------------------------------------------
# divergence-form drift construction

def divergence_form_drift(a_field: Callable, b_bar: Callable, torus: Torus,
                          grid_step: float = 1e-4,
                          check_grid: int = 64) -> Callable:
    """Drift b_i = (1/2) sum_j d_j a_ij + bbar_i via central differences.

    bbar must integrate to zero over the cell and bbar_i must not depend on
    x_i; both are checked on a sampled grid.  The resulting drift makes
    Lebesgue measure invariant for the torus process.
    """
    n = torus.dim
    pts = grid_points(torus, (check_grid,) * n)
    bb = b_bar(pts)
    means = bb.mean(axis=0)
    if np.any(np.abs(means) > 1e-6):
        raise ValueError(f"b_bar is not zero-mean over the cell: {means}")
    # bbar_i must be constant along axis i
    for i in range(n):
        probe = pts.copy()
        base = bb[:, i]
        probe[:, i] = wrap(probe[:, i] + 0.37 * torus.periods[i],
                           Torus(torus.periods[i:i + 1]))
        shifted = b_bar(probe)[:, i]
        if np.max(np.abs(shifted - base)) > 1e-8:
            raise ValueError(f"b_bar[{i}] depends on x_{i}")

    h = grid_step

    def drift(points):
        points = np.atleast_2d(points)
        out = np.zeros_like(points)
        for j in range(n):
            ej = np.zeros(n)
            ej[j] = h
            da = (a_field(points + ej) - a_field(points - ej)) / (2.0 * h)
            out += 0.5 * da[:, :, j]
        return out + b_bar(points)

    return drift


# ---------------------------------------------------------------------------
# validation

@dataclass
class ValidationReport:
    holder_exponent_gamma: float
    holder_constant_Gamma: float
    modulus_constant_Theta: float
    ellipticity_alpha_on_O: float
    degenerate_fraction: float
    max_asymmetry: float
    min_eigenvalue: float
    max_seam_mismatch: float
    grid_step: float
    passed: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())


def validate(cset: CoefficientSet, grid_step: float,
             declared_O=None, degeneracy_tol: float = 1e-10) -> ValidationReport:
    """Numerically certify the standing assumptions on a sampled grid.

    Estimates are grid bounds, not proofs: Hoelder/modulus constants come from
    maximizing difference quotients, ellipticity from the min eigenvalue of a
    over the declared nondegeneracy region.
    """
    torus = cset.torus
    n = torus.dim
    counts = []
    for tau in torus.periods:
        g = tau / grid_step
        if abs(g - round(g)) > 1e-9:
            raise ValueError("grid_step must divide each period")
        counts.append(int(round(g)))
    pts = grid_points(torus, tuple(counts))

    a = cset.a(pts)
    asym = np.max(np.abs(a - np.transpose(a, (0, 2, 1))))
    eigs = np.linalg.eigvalsh(0.5 * (a + np.transpose(a, (0, 2, 1))))
    min_eig = float(eigs[:, 0].min())
    degenerate_fraction = float(np.mean(eigs[:, 0] < degeneracy_tol))

    # periodicity seam check: f(x) vs f(x + tau_i e_i), unwrapped arguments
    seam = 0.0
    sample = pts[:: max(1, pts.shape[0] // 512)]
    for i in range(n):
        shift = np.zeros(n)
        shift[i] = torus.periods[i]
        for f in (cset.sigma, cset.drift_b, cset.drift_c,
                  cset.potential_d, cset.potential_e):
            seam = max(seam, float(np.max(np.abs(f(sample + shift) - f(sample)))))

    # difference quotients over neighbor pairs at dyadic lags
    rng = np.random.Generator(np.random.Philox(key=[7, 1]))
    base = rng.random((256, n)) * torus.periods
    lags, metrics, thetas = [], [], []
    for scale in (1.0, 0.5, 0.25, 0.125):
        d = grid_step * scale * 4.0
        direction = rng.standard_normal((256, n))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        y = base + d * direction
        da = cset.a(y) - cset.a(base)
        db = cset.drift_b(y) - cset.drift_b(base)
        dc = cset.drift_c(y) - cset.drift_c(base)
        ds = cset.sigma(y) - cset.sigma(base)
        metric = (np.linalg.norm(da, axis=(1, 2))
                  + np.linalg.norm(db, axis=1) + np.linalg.norm(dc, axis=1))
        lags.append(d)
        metrics.append(float(metric.max()))
        diff = d * direction
        theta_metric = np.maximum(
            np.sum(ds * ds, axis=(1, 2)),
            np.maximum(np.sum(db * diff, axis=1), np.sum(dc * diff, axis=1)))
        thetas.append(float(np.max(theta_metric / d ** 2)))
    metrics_arr = np.asarray(metrics)
    if np.all(metrics_arr > 0):
        slope = np.polyfit(np.log(lags), np.log(metrics_arr), 1)[0]
        gamma = float(min(1.0, max(slope, 1e-3)))
    else:
        gamma = 1.0
    Gamma = float(max(m / l ** gamma for m, l in zip(metrics, lags)))
    Theta = float(max(thetas))

    if declared_O is None or isinstance(declared_O, EmptyRegion):
        alpha = 0.0
        in_O = np.zeros(pts.shape[0], dtype=bool)
    else:
        in_O = declared_O.contains(pts, torus)
        alpha = float(eigs[in_O, 0].min()) if in_O.any() else 0.0

    passed = {
        "a_symmetric": asym < 1e-10,
        "a_psd": min_eig >= -degeneracy_tol,
        "periodic": seam < 1e-10,
        "elliptic_on_O": (not in_O.any()) or alpha > 0.0,
    }
    return ValidationReport(
        holder_exponent_gamma=gamma,
        holder_constant_Gamma=Gamma,
        modulus_constant_Theta=Theta,
        ellipticity_alpha_on_O=alpha,
        degenerate_fraction=degenerate_fraction,
        max_asymmetry=float(asym),
        min_eigenvalue=min_eig,
        max_seam_mismatch=seam,
        grid_step=grid_step,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# grid field file I/O

def save_field_csv(path, torus: Torus, name: str, values: np.ndarray):
    """Write a grid-sampled field: header carries dim/periods/shape, rows are
    `i1,...,in,v1,...,vk` in row-major node order."""
    n = torus.dim
    shape = values.shape[:n]
    flat = values.reshape(int(np.prod(shape)), -1)
    k = flat.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write("# torushomog-field v1\n")
        fh.write(
            f"# name={name},dim={n}"
            f",periods={';'.join(repr(float(t)) for t in torus.periods)}"
            f",shape={';'.join(str(s) for s in shape)},components={k}\n")
        w = csv.writer(fh)
        w.writerow([f"i{j + 1}" for j in range(n)] + [f"v{j + 1}" for j in range(k)])
        for flat_idx, row in enumerate(flat):
            idx = np.unravel_index(flat_idx, shape)
            w.writerow(list(idx) + [repr(float(v)) for v in row])


def load_field_csv(path):
    """Load a grid field file; returns (torus, name, values array)."""
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != "# torushomog-field v1":
            raise ValueError(f"{path}: not a torushomog field file")
        meta = dict(kv.split("=", 1) for kv in fh.readline().strip("# \n").split(","))
        n = int(meta["dim"])
        torus = Torus(np.array([float(t) for t in meta["periods"].split(";")]))
        shape = tuple(int(s) for s in meta["shape"].split(";"))
        k = int(meta["components"])
        reader = csv.reader(fh)
        next(reader)  # column header
        flat = np.zeros((int(np.prod(shape)), k))
        for row in reader:
            idx = tuple(int(v) for v in row[:n])
            flat[np.ravel_multi_index(idx, shape)] = [float(v) for v in row[n:]]
    return torus, meta["name"], flat.reshape(shape + (k,))


def interpolated_field(torus: Torus, values: np.ndarray, comp_shape=()) -> Callable:
    """Periodic multilinear interpolant closure over a grid tensor."""
    n = torus.dim
    vals = values.reshape(values.shape[:n] + (-1,))

    def f(pts):
        out = periodic_interp(vals, torus, pts)
        if comp_shape == ():
            return out[:, 0]
        return out.reshape((out.shape[0],) + comp_shape)

    return f
