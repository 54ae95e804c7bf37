"""Flat rectangular torus: wrapping map and periodic distance.

Points live in R^n; the torus identifies x ~ x + k, k in the period lattice.
Representatives are kept in the half-open cell [0, tau_i) so that histogram
binning is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Torus:
    """Flat torus R^n / (tau_1 Z x ... x tau_n Z)."""

    periods: np.ndarray = field()

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.periods, dtype=float))
        if p.ndim != 1:
            raise ValueError("periods must be a 1-d vector")
        if not np.all(p > 0.0):
            raise ValueError("all periods must be strictly positive")
        object.__setattr__(self, "periods", p)

    @property
    def dim(self) -> int:
        return self.periods.shape[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.periods))


def wrap(x, torus: Torus) -> np.ndarray:
    """Unique representative of x in [0, tau_1) x ... x [0, tau_n).

    Total on R^n and idempotent.  np.mod can return tau_i for tiny negative
    inputs due to rounding, so results are post-corrected back into the cell.
    """
    x = np.asarray(x, dtype=float)
    tau = torus.periods
    r = np.mod(x, tau)
    # rounding guard: mod may land exactly on tau
    return np.where(r >= tau, 0.0, r)


def periodic_distance(x, y, torus: Torus) -> np.ndarray:
    """min over lattice shifts k of |x - y - k| (Euclidean on the cell)."""
    tau = torus.periods
    d = np.abs(wrap(np.asarray(x, float) - np.asarray(y, float), torus))
    d = np.minimum(d, tau - d)
    return np.sqrt(np.sum(d * d, axis=-1))
