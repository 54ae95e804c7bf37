"""Periodic multilinear interpolation of grid-sampled fields on the torus."""

from __future__ import annotations

import itertools

import numpy as np

from .torus import Torus, wrap


def grid_axes(torus: Torus, shape) -> list[np.ndarray]:
    """Node coordinates per axis: g_i equispaced nodes on [0, tau_i)."""
    return [
        np.arange(g) * (tau / g) for g, tau in zip(shape, torus.periods)
    ]


def grid_points(torus: Torus, shape) -> np.ndarray:
    """All grid nodes as an (prod(shape), n) array, row-major node order."""
    axes = grid_axes(torus, shape)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def periodic_interp(values: np.ndarray, torus: Torus, points) -> np.ndarray:
    """Multilinear interpolation with periodic wraparound.

    values has shape (g_1, ..., g_n, *comp); nodes sit at j * tau_i / g_i.
    Returns an array of shape (N, *comp).
    """
    n = torus.dim
    shape = values.shape[:n]
    comp = values.shape[n:]
    pts = wrap(np.atleast_2d(np.asarray(points, float)), torus)
    u = pts / (torus.periods / np.asarray(shape))
    base = np.floor(u).astype(int)
    frac = u - base
    base %= np.asarray(shape)

    flat = values.reshape(shape + (-1,))
    out = np.zeros((pts.shape[0], flat.shape[-1]))
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(
            (base[:, i] + corner[i]) % shape[i] for i in range(n)
        )
        w = np.ones(pts.shape[0])
        for i in range(n):
            w *= frac[:, i] if corner[i] else 1.0 - frac[:, i]
        out += w[:, None] * flat[idx]
    return out.reshape((pts.shape[0],) + comp)
