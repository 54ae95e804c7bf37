import math

import numpy as np
import pytest

from torushomog import (Ball, SimConfig, builtin, hitting_diagnostic,
                        simulate_jacobian, simulate_original, simulate_scaled)
from torushomog.engine import EngineError
from torushomog.fields import CoefficientSet, const_scalar, zero_scalar, zero_vector
from torushomog.torus import Torus


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(step=-1.0, horizon=1.0, n_paths=1, seed=0)
    with pytest.raises(ValueError):
        SimConfig(step=2.0, horizon=1.0, n_paths=1, seed=0)
    with pytest.raises(ValueError):
        SimConfig(step=0.1, horizon=1.0, n_paths=0, seed=0)


def test_constant_case_terminal_moments():
    cs = builtin("constant_identity", dim=2)
    cfg = SimConfig(step=0.01, horizon=1.0, n_paths=4000, seed=5,
                    store_stride=100)
    batch = simulate_scaled(cs, cfg, [[0.0, 0.0]])
    disp = batch.states[:, -1] - batch.states[:, 0]
    assert np.all(np.abs(disp.mean(axis=0)) < 0.06)
    assert np.allclose(np.var(disp, axis=0), 1.0, atol=0.08)


def test_thread_count_does_not_change_results():
    cs = builtin("sine_1d")
    cfg = SimConfig(step=0.01, horizon=0.5, n_paths=2500, seed=9)
    a = simulate_scaled(cs, cfg, [[0.2]], threads=1)
    b = simulate_scaled(cs, cfg, [[0.2]], threads=4)
    assert np.array_equal(a.states, b.states)


def test_rerun_bit_identical():
    cs = builtin("sine_1d")
    cfg = SimConfig(step=0.01, horizon=0.5, n_paths=300, seed=9)
    a = simulate_scaled(cs, cfg, [[0.2]])
    b = simulate_scaled(cs, cfg, [[0.2]])
    assert np.array_equal(a.states, b.states)


def test_rescaling_identity_exact():
    """X_orig(x, t) = eps * X_scaled(x/eps, t/eps^2) must hold path by path,
    not only in law, because the original-scale simulator is defined by it."""
    cs = builtin("sine_1d")
    eps = 0.5
    cfg = SimConfig(step=0.01, horizon=1.0, n_paths=50, seed=3,
                    store_stride=10)
    orig = simulate_original(cs, eps, cfg, [[0.2]])
    scaled = simulate_scaled(
        cs, SimConfig(step=0.01, horizon=1.0 / eps ** 2, n_paths=50, seed=3,
                      epsilon=eps, store_stride=10),
        [[0.2 / eps]])
    assert np.allclose(orig.states, eps * scaled.states)
    assert np.allclose(orig.times, eps ** 2 * scaled.times)


def test_epsilon_zero_rejected_for_original_scale():
    cs = builtin("sine_1d")
    cfg = SimConfig(step=0.01, horizon=1.0, n_paths=2, seed=0)
    with pytest.raises(ValueError):
        simulate_original(cs, 0.0, cfg, [[0.0]])


def test_nonfinite_blowup_reported():
    torus = Torus(np.array([1.0]))
    blower = CoefficientSet(
        torus=torus,
        sigma=lambda p: np.ones((np.atleast_2d(p).shape[0], 1, 1)),
        drift_b=lambda p: np.full((np.atleast_2d(p).shape[0], 1), 1e308),
        drift_c=zero_vector(1), potential_d=zero_scalar(),
        potential_e=zero_scalar(), label="blow", noise_dim=1)
    cfg = SimConfig(step=1.0, horizon=3.0, n_paths=2, seed=0)
    with pytest.raises(EngineError, match="step"):
        simulate_scaled(blower, cfg, [[0.0]])


def test_jacobian_linear_drift_oracle():
    """dX = A X dt + dB has flow Jacobian exp(A t) independent of noise."""
    torus = Torus(np.array([50.0, 50.0]))   # large cell: effectively R^2
    A = np.array([[0.3, -0.1], [0.2, 0.1]])

    def drift(p):
        return np.atleast_2d(p) @ A.T

    cs = CoefficientSet(
        torus=torus,
        sigma=lambda p: np.broadcast_to(
            np.eye(2), (np.atleast_2d(p).shape[0], 2, 2)).copy(),
        drift_b=drift, drift_c=zero_vector(2),
        potential_d=zero_scalar(), potential_e=zero_scalar(),
        label="linear", noise_dim=2,
        jac_b=lambda p: np.broadcast_to(A, (np.atleast_2d(p).shape[0], 2, 2)).copy(),
        jac_sigma=lambda p: np.zeros((np.atleast_2d(p).shape[0], 2, 2, 2)))
    cfg = SimConfig(step=1e-3, horizon=1.0, n_paths=4, seed=1,
                    store_stride=1000)
    _, jac = simulate_jacobian(cs, cfg, [[1.0, 1.0]])
    from scipy.linalg import expm
    assert np.allclose(jac.states[:, -1], expm(A), atol=5e-3)


def test_hitting_diagnostic_reaches_ball():
    cs = builtin("constant_identity", dim=2, periods=(4.0, 4.0))
    cfg = SimConfig(step=0.01, horizon=30.0, n_paths=64, seed=2)
    rep = hitting_diagnostic(cs, Ball((2.0, 2.0), 1.0), cfg,
                             [[0.0, 0.0], [1.0, 3.0]])
    assert np.all(rep.fractions == 1.0)
    assert np.all(np.isfinite(rep.time_quantiles))
    assert np.all(np.diff(rep.time_quantiles, axis=1) >= 0)
