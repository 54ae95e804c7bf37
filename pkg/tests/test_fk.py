import math

import numpy as np
import pytest

from torushomog import (SimConfig, builtin, differentiate, solve_corrector,
                        solve_elliptic, solve_elliptic_extrapolated,
                        solve_elliptic_homogenized, solve_parabolic,
                        solve_parabolic_homogenized, step_extrapolate)
from torushomog.effective import EffectiveModel
from torushomog.fk import (ball_domain, boundary_nondegeneracy, box_domain,
                           epsilon_convergence_table, study_csv)


def cosh_oracle(x, alpha, radius, a=1.0):
    """u'' a / 2 - alpha u = 0 on (-R, R), u(+-R) = 1."""
    r = math.sqrt(2.0 * alpha / a)
    return math.cosh(r * x) / math.cosh(r * radius)


def const_model(a=1.0, b=0.0, n=1):
    return EffectiveModel(cov_a=np.eye(n) * a, cov_a_stderr=np.zeros((n, n)),
                          drift_b=np.full(n, b), drift_b_stderr=np.zeros(n))


# --- domains ---------------------------------------------------------------

def test_domain_specs():
    ball = ball_domain([0.0, 0.0], 2.0)
    assert ball.contains([[1.0, 0.0]])[0]
    assert not ball.contains([[3.0, 0.0]])[0]
    assert np.allclose(ball.normal([[2.0, 0.0]]), [[1.0, 0.0]])
    box = box_domain([-1.0], [1.0])
    assert box.contains([[0.3]])[0] and not box.contains([[1.2]])[0]
    # finite-difference normal fallback
    assert np.allclose(box.normal([[0.9]]), [[1.0]])


# --- elliptic exit problems ------------------------------------------------

def test_telescoping_identity_exact():
    # e = -1, f = 1, g = 1 makes every path contribute exactly 1: the running
    # integral telescopes against the exit weight, so the only acceptable
    # error is float roundoff
    cs = builtin("sine_1d", e_const=-1.0)
    cfg = SimConfig(step=0.01, horizon=1.0, n_paths=500, seed=3)
    est = solve_elliptic(cs, 0.5, box_domain([-0.5], [0.5]),
                         f=lambda x: np.ones(len(x)),
                         g=lambda x: np.ones(len(x)),
                         x0=[0.0], config=cfg)
    assert est.value == pytest.approx(1.0, abs=1e-10)
    assert est.stderr < 1e-12


def test_elliptic_cosh_oracle_with_extrapolation():
    cs = builtin("constant_identity", dim=1, periods=(1.0,), e_const=-1.0)
    cfg = SimConfig(step=0.02, horizon=1.0, n_paths=3000, seed=11)
    dom = box_domain([-1.0], [1.0])
    g1 = lambda x: np.ones(len(x))
    f0 = lambda x: np.zeros(len(x))
    truth = cosh_oracle(0.0, 1.0, 1.0)
    plain = solve_elliptic(cs, 1.0, dom, f0, g1, [0.0], cfg)
    extr = solve_elliptic_extrapolated(cs, 1.0, dom, f0, g1, [0.0], cfg)
    assert abs(extr.value - truth) < max(3 * extr.stderr, 0.02 * truth)
    # extrapolation removes most of the stepwise-exit bias
    assert abs(extr.value - truth) < abs(plain.value - truth)
    assert extr.exited_fraction > 0.99


def test_elliptic_homogenized_cosh_oracle():
    cfg = SimConfig(step=0.01, horizon=1.0, n_paths=4000, seed=7)
    dom = box_domain([-1.0], [1.0])
    est = solve_elliptic_homogenized(
        const_model(a=1.0), dom, f=lambda x: np.zeros(len(x)),
        g=lambda x: np.ones(len(x)), x0=[0.4], config=cfg, pi_e=-1.0)
    truth = cosh_oracle(0.4, 1.0, 1.0)
    # stepwise exit detection overshoots the boundary, biasing the estimate
    # up; a 3 sigma + 4% band covers it at this step size
    assert abs(est.value - truth) < 3 * est.stderr + 0.04 * truth


def test_elliptic_input_validation():
    cs = builtin("sine_1d", e_const=-1.0)
    cfg = SimConfig(step=0.01, horizon=1.0, n_paths=8, seed=0)
    dom = box_domain([-0.5], [0.5])
    one = lambda x: np.ones(len(x))
    with pytest.raises(ValueError, match="inside"):
        solve_elliptic(cs, 0.5, dom, one, one, [0.7], cfg)
    bad = builtin("sine_1d")          # e = 0: no killing
    with pytest.raises(ValueError, match="negative"):
        solve_elliptic(bad, 0.5, dom, one, one, [0.0], cfg)
    with pytest.raises(ValueError, match="negative"):
        solve_elliptic_homogenized(const_model(), dom, one, one, [0.0], cfg,
                                   pi_e=0.0)


def test_step_extrapolate_formula():
    from torushomog.fk import FeynmanKacEstimate
    eh = FeynmanKacEstimate(value=1.2, stderr=0.01, n_paths=100)
    eh2 = FeynmanKacEstimate(value=1.1, stderr=0.01, n_paths=100)
    out = step_extrapolate(eh, eh2, order=0.5)
    r = math.sqrt(2.0)
    assert out.value == pytest.approx((r * 1.1 - 1.2) / (r - 1))
    assert out.n_paths == 200


# --- parabolic problems ----------------------------------------------------

def test_parabolic_heat_identity():
    # g = |x|^2 under the identity diffusion: u = |x0|^2 + n t exactly
    cs = builtin("constant_identity", dim=2)
    cfg = SimConfig(step=5e-3, horizon=1.0, n_paths=4000, seed=5)
    g = lambda x: np.sum(np.asarray(x) ** 2, axis=1)
    f = lambda x: np.zeros(len(x))
    est = solve_parabolic(cs, 0.5, f, g, [0.3, 0.4], t=0.5, config=cfg)
    truth = 0.25 + 2 * 0.5
    assert abs(est.value - truth) < max(3 * est.stderr, 0.02 * truth)


def test_parabolic_constant_killing_factorizes_exactly():
    # constant e and g = 1: the exponent accumulates e * t deterministically
    cs = builtin("constant_identity", dim=1, periods=(1.0,), e_const=-0.7)
    cfg = SimConfig(step=5e-3, horizon=1.0, n_paths=200, seed=1)
    est = solve_parabolic(cs, 0.5, lambda x: np.zeros(len(x)),
                          lambda x: np.ones(len(x)), [0.0], t=0.8, config=cfg)
    assert est.value == pytest.approx(math.exp(-0.7 * 0.8), rel=1e-9)
    assert est.stderr < 1e-12
    assert est.exponent_std < 1e-12


def test_parabolic_delta_control_variate_consistent():
    cs = builtin("sine_1d", d_amp=0.5)
    corr_cfg = SimConfig(step=2e-3, horizon=1.0, n_paths=1024, seed=9)
    delta = differentiate(
        solve_corrector(cs, cs.potential_d, [0.0], (32,), corr_cfg, gamma=12.0))
    cfg = SimConfig(step=2e-3, horizon=1.0, n_paths=2000, seed=4)
    g = lambda x: np.ones(len(x))
    f = lambda x: np.zeros(len(x))
    raw = solve_parabolic(cs, 0.3, f, g, [0.1], t=0.4, config=cfg)
    cv = solve_parabolic(cs, 0.3, f, g, [0.1], t=0.4, config=cfg,
                         delta_cv=delta)
    sig = math.hypot(raw.stderr, cv.stderr)
    assert abs(raw.value - cv.value) < 3 * sig + 0.01


def test_parabolic_homogenized_gaussian_moments():
    # x0 + b t + sqrt(a t) Z with constant potential p0:
    # E g = e^{p0 t} ((x0 + b t)^2 + a t) for g(x) = x^2
    model = const_model(a=1.44, b=0.3)
    cfg = SimConfig(step=2e-3, horizon=1.0, n_paths=20000, seed=8)
    g = lambda x: np.asarray(x)[:, 0] ** 2
    f = lambda x: np.zeros(len(x))
    t, p0, x0 = 0.7, -0.2, 0.5
    est = solve_parabolic_homogenized(model, f, g, [x0], t, cfg, potential=p0)
    truth = math.exp(p0 * t) * ((x0 + 0.3 * t) ** 2 + 1.44 * t)
    assert abs(est.value - truth) < max(3 * est.stderr, 0.01 * truth)


def test_parabolic_exponent_variance_warning():
    cs = builtin("sine_1d", d_amp=20.0)
    cfg = SimConfig(step=2e-3, horizon=1.0, n_paths=200, seed=2)
    with pytest.warns(RuntimeWarning, match="exponent"):
        solve_parabolic(cs, 0.9, lambda x: np.zeros(len(x)),
                        lambda x: np.ones(len(x)), [0.1], t=2.0, config=cfg)


# --- study helpers ---------------------------------------------------------

def test_boundary_nondegeneracy():
    dom = ball_domain([0.0, 0.0], 1.0)
    theta = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    val = boundary_nondegeneracy(const_model(a=2.0, n=2), dom, pts, dom.normal)
    assert val == pytest.approx(2.0)


def test_study_csv_schema(tmp_path):
    rows = [{"epsilon": 0.5, "x": [0.0], "u_eps": 1.1, "stderr_eps": 0.01,
             "u0": 1.0, "stderr_0": 0.005}]
    p = tmp_path / "study.csv"
    study_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "epsilon,x_1,u_eps,stderr_eps,u0,stderr_0,gap,z"
    assert len(lines) == 2
    with pytest.raises(ValueError):
        study_csv([], tmp_path / "empty.csv")


def test_epsilon_convergence_table_verdicts():
    from torushomog.fk import FeynmanKacEstimate

    def good(eps):
        return FeynmanKacEstimate(value=1.0 + eps ** 2, stderr=0.001,
                                  n_paths=10)

    out = good_tbl = epsilon_convergence_table(good, [0.5, 0.25, 0.1], 1.0)
    assert out["converged"]
    gaps = [out["rows"][e]["gap"] for e in sorted(out["rows"], reverse=True)]
    assert gaps == sorted(gaps, reverse=True)

    def stuck(eps):
        return FeynmanKacEstimate(value=2.0, stderr=0.001, n_paths=10)

    assert not epsilon_convergence_table(stuck, [0.5, 0.25, 0.1], 1.0)["converged"]
