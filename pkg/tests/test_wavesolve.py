import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lodwave.assembly import build_fine_operators, sample_coefficient
from lodwave.correctors import assemble_multiscale, build_corrector_basis
from lodwave.mesh import UNIT_SQUARE, build_structured_mesh
from lodwave.problems import ModelProblem, mp4_f, mp4_g
from lodwave.sparse import SolverError
from lodwave.wavesolve import (
    InitialData,
    Trajectory,
    crank_nicolson_run,
    newmark_run,
    project_initial_elliptic,
    project_initial_l2,
    reference_solve,
)

from quadrature import l2_error


def _spd(rng, n, shift=1.0):
    B = rng.standard_normal((n, n))
    return B @ B.T + shift * np.eye(n)


@pytest.fixture(scope="module")
def ms_level(mp2_small):
    L = mp2_small
    basis = build_corrector_basis(L.hier, L.ops.A_full, L.field, L.clement, 1)
    return L, basis, assemble_multiscale(basis, L.ops.A_h, L.ops.M_h)


def _energy(traj, S, M):
    return np.array([0.5 * e @ M @ e + 0.5 * x @ S @ x for x, e in zip(traj.xi, traj.eta)])


def test_free_motion(rng):
    n, dt, J = 5, 0.1, 30
    M = _spd(rng, n)
    xi0, eta0 = rng.standard_normal(n), rng.standard_normal(n)
    tr = crank_nicolson_run(np.zeros((n, n)), M, None, InitialData(xi0, eta0), dt, J)
    steps = np.arange(J + 1)[:, None]
    np.testing.assert_allclose(tr.xi, xi0 + steps * dt * eta0, atol=1e-12)
    np.testing.assert_allclose(tr.eta, np.broadcast_to(eta0, tr.eta.shape), atol=1e-13)


def test_energy_conservation(ms_level, rng):
    _, _, ms = ms_level
    init = InitialData(rng.standard_normal(ms.N), rng.standard_normal(ms.N))
    tr = crank_nicolson_run(ms.S, ms.M, None, init, 0.05, 200)
    E = _energy(tr, ms.S, ms.M)
    assert np.abs(E - E[0]).max() <= 1e-10 * E[0]


@pytest.mark.parametrize("dt", [0.01, 0.3, 2.0])
def test_scalar_oscillator_recurrence(dt):
    omega, J = 3.0, 40
    tr = crank_nicolson_run(np.array([[omega**2]]), np.eye(1), None, InitialData(np.ones(1), np.zeros(1)), dt, J)
    theta = 2 * math.atan(omega * dt / 2)
    np.testing.assert_allclose(tr.xi[:, 0], np.cos(np.arange(J + 1) * theta), atol=1e-12)


def test_scalar_phase_error_second_order():
    omega, T = 3.0, 1.0
    errs = []
    for J in (20, 40, 80):
        tr = crank_nicolson_run(np.array([[omega**2]]), np.eye(1), None, InitialData(np.ones(1), np.zeros(1)), T / J, J)
        errs.append(abs(tr.xi[-1, 0] - math.cos(omega * T)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert (np.abs(orders - 2) < 0.1).all()


def _newmark_oracle(S, M, loads, xi0, xi1, beta, gamma, dt, J):
    """Plain transcription of the Newmark stencil with a dense solve per step."""
    xs = [xi0, xi1]
    for n in range(1, J):
        lhs = M / dt**2 + beta * S
        rhs = (M @ (2 * xs[n] - xs[n - 1])) / dt**2 - 0.5 * S @ (
            (1 - 4 * beta + 2 * gamma) * xs[n] + (1 + 2 * beta - 2 * gamma) * xs[n - 1]
        )
        if loads is not None:
            rhs = rhs + loads(n)
        xs.append(np.linalg.solve(lhs, rhs))
    return np.array(xs)


@given(beta=st.floats(0.0, 1.0), gamma=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
def test_newmark_matches_stencil(beta, gamma, seed):
    rng = np.random.default_rng(seed)
    n, dt, J = 4, 0.05, 12
    S, M = _spd(rng, n), _spd(rng, n)
    xi0, xi1 = rng.standard_normal(n), rng.standard_normal(n)
    G = rng.standard_normal((J, n))
    tr = newmark_run(S, M, lambda k: G[k], xi0, xi1, beta, gamma, dt, J)
    expect = _newmark_oracle(S, M, lambda k: G[k], xi0, xi1, beta, gamma, dt, J)
    np.testing.assert_allclose(tr.xi, expect, rtol=1e-9, atol=1e-9 * np.abs(expect).max())


def test_leapfrog_is_explicit_central_difference(rng):
    n, dt, J = 3, 0.01, 50
    S, M = _spd(rng, n), np.diag(rng.uniform(1, 2, n))
    xi0, xi1 = rng.standard_normal(n), rng.standard_normal(n)
    tr = newmark_run(S, M, None, xi0, xi1, 0.0, 0.5, dt, J)
    xs = [xi0, xi1]
    for k in range(1, J):
        xs.append(2 * xs[k] - xs[k - 1] - dt**2 * np.linalg.solve(M, S @ xs[k]))
    np.testing.assert_allclose(tr.xi, np.array(xs), rtol=1e-10, atol=1e-10)


def test_newmark_quarter_half_equals_crank_nicolson(rng):
    n, dt, J = 6, 0.05, 40
    S, M = _spd(rng, n), _spd(rng, n)
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    G = lambda t: np.sin(3 * t) * a + t * b  # noqa: E731
    init = InitialData(rng.standard_normal(n), rng.standard_normal(n))
    cn = crank_nicolson_run(S, M, G, init, dt, J)

    def G_cn(k):
        return 0.5 * (G(k * dt) + G((k - 1) * dt))

    nm = newmark_run(S, M, lambda k: 0.5 * (G_cn(k + 1) + G_cn(k)), cn.xi[0], cn.xi[1], 0.25, 0.5, dt, J)
    np.testing.assert_allclose(nm.xi, cn.xi, atol=1e-9 * np.abs(cn.xi).max())


def test_refactor_is_bitwise_identical(ms_level, rng):
    _, _, ms = ms_level
    init = InitialData(rng.standard_normal(ms.N), rng.standard_normal(ms.N))
    G = rng.standard_normal(ms.N)
    a = crank_nicolson_run(ms.S, ms.M, lambda t: G * np.cos(t), init, 0.05, 20)
    b = crank_nicolson_run(ms.S, ms.M, lambda t: G * np.cos(t), init, 0.05, 20, refactor=True)
    assert np.array_equal(a.xi, b.xi) and np.array_equal(a.eta, b.eta)


def test_not_positive_definite_raises():
    S = -4 * np.eye(2)
    with pytest.raises(SolverError, match="positive definite"):
        crank_nicolson_run(S, np.eye(2), None, InitialData(np.ones(2), np.ones(2)), 1.0, 3)
    with pytest.raises(ValueError):
        crank_nicolson_run(np.eye(2), np.eye(2), None, InitialData(np.ones(2), np.ones(2)), 1.0, 0)
    with pytest.raises(ValueError):
        newmark_run(np.eye(2), np.eye(2), None, np.ones(2), np.ones(2), -0.1, 0.5, 1.0, 3)


def test_trajectory_helpers():
    tr = Trajectory(np.arange(5) * 0.25, np.arange(10.0).reshape(5, 2))
    assert tr.J == 4 and tr.dt == 0.25 and tr.index_of(0.75) == 3
    np.testing.assert_allclose(tr.derivative(2), [8.0, 8.0])
    with pytest.raises(ValueError):
        tr.derivative(0)
    with pytest.raises(ValueError):
        tr.index_of(0.3)


def test_projections_of_zero(ms_level):
    L, basis, ms = ms_level
    n = L.hier.fine.n_interior
    assert not project_initial_elliptic(ms, basis, L.ops.A_h, np.zeros(n)).any()
    assert not project_initial_l2(ms, basis, L.ops.M_h, np.zeros(n)).any()


@pytest.mark.parametrize("j", [0, 4, 8])
def test_projection_idempotence(ms_level, j):
    L, basis, ms = ms_level
    psi_j = basis.psi[:, j].toarray().ravel()
    e = np.eye(ms.N)[j]
    np.testing.assert_allclose(project_initial_elliptic(ms, basis, L.ops.A_h, psi_j), e, atol=1e-10)
    np.testing.assert_allclose(project_initial_l2(ms, basis, L.ops.M_h, psi_j), e, atol=1e-10)


def test_elliptic_projection_is_energy_optimal(ms_level, rng):
    L, basis, ms = ms_level
    f = L.ops.interpolate(mp4_f)
    A = L.ops.A_h

    def dist(c):
        d = f - basis.reconstruct(c)
        return d @ (A @ d)

    c = project_initial_elliptic(ms, basis, A, f)
    best = dist(c)
    for _ in range(20):
        assert best < dist(c + 0.1 * np.abs(c).max() * rng.standard_normal(ms.N))


def test_l2_projection_residual_orthogonal(ms_level):
    L, basis, ms = ms_level
    g = L.ops.interpolate(mp4_g)
    c = project_initial_l2(ms, basis, L.ops.M_h, g)
    resid = basis.psi.T @ (L.ops.M_h @ (g - basis.reconstruct(c)))
    assert np.abs(resid).max() <= 1e-9


def _unit_problem(f, g=None):
    zero = lambda x, t=0.0: np.zeros(len(x))  # noqa: E731
    return ModelProblem(
        "analytic", UNIT_SQUARE, lambda x: np.ones(len(x)), zero, f=f, g=g or zero, source_is_zero=True
    )


def test_reference_zero_data_stays_zero():
    mesh = build_structured_mesh(UNIT_SQUARE, 8)
    ops = build_fine_operators(mesh, sample_coefficient(lambda x: np.ones(len(x)), mesh))
    tr = reference_solve(ops, _unit_problem(lambda x: np.zeros(len(x))), 0.1, 10)
    assert not tr.xi.any()


def analytic_reference_errors(ns, t_eval=0.5):
    """L2 errors at t_eval of the fine reference for the standing wave with h = dt = 1/n."""
    u0 = lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])  # noqa: E731
    problem = _unit_problem(u0)
    errs = []
    for n in ns:
        mesh = build_structured_mesh(UNIT_SQUARE, n)
        ops = build_fine_operators(mesh, sample_coefficient(problem.coefficient, mesh))
        dt = 1.0 / n
        tr = reference_solve(ops, problem, dt, int(round(t_eval / dt)))
        full = np.zeros(mesh.n_vertices)
        full[mesh.interior_nodes] = tr.xi[tr.index_of(t_eval)]
        exact = lambda x: u0(x) * math.cos(math.sqrt(2) * math.pi * t_eval)  # noqa: E731
        errs.append(l2_error(mesh, full, exact))
    return np.array(errs)


def test_reference_analytic_convergence():
    errs = analytic_reference_errors((8, 16, 32))
    orders = np.log2(errs[:-1] / errs[1:])
    assert (orders >= 1.8).all(), orders
