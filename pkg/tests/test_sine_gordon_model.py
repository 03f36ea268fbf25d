"""Tests for the sine-Gordon problems, the semi-discrete system and solve()."""

import math

import numpy as np
import pytest

import mcbdqm  # noqa: E402


@pytest.mark.parametrize(
    "example_id, domain",
    [(0, (-1.0, 1.0)), (1, (-1.0, 1.0)), (2, (-3.0, 3.0)), (3, (-10.0, 10.0))],
)
def test_example_defaults(example_id, domain):
    """Each example carries its published default domain."""
    spec = mcbdqm.make_example(example_id)
    assert spec.domain == domain
    assert spec.exact is not None
    spec.validate()


def test_example_overrides():
    """Domain and c can be overridden."""
    spec = mcbdqm.make_example(2, c=0.2, domain=(-5, 5))
    assert spec.domain == (-5.0, 5.0)
    assert spec.c == 0.2


@pytest.mark.parametrize("example_id, c", [(2, 1.0), (2, -1.5), (3, 0.0)])
def test_example_rejects_bad_parameter(example_id, c):
    """Kink needs |c| < 1; breather needs c != 0."""
    with pytest.raises(ValueError):
        mcbdqm.make_example(example_id, c=c)


def test_unknown_example():
    """Only examples 0..3 exist."""
    with pytest.raises(ValueError):
        mcbdqm.make_example(4)


@pytest.mark.parametrize("example_id", [0, 1, 2, 3])
def test_exact_solutions_satisfy_equation(example_id):
    """Finite-difference residual of every exact solution is tiny."""
    assert mcbdqm.residual_check(mcbdqm.make_example(example_id)) <= 1e-5


def test_kink_initial_velocity():
    """Kink u_t(x, 0) = -2 c gamma sech(gamma x)."""
    spec = mcbdqm.make_example(2, c=0.5)
    gamma = 1.0 / math.sqrt(0.75)
    x = np.linspace(-3, 3, 7)
    assert np.allclose(spec.f2(x), -gamma / np.cosh(gamma * x), atol=1e-14)


def test_breather_initial_data():
    """Breather starts at u = 0 with u_t = 4 gb sech(gb x)."""
    spec = mcbdqm.make_example(3, c=0.5)
    gbar = 1.0 / math.sqrt(1.25)
    x = np.linspace(-10, 10, 9)
    assert np.allclose(spec.f1(x), 0.0, atol=1e-15)
    assert np.allclose(spec.f2(x), 4.0 * gbar / np.cosh(gbar * x), atol=1e-14)


def test_boundary_velocity_falls_back_to_differences():
    """Without an analytic u_t the boundary velocity is a central difference of g."""
    ref = mcbdqm.make_example(1)
    spec = mcbdqm.ProblemSpec(domain=ref.domain, f1=ref.f1, f2=ref.f2, g1=ref.g1, g2=ref.g2)
    for t in (0.0, 0.5, 1.0):
        approx = spec.boundary_velocity(t)
        exact = ref.boundary_velocity(t)
        assert approx == pytest.approx(exact, abs=1e-6)


def test_validate_detects_mismatched_data():
    """Initial data inconsistent with the boundary data is rejected."""
    ref = mcbdqm.make_example(1)
    spec = mcbdqm.ProblemSpec(
        domain=ref.domain, f1=lambda x: x + 1.0, f2=ref.f2, g1=ref.g1, g2=ref.g2
    )
    with pytest.raises(ValueError):
        spec.validate()


def test_rhs_layout():
    """The packed derivative is (v, w2 u - sin u) with zeros at the ends."""
    grid = mcbdqm.UniformGrid(-1.0, 1.0, 11)
    weights = mcbdqm.build_weights(grid)
    spec = mcbdqm.make_example(1)
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=11), rng.normal(size=11)
    out = mcbdqm.sine_gordon_rhs(weights, spec, 0.0, np.concatenate([u, v]))
    assert out[0] == out[10] == out[11] == out[21] == 0.0
    assert np.array_equal(out[1:10], v[1:10])
    assert np.allclose(out[12:21], weights.w2[1:-1] @ (u - u[0]) - np.sin(u[1:-1]), atol=1e-12)
    assert np.allclose(out[12:21], weights.w2[1:-1] @ u - np.sin(u[1:-1]), atol=1e-10)

    system = mcbdqm.SineGordonSystem(weights, spec)
    assert np.allclose(system.rhs(0.0, np.concatenate([u, v])), out, atol=1e-12)

    with pytest.raises(ValueError):
        mcbdqm.sine_gordon_rhs(weights, spec, 0.0, np.zeros(10))


def test_zero_problem_stays_at_rest():
    """u = 0 is preserved to round-off."""
    spec = mcbdqm.make_example(0)
    grid = mcbdqm.UniformGrid.from_spacing(-1.0, 1.0, 0.1)
    states = mcbdqm.solve(spec, grid, 0.01, 1.0)
    assert np.max(np.abs(states[-1].u)) <= 1e-14
    assert np.max(np.abs(states[-1].v)) <= 1e-14


def test_rhs_vanishes_on_constant_states():
    """A constant u contributes nothing through w2; only -sin(u) remains."""
    grid = mcbdqm.UniformGrid(-1.0, 1.0, 21)
    spec = mcbdqm.make_example(1)
    for method in mcbdqm.W2_METHODS:
        weights = mcbdqm.build_weights(grid, method)
        y = np.concatenate([np.full(21, 2.0 * math.pi), np.zeros(21)])
        out = mcbdqm.sine_gordon_rhs(weights, spec, 0.0, y)
        assert np.array_equal(out[22:41], np.full(19, -np.sin(2.0 * math.pi)))


@pytest.mark.parametrize("method", mcbdqm.W2_METHODS)
@pytest.mark.parametrize("k", [1, -1])
def test_two_pi_equilibrium(method, k):
    """The constant state u = 2 pi k is an equilibrium to 1e-13 over unit time."""
    two_pi = 2.0 * math.pi * k
    spec = mcbdqm.ProblemSpec(
        domain=(-1.0, 1.0),
        f1=lambda x: np.full_like(np.asarray(x, dtype=float), two_pi),
        f2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        g1=lambda t: two_pi,
        g2=lambda t: two_pi,
        exact=lambda x, t: np.full_like(np.asarray(x, dtype=float), two_pi),
        exact_t=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
    )
    grid = mcbdqm.UniformGrid.from_spacing(-1.0, 1.0, 0.1)
    final = mcbdqm.solve(spec, grid, 0.01, 1.0, w2_method=method)[-1]
    assert np.max(np.abs(final.u - two_pi)) <= 1e-13


def test_solve_rejects_inconsistent_problem():
    """solve() validates that initial and boundary data agree before integrating."""
    ref = mcbdqm.make_example(1)
    spec = mcbdqm.ProblemSpec(
        domain=ref.domain, f1=lambda x: x + 1.0, f2=ref.f2, g1=ref.g1, g2=ref.g2
    )
    grid = mcbdqm.UniformGrid.from_spacing(-1.0, 1.0, 0.1)
    with pytest.raises(ValueError, match="boundary data"):
        mcbdqm.solve(spec, grid, 0.01, 0.1)


def test_boundary_values_are_exact():
    """Dirichlet data is imposed exactly at every recorded time."""
    spec = mcbdqm.make_example(2, c=0.5)
    grid = mcbdqm.UniformGrid.from_spacing(-3.0, 3.0, 0.1)
    states = mcbdqm.solve(spec, grid, 1e-3, 0.5, snapshot_times=[0.1, 0.25])
    assert [s.t for s in states] == [0.1, 0.25, 0.5]
    for s in states:
        assert abs(s.u[0] - spec.g1(s.t)) <= 1e-12
        assert abs(s.u[-1] - spec.g2(s.t)) <= 1e-12


def test_example_one_stays_symmetric():
    """Example 1 is even in x and the discrete solution keeps that symmetry."""
    spec = mcbdqm.make_example(1)
    grid = mcbdqm.UniformGrid.from_spacing(-1.0, 1.0, 0.1)
    final = mcbdqm.solve(spec, grid, 1e-3, 1.0)[-1]
    assert np.max(np.abs(final.u - final.u[::-1])) <= 1e-10


def test_solve_t_end_zero_returns_initial_data():
    """t_end = 0 returns f1 sampled on the grid."""
    spec = mcbdqm.make_example(1)
    grid = mcbdqm.UniformGrid.from_spacing(-1.0, 1.0, 0.04)
    states = mcbdqm.solve(spec, grid, 1e-4, 0.0)
    assert len(states) == 1
    assert states[0].t == 0.0
    assert np.array_equal(states[0].u, spec.f1(grid.nodes))


def test_solve_rejects_grid_outside_domain():
    """The grid must span the problem domain."""
    spec = mcbdqm.make_example(1)
    with pytest.raises(ValueError):
        mcbdqm.solve(spec, mcbdqm.UniformGrid(0.0, 1.0, 11), 1e-3, 0.1)


def test_kink_is_accurate_on_coarse_grid():
    """The travelling kink is reproduced to 1e-3 on h = 0.1."""
    spec = mcbdqm.make_example(2, c=0.5)
    grid = mcbdqm.UniformGrid.from_spacing(-3.0, 3.0, 0.1)
    final = mcbdqm.solve(spec, grid, 1e-3, 0.5)[-1]
    assert mcbdqm.error_norms(final.u, spec.exact, grid, final.t).linf < 1e-3


@pytest.mark.parametrize("staging", ["stage", "step"])
def test_boundary_staging_variants(staging):
    """Both boundary staging variants run and stay close to the exact solution."""
    spec = mcbdqm.make_example(1)
    grid = mcbdqm.UniformGrid.from_spacing(-1.0, 1.0, 0.1)
    final = mcbdqm.solve(spec, grid, 1e-3, 0.5, bc_staging=staging)[-1]
    assert mcbdqm.error_norms(final.u, spec.exact, grid, final.t).linf < 1e-2


def test_unknown_staging_rejected():
    """bc_staging must be stage or step."""
    spec = mcbdqm.make_example(1)
    grid = mcbdqm.UniformGrid.from_spacing(-1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        mcbdqm.solve(spec, grid, 1e-3, 0.1, bc_staging="never")


def _reference_solution(spec, n, dt, steps):
    """Dense-matrix method of lines with an explicit Shu-Osher loop."""
    a, b = spec.domain
    x = np.linspace(a, b, n)
    h = (b - a) / (n - 1)
    bmat = mcbdqm.basis_matrix(mcbdqm.UniformGrid(a, b, n)).to_dense()
    m1 = mcbdqm.modified_nodal_values(mcbdqm.UniformGrid(a, b, n), 1)
    w1 = np.linalg.solve(bmat, m1).T
    w2 = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                w2[i, j] = 2.0 * w1[i, j] * (w1[i, i] - 1.0 / ((i - j) * h))
        w2[i, i] = -sum(w2[i, j] for j in range(n) if j != i)

    def rhs(y):
        u, v = y[:n], y[n:]
        out = np.zeros(2 * n)
        out[1 : n - 1] = v[1 : n - 1]
        out[n + 1 : 2 * n - 1] = w2[1:-1] @ u - np.sin(u[1:-1])
        return out

    def bc(t, y):
        y[0], y[n - 1] = spec.g1(t), spec.g2(t)
        y[n], y[2 * n - 1] = spec.exact_t(a, t), spec.exact_t(b, t)
        return y

    tab = mcbdqm.SSPRK54
    _, _, c = tab.butcher()
    c = np.append(c, 1.0)
    y = bc(0.0, np.concatenate([spec.f1(x), spec.f2(x)]))
    t = 0.0
    for _ in range(steps):
        ys, fs = [y], []
        for k in range(5):
            fs.append(rhs(ys[k]))
            new = sum(tab.alpha[k, j] * ys[j] + dt * tab.beta[k, j] * fs[j] for j in range(k + 1))
            ys.append(bc(t + c[k + 1] * dt, new))
        y = ys[-1]
        t += dt
    return y[:n]


def test_solve_matches_dense_reference():
    """solve() agrees with a dense reference implementation on N = 9 for 10 steps."""
    spec = mcbdqm.make_example(1)
    grid = mcbdqm.UniformGrid(-1.0, 1.0, 9)
    final = mcbdqm.solve(spec, grid, 0.01, 0.1)[-1]
    assert np.allclose(final.u, _reference_solution(spec, 9, 0.01, 10), rtol=0, atol=1e-12)
