import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doilab import ensembles
from doilab.linalg import eigh
from doilab.symbols import constant_symbol, divided_difference, poly, resolvent, separated_symbol, weight_symbol
from doilab.ssf import (StepFunction, eigen_flow, diag_trace_identity, path_derivative_error, ssf_from_flow,
                        ssf_oracle, trace_formula_check, uniqueness_shadow, weighted_l1_distance)

A2 = np.diag([0.0, 2.0])
K2 = np.diag([1.0, -1.0])
SQUARE = poly((0, 0, 1))


def test_step_function_basics():
    s = StepFunction([0.0, 1.0, 2.0], [1.0, -1.0])
    assert np.array_equal(s([-1, 0, 0.5, 1, 1.5, 2, 3]), [0, 1, 1, -1, -1, 0, 0])
    assert s.support() == (0.0, 2.0)
    assert s.weighted_l1() == pytest.approx(np.log(3))
    assert s.integrate_derivative(lambda x: x ** 2) == pytest.approx(-2)
    with pytest.raises(ValueError):
        StepFunction([1.0, 0.0], [1.0])
    with pytest.raises(ValueError):
        StepFunction([0.0, 1.0], [1.0, 2.0])


def test_oracle_one_by_one():
    xi = ssf_oracle([[0.0]], [[1.0]])
    assert np.array_equal(xi.breakpoints, [0, 1]) and np.array_equal(xi.values, [1])
    f = resolvent(1j)
    assert xi.integrate_derivative(f) == pytest.approx(f(1.0) - f(0.0))


def test_oracle_identical():
    A = ensembles.gaussian_hermitian(5, 3)
    xi = ssf_oracle(A, A)
    assert np.all(xi.values == 0) and xi.support() is None and xi.weighted_l1() == 0


def test_oracle_two_by_two():
    xi = ssf_oracle(A2, A2 + K2)
    assert np.array_equal(xi([0.5, 1.5, 2.5, -0.5]), [1, -1, 0, 0])
    for f in (SQUARE, resolvent(1j), poly((1, -2, 0, 3))):
        assert xi.integrate_derivative(f) == pytest.approx(2 * f(1.0) - f(0.0) - f(2.0), abs=1e-13)


def test_oracle_dimension_mismatch():
    with pytest.raises(ValueError):
        ssf_oracle(np.eye(2), np.eye(3))


@pytest.mark.parametrize("n", [1, 4, 13, 32])
def test_oracle_trace_formula_all_functions(functions, n):
    p = ensembles.make_pair(n, 40 + n)
    xi = ssf_oracle(p.a, p.b)
    for f in functions.values():
        chk = trace_formula_check(f, p.a, p.k, xi)
        assert chk.abs_error <= 1e-8 * (1 + abs(chk.lhs))


def test_trace_check_zero_perturbation():
    A = ensembles.gaussian_hermitian(4, 0)
    xi = ssf_oracle(A, A)
    assert trace_formula_check(resolvent(), A, np.zeros((4, 4)), xi) == (0, 0, 0)


def test_flow_zero_perturbation():
    A = ensembles.gaussian_hermitian(4, 9)
    flow = eigen_flow(A, np.zeros((4, 4)), 8)
    assert np.allclose(flow.lambda_paths, eigh(A).lambdas[None], atol=1e-13)
    assert np.all(flow.weights == 0)
    profile = ssf_from_flow(flow, 16)
    assert np.all(profile.density == 0)


def test_flow_one_by_one():
    flow = eigen_flow([[0.0]], [[1.0]], 10)
    assert np.allclose(flow.lambda_paths[:, 0], flow.t_grid)
    assert np.allclose(flow.weights, 1)
    assert np.allclose(flow.t_grid, (np.arange(10) + 0.5) / 10)


def test_flow_diagonal_commuting():
    a = np.array([-1.0, 0.3, 2.0, 0.35])
    k = np.array([2.5, -0.5, -3.0, 0.0])
    flow = eigen_flow(np.diag(a), np.diag(k), 50)
    # trajectories keep their identity through the crossings
    expected = a[None] + flow.t_grid[:, None] * k[None]
    got = flow.lambda_paths[:, np.argsort(np.argsort(a))]
    assert np.allclose(got, expected, atol=1e-12)
    assert np.allclose(flow.weights[:, np.argsort(np.argsort(a))], k[None], atol=1e-12)
    assert flow.lipschitz_excess() <= 1e-8


def test_flow_rejects_bad_input():
    with pytest.raises(ValueError):
        eigen_flow(np.eye(2), np.eye(2), 1)
    with pytest.raises(ValueError):
        eigen_flow(np.eye(2), np.eye(3), 4)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 10), st.integers(0, 10**6), st.sampled_from(ensembles.FAMILIES))
def test_flow_invariants(n, seed, family):
    p = ensembles.make_pair(n, seed, family)
    flow = eigen_flow(p.a, p.k, 64)
    assert flow.lipschitz_excess() <= 1e-8
    assert flow.weight_sum_error() <= 1e-8 * (1 + abs(flow.trace_k))
    for k in (0, 17, 63):
        ref = np.linalg.eigvalsh(p.a + flow.t_grid[k] * p.k)
        assert np.allclose(np.sort(flow.lambda_paths[k]), ref, atol=1e-10)


def test_profile_one_by_one_fine():
    flow = eigen_flow([[0.0]], [[1.0]], 2000)
    profile = ssf_from_flow(flow, 200)
    inside = (profile.centers > 0.02) & (profile.centers < 0.98)
    assert np.allclose(profile.density[inside], 1, atol=1e-3)
    assert weighted_l1_distance(profile, ssf_oracle([[0.0]], [[1.0]])) < 2e-2


def test_profile_two_by_two_example():
    flow = eigen_flow(A2, K2, 1000)
    profile = ssf_from_flow(flow, 1000)
    oracle = ssf_oracle(A2, A2 + K2)
    assert weighted_l1_distance(profile, oracle) <= 5e-2
    assert profile.weighted_l1() == pytest.approx(oracle.weighted_l1(), rel=0.1)


def test_profile_bins_cover_spectra():
    p = ensembles.make_pair(6, 2)
    profile = ssf_from_flow(eigen_flow(p.a, p.k, 32), 40)
    pts = np.concatenate([eigh(p.a).lambdas, eigh(p.b).lambdas])
    assert profile.s_grid[0] < pts.min() and profile.s_grid[-1] > pts.max()
    assert np.allclose(np.diff(profile.s_grid), profile.widths[0])
    assert profile.density.size == 40


def test_profile_rejects_bad_options():
    flow = eigen_flow(A2, K2, 4)
    with pytest.raises(ValueError):
        ssf_from_flow(flow, 2)
    with pytest.raises(ValueError):
        ssf_from_flow(flow, 10, deposit="kernel")


def test_mass_is_conserved():
    # total nu mass equals int_0^1 trace(K (A_t + i)^{-1}) dt on the grid
    p = ensembles.make_pair(5, 8)
    flow = eigen_flow(p.a, p.k, 100)
    for deposit in ("point", "segment"):
        prof = ssf_from_flow(flow, 50, deposit=deposit)
        total = np.sum(prof.nu_density * prof.widths)
        expected = np.sum(flow.weights / (flow.lambda_paths + 1j)) * flow.dt
        assert total == pytest.approx(expected, abs=1e-12)


def test_profile_trace_formula_resolvent():
    p = ensembles.make_pair(16, 601)
    f = resolvent(1j)
    prof = ssf_from_flow(eigen_flow(p.a, p.k, 1000), 1000)
    chk = trace_formula_check(f, p.a, p.k, prof)
    assert chk.abs_error <= 1e-2 * (1 + abs(chk.lhs))


def test_refinement_and_imaginary_part():
    p = ensembles.make_pair(8, 5)
    oracle = ssf_oracle(p.a, p.b)
    dist, imag = [], []
    for steps in (250, 500, 1000):
        prof = ssf_from_flow(eigen_flow(p.a, p.k, steps), steps)
        dist.append(weighted_l1_distance(prof, oracle))
        imag.append(prof.imag_weighted_l1())
    assert dist[1] <= 1.1 * dist[0] and dist[2] <= 1.1 * dist[1]
    assert imag[2] < imag[0]


def test_segment_beats_point_at_equal_resolution():
    p = ensembles.make_pair(16, 602)
    flow = eigen_flow(p.a, p.k, 1000)
    oracle = ssf_oracle(p.a, p.b)
    seg = weighted_l1_distance(ssf_from_flow(flow, 1000), oracle)
    pt = weighted_l1_distance(ssf_from_flow(flow, 1000, deposit="point"), oracle)
    assert seg < pt


def test_path_derivative_first_order():
    p = ensembles.make_pair(6, 11)
    f = resolvent(0.5 + 1j)
    e1 = path_derivative_error(f, eigen_flow(p.a, p.k, 100))
    e2 = path_derivative_error(f, eigen_flow(p.a, p.k, 200))
    assert e2 < e1
    assert 1.6 <= e1 / e2 <= 2.4


def test_diag_trace_identity_examples():
    E = eigh(ensembles.gaussian_hermitian(6, 1))
    T = ensembles.general_matrix(6, 6, 2)
    chk = diag_trace_identity(constant_symbol(1.0), E, T)
    assert chk.lhs == pytest.approx(np.trace(T), abs=1e-12) and chk.abs_error <= 1e-12
    phi = divided_difference(resolvent(2 + 1j))
    chk = diag_trace_identity(phi, E, np.eye(6))
    assert chk.rhs == pytest.approx(np.sum(phi(E.lambdas, E.lambdas)), abs=1e-12)
    assert chk.abs_error <= 1e-12
    with pytest.raises(ValueError):
        diag_trace_identity(phi, E, np.eye(5))


def test_diag_trace_identity_weighted_dd():
    E = eigh(ensembles.gaussian_hermitian(8, 21))
    T = ensembles.general_matrix(8, 8, 22)
    chk = diag_trace_identity(weight_symbol(resolvent(1j), "I"), E, T)
    assert chk.abs_error <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6))
def test_diag_trace_identity_property(n, seed):
    E = eigh(ensembles.gaussian_hermitian(n, seed))
    T = ensembles.general_matrix(n, n, seed + 1)
    g = np.random.default_rng(seed)
    a, b = g.standard_normal(2)
    for phi in (divided_difference(poly((0, 1, 1))), separated_symbol([lambda x: x + a], [lambda y: np.cos(b * y)])):
        chk = diag_trace_identity(phi, E, T)
        assert chk.abs_error <= 1e-9 * (1 + abs(chk.lhs))


def test_uniqueness_shadow():
    oracle = ssf_oracle(A2, A2 + K2)
    shadow = uniqueness_shadow(oracle, 0.25)
    assert shadow.support == (0.0, 2.0)
    assert shadow.outside_nonzero
    assert all(b > a for a, b in zip(shadow.shifted_mass, shadow.shifted_mass[1:]))
    # 2|c| log R growth
    assert shadow.shifted_mass[-1] - shadow.shifted_mass[-2] == pytest.approx(0.5 * np.log(10), rel=1e-3)
    with pytest.raises(ValueError):
        uniqueness_shadow(oracle, 0)
