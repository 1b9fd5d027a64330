import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from schrosteer.conditions import (
    check_conditions, check_coupling, check_nonresonance, eigenvalue_perturbation_derivative,
    gap_combination_derivative, rational_independence_test, resonance_breaking_scan,
    squared_mode_gram,
)
from schrosteer.spectral import (
    EigenBasis, Grid1D, SampledPotential, builtin_potential, coupling_matrix, solve_dirichlet_eigs,
)

G = Grid1D(0.0, 1.0, 1000)


def integer_resonances(N, i=1):
    """Brute force over j^2 integers: i^2 - j^2 - p^2 + q^2 = 0."""
    out = set()
    for j, p, q in itertools.product(range(1, N + 1), repeat=3):
        if j == i or {p, q} == {i, j}:
            continue
        if i * i - j * j - p * p + q * q == 0:
            out.add((j, p, q))
    return out


def test_coupling_parity_failures(free_system):
    basis, B = free_system
    assert check_coupling(B, 1) == [3, 5, 7]
    # independent quadrature for one failing and one passing entry
    v13, _ = quad(lambda x: 2 * x * np.sin(np.pi * x) * np.sin(3 * np.pi * x), 0, 1, epsabs=1e-14)
    assert abs(v13) < 1e-12 and abs(B[0, 2]) < 1e-8


def test_coupling_constant_q_fails_everywhere(free_system):
    basis, _ = free_system
    B = coupling_matrix(builtin_potential(G, "constant", value=1.0), basis)
    assert check_coupling(B, 1) == list(range(2, 9))
    with pytest.raises(IndexError):
        check_coupling(B, 9)


def test_shifted_pair_has_no_coupling_failures():
    Q = builtin_potential(G, "linear")
    basis = solve_dirichlet_eigs(Q.scaled(0.5), 8)
    assert check_coupling(coupling_matrix(Q, basis), 1) == []


def test_exact_spectrum_resonances():
    lam = np.array([(j * np.pi) ** 2 for j in range(1, 9)])
    found = check_nonresonance(lam, 1, tol=1e-9 * lam[-1])
    triples = {(j, p, q) for j, p, q, _ in found}
    assert (7, 4, 8) in triples
    assert triples == integer_resonances(8)
    assert len(found) == len(triples)  # no duplicates
    for j, p, q, defect in found:
        assert abs(lam[0] - lam[j - 1] - lam[p - 1] + lam[q - 1]) == pytest.approx(defect, abs=1e-12)


def test_small_truncation_has_no_resonance():
    lam = np.array([(j * np.pi) ** 2 for j in range(1, 4)])
    assert check_nonresonance(lam, 1, 1e-9 * lam[-1]) == []
    assert integer_resonances(3) == set()


def test_resonance_tolerance_floor():
    lam = np.array([1.0, 2.0, 3.0 + 1e-12])
    # tolerance zero is raised to the floor, so floating-point ties still count
    assert check_nonresonance(lam, 1, 0.0) == check_nonresonance(lam, 1, 1e-9)
    with pytest.raises(ValueError):
        check_nonresonance(lam[::-1], 1, 1e-9)


def test_condition_report(free_system):
    basis, B = free_system
    rep = check_conditions(basis, B, 1, resonance_tol=0.1)
    assert rep.coupling_failures == [3, 5, 7]
    assert (7, 4, 8) in {(j, p, q) for j, p, q, _ in rep.resonances}
    assert not rep.satisfied
    d = rep.to_dict()
    assert d["satisfied"] is False and len(d["couplings"]) == 8


def test_perturbation_derivative_constant_and_linear(free_system):
    basis, _ = free_system
    one = builtin_potential(G, "constant", value=1.0)
    for k in range(1, 9):
        assert abs(eigenvalue_perturbation_derivative(basis, one, k) - 1) < 1e-8
    x = builtin_potential(G, "linear")
    oracle, _ = quad(lambda s: 2 * s * np.sin(np.pi * s) ** 2, 0, 1)
    assert oracle == pytest.approx(0.5)
    assert eigenvalue_perturbation_derivative(basis, x, 1) == pytest.approx(oracle, abs=1e-8)


def test_perturbation_derivative_matches_fd_random_potentials():
    rng = np.random.default_rng(0)
    g = Grid1D(0.0, 1.0, 800)
    for _ in range(10):
        a = rng.normal(scale=5, size=4)
        V = SampledPotential.from_function(
            g, lambda x: a[0] * x + a[1] * np.cos(2 * np.pi * x) + a[2] * x**2)
        P = SampledPotential.from_function(g, lambda x: np.sin(3 * x + a[3]) + x)
        basis = solve_dirichlet_eigs(V, 6)
        h = 1e-4
        plus = solve_dirichlet_eigs(V + P.scaled(h), 6).lambdas
        minus = solve_dirichlet_eigs(V + P.scaled(-h), 6).lambdas
        fd = (plus - minus) / (2 * h)
        for k in range(1, 7):
            d = eigenvalue_perturbation_derivative(basis, P, k)
            assert d == pytest.approx(fd[k - 1], rel=1e-3)


def test_gap_combination_derivative_matches_fd():
    V = builtin_potential(G, "well", depth=20.0, center=0.3, width=0.1)
    Q = builtin_potential(G, "linear")
    basis = solve_dirichlet_eigs(V, 8)
    combo = lambda lam: lam[0] - lam[6] - lam[3] + lam[7]
    h = 1e-4
    fd = (combo(solve_dirichlet_eigs(V + Q.scaled(h), 8).lambdas)
          - combo(solve_dirichlet_eigs(V + Q.scaled(-h), 8).lambdas)) / (2 * h)
    d = gap_combination_derivative(basis, Q, 1, 7, 4, 8)
    assert d == pytest.approx(fd, rel=1e-3)


def test_resonance_breaking_scan():
    V = builtin_potential(G, "zero")
    Q = builtin_potential(G, "linear")
    reports = resonance_breaking_scan(V, Q, [0.0, 0.1, 0.2, 0.5], N=8)
    assert [r.sigma for r in reports] == [0.0, 0.1, 0.2, 0.5]
    assert reports[0].coupling_failures == [3, 5, 7]
    for r in reports[1:]:
        assert r.coupling_failures == []
        assert r.resonances == []


def test_gram_of_squared_sines(free_system):
    basis, _ = free_system
    Gm = squared_mode_gram(basis, 6)
    # <2 sin^2(j pi x), 2 sin^2(k pi x)> = 1 + delta_jk / 2
    assert np.allclose(Gm, np.ones((6, 6)) + 0.5 * np.eye(6), atol=1e-6)


def test_rational_independence_free(free_system):
    basis, _ = free_system
    sigma_min, witness = rational_independence_test(basis, 6)
    assert sigma_min > 0.01
    assert sigma_min == pytest.approx(0.5, abs=1e-5)
    assert witness is None
    s1, w1 = rational_independence_test(basis, 1)
    assert s1 == pytest.approx(1.5, abs=1e-6) and w1 is None


def test_rational_independence_planted_duplicate(free_system):
    basis, _ = free_system
    modes = np.vstack([basis.modes[:3], basis.modes[1:2]])
    dup = EigenBasis(basis.grid, np.array([1.0, 2.0, 3.0, 4.0]), modes)
    sigma_min, witness = rational_independence_test(dup, 4)
    assert sigma_min < 1e-8
    assert witness == [Fraction(0), Fraction(1), Fraction(0), Fraction(-1)]
    with pytest.raises(ValueError):
        rational_independence_test(dup, 5)
