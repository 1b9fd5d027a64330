import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_state
from schrosteer.dynamics import free_evolve, propagate_final
from schrosteer.markov import (
    ChainRun, RandomAmplitudeSpec, default_functionals, distance_to_phase_orbit,
    empirical_average, run_chain, run_chains, sample_eta, sample_eta_samples, step_chain,
    step_rng, uniqueness_diagnostic,
)
from schrosteer.spectral import Grid1D, builtin_potential, coupling_matrix, solve_dirichlet_eigs

_g = Grid1D(0.0, 1.0, 400)
BASIS = solve_dirichlet_eigs(builtin_potential(_g, "zero"), 4)
B = coupling_matrix(builtin_potential(_g, "linear"), BASIS)
SPEC = RandomAmplitudeSpec.harmonic(0.3, 6)
ZERO = RandomAmplitudeSpec((0.0, 0.0, 0.0))


def test_spec_validation():
    assert SPEC.b == pytest.approx((0.3, 0.15, 0.1, 0.075, 0.06, 0.05))
    assert SPEC.positive and not ZERO.positive
    with pytest.raises(ValueError):
        RandomAmplitudeSpec((0.1, -0.2))
    with pytest.raises(ValueError):
        RandomAmplitudeSpec((0.1,), basis_kind="haar")
    with pytest.raises(ValueError):
        RandomAmplitudeSpec((0.1,), noise="cauchy")


@pytest.mark.parametrize("kind", ["cosine", "fourier"])
def test_temporal_basis_orthonormal(kind):
    spec = RandomAmplitudeSpec(tuple([1.0] * 7), basis_kind=kind, substeps=4000)
    g = spec.basis_functions()
    w = np.full(len(spec.times), spec.dt)
    w[0] = w[-1] = spec.dt / 2
    gram = (g * w) @ g.T
    # the trapezoid rule is exact for these trigonometric products up to O(dt^2)
    assert np.allclose(gram, np.eye(7), atol=1e-6)


def test_zero_coefficients_give_zero_control():
    eta = sample_eta(ZERO, step_rng(0, 0))
    assert np.all(eta.samples == 0)
    assert not eta.compact and eta.t1 == 1.0


def test_sampling_is_reproducible():
    a = sample_eta(SPEC, step_rng(7, 3)).samples
    b = sample_eta(SPEC, step_rng(7, 3)).samples
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_eta(SPEC, step_rng(7, 4)).samples)


@pytest.mark.parametrize("noise", ["normal", "laplace", "logistic"])
def test_mean_energy_matches_parseval(noise):
    spec = RandomAmplitudeSpec(SPEC.b, noise=noise, substeps=400)
    rng = np.random.default_rng(0)
    x = sample_eta_samples(spec, rng, size=10_000)
    w = np.full(x.shape[1], spec.dt)
    w[0] = w[-1] = spec.dt / 2
    energy = (x**2) @ w
    se = energy.std(ddof=1) / np.sqrt(len(energy))
    assert abs(energy.mean() - spec.expected_l2_norm_sq()) < 3 * se


def test_step_without_noise_is_free_flow():
    c = random_state(np.random.default_rng(1), 4)
    out = step_chain(c, ZERO, step_rng(0, 0), BASIS, B)
    assert np.allclose(out, free_evolve(c, BASIS, 1.0), atol=1e-12)


def test_step_matches_propagator():
    c = random_state(np.random.default_rng(2), 4)
    eta = sample_eta(SPEC, step_rng(5, 0))
    out = step_chain(c, SPEC, step_rng(5, 0), BASIS, B)
    assert np.allclose(out, propagate_final(c, eta, BASIS, B), atol=1e-13)
    assert abs(np.linalg.norm(out) - 1) < 1e-10


def test_run_chain_single_step_and_restart():
    c = random_state(np.random.default_rng(3), 4)
    run = run_chain(c, 12, 99, SPEC, BASIS, B)
    assert run.n_steps == 12
    assert np.array_equal(run.states[1], step_chain(c, SPEC, step_rng(99, 0), BASIS, B))
    tail = run_chain(run.states[5], 7, 99, SPEC, BASIS, B, start=5)
    assert np.allclose(tail.states, run.states[5:], atol=1e-13)
    again = run_chain(c, 12, 99, SPEC, BASIS, B)
    assert np.array_equal(again.states, run.states)
    assert np.allclose(np.linalg.norm(run.states, axis=1), 1, atol=1e-10)


def test_common_noise_isometry():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b = random_state(rng, 4), random_state(rng, 4)
        ra = run_chain(a, 20, 17, SPEC, BASIS, B).states
        rb = run_chain(b, 20, 17, SPEC, BASIS, B).states
        assert np.allclose(np.linalg.norm(ra - rb, axis=1), np.linalg.norm(a - b), atol=1e-9)


def test_lipschitz_feller_surrogate():
    # |c_1|^2 is 2-Lipschitz on the sphere
    rng = np.random.default_rng(5)
    a = random_state(rng, 4)
    b = a + 0.05 * random_state(rng, 4)
    b /= np.linalg.norm(b)
    seeds = range(40)
    fa = np.abs(run_chains(a, 10, seeds, SPEC, BASIS, B, record=False)[:, 0]) ** 2
    fb = np.abs(run_chains(b, 10, seeds, SPEC, BASIS, B, record=False)[:, 0]) ** 2
    diff = fa - fb
    assert np.all(np.abs(diff) <= 2 * np.linalg.norm(a - b) + 1e-12)
    se = diff.std(ddof=1) / np.sqrt(len(diff))
    assert abs(diff.mean()) <= 2 * np.linalg.norm(a - b) + 3 * se


def test_empirical_average_examples():
    c = random_state(np.random.default_rng(6), 4)
    run = run_chain(c, 30, 1, SPEC, BASIS, B)
    one = lambda s: np.ones(s.shape[:-1])
    total = lambda s: np.sum(np.abs(s) ** 2, axis=-1)
    avg = empirical_average(run, [one, total], burn_in=5)
    assert avg[0] == 1.0 and avg[1] == pytest.approx(1.0, abs=1e-12)
    frozen = run_chain(c, 30, 1, ZERO, BASIS, B)
    assert empirical_average(frozen, [lambda s: np.abs(s[..., 0]) ** 2])[0] == pytest.approx(abs(c[0]) ** 2)
    assert len(empirical_average(run)) == len(default_functionals(4))
    with pytest.raises(ValueError):
        empirical_average(run, burn_in=30)


def test_default_functionals_family():
    names = [n for n, _ in default_functionals(6)]
    assert names[:6] == [f"abs2_{j}" for j in range(1, 7)]
    assert len(names) == 6 + 2 * 6  # six pairs j < k <= 4, real and imaginary


def test_distance_to_phase_orbit():
    assert distance_to_phase_orbit(np.array([1j, 0])) == pytest.approx(0.0)
    assert distance_to_phase_orbit(np.array([0, 1])) == pytest.approx(np.sqrt(2))


def test_diagnostic_identical_starts_consistent():
    c = random_state(np.random.default_rng(7), 4)
    rep = uniqueness_diagnostic(c, c, 40, 10, SPEC, BASIS, B, seed=3, n_boot=200)
    assert rep.max_z <= 3 and rep.verdict == "consistent"
    d = rep.to_dict()
    assert d["exploratory"] is True and len(d["functionals"]) == len(rep.names)
    for m in range(len(rep.names)):
        lo, hi = rep.ci_a[m]
        assert lo <= rep.mean_a[m] + 1e-12 and rep.mean_a[m] <= hi + 1e-12


def test_diagnostic_without_noise_is_discrepant():
    e1, e2 = np.eye(4, dtype=complex)[:2]
    rep = uniqueness_diagnostic(e1, e2, 20, 10, ZERO, BASIS, B, seed=0, n_boot=50)
    assert rep.max_z > 1e6 and rep.verdict == "discrepant"
    assert rep.hit_frequency_a == 1.0 and rep.hit_frequency_b == 0.0


def test_diagnostic_strong_forcing_mixes():
    g = Grid1D(0.0, 1.0, 400)
    basis = solve_dirichlet_eigs(builtin_potential(g, "zero"), 6)
    Bq = coupling_matrix(builtin_potential(g, "linear"), basis)
    e1, e2 = np.eye(6, dtype=complex)[:2]
    rep = uniqueness_diagnostic(e1, e2, 300, 10, RandomAmplitudeSpec.harmonic(10.0, 6),
                                basis, Bq, seed=0, n_boot=200)
    assert rep.verdict == "consistent"


def test_diagnostic_preconditions():
    c = np.eye(4, dtype=complex)[0]
    with pytest.raises(ValueError):
        uniqueness_diagnostic(c, c, 10, 5, SPEC, BASIS, B)
    with pytest.raises(ValueError):
        uniqueness_diagnostic(c, c, 10, 10, SPEC, BASIS, B, burn_in=10)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_chain_stays_on_sphere(seed):
    run = run_chain(np.eye(4, dtype=complex)[1], 5, seed, SPEC, BASIS, B)
    assert np.allclose(np.linalg.norm(run.states, axis=1), 1, atol=1e-10)
    assert isinstance(run, ChainRun) and run.seed == seed
