"""Coupling/non-resonance checks, eigenvalue sensitivities, genericity scans.

All tests of "nonzero" use explicit tolerances and report the offending
magnitudes.  Mode indices are 1-based.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .spectral import (
    EigenBasis, SampledPotential, coupling_matrix, solve_dirichlet_eigs,
)

MIN_RESONANCE_TOL = 1e-9
DEFAULT_COUPLING_TOL = 1e-8


@dataclass
class ConditionReport:
    target: int
    coupling_failures: list[int]
    resonances: list[tuple[int, int, int, float]]
    coupling_tol: float
    resonance_tol: float
    sigma: float | None = None
    couplings: list[float] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return not self.coupling_failures and not self.resonances

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "target": self.target,
            "coupling_tol": self.coupling_tol,
            "resonance_tol": self.resonance_tol,
            "coupling_failures": list(self.coupling_failures),
            "resonances": [
                {"j": j, "p": p, "q": q, "defect": d} for j, p, q, d in self.resonances
            ],
            "couplings": list(self.couplings),
            "satisfied": self.satisfied,
        }


def check_coupling(B, i: int, tol: float = DEFAULT_COUPLING_TOL) -> list[int]:
    """Modes ``j != i`` whose coupling ``|B[i, j]|`` is at most ``tol``."""
    B = np.asarray(B)
    if not 1 <= i <= len(B):
        raise IndexError(f"mode index {i} out of range 1..{len(B)}")
    row = np.abs(B[i - 1])
    return [j + 1 for j in range(len(B)) if j != i - 1 and row[j] <= tol]


def check_nonresonance(lambdas, i: int, tol: float) -> list[tuple[int, int, int, float]]:
    """Triples (j, p, q) with ``|l_i - l_j - l_p + l_q| <= tol``.

    Exhaustive over ordered pairs (p, q); ``j != i`` and ``{i, j} != {p, q}``.
    Each triple is reported in the orientation that satisfies the equation
    as written, so no triple appears twice.  ``tol`` below
    ``MIN_RESONANCE_TOL`` is raised to it.
    """
    lam = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lam) < 0):
        raise ValueError("eigenvalues must be ascending")
    tol = max(float(tol), MIN_RESONANCE_TOL)
    n = len(lam)
    gaps = lam[:, None] - lam[None, :]  # gaps[p, q] = l_p - l_q
    out = []
    for j in range(n):
        if j == i - 1:
            continue
        defect = np.abs(lam[i - 1] - lam[j] - gaps)
        for p, q in zip(*np.nonzero(defect <= tol)):
            if {p, q} == {i - 1, j}:
                continue
            out.append((j + 1, int(p) + 1, int(q) + 1, float(defect[p, q])))
    return out


def default_resonance_tol(lambdas) -> float:
    return 1e-6 * float(np.max(np.abs(lambdas)))


def check_conditions(basis: EigenBasis, B, i: int = 1, coupling_tol=DEFAULT_COUPLING_TOL,
                     resonance_tol=None) -> ConditionReport:
    if resonance_tol is None:
        resonance_tol = default_resonance_tol(basis.lambdas)
    B = np.asarray(B)
    return ConditionReport(
        target=i,
        coupling_failures=check_coupling(B, i, coupling_tol),
        resonances=check_nonresonance(basis.lambdas, i, resonance_tol),
        coupling_tol=float(coupling_tol),
        resonance_tol=max(float(resonance_tol), MIN_RESONANCE_TOL),
        couplings=[float(v) for v in B[i - 1]],
    )


def eigenvalue_perturbation_derivative(basis: EigenBasis, P: SampledPotential, k: int) -> float:
    """``d lambda_k(V + sigma P) / d sigma`` at 0, i.e. ``<P, e_k^2>``."""
    if P.grid != basis.grid:
        raise ValueError("perturbation and basis live on different grids")
    if not 1 <= k <= basis.n_modes:
        raise IndexError(f"mode index {k} out of range 1..{basis.n_modes}")
    return float(basis.grid.h * np.sum(P.values * basis.modes[k - 1] ** 2))


def gap_combination_derivative(basis: EigenBasis, P: SampledPotential, i, j, p, q) -> float:
    """Derivative of ``l_i - l_j - l_p + l_q`` along ``P``."""
    d = lambda k: eigenvalue_perturbation_derivative(basis, P, k)
    return d(i) - d(j) - d(p) + d(q)


def resonance_breaking_scan(V: SampledPotential, Q: SampledPotential, sigmas, i: int = 1,
                            N: int = 8, coupling_tol=DEFAULT_COUPLING_TOL,
                            resonance_tol=None) -> list[ConditionReport]:
    """Condition report for the pair (V + sigma Q, Q) at every sigma."""
    reports = []
    for sigma in sigmas:
        basis = solve_dirichlet_eigs(V + Q.scaled(sigma), N)
        B = coupling_matrix(Q, basis)
        report = check_conditions(basis, B, i, coupling_tol, resonance_tol)
        report.sigma = float(sigma)
        reports.append(report)
    return reports


SEARCH_BUDGET = 2_000_000


def _rational_values(bound: int) -> list[Fraction]:
    vals = {Fraction(p, q) for q in range(1, bound + 1) for p in range(-bound * q, bound * q + 1)}
    return sorted(vals, key=lambda f: (abs(f), -f))


def squared_mode_gram(basis: EigenBasis, N: int) -> np.ndarray:
    sq = basis.modes[:N] ** 2
    return basis.grid.h * sq @ sq.T


def rational_independence_test(basis: EigenBasis, N: int, denom_bound: int = 2,
                               tol: float = 1e-8):
    """Test ``{e_1^2, ..., e_N^2}`` for (rational) linear dependence.

    Returns ``(sigma_min, witness)``: the smallest eigenvalue of the Gram
    matrix ``<e_j^2, e_k^2>`` and, if found, a rational vector ``a`` (first
    nonzero entry 1, other entries ``p/q`` with ``q <= denom_bound`` and
    ``|p/q| <= denom_bound``) with ``||sum a_k e_k^2|| < tol``.  Brute force
    is skipped when the Gram bound ``sigma_min ||a||^2 >= tol^2`` already
    excludes every candidate.
    """
    if not 1 <= N <= basis.n_modes:
        raise ValueError(f"N={N} outside 1..{basis.n_modes}")
    # ||sum a_k e_k^2|| = ||R a|| with R from a QR of the sampled squares;
    # working with R instead of G = R^T R keeps residuals accurate near zero
    R = np.linalg.qr(np.sqrt(basis.grid.h) * (basis.modes[:N] ** 2).T, mode="r")
    sigma_min = float(np.linalg.svd(R, compute_uv=False)[-1] ** 2)
    if sigma_min >= tol**2:  # every candidate has ||a|| >= 1
        return sigma_min, None
    values = _rational_values(denom_bound)
    fvals = np.array([float(v) for v in values])
    best = None
    for lead in range(N):
        rest = N - lead - 1
        if len(values) ** rest > SEARCH_BUDGET:
            raise ValueError("rational search space exceeds budget; lower denom_bound")
        for combo in itertools.product(range(len(values)), repeat=rest):
            a = np.zeros(N)
            a[lead] = 1.0
            a[lead + 1:] = fvals[list(combo)]
            r = float(np.linalg.norm(R @ a))
            if r < tol and (best is None or r < best[0]):
                exact = [Fraction(0)] * lead + [Fraction(1)] + [values[c] for c in combo]
                best = (r, exact)
    return sigma_min, (None if best is None else best[1])
