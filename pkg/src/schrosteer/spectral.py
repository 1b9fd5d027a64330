"""Dirichlet Sturm-Liouville eigenpairs, coupling matrices and H^s weights.

The operator is ``-u'' + V u`` on ``(a, b)`` with ``u(a) = u(b) = 0``,
discretized by second-order central differences on ``n`` interior points.
Grid functions are L^2-normalized with the quadrature weight ``h`` (the
boundary values are zero, so trapezoid and the plain h-sum coincide).

Mode indices in the public API are 1-based (``e_1`` is the ground state);
arrays are indexed from 0 internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    n: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need an integer n >= 2 interior points, got {self.n}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        """Interior nodes ``a + h, ..., b - h``."""
        return self.a + self.h * np.arange(1, self.n + 1)


@dataclass(frozen=True)
class SampledPotential:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"potential has shape {values.shape}, grid expects ({self.grid.n},)"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("potential contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid1D, func: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, np.broadcast_to(func(grid.x), (grid.n,)).astype(float))

    def __add__(self, other: "SampledPotential") -> "SampledPotential":
        _check_same_grid(self.grid, other.grid)
        return SampledPotential(self.grid, self.values + other.values)

    def scaled(self, factor: float) -> "SampledPotential":
        return SampledPotential(self.grid, factor * self.values)


def builtin_potential(grid: Grid1D, name: str, **params) -> SampledPotential:
    """Named potentials used by experiment configs.

    ``zero``; ``constant(value)``; ``linear(slope=1, intercept=0)``;
    ``quadratic(coef=1, center=0)``; ``well(depth=1, center=mid, width=0.1)``
    (a Gaussian dip of the given depth).
    """
    x = grid.x
    if name == "zero":
        values = np.zeros_like(x)
    elif name == "constant":
        values = np.full_like(x, float(params.get("value", 0.0)))
    elif name == "linear":
        values = float(params.get("slope", 1.0)) * x + float(params.get("intercept", 0.0))
    elif name == "quadratic":
        values = float(params.get("coef", 1.0)) * (x - float(params.get("center", 0.0))) ** 2
    elif name == "well":
        center = float(params.get("center", 0.5 * (grid.a + grid.b)))
        width = float(params.get("width", 0.1 * (grid.b - grid.a)))
        if width <= 0:
            raise ValueError("well width must be positive")
        values = -float(params.get("depth", 1.0)) * np.exp(-(((x - center) / width) ** 2))
    else:
        raise ValueError(f"unknown built-in potential {name!r}")
    return SampledPotential(grid, values)


@dataclass(frozen=True)
class EigenBasis:
    """Lowest eigenpairs of the discretized operator.

    ``modes[j]`` is the j-th (0-based) eigenfunction sampled on ``grid.x``.
    ``shift`` is added to every eigenvalue wherever a positive spectrum is
    needed (H^s weights); the dynamics use the unshifted ``lambdas``.
    """

    grid: Grid1D
    lambdas: np.ndarray
    modes: np.ndarray
    shift: float = field(default=0.0)

    @property
    def n_modes(self) -> int:
        return len(self.lambdas)

    @property
    def shifted(self) -> np.ndarray:
        return self.lambdas + self.shift

    def gram(self) -> np.ndarray:
        return self.grid.h * self.modes @ self.modes.T

    def restricted(self, n_modes: int) -> "EigenBasis":
        """The same basis truncated to its lowest ``n_modes`` pairs."""
        if not 1 <= n_modes <= self.n_modes:
            raise ValueError(f"cannot restrict {self.n_modes} modes to {n_modes}")
        return EigenBasis(self.grid, self.lambdas[:n_modes], self.modes[:n_modes], self.shift)

    def synthesize(self, coeffs) -> np.ndarray:
        """Grid function ``sum_j c_j e_j``."""
        return np.asarray(coeffs) @ self.modes


def solve_dirichlet_eigs(V: SampledPotential, n_modes: int) -> EigenBasis:
    grid = V.grid
    if n_modes < 1:
        raise ValueError("n_modes must be positive")
    if n_modes > grid.n / 4:
        raise ValueError(
            f"grid too coarse: n_modes={n_modes} exceeds n/4 = {grid.n / 4:g}"
        )
    h2 = grid.h**2
    diag = 2.0 / h2 + V.values
    off = np.full(grid.n - 1, -1.0 / h2)
    lambdas, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_modes - 1))
    modes = vecs.T / np.sqrt(grid.h)
    # gauge: first entry that is clearly nonzero is positive
    for row in modes:
        k = np.argmax(np.abs(row) > 1e-8 * np.abs(row).max())
        if row[k] < 0:
            row *= -1.0
    if np.any(np.diff(lambdas) <= 0):
        raise ArithmeticError("computed spectrum is not strictly increasing")
    shift = max(0.0, 1.0 - lambdas[0])
    lambdas.setflags(write=False)
    modes.setflags(write=False)
    return EigenBasis(grid, lambdas, modes, shift)


def _check_same_grid(g1: Grid1D, g2: Grid1D):
    if g1 != g2:
        raise ValueError(f"grid mismatch: {g1} vs {g2}")


def coupling_matrix(Q: SampledPotential, basis: EigenBasis) -> np.ndarray:
    """``B[j, k] = <Q e_k, e_j>`` by h-weighted quadrature (real symmetric)."""
    _check_same_grid(Q.grid, basis.grid)
    E = basis.modes
    B = basis.grid.h * (E * Q.values) @ E.T
    return 0.5 * (B + B.T)


def sobolev_norm_sq(c, basis: EigenBasis, s: float) -> float:
    """``sum_j (lambda_j + shift)^s |c_j|^2``."""
    if s < 0:
        raise ValueError("Sobolev exponent must be nonnegative")
    c = np.asarray(c)
    if c.shape != (basis.n_modes,):
        raise ValueError(f"state has shape {c.shape}, basis has {basis.n_modes} modes")
    return float(np.sum(basis.shifted**s * np.abs(c) ** 2))


def project_away(c, i: int) -> np.ndarray:
    """Zero the component of (1-based) mode ``i``; no renormalization."""
    c = np.array(c, dtype=complex)
    if not 1 <= i <= len(c):
        raise IndexError(f"mode index {i} out of range 1..{len(c)}")
    c[i - 1] = 0.0
    return c
