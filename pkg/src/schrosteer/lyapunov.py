"""Lyapunov descent toward a target eigenstate.

The Lyapunov function is

    V(c) = alpha * sum_{j != i} (lambda_j + shift)^s |c_j|^2 + 1 - |c_i|^2,

which vanishes exactly on the phase orbit of ``e_i``.  Along the control
direction ``w`` at ``sigma = 0`` its derivative is ``int Phi(tau) w(tau)``
with an explicit trigonometric kernel ``Phi``; each steering iteration
builds a probe ``w`` with a positive pairing and backtracks on its
amplitude until V decreases.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import (
    ControlSignal, _trapezoid_weights, check_on_sphere, concatenate_controls,
    free_evolve, linearized_solve, propagate_final, step_integrals,
)
from .errors import DegenerateKernel, LineSearchFailed, Stalled
from .spectral import EigenBasis, project_away, sobolev_norm_sq

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LyapunovConfig:
    alpha: float
    s: float
    target: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.s < 0:
            raise ValueError(f"Sobolev exponent must be nonnegative, got {self.s}")
        if int(self.target) != self.target or self.target < 1:
            raise ValueError(f"target must be a mode index >= 1, got {self.target}")


def auto_alpha(c0, basis: EigenBasis, s: float, target: int = 1) -> float:
    """Weight making the H^s term at ``c0`` at most one half."""
    tail = sobolev_norm_sq(project_away(c0, target), basis, s)
    return 0.5 / max(1.0, tail)


def alpha_admissible(cfg: LyapunovConfig, basis: EigenBasis) -> bool:
    """False when ``alpha (lambda_j + shift)^s = -1`` for some mode."""
    return bool(np.min(np.abs(cfg.alpha * basis.shifted**cfg.s + 1.0)) > 1e-12)


def _weights(basis: EigenBasis, cfg: LyapunovConfig) -> np.ndarray:
    if cfg.target > basis.n_modes:
        raise IndexError(f"target {cfg.target} exceeds the {basis.n_modes} computed modes")
    wt = cfg.alpha * basis.shifted**cfg.s
    wt[cfg.target - 1] = -1.0
    return wt


def lyapunov_value(c, basis: EigenBasis, cfg: LyapunovConfig) -> float:
    c = np.asarray(c)
    tail = sobolev_norm_sq(project_away(c, cfg.target), basis, cfg.s)
    value = cfg.alpha * tail + 1.0 - abs(c[cfg.target - 1]) ** 2
    return max(float(value), 0.0)


def coercivity_constant(basis: EigenBasis, cfg: LyapunovConfig) -> float:
    """A constant C with ``C (1 + V(c)) >= ||c||_s`` on the unit sphere.

    ``||c||_s^2 <= mu_i^s + V(c) / alpha <= max(mu_i^s, 1/alpha) (1 + V)``
    and ``sqrt(1 + V) <= 1 + V``.
    """
    mu_i = basis.shifted[cfg.target - 1]
    return float(np.sqrt(max(mu_i**cfg.s, 1.0 / cfg.alpha)))


def phi_kernel(c0, basis: EigenBasis, B, cfg: LyapunovConfig, tgrid) -> np.ndarray:
    """Derivative kernel of V at ``c0`` sampled on ``tgrid``.

    Phi(tau) = 2 sum_{j<k} B_jk (w_j - w_k) Im(conj(c_j) c_k e^{i (l_j - l_k) tau})

    where ``w_j = alpha mu_j^s`` off target and ``w_i = -1``.
    """
    if not alpha_admissible(cfg, basis):
        raise ValueError(f"alpha={cfg.alpha} lies in the exceptional set")
    c0 = np.asarray(c0, dtype=complex)
    B = np.asarray(B, dtype=float)
    wt = _weights(basis, cfg)
    j, k = np.triu_indices(basis.n_modes, k=1)
    coef = 2.0 * B[j, k] * (wt[j] - wt[k]) * np.conj(c0[j]) * c0[k]
    keep = coef != 0
    omega = basis.lambdas[j[keep]] - basis.lambdas[k[keep]]
    tgrid = np.asarray(tgrid, dtype=float)
    return np.imag(np.exp(1j * np.multiply.outer(tgrid, omega)) @ coef[keep])


def kernel_pairing(phi, w: ControlSignal) -> float:
    """Trapezoid approximation of ``int Phi w`` on the control's grid."""
    return float(_trapezoid_weights(len(w.samples), w.dt) @ (np.asarray(phi) * w.samples))


def kernel_derivative(c0, w: ControlSignal, basis: EigenBasis, B, cfg: LyapunovConfig) -> float:
    """``int Phi w`` with each step of the (midpoint-frozen) control integrated
    exactly against the trigonometric kernel.

    Same quadrature as the propagator, so this is the derivative of V along
    ``w`` for the discrete dynamics; :func:`kernel_pairing` on sampled Phi
    differs from it by O(dt^2).
    """
    if abs(w.t0) > 1e-12:
        raise ValueError("kernel pairing expects a control starting at t = 0")
    if not alpha_admissible(cfg, basis):
        raise ValueError(f"alpha={cfg.alpha} lies in the exceptional set")
    c0 = np.asarray(c0, dtype=complex)
    wt = _weights(basis, cfg)
    integrals = step_integrals(basis.lambdas, w)  # [j, k] -> int e^{-i(l_j - l_k) tau} w
    X = (wt * np.conj(c0))[:, None] * c0[None, :] * np.asarray(B, dtype=float) * np.conj(integrals)
    return float(2.0 * np.imag(np.sum(X)))


def derivative_via_linearization(c0, w: ControlSignal, basis: EigenBasis, B,
                                 cfg: LyapunovConfig, T: float) -> float:
    """d/dsigma V(U_T(c0, sigma w)) at 0 from the linearized response.

    Inner-product form: with ``a = U_T(c0, 0)`` and ``r = R_T(w)``,
    ``2 alpha Re<A^{s/2} P a, A^{s/2} P r> - 2 Re(<a, e_i> <e_i, r>)``.
    """
    i = cfg.target
    a = free_evolve(c0, basis, T)
    r = linearized_solve(c0, w, basis, B, T)
    weights = basis.shifted**cfg.s
    Pa, Pr = project_away(a, i), project_away(r, i)
    sobolev_term = 2.0 * cfg.alpha * np.real(np.vdot(Pa, weights * Pr))
    overlap_term = -2.0 * np.real(a[i - 1] * np.conj(r[i - 1]))
    return float(sobolev_term + overlap_term)


def bump(n_intervals: int) -> np.ndarray:
    """Smooth bump ``exp(4 - 1/(x(1-x)))`` on n_intervals + 1 nodes; peak 1, ends 0."""
    x = np.arange(n_intervals + 1) / n_intervals
    out = np.zeros(n_intervals + 1)
    inner = slice(1, n_intervals)
    out[inner] = np.exp(4.0 - 1.0 / (x[inner] * (1.0 - x[inner])))
    return out


def default_horizon(basis: EigenBasis) -> float:
    return 4 * 2 * np.pi / float(np.min(np.diff(basis.lambdas)))


def default_dt(basis: EigenBasis, steps_per_period: int = 20) -> float:
    span = float(basis.lambdas[-1] - basis.lambdas[0])
    return 2 * np.pi / span / steps_per_period


@dataclass
class Probe:
    T: float
    control: ControlSignal
    pairing: float
    window_start: float

    def __iter__(self):
        return iter((self.T, self.control))


def choose_probe(c0, basis: EigenBasis, B, cfg: LyapunovConfig, horizon_max=None,
                 cap: float = 1.0, dt=None, kernel_tol: float = 1e-10) -> Probe:
    """Pick a window and a probe control with ``int Phi w > 0``.

    Scans Phi on ``[0, horizon_max]``, slides a window one slowest period
    long (``2 pi / min gap``) and keeps the window end T maximizing
    ``int bump Phi^2``.  The probe is ``bump * Phi`` on that window, scaled to
    peak amplitude ``cap``.
    """
    if lyapunov_value(c0, basis, cfg) <= 0:
        raise DegenerateKernel("V(c0) = 0: already at the target")
    horizon = default_horizon(basis) if horizon_max is None else float(horizon_max)
    dt = default_dt(basis) if dt is None else float(dt)
    n = max(int(np.ceil(horizon / dt - 1e-9)), 4)
    tgrid = dt * np.arange(n + 1)
    phi = phi_kernel(c0, basis, B, cfg, tgrid)
    if np.max(np.abs(phi)) <= kernel_tol:
        raise DegenerateKernel(
            f"|Phi| <= {kernel_tol:g} on [0, {tgrid[-1]:.4g}]"
        )
    period = 2 * np.pi / float(np.min(np.diff(basis.lambdas)))
    width = min(max(int(round(period / dt)), 4), n)
    window = bump(width)
    scores = np.correlate(phi**2, window, mode="valid")
    start = int(np.argmax(scores))
    end = start + width
    shaped = np.zeros(end + 1)
    shaped[start:end + 1] = window * phi[start:end + 1]
    peak = np.max(np.abs(shaped))
    if peak <= kernel_tol:
        raise DegenerateKernel("Phi vanishes on the selected window")
    w = ControlSignal(0.0, end * dt, dt, shaped * (cap / peak), cap)
    pairing = kernel_derivative(c0, w, basis, B, cfg)
    if not pairing > 0:
        raise DegenerateKernel(f"non-positive kernel pairing {pairing:g}")
    return Probe(end * dt, w, pairing, start * dt)


class LineSearchResult(NamedTuple):
    sigma: float
    value: float
    state: np.ndarray


def line_search_sigma(c0, probe: Probe, basis: EigenBasis, B, cfg: LyapunovConfig,
                      armijo: float = 0.1, sigma_init=None, m_max: int = 30) -> LineSearchResult:
    """Backtrack over ``sigma = -sigma_init 2^-m`` until Armijo decrease holds."""
    if not probe.pairing > 0:
        raise ValueError("probe must have a positive kernel pairing")
    w = probe.control
    v0 = lyapunov_value(c0, basis, cfg)
    if sigma_init is None:
        sigma_init = 0.5 * w.amplitude_cap / np.max(np.abs(w.samples))
    for m in range(m_max + 1):
        sigma = -sigma_init * 2.0**-m
        state = propagate_final(c0, w.scaled(sigma), basis, B)
        value = lyapunov_value(state, basis, cfg)
        if value <= v0 - armijo * abs(sigma) * probe.pairing:
            return LineSearchResult(sigma, value, state)
    raise LineSearchFailed(f"no Armijo step after {m_max} halvings (V0={v0:.6g})")


@dataclass
class SteeringReport:
    iterations: int
    lyapunov_history: np.ndarray
    final_overlap: float
    final_sobolev_dist: float
    accepted_sigmas: np.ndarray
    probe_horizons: np.ndarray
    converged: bool
    final_state: np.ndarray
    alpha: float
    alignment_time: float | None = None
    prepulse_count: int = 0
    pairings: np.ndarray = field(default_factory=lambda: np.zeros(0))
    retry_log: list = field(default_factory=list)
    control: ControlSignal | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "alpha": self.alpha,
            "final_overlap": self.final_overlap,
            "final_overlap_deficit": 1.0 - self.final_overlap,
            "final_sobolev_dist": self.final_sobolev_dist,
            "alignment_time": self.alignment_time,
            "prepulse_count": self.prepulse_count,
            "lyapunov_history": [float(v) for v in self.lyapunov_history],
            "accepted_sigmas": [float(v) for v in self.accepted_sigmas],
            "probe_horizons": [float(v) for v in self.probe_horizons],
            "pairings": [float(v) for v in self.pairings],
            "final_state_re": [float(v) for v in np.real(self.final_state)],
            "final_state_im": [float(v) for v in np.imag(self.final_state)],
            "retry_log": list(self.retry_log),
        }


def sobolev_distance_to_target(c, basis: EigenBasis, s: float, target: int) -> float:
    """H^s distance from c to the closest unit-phase multiple of ``e_target``."""
    c = np.asarray(c)
    mu = basis.shifted**s
    tail = float(np.sum(mu * np.abs(project_away(c, target)) ** 2))
    head = mu[target - 1] * (1.0 - abs(c[target - 1])) ** 2
    return float(np.sqrt(tail + head))


def phase_alignment_time(c, basis: EigenBasis, target: int):
    """Smallest free-evolution time making ``c_target`` real positive."""
    lam = float(basis.lambdas[target - 1])
    if lam == 0.0 or c[target - 1] == 0:
        return None
    theta = np.angle(c[target - 1]) % (2 * np.pi)
    tau = theta / lam if lam > 0 else (theta - 2 * np.pi) / lam
    return float(tau)


def prepulse(c, basis: EigenBasis, B, target: int, cap: float, dt: float, rank: int = 0):
    """Bump-windowed tone at the gap between the target and a populated mode.

    ``rank`` selects which populated mode (0 = largest amplitude) sets the
    frequency.  Returns the new state and the control used.
    """
    c = np.asarray(c, dtype=complex)
    order = [j for j in np.argsort(-np.abs(c)) if j != target - 1]
    p = order[rank % len(order)]
    omega = float(basis.lambdas[p] - basis.lambdas[target - 1])
    n = max(int(round(4 * 2 * np.pi / abs(omega) / dt)), 8)
    t = dt * np.arange(n + 1)
    samples = 0.5 * cap * bump(n) * np.cos(omega * t)
    u = ControlSignal(0.0, n * dt, dt, samples, cap)
    return propagate_final(c, u, basis, B), u


def steer_to_eigenstate(c0, basis: EigenBasis, B, cfg: LyapunovConfig, tol: float = 1e-2,
                        max_iter: int = 1000, horizon_max=None, cap: float = 1.0, dt=None,
                        armijo: float = 0.1, m_max: int = 30, kernel_tol: float = 1e-10,
                        retry_budget: int = 6, overlap_floor: float = 1e-3,
                        keep_control: bool = True) -> SteeringReport:
    """Iterate probe selection and line search until ``V < tol``."""
    c = check_on_sphere(c0)
    i = cfg.target
    dt = default_dt(basis) if dt is None else float(dt)
    base_horizon = default_horizon(basis) if horizon_max is None else float(horizon_max)
    controls, retry_log = [], []

    n_pre = 0
    while abs(c[i - 1]) < overlap_floor:
        if n_pre >= retry_budget:
            raise Stalled(f"overlap with e_{i} stayed below {overlap_floor}", retry_log)
        c, u = prepulse(c, basis, B, i, cap, dt, rank=n_pre)
        controls.append(u)
        retry_log.append(f"prepulse {n_pre}: |c_{i}| = {abs(c[i - 1]):.3e}")
        n_pre += 1

    history = [lyapunov_value(c, basis, cfg)]
    sigmas, horizons, pairings = [], [], []
    horizon = base_horizon
    failures = 0
    while history[-1] >= tol and len(sigmas) < max_iter:
        try:
            probe = choose_probe(c, basis, B, cfg, horizon, cap, dt, kernel_tol)
            result = line_search_sigma(c, probe, basis, B, cfg, armijo, m_max=m_max)
        except DegenerateKernel as exc:
            failures += 1
            retry_log.append(f"iter {len(sigmas)}: {exc}; doubling horizon")
            horizon *= 2
        except LineSearchFailed as exc:
            failures += 1
            retry_log.append(f"iter {len(sigmas)}: {exc}; halving horizon")
            horizon *= 0.5
        else:
            c = result.state
            history.append(result.value)
            sigmas.append(result.sigma)
            horizons.append(probe.T)
            pairings.append(probe.pairing)
            if keep_control:
                controls.append(probe.control.scaled(result.sigma))
            failures = 0
            horizon = base_horizon
            continue
        if failures > retry_budget:
            raise Stalled(f"{failures} consecutive probe failures", retry_log)
    log.debug("steering stopped after %d iterations, V=%.3e", len(sigmas), history[-1])

    control = None
    if keep_control and controls:
        control = concatenate_controls(controls)
    return SteeringReport(
        iterations=len(sigmas),
        lyapunov_history=np.array(history),
        final_overlap=float(abs(c[i - 1]) ** 2),
        final_sobolev_dist=sobolev_distance_to_target(c, basis, cfg.s, i),
        accepted_sigmas=np.array(sigmas),
        probe_horizons=np.array(horizons),
        converged=bool(history[-1] < tol),
        final_state=c,
        alpha=cfg.alpha,
        alignment_time=phase_alignment_time(c, basis, i),
        prepulse_count=n_pre,
        pairings=np.array(pairings),
        retry_log=retry_log,
        control=control,
    )
