"""Unitary propagation of the Galerkin-truncated bilinear system.

In eigenbasis coordinates the controlled equation reads
``i c' = (Lambda + u(t) B) c`` with ``Lambda = diag(lambda_j)``.  Each time
step freezes the control at the step midpoint and applies the exact
exponential of the resulting real symmetric matrix, so every step is
unitary to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import EigenBasis

SPHERE_TOL = 1e-9
_CHUNK = 4096


def normalize(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nrm = np.linalg.norm(c)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return c / nrm


def check_on_sphere(c, tol: float = SPHERE_TOL) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    drift = abs(np.vdot(c, c).real - 1.0)
    if drift > tol:
        raise ValueError(f"state is off the unit sphere (| |c|^2 - 1 | = {drift:.3e})")
    return c


def basis_state(n_modes: int, i: int) -> np.ndarray:
    """Indicator of (1-based) mode ``i``."""
    if not 1 <= i <= n_modes:
        raise IndexError(f"mode index {i} out of range 1..{n_modes}")
    c = np.zeros(n_modes, dtype=complex)
    c[i - 1] = 1.0
    return c


@dataclass(frozen=True)
class ControlSignal:
    """Real control sampled on the uniform grid ``t0, t0 + dt, ..., t1``.

    With ``compact=True`` (the default, used for steering controls) both end
    samples must vanish.  Random amplitudes on a unit interval are not
    compactly supported and are built with ``compact=False``.
    """

    t0: float
    t1: float
    dt: float
    samples: np.ndarray
    amplitude_cap: float
    compact: bool = True

    def __post_init__(self):
        if self.dt <= 0 or not self.t1 > self.t0:
            raise ValueError("need dt > 0 and t1 > t0")
        span = self.t1 - self.t0
        n = int(round(span / self.dt))
        if n < 1 or abs(n * self.dt - span) > 1e-9 * max(1.0, span):
            raise ValueError(f"dt={self.dt} does not divide the window length {span}")
        samples = np.array(self.samples, dtype=float)
        if samples.shape != (n + 1,):
            raise ValueError(f"expected {n + 1} samples, got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("control samples must be finite")
        if self.compact and (samples[0] != 0.0 or samples[-1] != 0.0):
            raise ValueError("compactly supported control must vanish at both ends")
        peak = float(np.max(np.abs(samples)))
        if peak > self.amplitude_cap * (1 + 1e-12):
            raise ValueError(f"max |u| = {peak:g} exceeds amplitude cap {self.amplitude_cap:g}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_steps(self) -> int:
        return len(self.samples) - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.samples[:-1] + self.samples[1:])

    @classmethod
    def zeros(cls, t0: float, t1: float, dt: float, amplitude_cap: float = 1.0):
        n = int(round((t1 - t0) / dt))
        return cls(t0, t1, dt, np.zeros(n + 1), amplitude_cap)

    @classmethod
    def from_function(cls, func, t0, t1, dt, amplitude_cap=None, compact=True):
        n = int(round((t1 - t0) / dt))
        samples = np.asarray(func(t0 + dt * np.arange(n + 1)), dtype=float)
        samples = np.broadcast_to(samples, (n + 1,)).copy()
        if compact:
            samples[0] = samples[-1] = 0.0
        cap = float(np.max(np.abs(samples))) if amplitude_cap is None else amplitude_cap
        return cls(t0, t1, dt, samples, cap, compact)

    def scaled(self, factor: float) -> "ControlSignal":
        return ControlSignal(
            self.t0, self.t1, self.dt, factor * self.samples,
            abs(factor) * self.amplitude_cap, self.compact,
        )

    def l2_norm_sq(self) -> float:
        return float(_trapezoid_weights(len(self.samples), self.dt) @ self.samples**2)


def concatenate_controls(signals, t0: float = 0.0) -> ControlSignal:
    """Play the signals back to back starting at ``t0`` (all must share dt)."""
    signals = list(signals)
    if not signals:
        raise ValueError("nothing to concatenate")
    dt = signals[0].dt
    if any(abs(s.dt - dt) > 1e-15 * dt for s in signals):
        raise ValueError("signals use different time steps")
    parts = [signals[0].samples]
    for s in signals[1:]:
        if s.samples[0] != parts[-1][-1]:
            raise ValueError("adjacent signals do not join continuously")
        parts.append(s.samples[1:])
    samples = np.concatenate(parts)
    cap = max(s.amplitude_cap for s in signals)
    compact = all(s.compact for s in signals)
    n = len(samples) - 1
    return ControlSignal(t0, t0 + n * dt, dt, samples, cap, compact)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), N)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _trapezoid_weights(m: int, dt: float) -> np.ndarray:
    w = np.full(m, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _check_ops(basis: EigenBasis, B):
    B = np.asarray(B, dtype=float)
    if B.shape != (basis.n_modes, basis.n_modes):
        raise ValueError(
            f"coupling matrix has shape {B.shape}, basis has {basis.n_modes} modes"
        )
    return B


def step_factors(mids: np.ndarray, lambdas: np.ndarray, B: np.ndarray, dt: float):
    """Eigenvectors and phase factors of ``exp(-i dt (Lambda + u B))``.

    Works on any leading shape of ``mids``; returns ``(vecs, phases)`` with
    ``vecs[..., :, m]`` the m-th eigenvector.
    """
    H = np.multiply.outer(mids, B)
    idx = np.arange(len(lambdas))
    H[..., idx, idx] += lambdas
    w, vecs = np.linalg.eigh(H)
    return vecs, np.exp(-1j * dt * w)


def free_evolve(c, basis: EigenBasis, t: float) -> np.ndarray:
    return np.exp(-1j * basis.lambdas * t) * np.asarray(c, dtype=complex)


def _advance(c, mids, dt, lambdas, B, record):
    free = np.exp(-1j * lambdas * dt)
    out = [c] if record else None
    active = np.flatnonzero(mids)
    if not record:
        # collapse stretches of zero control into single diagonal phases
        last = 0
        for lo in range(0, len(active), _CHUNK):
            block = active[lo:lo + _CHUNK]
            vecs, phases = step_factors(mids[block], lambdas, B, dt)
            for n, V, ph in zip(block, vecs, phases):
                if n > last:
                    c = np.exp(-1j * lambdas * dt * (n - last)) * c
                c = V @ (ph * (V.T @ c))
                last = n + 1
        if len(mids) > last:
            c = np.exp(-1j * lambdas * dt * (len(mids) - last)) * c
        return c
    for lo in range(0, len(mids), _CHUNK):
        chunk = mids[lo:lo + _CHUNK]
        nz = chunk != 0
        if nz.any():
            vecs, phases = step_factors(chunk[nz], lambdas, B, dt)
        k = 0
        for m in range(len(chunk)):
            if nz[m]:
                V = vecs[k]
                c = V @ (phases[k] * (V.T @ c))
                k += 1
            else:
                c = free * c
            out.append(c)
    return np.array(out)


def propagate(c0, u: ControlSignal, basis: EigenBasis, B) -> Trajectory:
    """Trajectory of the controlled system sampled on the control's grid."""
    B = _check_ops(basis, B)
    c0 = np.asarray(c0, dtype=complex)
    if c0.shape != (basis.n_modes,):
        raise ValueError(f"state has shape {c0.shape}, basis has {basis.n_modes} modes")
    states = _advance(c0, u.midpoints, u.dt, basis.lambdas, B, record=True)
    return Trajectory(u.times, states)


def propagate_final(c0, u: ControlSignal, basis: EigenBasis, B) -> np.ndarray:
    """Final state of :func:`propagate` without storing the trajectory."""
    B = _check_ops(basis, B)
    c0 = np.asarray(c0, dtype=complex)
    if c0.shape != (basis.n_modes,):
        raise ValueError(f"state has shape {c0.shape}, basis has {basis.n_modes} modes")
    return _advance(c0, u.midpoints, u.dt, basis.lambdas, B, record=False)


def propagate_many(states, samples, dt: float, basis: EigenBasis, B) -> np.ndarray:
    """Advance R states, each under its own sampled control, to the end.

    ``states`` has shape (R, N) and ``samples`` shape (R, M + 1).  Equivalent
    to R calls of :func:`propagate_final`, vectorized across replicas.
    """
    B = _check_ops(basis, B)
    c = np.array(states, dtype=complex)
    samples = np.asarray(samples, dtype=float)
    if not np.all(np.isfinite(samples)):
        raise ValueError("control samples must be finite")
    mids = 0.5 * (samples[:, :-1] + samples[:, 1:])
    vecs, phases = step_factors(mids, basis.lambdas, B, dt)
    vecsT = np.swapaxes(vecs, -1, -2)
    for m in range(mids.shape[1]):
        y = np.einsum("rij,rj->ri", vecsT[:, m], c)
        c = np.einsum("rij,rj->ri", vecs[:, m], phases[:, m] * y)
    return c


def step_integrals(lambdas, w: ControlSignal) -> np.ndarray:
    """``I[k, j] = int exp(-i (l_k - l_j) tau) w(tau) dtau`` for the stepwise control.

    ``w`` is taken as piecewise constant at its midpoint values, which is
    the control the propagator actually applies; each step's exponential is
    integrated exactly, ``dt sinc(omega dt / 2) e^{-i omega t_mid}``.
    """
    lam = np.asarray(lambdas, dtype=float)
    tmid = w.times[:-1] + 0.5 * w.dt
    E = np.exp(-1j * np.outer(lam, tmid))
    sums = (E * w.midpoints) @ E.conj().T
    omega = lam[:, None] - lam[None, :]
    return sums * (w.dt * np.sinc(omega * w.dt / (2 * np.pi)))


def linearized_solve(c0, w: ControlSignal, basis: EigenBasis, B, T: float) -> np.ndarray:
    """Modal coefficients of the linearized response at time ``T``.

    Solves ``i r' = Lambda r + w(t) B e^{-i Lambda t} c0``, ``r(0) = 0`` through
    its Duhamel formula.  The oscillatory integrals come from
    :func:`step_integrals`, so the result is the exact sigma-derivative of
    the discrete propagator and agrees with the continuous one to O(dt^2).
    """
    B = _check_ops(basis, B)
    if abs(w.t0) > 1e-12 or w.t1 > T + 1e-12:
        raise ValueError(f"control on [{w.t0}, {w.t1}] is not supported in [0, {T}]")
    c0 = np.asarray(c0, dtype=complex)
    lam = basis.lambdas
    integrals = step_integrals(lam, w)  # [k, j]
    return -1j * np.exp(-1j * lam * T) * ((B * integrals.T) @ c0)
