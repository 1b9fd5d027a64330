"""Random-amplitude Schroedinger chain sampled at integer times.

On every unit interval the control is an independent draw

    eta(t) = sum_j b_j xi_j g_j(t),   t in [0, 1],

with an orthonormal temporal basis ``g_j`` and i.i.d. unit-variance noise
``xi_j``.  The state at integer times is a homogeneous Markov chain on the
unit sphere.  Randomness for step ``k`` of a chain with seed ``s`` comes
from ``SeedSequence(s, spawn_key=(k,))``, so any suffix of a run can be
regenerated from its starting state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlSignal, check_on_sphere, propagate_many
from .spectral import EigenBasis

BASIS_KINDS = ("cosine", "fourier")
NOISE_LAWS = ("normal", "laplace", "logistic")


def _temporal_basis(kind: str, J: int, t: np.ndarray) -> np.ndarray:
    g = np.empty((J, len(t)))
    g[0] = 1.0
    if kind == "cosine":
        for j in range(1, J):
            g[j] = np.sqrt(2.0) * np.cos(j * np.pi * t)
    elif kind == "fourier":
        for j in range(1, J):
            m = (j + 1) // 2
            trig = np.cos if j % 2 else np.sin
            g[j] = np.sqrt(2.0) * trig(2 * np.pi * m * t)
    else:
        raise ValueError(f"unknown temporal basis {kind!r}; choose from {BASIS_KINDS}")
    return g


def _draw(rng: np.random.Generator, law: str, size) -> np.ndarray:
    # all laws scaled to unit variance, with everywhere-positive densities
    if law == "normal":
        return rng.standard_normal(size)
    if law == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size)
    if law == "logistic":
        return rng.logistic(0.0, np.sqrt(3.0) / np.pi, size)
    raise ValueError(f"unknown noise law {law!r}; choose from {NOISE_LAWS}")


@dataclass(frozen=True)
class RandomAmplitudeSpec:
    """Law of the per-interval amplitude ``eta``.

    ``substeps`` fixes the propagation grid on [0, 1] (``dt = 1/substeps``).
    Zero coefficients are accepted (degenerate, noise-free chains) but then
    ``positive`` is False.
    """

    b: tuple
    basis_kind: str = "cosine"
    noise: str = "normal"
    substeps: int = 50

    def __post_init__(self):
        b = tuple(float(v) for v in np.atleast_1d(self.b))
        if not b or any(v < 0 or not np.isfinite(v) for v in b):
            raise ValueError("b must be a nonempty vector of finite nonnegative numbers")
        object.__setattr__(self, "b", b)
        if self.basis_kind not in BASIS_KINDS:
            raise ValueError(f"unknown temporal basis {self.basis_kind!r}")
        if self.noise not in NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.noise!r}")
        if int(self.substeps) != self.substeps or self.substeps < 2:
            raise ValueError("substeps must be an integer >= 2")

    @classmethod
    def harmonic(cls, scale: float = 0.3, J_trunc: int = 6, **kw):
        """``b_j = scale / j`` for ``j = 1..J_trunc``."""
        return cls(tuple(scale / j for j in range(1, J_trunc + 1)), **kw)

    @property
    def J_trunc(self) -> int:
        return len(self.b)

    @property
    def positive(self) -> bool:
        return all(v > 0 for v in self.b)

    @property
    def dt(self) -> float:
        return 1.0 / self.substeps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.substeps + 1)

    def basis_functions(self) -> np.ndarray:
        return _temporal_basis(self.basis_kind, self.J_trunc, self.times)

    def expected_l2_norm_sq(self) -> float:
        return float(np.sum(np.square(self.b)))


def step_rng(seed: int, k: int) -> np.random.Generator:
    """Generator for step ``k`` of the chain with master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))


def sample_eta_samples(spec: RandomAmplitudeSpec, rng: np.random.Generator, size=None):
    """Raw samples of eta on ``spec.times``; shape (size, substeps + 1) if size is given."""
    shape = (spec.J_trunc,) if size is None else (size, spec.J_trunc)
    xi = _draw(rng, spec.noise, shape)
    return (xi * np.asarray(spec.b)) @ spec.basis_functions()


def sample_eta(spec: RandomAmplitudeSpec, rng: np.random.Generator) -> ControlSignal:
    samples = sample_eta_samples(spec, rng)
    cap = float(np.max(np.abs(samples)))
    return ControlSignal(0.0, 1.0, spec.dt, samples, cap, compact=False)


def step_chain(c, spec: RandomAmplitudeSpec, rng: np.random.Generator,
               basis: EigenBasis, B) -> np.ndarray:
    c = check_on_sphere(c)
    samples = sample_eta_samples(spec, rng)
    return propagate_many(c[None, :], samples[None, :], spec.dt, basis, B)[0]


@dataclass
class ChainRun:
    seed: int
    states: np.ndarray  # shape (n_steps + 1, N)
    spec: RandomAmplitudeSpec
    start: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1


def run_chains(initial, n_steps: int, seeds, spec: RandomAmplitudeSpec, basis: EigenBasis,
               B, start: int = 0, record: bool = True):
    """Run one chain per seed, vectorized across chains.

    ``initial`` is one state (shared) or an array (R, N).  Returns an array
    of shape (R, n_steps + 1, N) if ``record`` else the final states (R, N).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    seeds = list(seeds)
    c = np.array(initial, dtype=complex)
    if c.ndim == 1:
        c = np.tile(c, (len(seeds), 1))
    for row in c:
        check_on_sphere(row)
    out = [c] if record else None
    for k in range(start, start + n_steps):
        samples = np.stack([sample_eta_samples(spec, step_rng(s, k)) for s in seeds])
        c = propagate_many(c, samples, spec.dt, basis, B)
        if record:
            out.append(c)
    return np.stack(out, axis=1) if record else c


def run_chain(c0, n_steps: int, seed: int, spec: RandomAmplitudeSpec, basis: EigenBasis,
              B, start: int = 0) -> ChainRun:
    """States at integer times ``start, ..., start + n_steps``."""
    states = run_chains(c0, n_steps, [seed], spec, basis, B, start=start)[0]
    return ChainRun(seed, states, spec, start)


def default_functionals(N: int, pair_limit: int = 4):
    """Names and callables of the diagnostic functional family.

    ``|c_j|^2`` for all j, plus ``Re(conj(c_j) c_k)`` and ``Im(conj(c_j) c_k)``
    for ``j < k <= pair_limit``.  Each callable maps states (..., N) to (...).
    """
    funcs = []
    for j in range(N):
        funcs.append((f"abs2_{j + 1}", lambda c, j=j: np.abs(c[..., j]) ** 2))
    for j in range(min(N, pair_limit)):
        for k in range(j + 1, min(N, pair_limit)):
            funcs.append((f"re_{j + 1}{k + 1}", lambda c, j=j, k=k: np.real(np.conj(c[..., j]) * c[..., k])))
            funcs.append((f"im_{j + 1}{k + 1}", lambda c, j=j, k=k: np.imag(np.conj(c[..., j]) * c[..., k])))
    return funcs


def empirical_average(run: ChainRun, functionals=None, burn_in: int = 0) -> np.ndarray:
    """Time averages over the states left after dropping the first ``burn_in``.

    ``functionals`` is a list of callables or (name, callable) pairs.
    """
    if burn_in >= max(run.n_steps, 1):
        raise ValueError("empty averaging window: burn_in >= n_steps")
    if functionals is None:
        functionals = default_functionals(run.states.shape[1])
    window = run.states[burn_in:]
    out = []
    for f in functionals:
        f = f[1] if isinstance(f, tuple) else f
        out.append(float(np.mean(np.broadcast_to(f(window), window.shape[:1]))))
    return np.array(out)


def distance_to_phase_orbit(states, target: int = 1) -> np.ndarray:
    """``min_theta ||c - e^{i theta} e_target||`` = ``sqrt(2 - 2|c_target|)``."""
    amp = np.abs(np.asarray(states)[..., target - 1])
    return np.sqrt(np.maximum(2.0 - 2.0 * amp, 0.0))


@dataclass
class UniquenessReport:
    names: list
    mean_a: np.ndarray
    mean_b: np.ndarray
    se_a: np.ndarray
    se_b: np.ndarray
    ci_a: np.ndarray
    ci_b: np.ndarray
    z: np.ndarray
    max_z: float
    threshold: float
    hit_frequency_a: float
    hit_frequency_b: float
    epsilon: float
    verdict: str
    n_steps: int
    replicas: int
    burn_in: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "exploratory": True,
            "max_z": self.max_z,
            "threshold": self.threshold,
            "n_steps": self.n_steps,
            "replicas": self.replicas,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "hit_frequency_a": self.hit_frequency_a,
            "hit_frequency_b": self.hit_frequency_b,
            "functionals": [
                {
                    "name": name,
                    "mean_a": float(self.mean_a[m]), "mean_b": float(self.mean_b[m]),
                    "se_a": float(self.se_a[m]), "se_b": float(self.se_b[m]),
                    "ci_a": [float(v) for v in self.ci_a[m]],
                    "ci_b": [float(v) for v in self.ci_b[m]],
                    "z": float(self.z[m]),
                }
                for m, name in enumerate(self.names)
            ],
        }


def _bootstrap_ci(values: np.ndarray, rng, n_boot: int, level: float = 0.95):
    R = values.shape[0]
    idx = rng.integers(0, R, size=(n_boot, R))
    means = values[idx].mean(axis=1)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2], axis=0)
    return np.stack([lo, hi], axis=-1)


def uniqueness_diagnostic(c0_a, c0_b, n_steps: int, replicas: int, spec: RandomAmplitudeSpec,
                          basis: EigenBasis, B, seed: int = 0, burn_in: int | None = None,
                          threshold: float = 3.0, n_boot: int = 1000, epsilon: float = 0.5,
                          target: int = 1) -> UniquenessReport:
    """Compare long-run averages of chains started from two initial states.

    Each side runs ``replicas`` chains with independent sub-seeds of
    ``seed``.  For every functional the per-replica time averages give a
    mean, a standard error and a bootstrap interval; ``z`` is the
    standardized difference of the two means.  The ``epsilon``-ball hitting
    frequency around the phase orbit of ``e_target`` probes irreducibility.
    Evidence only: a small ``max_z`` is consistent with, not a proof of, a
    unique stationary law.
    """
    if replicas < 10:
        raise ValueError("replicas must be >= 10")
    if burn_in is None:
        burn_in = n_steps // 10
    if not 0 <= burn_in < n_steps:
        raise ValueError("need 0 <= burn_in < n_steps")
    root = np.random.SeedSequence(seed)
    children = root.spawn(2 * replicas + 1)
    seeds = [int(ch.generate_state(1, dtype=np.uint64)[0]) for ch in children[:-1]]
    boot_rng = np.random.default_rng(children[-1])

    N = basis.n_modes
    funcs = default_functionals(N)
    names = [name for name, _ in funcs]
    initial = np.vstack([np.tile(check_on_sphere(c0_a), (replicas, 1)),
                         np.tile(check_on_sphere(c0_b), (replicas, 1))])
    traj = run_chains(initial, n_steps, seeds, spec, basis, B)  # (2R, n+1, N)
    window = traj[:, burn_in:]
    averages = np.stack([f(window).mean(axis=1) for _, f in funcs], axis=-1)  # (2R, F)
    avg_a, avg_b = averages[:replicas], averages[replicas:]

    mean_a, mean_b = avg_a.mean(axis=0), avg_b.mean(axis=0)
    se_a = avg_a.std(axis=0, ddof=1) / np.sqrt(replicas)
    se_b = avg_b.std(axis=0, ddof=1) / np.sqrt(replicas)
    diff = np.abs(mean_a - mean_b)
    pooled = np.sqrt(se_a**2 + se_b**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(pooled > 0, diff / pooled, np.where(diff > 1e-12, np.inf, 0.0))
    max_z = float(np.max(z))

    dist = distance_to_phase_orbit(traj, target)
    hit = (dist < epsilon).any(axis=1)

    if np.all(pooled == 0):
        verdict = "inconclusive" if max_z == 0 else "discrepant"
    else:
        verdict = "consistent" if max_z <= threshold else "discrepant"
    return UniquenessReport(
        names=names, mean_a=mean_a, mean_b=mean_b, se_a=se_a, se_b=se_b,
        ci_a=_bootstrap_ci(avg_a, boot_rng, n_boot), ci_b=_bootstrap_ci(avg_b, boot_rng, n_boot),
        z=z, max_z=max_z, threshold=threshold,
        hit_frequency_a=float(hit[:replicas].mean()), hit_frequency_b=float(hit[replicas:].mean()),
        epsilon=epsilon, verdict=verdict, n_steps=n_steps, replicas=replicas,
        burn_in=burn_in, seed=seed,
    )
