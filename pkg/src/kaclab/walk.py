"""N-particle Kac collision process (continuous-time jump process, rate N)."""
from dataclasses import dataclass, field
import json

import numpy as np

from .errors import ParameterDomainError
from .sphere import BoltzmannSphereSpec, uniform_sample


def collide(vi, vj, omega):
    """Post-collision pair; works on single vectors or stacked (..., d) arrays."""
    vi = np.asarray(vi, dtype=float)
    vj = np.asarray(vj, dtype=float)
    mid = 0.5 * (vi + vj)
    half = 0.5 * np.linalg.norm(vi - vj, axis=-1)[..., None]
    return mid + half * omega, mid - half * omega


def random_directions(n, d, rng):
    w = rng.standard_normal((n, d))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


@dataclass
class ParticleSystem:
    velocities: np.ndarray
    time: float = 0.0
    E0: float = field(default=None)
    z0: np.ndarray = field(default=None)

    def __post_init__(self):
        self.velocities = np.array(self.velocities, dtype=float)
        if self.velocities.ndim != 2 or self.velocities.shape[0] < 2:
            raise ParameterDomainError("velocities must be an (N, d) array with N >= 2")
        if self.E0 is None:
            self.E0 = self.energy()
        if self.z0 is None:
            self.z0 = self.momentum()

    @property
    def N(self):
        return self.velocities.shape[0]

    @property
    def d(self):
        return self.velocities.shape[1]

    def energy(self):
        return float(np.sum(self.velocities ** 2))

    def momentum(self):
        return self.velocities.sum(axis=0)

    def drift(self):
        """Relative energy and momentum drift since construction."""
        de = abs(self.energy() - self.E0) / max(abs(self.E0), 1e-300)
        dz = np.linalg.norm(self.momentum() - self.z0) / max(np.sqrt(self.E0), 1e-300)
        return de, dz

    def copy(self):
        return ParticleSystem(self.velocities.copy(), self.time, self.E0, np.array(self.z0))


def initial_state(kind, N, d, E=None, rng=None, path=None):
    """Build an initial system: 'uniform', 'single_hot' or 'json' (needs path)."""
    E = float(N) if E is None else float(E)
    if kind == "json":
        with open(path) as fh:
            data = json.load(fh)
        v = np.asarray(data["velocities"] if isinstance(data, dict) else data, dtype=float)
        return ParticleSystem(v)
    if kind == "uniform":
        return ParticleSystem(uniform_sample(BoltzmannSphereSpec(N, d, E), rng))
    if kind == "single_hot":
        # all energy in particle 0, others share the recoil; total momentum zero
        v = np.zeros((N, d))
        v[0, 0] = 1.0
        v[1:, 0] = -1.0 / (N - 1)
        v *= np.sqrt(E / np.sum(v ** 2))
        return ParticleSystem(v)
    raise ParameterDomainError(f"unknown initial condition {kind!r}")


def _draw_pair(N, rng):
    i, j = rng.choice(N, size=2, replace=False)
    return (i, j) if i < j else (j, i)


def step(sys, rng, discrete=False):
    """One collision: exponential(rate N) clock, uniform pair, uniform direction."""
    N, d = sys.N, sys.d
    sys.time += 1.0 / N if discrete else rng.exponential(1.0 / N)
    i, j = _draw_pair(N, rng)
    om = random_directions(1, d, rng)[0]
    v = sys.velocities
    v[i], v[j] = collide(v[i], v[j], om)
    return sys


def kernel_bound(gamma, kind, E):
    if gamma < 0:
        raise ParameterDomainError("gamma must be nonnegative")
    if kind == "energy_form":
        bmax = (1.0 + E) ** (0.5 * gamma)
    elif kind == "relative_speed":
        # |vi - vj|^2 <= 2(|vi|^2 + |vj|^2) <= 2E
        bmax = (2.0 * E) ** (0.5 * gamma)
    else:
        raise ParameterDomainError(f"unknown kernel {kind!r}")
    if not np.isfinite(bmax) or bmax <= 0:
        raise ParameterDomainError("kernel bound is not finite and positive")
    return bmax


def kernel_value(vi, vj, gamma, kind):
    if kind == "energy_form":
        return (1.0 + vi @ vi + vj @ vj) ** (0.5 * gamma)
    dv = vi - vj
    r = np.hypot.reduce(dv) if dv.size else 0.0
    if gamma == 0:
        return 1.0
    return r ** gamma


def _thin_collide(sys, gamma, kind, rng, bmax):
    N, d = sys.N, sys.d
    i, j = _draw_pair(N, rng)
    om = random_directions(1, d, rng)[0]
    v = sys.velocities
    p = kernel_value(v[i], v[j], gamma, kind) / bmax
    if rng.random() < p:
        v[i], v[j] = collide(v[i], v[j], om)
        return True, p
    return False, p


def kernel_thinning_step(sys, gamma, kind, rng, bmax=None):
    """One proposal at rate N*B_max; accepted with probability B/B_max.

    Returns (sys, accepted).
    """
    if bmax is None:
        bmax = kernel_bound(gamma, kind, sys.E0)
    sys.time += rng.exponential(1.0 / (sys.N * bmax))
    return sys, _thin_collide(sys, gamma, kind, rng, bmax)[0]


def _batch_collisions(sys, n, rng, discrete=False):
    """Apply n rate-one-per-N collisions in a tight loop; random draws pre-batched."""
    N, d = sys.N, sys.d
    ii = rng.integers(0, N, size=n)
    jj = rng.integers(0, N - 1, size=n)
    jj = jj + (jj >= ii)
    om = random_directions(n, d, rng)
    dt = np.full(n, 1.0 / N) if discrete else rng.exponential(1.0 / N, size=n)
    v = sys.velocities
    for k in range(n):
        i, j = ii[k], jj[k]
        vi, vj = v[i], v[j]
        mid = 0.5 * (vi + vj)
        dv = vi - vj
        half = 0.5 * np.sqrt(dv @ dv)
        v[i] = mid + half * om[k]
        v[j] = mid - half * om[k]
    sys.time += dt.sum()
    return sys


def run_collisions(sys, n, rng, discrete=False, chunk=65536):
    done = 0
    while done < n:
        m = min(chunk, n - done)
        _batch_collisions(sys, m, rng, discrete)
        done += m
    return sys


OBSERVABLES = {
    "one": lambda v: 1.0,
    "v1_sq": lambda v: float(v[0] @ v[0]),
    "v1_4": lambda v: float((v[0] @ v[0]) ** 2),
    "mean_v4": lambda v: float(np.mean(np.sum(v * v, axis=1) ** 2)),
    "energy": lambda v: float(np.sum(v * v)),
}


def run(sys, t_end, observables=("v1_4",), rng=None, n_samples=100, kernel=None, gamma=0.0):
    """Evolve to t_end, recording observables at evenly spaced times.

    Returns a dict of arrays: time, one column per observable, plus
    acceptance: running mean of B/B_max over all proposals so far (1 for
    the unit kernel). Its expectation is the acceptance rate and it stays
    positive even when a short interval accepts nothing.
    """
    rng = np.random.default_rng(rng)
    fns = [(name, OBSERVABLES[name]) if isinstance(name, str) else (name.__name__, name)
           for name in observables]
    times = np.linspace(sys.time, t_end, n_samples + 1)[1:]
    out = {"time": [], "acceptance": []}
    for name, _ in fns:
        out[name] = []
    bmax = None if kernel is None else kernel_bound(gamma, kernel, sys.E0)
    psum, tot = 0.0, 0
    for ts in times:
        if kernel is None:
            # exact continuous-time evolution: Poisson number of jumps in the interval
            n = rng.poisson(sys.N * (ts - sys.time))
            _batch_collisions(sys, n, rng, discrete=True)
        else:
            while True:
                dt = rng.exponential(1.0 / (sys.N * bmax))
                if sys.time + dt > ts:
                    break
                sys.time += dt
                psum += _thin_collide(sys, gamma, kernel, rng, bmax)[1]
                tot += 1
        sys.time = ts
        out["time"].append(ts)
        out["acceptance"].append(psum / tot if tot else 1.0)
        for name, fn in fns:
            out[name].append(fn(sys.velocities))
    return {k: np.asarray(v) for k, v in out.items()}


def batch_means_se(x, n_batches=20):
    x = np.asarray(x, dtype=float)
    nb = min(n_batches, len(x))
    m = len(x) // nb
    means = x[: nb * m].reshape(nb, m).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / np.sqrt(nb))


def equilibrium_moment(N=64, d=2, n_samples=10_000, burn_in=None, spacing=None, rng=None,
                       init="single_hot"):
    """Time-average of |v_1|^4 after burn-in; returns (mean, se, samples).

    Samples are taken every ``spacing`` collisions (default N/2).
    """
    rng = np.random.default_rng(rng)
    sys = initial_state(init, N, d, rng=rng)
    burn_in = 40 * N * int(np.ceil(np.log(N) + 1)) if burn_in is None else burn_in
    spacing = max(1, N // 2) if spacing is None else spacing
    run_collisions(sys, burn_in, rng)
    vals = np.empty(n_samples)
    for k in range(n_samples):
        _batch_collisions(sys, spacing, rng)
        # average over particles: exchangeable, so each particle is a v_1 sample
        r2 = np.sum(sys.velocities ** 2, axis=1)
        vals[k] = np.mean(r2 * r2)
    mean, se = batch_means_se(vals)
    return mean, se, vals
