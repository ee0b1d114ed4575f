"""Geometry of the constrained sphere {sum v_i = z, sum |v_i|^2 = E}."""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ParameterDomainError


def log_sphere_area(m):
    """log |S^{m-1}| = log 2 + (m/2) log pi - log Gamma(m/2)."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 1):
        raise ParameterDomainError("sphere dimension m must be >= 1")
    return np.log(2.0) + 0.5 * m * np.log(np.pi) - gammaln(0.5 * m)


def log_ball_volume(k, radius):
    return 0.5 * k * np.log(np.pi) + k * np.log(radius) - gammaln(0.5 * k + 1.0)


@dataclass(frozen=True)
class BoltzmannSphereSpec:
    N: int
    d: int
    E: float
    z: tuple = field(default=None)

    def __post_init__(self):
        if self.N < 2 or self.d < 1:
            raise ParameterDomainError(f"need N >= 2 and d >= 1, got N={self.N}, d={self.d}")
        z = np.zeros(self.d) if self.z is None else np.asarray(self.z, dtype=float).ravel()
        if z.shape != (self.d,):
            raise ParameterDomainError("momentum must be a d-vector")
        object.__setattr__(self, "z", tuple(float(x) for x in z))
        if self.radius_sq < -1e-14 * max(1.0, self.E):
            raise ParameterDomainError("E - |z|^2/N must be nonnegative")

    @property
    def zvec(self):
        return np.array(self.z)

    @property
    def radius_sq(self):
        z = np.array(self.z)
        return self.E - z @ z / self.N

    @property
    def degenerate(self):
        return self.radius_sq <= 1e-14 * max(1.0, self.E)


def reduction_matrix(N):
    """Orthogonal N x N matrix whose last row is (1,...,1)/sqrt(N)."""
    if N < 2:
        raise ParameterDomainError("N must be >= 2")
    R = np.zeros((N, N))
    for j in range(1, N):
        R[j - 1, :j] = 1.0
        R[j - 1, j] = -float(j)
        R[j - 1] /= np.sqrt(j * (j + 1.0))
    R[N - 1] = 1.0 / np.sqrt(N)
    return R


def uniform_sample(spec, rng, size=None):
    """Uniform points on the sphere; returns (N, d) or (size, N, d)."""
    rng = np.random.default_rng(rng)
    shape = () if size is None else (int(size),)
    N, d = spec.N, spec.d
    mean = spec.zvec / N
    if spec.degenerate:
        return np.broadcast_to(mean, shape + (N, d)).copy()
    while True:
        g = rng.standard_normal(shape + (N, d))
        g -= g.mean(axis=-2, keepdims=True)
        nrm2 = np.sum(g * g, axis=(-2, -1))
        if np.all(nrm2 > 0):
            break
    scale = np.sqrt(spec.radius_sq / nrm2)
    return mean + g * scale[..., None, None]


def _marginal_pieces(spec, v):
    """Return (log prefactor, bracket, exponent) for the first j velocities v (..., j, d)."""
    v = np.asarray(v, dtype=float)
    N, d, E = spec.N, spec.d, spec.E
    j = v.shape[-2]
    if not (1 <= j <= N - 2):
        raise ParameterDomainError(f"need 1 <= j <= N-2, got j={j}, N={N}")
    z = spec.zvec
    s = v.sum(axis=-2)
    rest = z - s
    bracket = E - np.sum(v * v, axis=(-2, -1)) - np.sum(rest * rest, axis=-1) / (N - j)
    logpre = (log_sphere_area(d * (N - j - 1)) - log_sphere_area(d * (N - 1))
              + 0.5 * d * np.log(N / (N - j))
              - 0.5 * (d * (N - 1) - 2) * np.log(spec.radius_sq))
    expo = 0.5 * (d * (N - j - 1) - 2)
    return logpre, bracket, expo


def log_marginal_density(spec, v):
    """Log density of (v_1..v_j) under the uniform sphere law; v has shape (..., j, d)."""
    logpre, bracket, expo = _marginal_pieces(spec, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        if expo == 0:
            out = np.where(bracket > 0, logpre, -np.inf)
        else:
            out = np.where(bracket > 0, logpre + expo * np.log(np.where(bracket > 0, bracket, 1.0)),
                           -np.inf)
    return out


def marginal_density(spec, v):
    return np.exp(log_marginal_density(spec, v))


def inner_spec(spec, v):
    """Reduced sphere seen by the remaining N-j particles given v (j, d)."""
    v = np.asarray(v, dtype=float)
    j = v.shape[0]
    E2 = spec.E - float(np.sum(v * v))
    z2 = spec.zvec - v.sum(axis=0)
    Nr = spec.N - j
    # clamp tiny negative radius to the point mass
    E2 = max(E2, float(z2 @ z2) / Nr)
    return BoltzmannSphereSpec(Nr, spec.d, E2, tuple(z2))


def fubini_check(test_fn, spec, j, n_samples, rng):
    """Two Monte Carlo estimates of the sphere average of ``test_fn``.

    lhs samples the sphere directly. rhs draws (v_1..v_j) uniformly from the
    ball of radius sqrt(E) in R^{dj} and weights by the marginal density,
    completing the configuration with one uniform draw from the inner sphere.
    ``test_fn`` maps an (N, d) array to a float.
    Returns (lhs, lhs_se, rhs, rhs_se).
    """
    rng = np.random.default_rng(rng)
    d = spec.d
    pts = uniform_sample(spec, rng, size=n_samples)
    vals = np.array([test_fn(p) for p in pts])
    lhs, lhs_se = vals.mean(), vals.std(ddof=1) / np.sqrt(n_samples)

    k = d * j
    R = np.sqrt(spec.E)
    x = rng.standard_normal((n_samples, k))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x *= R * rng.random(n_samples)[:, None] ** (1.0 / k)
    v = x.reshape(n_samples, j, d)
    logw = log_marginal_density(spec, v) + log_ball_volume(k, R)
    w = np.exp(logw)
    terms = np.zeros(n_samples)
    for i in np.nonzero(w > 0)[0]:
        ins = inner_spec(spec, v[i])
        rest = uniform_sample(ins, rng)
        terms[i] = w[i] * test_fn(np.concatenate([v[i], rest], axis=0))
    rhs, rhs_se = terms.mean(), terms.std(ddof=1) / np.sqrt(n_samples)
    return lhs, lhs_se, rhs, rhs_se


def v1_moment_oracle(N, d, E=None, power=2):
    """E|v_1|^{2*power} under the uniform sphere law with z = 0.

    |v_1|^2 / (E (N-1)/N) ~ Beta(d/2, d(N-2)/2).
    """
    E = float(N) if E is None else E
    scale = E * (N - 1) / N
    a, b = 0.5 * d, 0.5 * d * (N - 2)
    m = 1.0
    for i in range(power):
        m *= (a + i) / (a + b + i)
    return m * scale ** power
