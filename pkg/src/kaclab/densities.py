"""Bi-Maxwellian generating function, its moments and the delta_N schedule."""
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError, ScheduleOutOfRangeError

LOG2PI = np.log(2.0 * np.pi)


def _sqnorm(v):
    v = np.asarray(v, dtype=float)
    return np.sum(v * v, axis=-1)


def log_maxwellian_pdf(v, a, d=None):
    """log M_a(v); ``v`` has shape (..., d). Pass ``d`` to treat ``v`` as |v|."""
    if not a > 0:
        raise ParameterDomainError(f"variance parameter must be positive, got {a}")
    if d is None:
        v = np.asarray(v, dtype=float)
        d = v.shape[-1]
        r2 = _sqnorm(v)
    else:
        r2 = np.asarray(v, dtype=float) ** 2
    return -0.5 * d * (LOG2PI + np.log(a)) - r2 / (2.0 * a)


def maxwellian_pdf(v, a, d=None):
    return np.exp(log_maxwellian_pdf(v, a, d))


@dataclass(frozen=True)
class GeneratingFunction:
    """f = delta*M_{a1} + (1-delta)*M_{a2} in R^d.

    With ``single_a`` set the object degenerates to one Maxwellian M_a (used
    by the closed-form oracles); ``delta`` is then ignored.
    """

    d: int
    delta: float = 0.25
    single_a: float = None

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterDomainError(f"dimension must be a positive integer, got {self.d}")
        if self.single_a is not None:
            if not self.single_a > 0:
                raise ParameterDomainError("single_a must be positive")
            return
        if not (0.0 < self.delta < 0.5):
            raise ParameterDomainError(f"delta must lie in (0, 1/2), got {self.delta}")

    @classmethod
    def maxwellian(cls, d, a=None):
        """Single-Maxwellian mode; default a = 1/(2d) gives unit second moment."""
        return cls(d=d, delta=0.25, single_a=1.0 / (2 * d) if a is None else a)

    @property
    def is_single(self):
        return self.single_a is not None

    @property
    def components(self):
        """List of (weight, variance) pairs."""
        if self.is_single:
            return [(1.0, self.single_a)]
        dl, d = self.delta, self.d
        return [(dl, 1.0 / (2 * d * dl)), (1.0 - dl, 1.0 / (2 * d * (1.0 - dl)))]

    @property
    def a1(self):
        return self.components[0][1]

    @property
    def a2(self):
        return self.components[-1][1]

    def logpdf(self, v):
        v = np.asarray(v, dtype=float)
        terms = [np.log(w) + log_maxwellian_pdf(v, a) for w, a in self.components]
        return np.logaddexp.reduce(np.stack(terms), axis=0)

    def pdf(self, v):
        return np.exp(self.logpdf(v))

    def logpdf_radial(self, r):
        """log f at any point of modulus r."""
        terms = [np.log(w) + log_maxwellian_pdf(r, a, self.d) for w, a in self.components]
        return np.logaddexp.reduce(np.stack(terms), axis=0)

    def pdf_radial(self, r):
        return np.exp(self.logpdf_radial(r))

    def moment2(self):
        return sum(w * self.d * a for w, a in self.components)

    def moment4(self):
        # E|V|^4 = a^2 d (d+2) for M_a
        d = self.d
        return sum(w * a * a * d * (d + 2) for w, a in self.components)

    def sample(self, n, rng):
        rng = np.random.default_rng(rng)
        comps = self.components
        if len(comps) == 1:
            scale = np.full(n, np.sqrt(comps[0][1]))
        else:
            pick = rng.random(n) < comps[0][0]
            scale = np.where(pick, np.sqrt(comps[0][1]), np.sqrt(comps[1][1]))
        return rng.standard_normal((n, self.d)) * scale[:, None]


def f_delta_pdf(v, g):
    return g.pdf(v)


def sigma_sq(g):
    """Variance of |V|^2 under g."""
    if g.is_single:
        a = g.single_a
        return 2.0 * g.d * a * a
    d, dl = g.d, g.delta
    return (d + 2) / (4.0 * d * dl * (1.0 - dl)) - 1.0


def mc_moments(g, n, rng):
    """Monte Carlo mean/SE of |V|^2, |V|^4 and the sample variance of |V|^2."""
    v = g.sample(n, rng)
    r2 = _sqnorm(v)
    r4 = r2 * r2
    return {
        "m2": r2.mean(), "m2_se": r2.std(ddof=1) / np.sqrt(n),
        "m4": r4.mean(), "m4_se": r4.std(ddof=1) / np.sqrt(n),
        "var_r2": r2.var(ddof=1),
        # delta-method SE of the sample variance
        "var_r2_se": np.sqrt(np.var((r2 - r2.mean()) ** 2, ddof=1) / n),
    }


def eta_window(beta, d):
    if not beta > 0:
        raise ParameterDomainError(f"beta must be positive, got {beta}")
    if d < 1:
        raise ParameterDomainError(f"bad dimension {d}")
    lo = 2.0 * beta / (1.0 + 2.0 * beta)
    hi = (3.0 + d) * beta / (1.0 + 3.0 * beta + d / 2.0 + d * beta)
    return lo, hi


def eta_mid(beta, d):
    lo, hi = eta_window(beta, d)
    return 0.5 * (lo + hi)


def min_admissible_N(eta):
    # smallest N >= 2 with N^-(1-eta) < 1/2
    n = int(np.floor(2.0 ** (1.0 / (1.0 - eta)))) + 1
    n = max(n, 2)
    while n ** (-(1.0 - eta)) >= 0.5:
        n += 1
    while n > 2 and (n - 1) ** (-(1.0 - eta)) < 0.5:
        n -= 1
    return n


def delta_schedule(N, eta):
    if not (0.0 < eta < 1.0):
        raise ParameterDomainError(f"eta must lie in (0,1), got {eta}")
    if N < 2:
        raise ParameterDomainError(f"N must be >= 2, got {N}")
    dl = float(N) ** (-(1.0 - eta))
    if dl >= 0.5:
        raise ScheduleOutOfRangeError(N, eta, min_admissible_N(eta))
    return dl


@dataclass(frozen=True)
class ScheduleParams:
    N: int
    eta: float
    beta: float
    d: int = 2

    def __post_init__(self):
        lo, hi = eta_window(self.beta, self.d)
        if not (lo < self.eta < hi):
            raise ParameterDomainError(
                f"eta={self.eta} outside the admissible window ({lo:.6g}, {hi:.6g})")
        delta_schedule(self.N, self.eta)

    @property
    def delta_N(self):
        return delta_schedule(self.N, self.eta)

    @property
    def generating_function(self):
        return GeneratingFunction(self.d, self.delta_N)

    @property
    def sigma_sq(self):
        return sigma_sq(self.generating_function)
