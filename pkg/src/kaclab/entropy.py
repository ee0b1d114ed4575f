"""Entropy H_N, the production pairing and the Gamma_N witness for the conditioned family

    F_N = prod f(v_i) / Z_N(f, sqrt(N), 0)  on the sphere E = N, z = 0.

Both functionals are reduced to low-dimensional integrals through the
conditional laws of one and two particles, which are ratios of couple
densities h^{*M} (see ``charfn``). The production is stored without the
factor N; ``gamma_ratio`` applies it exactly once.
"""
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import interpolate, stats

from .charfn import (CharFnGrid, invert_lattice, invert_pairs, log_gamma_N_density, z_n)
from .densities import GeneratingFunction, delta_schedule, eta_window
from .errors import ParameterDomainError
from .sphere import log_sphere_area
from .walk import collide, random_directions


@dataclass
class ConditionedFamily:
    g: GeneratingFunction
    N: int
    grid: CharFnGrid = field(default_factory=CharFnGrid)

    def __post_init__(self):
        if self.N < 4:
            raise ParameterDomainError("need N >= 4")
        self._zn = None

    @property
    def log_zn(self):
        if self._zn is None:
            self._zn = z_n(self.g, self.N, float(self.N), None, self.grid)
        return self._zn

    @property
    def hN0(self):
        """h^{*N}(0, N)."""
        return self.log_zn.hN_value


def _radial_nodes(rmax, n_panels=16, n=24):
    # panels refined toward the support edge where the weight vanishes
    s = np.linspace(0.0, 1.0, n_panels + 1)
    edges = rmax * (1.0 - (1.0 - s) ** 1.5)
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    r = (0.5 * (a + b) + 0.5 * (b - a) * x).ravel()
    wr = (0.5 * (b - a) * w).ravel()
    return r, wr


def v1_marginal(fam, r):
    """Density of v_1 under F_N at |v_1| = r (radial profile, not r-weighted)."""
    g, N = fam.g, fam.N
    r = np.asarray(r, dtype=float)
    h = invert_pairs(g, N - 1, r, N - r * r, fam.grid)
    return g.pdf_radial(r) * np.maximum(h, 0.0) / fam.hN0


def entropy_HN(fam, n_panels=16, n=24):
    """Returns dict with H_N, H_N/N, I_1, log Z_N and the marginal mass check."""
    g, N, d = fam.g, fam.N, fam.g.d
    rmax = np.sqrt(N - 1.0)
    r, wr = _radial_nodes(rmax, n_panels, n)
    dens = v1_marginal(fam, r)
    shell = np.exp(log_sphere_area(d)) * r ** (d - 1) * wr
    mass = float(np.sum(shell * dens))
    I1 = float(np.sum(shell * dens * g.logpdf_radial(r)))
    lz = fam.log_zn.log_zn
    H = N * I1 - lz
    return {"N": N, "H": H, "H_over_N": H / N, "I1": I1, "log_zn": lz,
            "log_zn_over_N": lz / N, "marginal_mass": mass}


def entropy_limit_components(g, N, grid=None, d=None):
    """The two pieces of H_N/N next to their large-N limits."""
    fam = ConditionedFamily(g, N, grid or CharFnGrid())
    res = entropy_HN(fam)
    d = g.d
    lim_I1 = 0.5 * d * (np.log(d) - np.log(np.pi) - 1.0)
    lim_lz = lim_I1 - 0.5 * d * np.log(2.0)
    return {
        "N": N, "I1": res["I1"], "I1_limit": lim_I1, "I1_gap": res["I1"] - lim_I1,
        "log_zn_over_N": res["log_zn_over_N"], "log_zn_over_N_limit": lim_lz,
        "log_zn_gap": res["log_zn_over_N"] - lim_lz,
        "H_over_N": res["H_over_N"], "H_over_N_limit": 0.5 * d * np.log(2.0),
    }


class PairWeight:
    """W(v1, v2) = h^{*(N-2)}(-(v1+v2), N - |v1|^2 - |v2|^2) / h^{*N}(0, N).

    mode "exact" interpolates an inverted lattice with a bicubic spline;
    mode "surrogate" replaces both couple densities by gamma_M.
    """

    def __init__(self, fam, s_max, u_min, mode="exact", n_s=64, n_u=160):
        self.fam, self.mode = fam, mode
        g, N = fam.g, fam.N
        self.M = N - 2
        if mode == "surrogate":
            self.log_den = float(log_gamma_N_density(N, 0.0, N, g))
            return
        if mode != "exact":
            raise ParameterDomainError(f"unknown weight mode {mode!r}")
        self.s = np.linspace(0.0, s_max, n_s)
        self.u = np.linspace(u_min, float(N), n_u)
        h = invert_lattice(g, self.M, self.s, self.u, fam.grid)
        self.spline = interpolate.RectBivariateSpline(self.s, self.u, h, kx=3, ky=3)
        self.den = fam.hN0

    def __call__(self, s, u):
        s = np.asarray(s, dtype=float)
        u = np.asarray(u, dtype=float)
        inside = u > s * s / self.M
        if self.mode == "surrogate":
            lw = log_gamma_N_density(u, s, self.M, self.fam.g) - self.log_den
            return np.where(inside, np.exp(lw), 0.0)
        w = self.spline.ev(np.clip(s, self.s[0], self.s[-1]), np.clip(u, self.u[0], self.u[-1]))
        return np.where(inside, np.maximum(w, 0.0), 0.0) / self.den


def production_terms(g, v1, v2, omega):
    """log(f1 f2 / f1' f2') (f1 f2 - f1' f2') / (f1 f2): nonnegative pointwise."""
    w1, w2 = collide(v1, v2, omega)
    la = g.logpdf(v1) + g.logpdf(v2)
    lb = g.logpdf(w1) + g.logpdf(w2)
    x = la - lb
    # (1 - e^{-x}) * x, stable for small x
    return x * -np.expm1(-x)


def entropy_production_DN(fam, mc_budget=200_000, rng=None, mode="exact", batch=100_000):
    """Monte Carlo estimate of the pairing <log F, (I-Q) F> (no factor N).

    (v1, v2) ~ f x f, omega uniform; points outside the two-particle
    domain contribute 0. Returns dict with value, se and D = N * value.
    """
    if mc_budget < 1:
        raise ParameterDomainError("mc_budget must be positive")
    rng = np.random.default_rng(rng)
    g, N, d = fam.g, fam.N, fam.g.d
    v1 = g.sample(mc_budget, rng)
    v2 = g.sample(mc_budget, rng)
    om = random_directions(mc_budget, d, rng)
    s = np.linalg.norm(v1 + v2, axis=1)
    u = N - np.sum(v1 * v1, axis=1) - np.sum(v2 * v2, axis=1)
    inside = u > s * s / (N - 2)
    if np.any(inside):
        s_max = float(s[inside].max()) * 1.001 + 1e-9
        u_min = float(u[inside].min())
    else:
        s_max, u_min = 1.0, 0.0
    W = PairWeight(fam, s_max, u_min, mode=mode)
    vals = np.zeros(mc_budget)
    for lo in range(0, mc_budget, batch):
        sl = slice(lo, lo + batch)
        w = W(s[sl], u[sl])
        t = production_terms(g, v1[sl], v2[sl], om[sl])
        vals[sl] = 0.5 * w * t
    val = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(mc_budget))
    return {"N": N, "pairing": val, "pairing_se": se, "D": N * val, "D_se": N * se,
            "min_term": float(vals.min()), "mode": mode, "budget": mc_budget}


def gamma_ratio(D, H):
    """D / H: an upper-bound witness for Gamma_N (D already carries the factor N)."""
    if not H > 0:
        raise ParameterDomainError("H_N must be positive")
    return D / H


@dataclass
class ScalingRow:
    N: int
    delta_N: float
    H_over_N: float
    log2_gap: float
    D_over_N: float
    D_over_N_se: float
    gamma_upper_witness: float
    production_shape: float
    status: str = "ok"


def loglog_slope(x, y):
    x, y = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(stats.linregress(x, y).slope)


def scaling_study(eta, beta, N_list, budget=200_000, d=2, seed=0, grid=None, mode="exact"):
    """Table of H/N, D/N and the Gamma witness along delta_N = N^-(1-eta)."""
    lo, hi = eta_window(beta, d)
    if not lo < eta < hi:
        raise ParameterDomainError(f"eta={eta} outside ({lo:.6g}, {hi:.6g})")
    if len(N_list) == 0:
        raise ParameterDomainError("empty N list")
    grid = grid or CharFnGrid()
    rows = []
    ss = np.random.SeedSequence(seed)
    for N, child in zip(N_list, ss.spawn(len(N_list))):
        try:
            dl = delta_schedule(N, eta)
            fam = ConditionedFamily(GeneratingFunction(d, dl), N, grid)
            H = entropy_HN(fam)
            P = entropy_production_DN(fam, budget, np.random.default_rng(child), mode=mode)
            hn = H["H_over_N"]
            rows.append(ScalingRow(
                N=N, delta_N=dl, H_over_N=hn, log2_gap=abs(0.5 * d * np.log(2.0) - hn),
                D_over_N=P["pairing"], D_over_N_se=P["pairing_se"],
                gamma_upper_witness=gamma_ratio(P["D"], H["H"]),
                production_shape=P["pairing"] / (dl * np.log(1.0 / dl))))
        except Exception as exc:  # row failure is recorded, the study continues
            rows.append(ScalingRow(N, float("nan"), *([float("nan")] * 6), status=f"failed: {exc}"))
    good = [r for r in rows if r.status == "ok"]
    fits = {}
    if len(good) >= 2:
        Ns = [r.N for r in good]
        fits = {
            "slope_log2_gap": loglog_slope(Ns, [r.log2_gap for r in good]),
            "slope_D_over_N": loglog_slope(Ns, [r.D_over_N for r in good]),
            "slope_gamma": loglog_slope(Ns, [r.gamma_upper_witness for r in good]),
            "target_slope_gamma": -(1.0 - eta),
        }
    return rows, fits


def rows_as_dicts(rows):
    return [asdict(r) for r in rows]
