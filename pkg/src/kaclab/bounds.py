"""Numerical validators for the Gaussian tail bounds, the transform envelopes
and the phase-space domain integrals of |h^N - gamma_1^N|.

Bounds with unspecified constants are checked in shape: the smallest
admissible constant is fitted on a declared sweep and reported.
"""
from dataclasses import dataclass, asdict
import json
import warnings

import numpy as np
from scipy import integrate, special

from .charfn import gamma1_hat_radial, h_hat_radial, h_hat_single
from .densities import GeneratingFunction, sigma_sq
from .errors import ParameterDomainError
from .sphere import log_sphere_area

PI2 = np.pi ** 2


@dataclass
class CheckReport:
    check: str
    params: dict
    margin: float
    fitted_constant: float
    status: str

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, default=float)


# --------------------------------------------------------------------------
# one-dimensional Gaussian tails


def gaussian_tail_sides(alpha, beta):
    """(lhs, rhs, abserr) for the three one-dimensional bounds."""
    def quad(fn, a, b):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            return integrate.quad(fn, a, b, epsabs=1e-300, epsrel=1e-12, limit=200)

    sa = np.sqrt(alpha)
    # substitute y = sqrt(alpha) x so the integrands are alpha-free
    l1, e1 = quad(lambda y: np.exp(-y * y), sa * beta, np.inf)
    l2, e2 = quad(lambda y: y * np.exp(-y * y), sa * beta, np.inf)
    l3, e3 = quad(lambda y: np.exp(-y * y), 0.0, sa * beta)
    lhs = np.array([l1 / sa, l2 / alpha, l3 / sa])
    err = np.array([e1 / sa, e2 / alpha, e3 / sa])
    g = np.exp(-0.5 * alpha * beta * beta)
    rhs = np.array([
        np.sqrt(np.pi / (4 * alpha)) * g,
        g / (2 * alpha),
        np.sqrt(np.pi / (4 * alpha)) * np.sqrt(-np.expm1(-2 * alpha * beta * beta)),
    ])
    return lhs, rhs, err


def gaussian_tail_bounds_check(alpha, beta, rtol=1e-10):
    if not (alpha > 0 and beta >= 0):
        raise ParameterDomainError("need alpha > 0 and beta >= 0")
    try:
        lhs, rhs, err = gaussian_tail_sides(alpha, beta)
    except integrate.IntegrationWarning as exc:
        return CheckReport("gaussian_tail", {"alpha": alpha, "beta": beta}, float("nan"),
                           float("nan"), f"inconclusive: {exc}")
    slack = err + rtol * rhs + 1e-300
    margins = rhs - lhs
    ok = bool(np.all(lhs <= rhs + slack))
    return CheckReport("gaussian_tail", {"alpha": float(alpha), "beta": float(beta)},
                       float(np.min(margins / np.maximum(rhs, 1e-300))), float("nan"),
                       "pass" if ok else "fail")


def gaussian_tail_fuzz(n, rng, lo=1e-6, hi=10.0):
    rng = np.random.default_rng(rng)
    ab = rng.uniform(lo, hi, size=(n, 2))
    viol, inconc = [], 0
    worst = np.inf
    for a, b in ab:
        r = gaussian_tail_bounds_check(a, b)
        if r.status == "fail":
            viol.append((a, b))
        elif r.status.startswith("inconclusive"):
            inconc += 1
        else:
            worst = min(worst, r.margin)
    return {"n": n, "violations": viol, "inconclusive": inconc, "min_rel_margin": float(worst)}


# --------------------------------------------------------------------------
# radial tail


def radial_tail_lhs(m, d, alpha, beta):
    """int_{|x|>beta} |x|^m exp(-alpha |x|^2) d^d x, via the regularised incomplete gamma."""
    s = 0.5 * (m + d)
    log_area = float(log_sphere_area(d)) if d >= 2 else np.log(2.0)
    return np.exp(log_area + special.gammaln(s) - s * np.log(alpha) - np.log(2.0)) \
        * special.gammaincc(s, alpha * beta * beta)


def radial_tail_lhs_quad(m, d, alpha, beta):
    area = np.exp(log_sphere_area(d)) if d >= 2 else 2.0
    val, _ = integrate.quad(lambda r: r ** (m + d - 1) * np.exp(-alpha * r * r), beta, np.inf)
    return area * val


def radial_shape_ratio(m, d, alpha, beta):
    """lhs * exp(alpha beta^2 / 2) * min(alpha^i) / max(beta^{m+d-2-2i}, 1)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    top = (m + d + 2) // 2
    amin = np.minimum.reduce([alpha ** i for i in range(1, top + 1)])
    pows = [beta ** e for e in range(m + d - 2, -1, -2)] + [np.ones_like(beta)]
    bmax = np.maximum.reduce(pows)
    lhs = radial_tail_lhs(m, d, alpha, beta)
    return lhs * np.exp(0.5 * alpha * beta * beta) * amin / bmax


def radial_tail_bound_check(m, d, n=4000, rng=0, alpha_range=(1.0, 100.0), beta_range=(0.0, 1.0)):
    """Fit the shape constant and the small-beta / large-alpha constant on a log-uniform sweep.

    Stability: the fitted sup on the first half of the sweep must be within 5%
    of the sup on the full sweep. For m + d < 2 the ratio grows like
    sqrt(alpha) as beta -> 0, so no finite constant exists; that case is
    reported as "unbounded".
    """
    if m < 0 or d < 1:
        raise ParameterDomainError("need m >= 0 and d >= 1")
    rng = np.random.default_rng(rng)
    la = rng.uniform(np.log(alpha_range[0]), np.log(alpha_range[1]), n)
    alpha = np.exp(la)
    beta = rng.uniform(beta_range[0], beta_range[1], n)
    beta = np.maximum(beta, 1e-12)
    ratio = radial_shape_ratio(m, d, alpha, beta)
    special_c = radial_tail_lhs(m, d, alpha, beta) * alpha * np.exp(0.5 * alpha * beta * beta)
    fit = float(np.max(ratio))
    fit_half = float(np.max(ratio[: n // 2]))
    fit_rem = float(np.max(special_c))
    fit_rem_half = float(np.max(special_c[: n // 2]))
    stable = abs(fit_half - fit) <= 0.05 * fit and abs(fit_rem_half - fit_rem) <= 0.05 * fit_rem
    if m + d < 2:
        status = "unbounded"
    else:
        status = "pass" if (np.isfinite(fit) and np.isfinite(fit_rem) and stable) else "unstable"
    rep = CheckReport("radial_tail", {"m": m, "d": d, "n": n,
                                      "alpha_range": list(alpha_range), "beta_range": list(beta_range)},
                      float("nan"), fit, status)
    rep.params["asymptotic_constant"] = fit_rem
    return rep


# --------------------------------------------------------------------------
# product envelope


def envelope_term(g, rho, t, k, j, N):
    """The j-th summand of the envelope, written with explicit exponents."""
    d, dl = g.d, g.delta
    s2 = sigma_sq(g)
    q1 = d * d * dl * dl + 4 * PI2 * t * t
    q2 = d * d * (1 - dl) ** 2 + 4 * PI2 * t * t
    log_b = special.gammaln(k + 1) - special.gammaln(j + 1) - special.gammaln(k - j + 1)
    lt = (log_b + j * np.log(dl) - 0.25 * d * j * np.log1p(4 * PI2 * t * t / (d * d * dl * dl))
          + (k - j) * np.log1p(-dl) - 0.25 * d * (k - j) * np.log1p(4 * PI2 * t * t / (d * d * (1 - dl) ** 2))
          - PI2 * rho * rho * (j * d * dl / q1 + (k - j) * d * (1 - dl) / q2 + 2.0 * (N - k - 1) / d)
          - 2 * PI2 * (N - k - 1) * s2 * t * t)
    return np.exp(lt)


def envelope_term_moduli(g, rho, t, k, j, N):
    """Same summand assembled from component moduli."""
    d, dl = g.d, g.delta
    m1 = np.abs(h_hat_single(g.a1, rho, t, d))
    m2 = np.abs(h_hat_single(g.a2, rho, t, d))
    gm = np.abs(gamma1_hat_radial(g, rho, t))
    return special.comb(k, j) * (dl * m1) ** j * ((1 - dl) * m2) ** (k - j) * gm ** (N - k - 1)


def envelope_lhs_rhs(g, rho, t, k, N):
    lhs = np.abs(h_hat_radial(g, rho, t)) ** k * np.abs(gamma1_hat_radial(g, rho, t)) ** (N - k - 1)
    rhs = sum(envelope_term(g, rho, t, k, jj, N) for jj in range(k + 1))
    return lhs, rhs


def product_envelope_check(g, k, j, N, samples=1000, rng=0, rho_max=3.0, t_max=3.0, rtol=1e-10):
    """Pointwise envelope check at random (p, t).

    Two assertions: |h|^k |gamma_1|^{N-k-1} <= the full sum over j, and the
    ``j``-th summand in explicit form equals its product-of-moduli form.
    """
    if not 0 <= j <= k <= N - 1:
        raise ParameterDomainError("need 0 <= j <= k <= N-1")
    rng = np.random.default_rng(rng)
    rho = rng.uniform(0, rho_max, samples)
    t = rng.uniform(-t_max, t_max, samples)
    lhs, rhs = envelope_lhs_rhs(g, rho, t, k, N)
    viol = lhs > rhs * (1 + rtol) + 1e-300
    te = envelope_term(g, rho, t, k, j, N)
    tm = envelope_term_moduli(g, rho, t, k, j, N)
    term_err = np.abs(te - tm) / np.maximum(np.abs(tm), 1e-300)
    term_bad = (term_err > 1e-9) & (tm > 1e-290)
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(rhs > 0, (rhs - lhs) / rhs, 0.0)
    nv = int(viol.sum() + term_bad.sum())
    return CheckReport("product_envelope", {"N": N, "k": k, "j": j, "delta": g.delta,
                                            "samples": samples},
                       float(np.min(margin)), float("nan"), "pass" if nv == 0 else f"fail:{nv}")


def product_envelope_fuzz(n, rng, d=2, beta=0.5, N_range=(4, 64), delta_range=(0.01, 0.49)):
    """Random (p, t, k, j, N, delta) tuples; returns violation count."""
    rng = np.random.default_rng(rng)
    viol = []
    worst = np.inf
    for _ in range(n):
        N = int(rng.integers(N_range[0], N_range[1] + 1))
        k = int(rng.integers(0, N))
        j = int(rng.integers(0, k + 1))
        dl = float(rng.uniform(*delta_range))
        g = GeneratingFunction(d, dl)
        rho = float(rng.exponential(1.0 / np.sqrt(N)))
        t = float(rng.standard_normal() * rng.choice([0.01, 0.1, 1.0]))
        lhs, rhs = envelope_lhs_rhs(g, rho, t, k, N)
        te = envelope_term(g, rho, t, k, j, N)
        tm = envelope_term_moduli(g, rho, t, k, j, N)
        bad = lhs > rhs * (1 + 1e-10) + 1e-300
        bad |= (abs(te - tm) > 1e-9 * abs(tm)) and tm > 1e-290
        if bad:
            viol.append({"N": N, "k": k, "j": j, "delta": dl, "rho": rho, "t": t})
        elif rhs > 0:
            worst = min(worst, float((rhs - lhs) / rhs))
    return {"n": n, "violations": viol, "min_rel_margin": worst}


# --------------------------------------------------------------------------
# mixture contraction


def mixture_modulus_sum(delta, t, d=2):
    t = np.asarray(t, dtype=float)
    x = 4 * PI2 * t * t / d ** 2
    return delta * (1 + x / delta ** 2) ** (-0.25 * d) + (1 - delta) * (1 + x / (1 - delta) ** 2) ** (-0.25 * d)


def t_edge(delta, beta, d=2):
    return d * delta ** (1 + beta) / (4 * np.pi)


def mixture_contraction_check(beta, d=2, delta_grid=None):
    """Fit K in S(t_edge) <= 1 - d delta^{1+2beta}/16 + K delta^{1+4beta} over a delta grid.

    Also reports the log-log slope of the margin 1 - S(t_edge) against delta
    on (0.3, 0.1, 0.03, 0.01), expected near 1 + 2 beta.
    """
    if delta_grid is None:
        delta_grid = np.geomspace(1e-4, 0.49, 400)
    dg = np.asarray(delta_grid, dtype=float)
    S = mixture_modulus_sum(dg, t_edge(dg, beta, d), d)
    K_each = (S - 1 + d * dg ** (1 + 2 * beta) / 16) / dg ** (1 + 4 * beta)
    K = float(np.max(K_each))
    held = np.geomspace(1.3e-4, 0.48, 997)
    Sh = mixture_modulus_sum(held, t_edge(held, beta, d), d)
    bound = 1 - d * held ** (1 + 2 * beta) / 16 + K * held ** (1 + 4 * beta)
    ok_hold = bool(np.all(Sh <= bound + 1e-12))
    ok_strict = bool(np.all(S < 1) and np.all(Sh < 1))
    slope_d = np.array([0.3, 0.1, 0.03, 0.01])
    marg = 1 - mixture_modulus_sum(slope_d, t_edge(slope_d, beta, d), d)
    slope = float(np.polyfit(np.log(slope_d), np.log(marg), 1)[0])
    status = "pass" if (ok_hold and ok_strict and np.isfinite(K)) else "fail"
    rep = CheckReport("mixture_contraction", {"beta": beta, "d": d, "grid_size": len(dg)},
                      float(np.min(1 - Sh)), K, status)
    rep.params["margin_slope"] = slope
    rep.params["expected_slope"] = 1 + 2 * beta
    rep.params["shape"] = "shape-verified"
    return rep


# --------------------------------------------------------------------------
# domain integrals


DOMAINS = ("large_t", "small_t_large_p", "small_t_small_p")


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    delta: float
    beta: float
    d: int = 2

    def __post_init__(self):
        if self.kind not in DOMAINS + ("full",):
            raise ParameterDomainError(f"unknown domain {self.kind!r}")

    @property
    def cut_t(self):
        return t_edge(self.delta, self.beta, self.d)

    @property
    def cut_p(self):
        return self.delta ** (0.5 + self.beta)


def predicted_rate(kind, N, delta, beta, d=2):
    """Decay factor of the domain bound with every unknown constant set to 1 (and xi = 0)."""
    s2 = (d + 2) / (4 * d * delta * (1 - delta)) - 1
    s = np.sqrt(s2)
    q = 1 - d * delta ** (1 + 2 * beta) / 16
    if kind == "large_t":
        e = d * d * s2 * delta ** (2 + 2 * beta) / 32
        return (N / ((N - 2) ** (0.5 * (d + 1)) * s) * np.exp(-(N - 2) * e)
                + N / s * q ** (N / 2) * np.exp(-e) + q ** (N - 5))
    if kind == "small_t_large_p":
        eta = delta ** (0.5 + beta)
        return N * delta ** (1 + beta) * np.exp(-(N - 2) * eta * eta / (4 * d)) / (N - 2)
    if kind == "small_t_small_p":
        return (delta ** (1.5 + 4 * beta + 0.5 * d + d * beta)
                + np.sqrt(N) * delta ** (1 + 3 * beta + 0.5 * d + d * beta)) / s
    raise ParameterDomainError(kind)


def _gl(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def _t_panels(a, b, scale, growth=1.25):
    edges = [a]
    t = a
    L = scale
    while t < b:
        t = min(b, t + L)
        edges.append(t)
        L = max(L, growth * L if t > 4 * scale else L)
    return np.array(edges)


def _rho_max(g, N, t, scale=50.0):
    rec = np.min([2 * a * PI2 / (1 + 16 * PI2 * a * a * t * t) for _, a in g.components], axis=0)
    r_h = np.sqrt(scale / (N * rec))
    r_g = np.sqrt(scale * g.d / (2 * PI2 * N))
    return np.maximum(r_h, r_g)


def _abs_diff_radial_integral(g, N, t, rlo, rhi, n_rho):
    """For each t: int_{rlo}^{rhi} |h^N - gamma_1^N| |S^{d-1}| rho^{d-1} drho (rhi may be per-t)."""
    d = g.d
    x, w = np.polynomial.legendre.leggauss(n_rho)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    rlo = np.broadcast_to(rlo, t.shape)
    rhi = np.broadcast_to(rhi, t.shape)
    L = np.maximum(rhi - rlo, 0.0)
    rho = rlo[:, None] + L[:, None] * x[None, :]
    tt = t[:, None]
    hN = np.exp(N * np.log(h_hat_radial(g, rho, tt)))
    gN = np.exp(N * np.log(gamma1_hat_radial(g, rho, tt)))
    area = np.exp(log_sphere_area(d))
    f = np.abs(hN - gN) * area * rho ** (d - 1)
    return (f * w[None, :]).sum(axis=1) * L


def _t_extent(g, N):
    # |h|^N <= S(t)^N; stop when S^N and the Gaussian both fall below 1e-16
    s2 = sigma_sq(g)
    ts = np.geomspace(1e-4, 1e4, 2000)
    S = np.max([mixture_modulus_sum(g.delta, ts, g.d)], axis=0)
    env = np.maximum(N * np.log(S) + 0.5 * g.d * np.log1p(ts ** 2), -2 * PI2 * N * s2 * ts ** 2)
    idx = np.nonzero(env < np.log(1e-16))[0]
    return float(ts[idx[0]]) if idx.size else 1e4


def domain_l1_integral(g, N, beta, domain, n_t=32, n_rho=64):
    """int over the domain of |h^N - gamma_1^N| dp dt (radial in p, both signs of t)."""
    if isinstance(domain, str):
        domain = DomainSpec(domain, g.delta, beta, g.d)
    tc, pc = domain.cut_t, domain.cut_p
    T = max(_t_extent(g, N), 2 * tc)
    scale = 0.25 / np.sqrt(max(sigma_sq(g), 1e-3) * N)

    def t_nodes(a, b):
        edges = _t_panels(a, b, min(scale, (b - a) / 4 if b > a else scale))
        nodes, weights = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            x, w = _gl(lo, hi, n_t)
            nodes.append(x)
            weights.append(w)
        return np.concatenate(nodes), np.concatenate(weights)

    kind = domain.kind
    total = 0.0
    if kind in ("large_t", "full"):
        a = tc if kind == "large_t" else 0.0
        t, w = t_nodes(a, T)
        total += 2 * np.sum(w * _abs_diff_radial_integral(g, N, t, 0.0, _rho_max(g, N, t), n_rho))
    if kind in ("small_t_large_p", "small_t_small_p"):
        t, w = t_nodes(0.0, tc)
        if kind == "small_t_small_p":
            vals = _abs_diff_radial_integral(g, N, t, 0.0, pc, n_rho)
        else:
            rmax = np.maximum(_rho_max(g, N, t), pc)
            vals = _abs_diff_radial_integral(g, N, t, pc, rmax, n_rho)
        total += 2 * np.sum(w * vals)
    return float(total)


def domain_report(g, N, beta, **kw):
    rows = []
    for kind in DOMAINS:
        v = domain_l1_integral(g, N, beta, kind, **kw)
        p = predicted_rate(kind, N, g.delta, beta, g.d)
        rows.append({"domain": kind, "value": v, "predicted": float(p),
                     "ratio": v / p if p > 0 else float("nan")})
    return rows


def total_l1_error(g, N, beta, **kw):
    """T(N) over the whole plane (sum of the three domains) and T * Sigma * N^{(d+1)/2}."""
    parts = {kind: domain_l1_integral(g, N, beta, kind, **kw) for kind in DOMAINS}
    T = sum(parts.values())
    return {"N": N, "T": T, "scaled": T * np.sqrt(sigma_sq(g)) * N ** (0.5 * (g.d + 1)),
            "parts": parts}
