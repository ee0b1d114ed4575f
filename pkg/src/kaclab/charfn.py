"""Characteristic functions of (V, |V|^2), inversion to h^{*N}, and Z_N.

Fourier convention: F(p, t) = E exp(-2 pi i (p.V + t |V|^2)), inverse with +.
"""
from dataclasses import dataclass, asdict
import json
import warnings

import numpy as np
from scipy import integrate, special

from .densities import sigma_sq
from .errors import GridTooSmallError, ParameterDomainError
from .sphere import log_sphere_area

TWO_PI = 2.0 * np.pi
PI2 = np.pi ** 2


def _rho(p):
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        return np.abs(p)
    return np.sqrt(np.sum(p * p, axis=-1))


def h_hat_single(a, p, t, d=None):
    """Transform of M_a. ``p`` is a d-vector (last axis), or a modulus when ``d`` is given."""
    if not a > 0:
        raise ParameterDomainError("a must be positive")
    if d is None:
        p = np.asarray(p, dtype=float)
        d = p.shape[-1]
        rho = _rho(p)
    else:
        rho = np.abs(np.asarray(p, dtype=float))
    t = np.asarray(t, dtype=float)
    w = 1.0 + 4j * np.pi * a * t
    return np.exp(-2.0 * a * PI2 * rho ** 2 / w - 0.5 * d * np.log(w))


def h_hat_radial(g, rho, t):
    """Transform of g at |p| = rho."""
    rho = np.asarray(rho, dtype=float)
    t = np.asarray(t, dtype=float)
    out = 0.0
    for w, a in g.components:
        wt = 1.0 + 4j * np.pi * a * t
        out = out + w * np.exp(-2.0 * a * PI2 * rho ** 2 / wt - 0.5 * g.d * np.log(wt))
    return out


def h_hat(g, p, t):
    """Transform of g at a d-vector p (last axis) and time-frequency t."""
    return h_hat_radial(g, _rho(np.asarray(p, dtype=float)), t)


def gamma1_hat_radial(g, rho, t):
    rho = np.asarray(rho, dtype=float)
    t = np.asarray(t, dtype=float)
    s2 = sigma_sq(g)
    return np.exp(-2.0 * PI2 * rho ** 2 / g.d - TWO_PI * 1j * t - 2.0 * PI2 * s2 * t ** 2)


def gamma1_hat(g, p, t):
    return gamma1_hat_radial(g, _rho(np.asarray(p, dtype=float)), t)


def log_gamma_N_density(u, vnorm, N, g):
    """log gamma_N(u, v) for |v| = vnorm."""
    d = g.d
    s2 = sigma_sq(g)
    u = np.asarray(u, dtype=float)
    vnorm = np.asarray(vnorm, dtype=float)
    return (0.5 * d * np.log(d) - 0.5 * np.log(s2) - 0.5 * (d + 1) * np.log(N)
            - 0.5 * (d + 1) * np.log(TWO_PI)
            - d * vnorm ** 2 / (2.0 * N) - (u - N) ** 2 / (2.0 * s2 * N))


def gamma_N_density(u, v, N, g):
    """gamma_N at (u, v); v may be a d-vector (last axis) or a modulus."""
    v = np.asarray(v, dtype=float)
    vn = np.sqrt(np.sum(v * v, axis=-1)) if v.ndim >= 1 and v.shape[-1] == g.d else np.abs(v)
    return np.exp(log_gamma_N_density(u, vn, N, g))


def gamma_N_normalization(N, g):
    """Closed-form total mass: product of the u-Gaussian and v-Gaussian masses."""
    d = g.d
    s2 = sigma_sq(g)
    # int exp(-(u-N)^2/(2 s2 N)) du = sqrt(2 pi s2 N); int exp(-d|v|^2/(2N)) dv = (2 pi N/d)^{d/2}
    log_mass = (0.5 * np.log(TWO_PI * s2 * N) + 0.5 * d * np.log(TWO_PI * N / d)
                + 0.5 * d * np.log(d) - 0.5 * np.log(s2) - 0.5 * (d + 1) * np.log(N)
                - 0.5 * (d + 1) * np.log(TWO_PI))
    return float(np.exp(log_mass))


def gamma_N_lattice_mass(N, g, n_u=4001, n_v=2001, width=12.0):
    """Trapezoid integral of gamma_N on a Cartesian lattice over u and each v coordinate.

    The v-lattice is a tensor grid, so its sum factors into d identical 1-d sums.
    """
    d = g.d
    s = np.sqrt(sigma_sq(g) * N)
    u = np.linspace(N - width * s, N + width * s, n_u)
    x = np.linspace(-width * np.sqrt(N / d), width * np.sqrt(N / d), n_v)
    lu = log_gamma_N_density(u, 0.0, N, g)
    iu = integrate.trapezoid(np.exp(lu), u)
    ix = integrate.trapezoid(np.exp(-d * x * x / (2.0 * N)), x)
    return float(iu * ix ** d)


# --------------------------------------------------------------------------
# inversion


@dataclass
class CharFnGrid:
    """Quadrature settings for the inversion.

    ``rule`` is "binomial" (default: closed-form p-integral per mixture
    term) or "bessel" (radial rho-quadrature with the angular kernel,
    d in {2, 3}). ``t_max`` caps the panel region; beyond it an oscillatory
    tail integral is used when the envelope is not yet negligible.
    """

    rule: str = "binomial"
    nodes_per_panel: int = 24
    cycles_per_panel: float = 1.5
    t_max: float = None
    max_panels: int = 20000
    eps: float = 1e-17
    k_tail: float = 1e-22
    n_rho: int = 96
    rho_scale: float = 40.0
    tail: bool = True

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class LogNormalization:
    log_zn: float
    log_prefactor: float
    hN_value: float
    N: int = None
    E: float = None
    z_mod: float = None
    error_estimate: float = float("nan")


class _Terms:
    """Binomially expanded N-th power of the transform, integrated over p.

    G(t; z) = sum_k W_k A_1^k A_2^(N-k) (pi/C_k)^{d/2} exp(-pi^2 |z|^2 / C_k),
    with C_k = k c_1 + (N-k) c_2, c_i = 2 a_i pi^2 / (1 + 4 pi i a_i t).
    """

    def __init__(self, g, N, k_tail=1e-22):
        self.g, self.N, self.d = g, int(N), g.d
        comps = g.components
        if len(comps) == 1:
            self.ks = np.array([0])
            self.logw = np.array([0.0])
            self.a = (comps[0][1], comps[0][1])
        else:
            (w1, a1), (w2, a2) = comps
            k = np.arange(self.N + 1)
            logw = (special.gammaln(self.N + 1) - special.gammaln(k + 1)
                    - special.gammaln(self.N - k + 1) + k * np.log(w1) + (self.N - k) * np.log(w2))
            # keep everything up to the binomial tail, drop only negligible high k
            keep = (logw >= np.log(k_tail)) | (k <= self.N * w1)
            self.ks = k[keep]
            self.logw = logw[keep]
            self.a = (a1, a2)

    def means(self, zmod):
        """E[U] of each term given S = z (Gaussian regression, equal-variance approx)."""
        a1, a2 = self.a
        d, N = self.d, self.N
        tot = self.ks * a1 + (N - self.ks) * a2
        return d * tot + 0.0 * zmod

    def log_terms(self, t, zmod):
        """log of each term, shape (K, T) for t (T,)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a1, a2 = self.a
        d, N = self.d, self.N
        k = self.ks[:, None]
        w1 = 1.0 + 4j * np.pi * a1 * t
        w2 = 1.0 + 4j * np.pi * a2 * t
        c1 = 2.0 * a1 * PI2 / w1
        c2 = 2.0 * a2 * PI2 / w2
        C = k * c1[None, :] + (N - k) * c2[None, :]
        lt = (self.logw[:, None] - 0.5 * d * (k * np.log(w1)[None, :] + (N - k) * np.log(w2)[None, :])
              + 0.5 * d * (np.log(np.pi) - np.log(C)) - PI2 * zmod ** 2 / C)
        return lt

    def G(self, t, zmod):
        return np.exp(self.log_terms(t, zmod)).sum(axis=0)

    def log_envelope(self, t):
        lt = self.log_terms(t, 0.0)
        return np.logaddexp.reduce(lt.real, axis=0)


def _core_width(g, N):
    s2 = max(sigma_sq(g), 1e-3)
    return 1.0 / (TWO_PI * np.sqrt(s2 * N))


def _panel_edges(terms, g, N, f_max, grid):
    """Composite panel edges on [0, T]; returns (edges, T, log_env_at_T, log_env0)."""
    w0 = _core_width(g, N)
    lcyc = grid.cycles_per_panel / max(f_max, 1e-12)
    L0 = min(w0 / 2.0, lcyc)
    le0 = float(terms.log_envelope([0.0])[0])
    target = le0 + np.log(grid.eps)
    edges = [0.0]
    t = 0.0
    cap = np.inf if grid.t_max is None else grid.t_max
    le = le0
    while len(edges) <= grid.max_panels:
        L = min(max(L0, 0.25 * t), lcyc)
        t_new = t + L
        if t_new >= cap:
            t_new = cap
        edges.append(t_new)
        t = t_new
        if t >= cap:
            le = float(terms.log_envelope([t])[0])
            break
        if len(edges) % 8 == 0:
            le = float(terms.log_envelope([t])[0])
            if le < target:
                break
    else:
        le = float(terms.log_envelope([t])[0])
    le = float(terms.log_envelope([t])[0])
    return np.array(edges), t, le, le0


def _gl_nodes(edges, n):
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def _tail_qawf(terms, T, zmod, u, N):
    """int_T^inf G(t) e^{2 pi i t u} dt with the asymptotic phase factored out."""
    omega = TWO_PI * (u - zmod ** 2 / N)

    def gt(t):
        return terms.G(np.array([t]), zmod)[0] * np.exp(TWO_PI * 1j * t * zmod ** 2 / N)

    def re(t):
        return gt(t).real

    def im(t):
        return gt(t).imag

    if omega <= 0:
        return 0.0 + 0.0j, 0.0
    kw = dict(limlst=200, limit=400, epsabs=1e-16)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _qawf4(re, im, T, omega, kw)


def _qawf4(re, im, T, omega, kw):
    c1, e1 = integrate.quad(re, T, np.inf, weight="cos", wvar=omega, **kw)
    s1, e2 = integrate.quad(im, T, np.inf, weight="sin", wvar=omega, **kw)
    c2, e3 = integrate.quad(im, T, np.inf, weight="cos", wvar=omega, **kw)
    s2, e4 = integrate.quad(re, T, np.inf, weight="sin", wvar=omega, **kw)
    val = (c1 - s1) + 1j * (c2 + s2)
    return val, e1 + e2 + e3 + e4


def invert_lattice(g, N, z_mods, us, grid=None, return_error=False):
    """h^{*N}(z, u) on the product of |z| values and u values; shape (len(z), len(u))."""
    grid = grid or CharFnGrid()
    z_mods = np.atleast_1d(np.asarray(z_mods, dtype=float))
    us = np.atleast_1d(np.asarray(us, dtype=float))
    if grid.rule == "bessel":
        out = np.array([[_invert_bessel(g, N, zm, u, grid) for u in us] for zm in z_mods])
        return (out, np.zeros_like(out)) if return_error else out
    if grid.rule != "binomial":
        raise ParameterDomainError(f"unknown rule {grid.rule!r}")
    terms = _Terms(g, N, grid.k_tail)
    means = terms.means(0.0)
    lo = np.min(z_mods) ** 2 / N
    f_max = max(np.max(np.abs(us[:, None] - means[None, :])),
                np.max(np.abs(us - lo)), np.max(np.abs(us - np.max(z_mods) ** 2 / N)), 1.0)
    edges, T, le_T, le0 = _panel_edges(terms, g, N, f_max, grid)
    nodes, weights = _gl_nodes(edges, grid.nodes_per_panel)
    need_tail = le_T > le0 + np.log(grid.eps)
    if need_tail and not grid.tail:
        raise GridTooSmallError(
            f"envelope at t_max={T:.4g} is {np.exp(le_T - le0):.3g} of its peak", suggested_t_max=2 * T)
    phase = np.exp(TWO_PI * 1j * np.outer(nodes, us))
    out = np.empty((z_mods.size, us.size))
    err = np.zeros_like(out)
    for iz, zm in enumerate(z_mods):
        Gw = terms.G(nodes, zm) * weights
        vals = Gw @ phase
        for iu, u in enumerate(us):
            if u <= zm ** 2 / N:
                out[iz, iu] = 0.0
                continue
            v = vals[iu]
            if need_tail:
                tv, te = _tail_qawf(terms, T, zm, u, N)
                v = v + tv
                err[iz, iu] = 2 * te
            out[iz, iu] = 2.0 * v.real
    if return_error:
        return out, err
    return out


def invert_pairs(g, N, z_mods, us, grid=None):
    """h^{*N}(z_i, u_i) for paired arrays (no tensor product)."""
    grid = grid or CharFnGrid()
    z_mods = np.atleast_1d(np.asarray(z_mods, dtype=float))
    us = np.atleast_1d(np.asarray(us, dtype=float))
    if grid.rule != "binomial":
        return np.array([_invert_bessel(g, N, zm, u, grid) for zm, u in zip(z_mods, us)])
    terms = _Terms(g, N, grid.k_tail)
    means = terms.means(0.0)
    f_max = max(np.max(np.abs(us[:, None] - means[None, :])),
                np.max(np.abs(us - z_mods ** 2 / N)), 1.0)
    edges, T, le_T, le0 = _panel_edges(terms, g, N, f_max, grid)
    nodes, weights = _gl_nodes(edges, grid.nodes_per_panel)
    need_tail = le_T > le0 + np.log(grid.eps)
    out = np.zeros(z_mods.size)
    for i, (zm, u) in enumerate(zip(z_mods, us)):
        if u <= zm ** 2 / N:
            continue
        v = np.sum(terms.G(nodes, zm) * weights * np.exp(TWO_PI * 1j * nodes * u))
        if need_tail:
            v = v + _tail_qawf(terms, T, zm, u, N)[0]
        out[i] = 2.0 * v.real
    return out


def invert_radial(g, N, z_mod, u, grid=None):
    """h^{*N}(z, u) at a single point (|z| = z_mod)."""
    return float(invert_lattice(g, N, [z_mod], [u], grid)[0, 0])


def _angular_kernel(d, x):
    if d == 2:
        return TWO_PI * special.j0(x)
    if d == 3:
        return 4.0 * np.pi * np.sinc(x / np.pi)
    raise ParameterDomainError("the radial rule supports d = 2 and d = 3 only")


def _invert_bessel(g, N, zmod, u, grid):
    """Radial rho-quadrature of the transform power, then panels in t."""
    d = g.d
    if d not in (2, 3):
        raise ParameterDomainError("the radial rule supports d = 2 and d = 3 only")
    if u <= zmod ** 2 / N:
        return 0.0
    terms = _Terms(g, N, grid.k_tail)
    f_max = max(np.max(np.abs(u - terms.means(0.0))), abs(u - zmod ** 2 / N), 1.0)
    edges, T, le_T, le0 = _panel_edges(terms, g, N, f_max, grid)
    if le_T > le0 + np.log(1e-12):
        raise GridTooSmallError("radial rule needs the envelope to vanish inside t_max",
                                suggested_t_max=2 * T)
    tn, tw = _gl_nodes(edges, grid.nodes_per_panel)
    x, xw = np.polynomial.legendre.leggauss(grid.n_rho)
    x = 0.5 * (x + 1.0)
    xw = 0.5 * xw
    recs = []
    for w, a in g.components:
        recs.append(2.0 * a * PI2 / (1.0 + 16.0 * PI2 * a * a * tn ** 2))
    min_re = np.min(np.stack(recs), axis=0)
    rmax = np.sqrt(grid.rho_scale / (N * min_re))
    rho = rmax[:, None] * x[None, :]
    hh = h_hat_radial(g, rho, tn[:, None])
    powN = np.exp(N * np.log(hh))
    kern = _angular_kernel(d, TWO_PI * rho * zmod)
    inner = (powN * kern * rho ** (d - 1) * xw[None, :]).sum(axis=1) * rmax
    val = np.sum(inner * tw * np.exp(TWO_PI * 1j * tn * u))
    return 2.0 * val.real


def log_prefactor(N, d, u, z_mod):
    """log of |S^{d(N-1)-1}| (u - |z|^2/N)^{(d(N-1)-2)/2} / (2 N^{d/2})."""
    x = u - z_mod ** 2 / N
    return (log_sphere_area(d * (N - 1)) + 0.5 * (d * (N - 1) - 2) * np.log(x)
            - np.log(2.0) - 0.5 * d * np.log(N))


def z_n(g, N, E, z=None, grid=None):
    """log Z_N(g, sqrt(E), z) via Fourier inversion of the couple density."""
    d = g.d
    zmod = 0.0 if z is None else float(np.linalg.norm(np.atleast_1d(z)))
    if not E > zmod ** 2 / N:
        raise ParameterDomainError("need E > |z|^2/N")
    vals, err = invert_lattice(g, N, [zmod], [E], grid, return_error=True)
    h = float(vals[0, 0])
    if not h > 0:
        raise GridTooSmallError(f"inversion returned nonpositive density {h:.3g}")
    lp = float(log_prefactor(N, d, E, zmod))
    return LogNormalization(float(np.log(h) - lp), lp, h, N, E, zmod, float(err[0, 0]) / h)


def log_zn_lattice(g, N, E_values, z_mods, grid=None):
    """log Z_N on a product lattice; -inf where the inversion is not positive."""
    h = invert_lattice(g, N, z_mods, E_values, grid)
    zz, EE = np.meshgrid(np.atleast_1d(z_mods), np.atleast_1d(E_values), indexing="ij")
    ok = (h > 0) & (EE > zz ** 2 / N)
    out = np.full(h.shape, -np.inf)
    out[ok] = np.log(h[ok]) - log_prefactor(N, g.d, EE[ok], zz[ok])
    return out


def z_n_gaussian_closed(a, d, N, E):
    """log Z_N for g = M_a: f^{(x)N} is constant on the sphere."""
    return -0.5 * d * N * np.log(TWO_PI * a) - E / (2.0 * a)


def h_gaussian_closed(a, d, N, z_mod, u):
    """h^{*N}(z, u) for g = M_a: normal in z times a Gamma law in u - |z|^2/N."""
    x = u - z_mod ** 2 / N
    if x <= 0:
        return 0.0
    m = 0.5 * d * (N - 1)
    lz = -0.5 * d * np.log(TWO_PI * N * a) - z_mod ** 2 / (2 * N * a)
    lu = (m - 1) * np.log(x) - x / (2 * a) - special.gammaln(m) - m * np.log(2 * a)
    return float(np.exp(lz + lu))


def z2_oracle(g, E, z=None, n=400):
    """log Z_2 by quadrature over the (d-1)-sphere of admissible v_1."""
    d = g.d
    z = np.zeros(d) if z is None else np.asarray(z, dtype=float).ravel()
    r2 = 0.5 * (E - 0.5 * z @ z)
    if r2 < 0:
        raise ParameterDomainError("need E >= |z|^2/2")
    if r2 <= 1e-15 * max(E, 1.0):
        v1 = 0.5 * z
        return float(g.logpdf(v1) + g.logpdf(z - v1))
    r = np.sqrt(r2)
    zn = np.linalg.norm(z)
    # integrand depends on v1 only via c = cos(angle to z)
    if d == 1:
        cs, ws = np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    elif d == 2:
        th = np.pi * (np.arange(n) + 0.5) / n
        cs, ws = np.cos(th), np.full(n, 1.0 / n)
    else:
        al = 0.5 * (d - 3)
        cs, ws = special.roots_jacobi(n, al, al)
        ws = ws / ws.sum()
    # |v1|^2 and |z - v1|^2 with v1 = z/2 + r w, z.w = zn c
    a2 = 0.25 * zn ** 2 + r2 + r * zn * cs
    b2 = 0.25 * zn ** 2 + r2 - r * zn * cs
    lv = g.logpdf_radial(np.sqrt(a2)) + g.logpdf_radial(np.sqrt(b2))
    m = lv.max()
    return float(m + np.log(np.sum(ws * np.exp(lv - m))))


def approx_error_scan(g, N, grid=None, u_values=None, v_values=None, n_u=121, n_v=41, width=6.0):
    """Sup over a (u, |v|) lattice of |h^{*N} - gamma_N| and the scaled form.

    Returns a dict with sup_error, scaled (Sigma N^{(d+1)/2} sup_error) and
    the argmax location.
    """
    d = g.d
    s2 = sigma_sq(g)
    if u_values is None:
        half = width * np.sqrt(s2 * N)
        u_values = np.linspace(N - half, N + half, n_u)
    if v_values is None:
        v_values = np.linspace(0.0, width * np.sqrt(N / d), n_v)
    u_values = np.asarray(u_values, dtype=float)
    v_values = np.asarray(v_values, dtype=float)
    h = invert_lattice(g, N, v_values, u_values, grid)
    gam = np.exp(log_gamma_N_density(u_values[None, :], v_values[:, None], N, g))
    diff = np.abs(h - gam)
    i, j = np.unravel_index(np.argmax(diff), diff.shape)
    sup = float(diff[i, j])
    return {
        "N": N, "sup_error": sup,
        "scaled": float(np.sqrt(s2) * N ** (0.5 * (d + 1)) * sup),
        "argmax_u": float(u_values[j]), "argmax_v": float(v_values[i]),
        "n_u": len(u_values), "n_v": len(v_values),
        "h": h, "gamma": gam, "u": u_values, "v": v_values,
    }
