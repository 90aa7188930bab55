"""Special functions, chi-square distributions, quadrature, and log-space primitives.

Everything that can become exponentially small lives in log space: the
noncentral chi-square mass below a fixed truncation point decays like
``exp(-nu/2 + sqrt(nu*a))`` as the noncentrality ``nu`` grows, which leaves
native doubles around ``nu ~ 1400``.  ``LogValue`` carries such quantities as
``(sign, log|x|)`` pairs, and the distribution routines here produce them
directly.

All functions are pure; the seeded sampler is stateless per ``(seed, stream)``
pair, so parallel Monte Carlo can partition streams without sharing state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as _sc

from .errors import ConvergenceError, DomainError

__all__ = [
    "LogValue",
    "ChiSquareSpec",
    "QuadratureRule",
    "log_sum_exp",
    "signed_log_sum_exp",
    "log_value_sum",
    "log_gamma",
    "log_gammainc_lower",
    "central_chisq_logpdf",
    "central_chisq_pdf",
    "central_chisq_cdf",
    "noncentral_chisq_logpdf",
    "noncentral_chisq_logcdf",
    "dawson",
    "gauss_legendre",
    "rng_normal_vector",
    "standard_normal_array",
]

_LN2 = math.log(2.0)
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Poisson-mixture series: a term this far (in log) below the running peak is
# dropped, i.e. a relative contribution below ~1e-19.
_SERIES_DROP = 45.0


# ---------------------------------------------------------------------------
# LogValue
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogValue:
    """A signed real number stored as ``sign * exp(log_magnitude)``.

    ``sign`` is -1, 0 or +1; ``sign == 0`` if and only if ``log_magnitude``
    is ``-inf``.  Round trip: ``LogValue.from_float(x).to_float() == x``
    whenever ``x`` is representable.
    """

    sign: int
    log_magnitude: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise DomainError(f"sign must be -1, 0 or +1, got {self.sign}")
        if math.isnan(self.log_magnitude):
            raise DomainError("log_magnitude must not be NaN")
        if (self.sign == 0) != (self.log_magnitude == -math.inf):
            raise DomainError(
                "sign 0 and log_magnitude -inf must occur together: "
                f"got sign={self.sign}, log_magnitude={self.log_magnitude}"
            )

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(0, -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "LogValue":
        if math.isnan(x):
            raise DomainError("cannot build LogValue from NaN")
        if x == 0.0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def to_float(self) -> float:
        """Native-scale value; overflows to +-inf and underflows to 0.0."""
        if self.sign == 0:
            return 0.0
        try:
            mag = math.exp(self.log_magnitude)
        except OverflowError:
            mag = math.inf
        return self.sign * mag

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def scaled(self, log_factor: float) -> "LogValue":
        """Multiply by ``exp(log_factor)`` without leaving log space."""
        if self.sign == 0:
            return self
        return LogValue(self.sign, self.log_magnitude + log_factor)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign,
                        self.log_magnitude + other.log_magnitude)

    def __neg__(self) -> "LogValue":
        if self.sign == 0:
            return self
        return LogValue(-self.sign, self.log_magnitude)

    def abs_gt(self, other: "LogValue") -> bool:
        return self.log_magnitude > other.log_magnitude


def log_sum_exp(log_terms: Sequence[float] | np.ndarray) -> float:
    """log(sum(exp(t))) for nonnegative summands given in log space.

    Returns -inf only when every input is -inf (or the input is empty).
    """
    t = np.asarray(log_terms, dtype=float)
    if t.size == 0:
        return -math.inf
    m = float(np.max(t))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(t - m))))


def signed_log_sum_exp(log_terms: np.ndarray, signs: np.ndarray) -> LogValue:
    """Signed analogue of :func:`log_sum_exp`; returns a ``LogValue``."""
    t = np.asarray(log_terms, dtype=float)
    s = np.asarray(signs, dtype=float)
    live = t > -math.inf
    if not np.any(live):
        return LogValue.zero()
    t = t[live]
    s = s[live]
    m = float(np.max(t))
    total = float(np.sum(s * np.exp(t - m)))
    if total == 0.0:
        return LogValue.zero()
    return LogValue(1 if total > 0 else -1, m + math.log(abs(total)))


def log_value_sum(values: Iterable[LogValue]) -> LogValue:
    vals = list(values)
    return signed_log_sum_exp(
        np.array([v.log_magnitude for v in vals]),
        np.array([float(v.sign) for v in vals]),
    )


# ---------------------------------------------------------------------------
# Gamma-family special functions
# ---------------------------------------------------------------------------

def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"log_gamma requires a positive finite argument, got {x}")
    return math.lgamma(x)


def _lower_gamma_log_series(s: float, x: float) -> float:
    """log P(s, x) by the ascending series; requires 0 < x < s + 1.

    P(s, x) = x^s e^{-x} / Gamma(s+1) * sum_{n>=0} prod_{j<=n} x/(s+j),
    and the sum is evaluated at native scale (it is O(1) here).
    """
    term = 1.0
    total = 1.0
    n = 0
    while True:
        n += 1
        term *= x / (s + n)
        total += term
        if term < total * 1e-17:
            break
        if n > 100_000:
            raise ConvergenceError(
                f"lower incomplete gamma series stalled at s={s}, x={x}",
                partial=total,
            )
    return s * math.log(x) - x - math.lgamma(s + 1.0) + math.log(total)


def _upper_gamma_log_cf(s: float, x: float) -> float:
    """log Q(s, x) by the continued fraction (modified Lentz); x >= s + 1."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, 100_000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return -x + s * math.log(x) - math.lgamma(s) + math.log(h)
    raise ConvergenceError(
        f"upper incomplete gamma continued fraction stalled at s={s}, x={x}",
        partial=h,
    )


def log_gammainc_lower(s: float, x: float) -> float:
    """log of the regularized lower incomplete gamma P(s, x).

    Stays accurate when P underflows natively (for example s = 2500, x = 1).
    Series for x < s + 1, continued fraction otherwise.
    """
    if not math.isfinite(s) or s <= 0.0:
        raise DomainError(f"shape must be positive and finite, got {s}")
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"argument must be nonnegative, got {x}")
    if x == 0.0:
        return -math.inf
    if x == math.inf:
        return 0.0
    if x < s + 1.0:
        return _lower_gamma_log_series(s, x)
    log_q = _upper_gamma_log_cf(s, x)
    # Here Q <= ~0.6, so P = 1 - Q is well conditioned.
    return math.log1p(-math.exp(log_q))


# ---------------------------------------------------------------------------
# Central chi-square
# ---------------------------------------------------------------------------

def _validate_dof(k: int) -> int:
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise DomainError(f"degrees of freedom must be an integer >= 1, got {k!r}")
    return int(k)


def central_chisq_logpdf(w, k: int):
    """log density of chi-square with ``k`` degrees of freedom (vectorized)."""
    k = _validate_dof(k)
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0) or np.any(np.isnan(w_arr)):
        raise DomainError("chi-square density requires w >= 0")
    half = 0.5 * k
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (half - 1.0) * np.log(w_arr) - 0.5 * w_arr \
            - math.lgamma(half) - half * _LN2
    if w_arr.ndim == 0:
        res = float(out)
        if w_arr == 0.0:
            res = {1: math.inf, 2: -_LN2}.get(k, -math.inf)
        return res
    zero = w_arr == 0.0
    if np.any(zero):
        out[zero] = {1: math.inf, 2: -_LN2}.get(k, -math.inf)
    return out


def central_chisq_pdf(w, k: int):
    """Density ``w^{k/2-1} e^{-w/2} / (Gamma(k/2) 2^{k/2})``."""
    out = central_chisq_logpdf(w, k)
    return np.exp(out) if isinstance(out, np.ndarray) else math.exp(out)


def central_chisq_cdf(w: float, k: int) -> float:
    """Regularized lower incomplete gamma P(k/2, w/2)."""
    k = _validate_dof(k)
    if math.isnan(w) or w < 0.0:
        raise DomainError(f"chi-square cdf requires w >= 0, got {w}")
    return math.exp(log_gammainc_lower(0.5 * k, 0.5 * w))


# ---------------------------------------------------------------------------
# Noncentral chi-square via the Poisson mixture, entirely in log space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiSquareSpec:
    """Noncentral chi-square law: ``dof`` degrees of freedom, noncentrality
    ``noncentrality`` in squared-norm units (the mean-vector squared norm)."""

    dof: int
    noncentrality: float

    def __post_init__(self):
        _validate_dof(self.dof)
        nu = self.noncentrality
        if not (isinstance(nu, (int, float, np.floating)) and math.isfinite(nu)) or nu < 0:
            raise DomainError(f"noncentrality must be finite and >= 0, got {nu!r}")


def _series_cap(k: int, nu: float) -> int:
    return int(10 * (2 + nu / 2.0 + k))


def _initial_window(k: int, nu: float, w_max: float, for_cdf: bool) -> int:
    """Upper index of the Poisson-mixture window [0, i_hi].

    Must extend beyond the Poisson mode nu/2 and past the index where the
    mixture terms peak so the drop rule can be verified at the edge.
    """
    half_nu = 0.5 * nu
    hi = half_nu + 10.0 * math.sqrt(half_nu + 1.0) + 60.0
    peak = 0.5 * math.sqrt(max(nu * w_max, 0.0))
    hi = max(hi, peak + 10.0 * math.sqrt(peak + 1.0) + 60.0)
    if for_cdf:
        x = 0.5 * w_max
        # keep the top-of-window shape parameter inside the series regime
        hi = max(hi, x + 10.0 * math.sqrt(x + 1.0) + 40.0)
    return int(math.ceil(hi))


def _logsumexp_columns(matrix: np.ndarray) -> np.ndarray:
    m = np.max(matrix, axis=0)
    out = np.full(matrix.shape[1], -math.inf)
    live = m > -math.inf
    if np.any(live):
        sub = matrix[:, live]
        out[live] = m[live] + np.log(np.sum(np.exp(sub - m[live]), axis=0))
    return out


def _noncentral_logpdf_grid(w: np.ndarray, k: int, nu: float) -> np.ndarray:
    """log f_k(w; nu) over an array of points, by the Poisson mixture.

    The window [0, i_hi] always covers the Poisson mode; terms are summed in
    log space so early terms that underflow natively at large nu still
    contribute.  Extends the window until the edge term sits ``_SERIES_DROP``
    below the per-point peak, up to the hard cap.
    """
    if nu == 0.0:
        return np.asarray(central_chisq_logpdf(w, k), dtype=float).reshape(w.shape)
    out = np.empty(w.shape, dtype=float)
    pos = w > 0.0
    if np.any(~pos):
        out[~pos] = {1: math.inf, 2: -_LN2 - 0.5 * nu}.get(k, -math.inf)
    wp = w[pos]
    if wp.size == 0:
        return out
    cap = _series_cap(k, nu)
    i_hi = min(_initial_window(k, nu, float(np.max(wp)), for_cdf=False), cap)
    log_half_nu = math.log(0.5 * nu)
    while True:
        i = np.arange(i_hi + 1, dtype=float)
        s = 0.5 * k + i
        log_pois = i * log_half_nu - 0.5 * nu - _sc.gammaln(i + 1.0)
        # term(i, j) = log_pois[i] + (s[i]-1) ln w_j - w_j/2 - lgamma(s[i]) - s[i] ln 2
        logw = np.log(wp)
        vals = np.empty(wp.shape, dtype=float)
        edge_ok = True
        chunk = max(1, int(4_000_000 // (i_hi + 1)))
        for start in range(0, wp.size, chunk):
            sl = slice(start, min(start + chunk, wp.size))
            terms = (log_pois - _sc.gammaln(s) - s * _LN2)[:, None] \
                + (s - 1.0)[:, None] * logw[None, sl] \
                - 0.5 * wp[None, sl]
            colmax = np.max(terms, axis=0)
            if np.any(terms[-1, :] > colmax - _SERIES_DROP):
                edge_ok = False
            vals[sl] = _logsumexp_columns(terms)
        if edge_ok:
            out[pos] = vals
            return out
        if i_hi >= cap:
            partial = np.empty(w.shape, dtype=float)
            partial[pos] = vals
            raise ConvergenceError(
                f"noncentral chi-square pdf series hit the {cap}-term cap "
                f"(k={k}, nu={nu})",
                partial=partial,
            )
        i_hi = min(i_hi * 2, cap)


def _noncentral_logcdf_grid(w: np.ndarray, k: int, nu: float) -> np.ndarray:
    """log F_k(w; nu) via Poisson weights against central cdf values.

    Central cdf values across the window come from the stable downward
    recurrence P(s, x) = P(s+1, x) + x^s e^{-x} / Gamma(s+1), seeded by the
    log-space series at the top of the window (pure additions, no
    cancellation).
    """
    if nu == 0.0:
        return np.array([log_gammainc_lower(0.5 * k, 0.5 * x) if x > 0 else -math.inf
                         for x in np.atleast_1d(w)], dtype=float).reshape(w.shape)
    out = np.full(w.shape, -math.inf, dtype=float)
    pos = w > 0.0
    wp = w[pos]
    if wp.size == 0:
        return out
    cap = _series_cap(k, nu)
    i_hi = min(_initial_window(k, nu, float(np.max(wp)), for_cdf=True), cap)
    x = 0.5 * wp
    logx = np.log(x)
    log_half_nu = math.log(0.5 * nu)
    while True:
        log_pois = (np.arange(i_hi + 1, dtype=float) * log_half_nu
                    - 0.5 * nu - _sc.gammaln(np.arange(i_hi + 1, dtype=float) + 1.0))
        s_top = 0.5 * k + i_hi
        log_f_cdf = np.array([_lower_gamma_log_series(s_top, xi) if xi < s_top + 1.0
                              else log_gammainc_lower(s_top, xi) for xi in x])
        acc = np.full(wp.shape, -math.inf)
        max_term = np.full(wp.shape, -math.inf)
        edge_term = None
        for i in range(i_hi, -1, -1):
            term = log_pois[i] + log_f_cdf
            if edge_term is None:
                edge_term = term.copy()
            acc = np.logaddexp(acc, term)
            max_term = np.maximum(max_term, term)
            if i > 0:
                s = 0.5 * k + (i - 1)
                log_d = s * logx - x - _sc.gammaln(s + 1.0)
                log_f_cdf = np.logaddexp(log_f_cdf, log_d)
        if np.all(edge_term <= max_term - _SERIES_DROP) or i_hi >= cap:
            if np.any(edge_term > max_term - _SERIES_DROP) and i_hi >= cap:
                partial = np.full(w.shape, -math.inf)
                partial[pos] = acc
                raise ConvergenceError(
                    f"noncentral chi-square cdf series hit the {cap}-term cap "
                    f"(k={k}, nu={nu})",
                    partial=partial,
                )
            out[pos] = acc
            return out
        i_hi = min(i_hi * 2, cap)


def noncentral_chisq_logpdf(w: float, spec: ChiSquareSpec) -> LogValue:
    """Noncentral chi-square log density as a ``LogValue``.

    Finite and correct for noncentralities of at least 1e4, where the density
    near small w is on the order of exp(-nu/2 + sqrt(nu w)).
    """
    if math.isnan(w) or w < 0.0:
        raise DomainError(f"noncentral chi-square pdf requires w >= 0, got {w}")
    val = float(_noncentral_logpdf_grid(np.array([w]), spec.dof, spec.noncentrality)[0])
    if val == -math.inf:
        return LogValue.zero()
    return LogValue(1, val)


def noncentral_chisq_logcdf(w: float, spec: ChiSquareSpec) -> LogValue:
    """Noncentral chi-square log cdf as a ``LogValue``."""
    if math.isnan(w) or w < 0.0:
        raise DomainError(f"noncentral chi-square cdf requires w >= 0, got {w}")
    val = float(_noncentral_logcdf_grid(np.array([w]), spec.dof, spec.noncentrality)[0])
    if val == -math.inf:
        return LogValue.zero()
    return LogValue(1, min(val, 0.0))


# ---------------------------------------------------------------------------
# Dawson integral
# ---------------------------------------------------------------------------

def dawson(lam: float) -> float:
    """Dawson integral D(x) = exp(-x^2) * integral_0^x exp(t^2) dt."""
    if not math.isfinite(lam):
        raise DomainError(f"dawson requires a finite argument, got {lam}")
    return float(_sc.dawsn(lam))


# ---------------------------------------------------------------------------
# Gauss-Legendre quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre nodes/weights mapped onto ``interval``."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]

    def apply(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(n: int, lo: float, hi: float) -> QuadratureRule:
    """Gauss-Legendre rule on [lo, hi], exact for polynomials of degree <= 2n-1."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise DomainError(f"node count must be an integer >= 2, got {n!r}")
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise DomainError(f"interval must satisfy lo < hi, got [{lo}, {hi}]")
    x, w = leggauss(int(n))
    mid = 0.5 * (hi + lo)
    halfw = 0.5 * (hi - lo)
    return QuadratureRule(nodes=mid + halfw * x, weights=halfw * w, interval=(lo, hi))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_base(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = leggauss(n)
    return _GL_CACHE[n]


def panel_nodes(panels: Sequence[tuple[float, float]], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate n-point Gauss-Legendre nodes/weights over the given panels."""
    x, w = _gl_base(n)
    nodes = []
    weights = []
    for lo, hi in panels:
        if hi <= lo:
            continue
        mid = 0.5 * (hi + lo)
        halfw = 0.5 * (hi - lo)
        nodes.append(mid + halfw * x)
        weights.append(halfw * w)
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)


def geometric_edges(lo: float, hi: float, toward: float, levels: int) -> list[float]:
    """Edges of [lo, hi] refined geometrically toward one endpoint.

    ``toward`` must equal ``lo`` or ``hi``.  Produces edges at distances
    (hi-lo) * 2^{-k}, k = 1..levels, from the refined endpoint.
    """
    width = hi - lo
    if width <= 0:
        return [lo, hi]
    edges = {lo, hi}
    for k in range(1, levels + 1):
        d = width * 0.5 ** k
        edges.add(hi - d if toward == hi else lo + d)
    return sorted(edges)


def panels_from_edges(edges: Sequence[float]) -> list[tuple[float, float]]:
    e = sorted(set(edges))
    return [(e[i], e[i + 1]) for i in range(len(e) - 1) if e[i + 1] > e[i]]


# ---------------------------------------------------------------------------
# Deterministic seeded normal sampling
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def standard_normal_array(seed: int, stream: int, n: int) -> np.ndarray:
    """``n`` iid standard normals, fully determined by ``(seed, stream)``.

    Generator: Philox-4x64 keyed with ``seed * 2^64 + stream`` (both reduced
    mod 2^64).  Uniforms are ``(u64 >> 11 + 0.5) * 2^-53``, strictly inside
    (0, 1), mapped through the normal inverse cdf.  Branch-free, so the output
    is reproducible bit for bit across platforms for a fixed generator.
    """
    if n < 0:
        raise DomainError(f"sample size must be >= 0, got {n}")
    key = ((int(seed) & _MASK64) << 64) | (int(stream) & _MASK64)
    gen = np.random.Generator(np.random.Philox(key=key))
    if n == 0:
        return np.empty(0)
    bits = gen.integers(0, _MASK64, size=n, dtype=np.uint64, endpoint=True)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return _sc.ndtri(u)


def rng_normal_vector(seed: int, stream: int, p: int, mean=None) -> np.ndarray:
    """A draw from N_p(mean, I_p), deterministic given ``(seed, stream)``."""
    if not isinstance(p, (int, np.integer)) or p < 1:
        raise DomainError(f"dimension must be an integer >= 1, got {p!r}")
    z = standard_normal_array(seed, stream, int(p))
    if mean is None:
        return z
    mu = np.asarray(mean, dtype=float)
    if mu.ndim == 0:
        return z + float(mu)
    if mu.shape != (p,):
        raise DomainError(f"mean must be scalar or shape ({p},), got {mu.shape}")
    return z + mu
