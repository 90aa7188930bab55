"""Risk evaluation for shrinkage estimators of a normal mean.

Stein's unbiased-risk identity turns the risk of the estimator built from a
shrinkage factor ``phi`` into

    risk(nu) = p + E[ r_phi(W) ],      W ~ noncentral chi-square(p, nu),

with ``r_phi(w) = (phi(w)/w)(phi(w) - 2(p-2)) - 4 phi'(w)``.  This module
evaluates that expectation two independent ways (panel quadrature against the
noncentral density, and seeded Monte Carlo over the original normal model),
plus the James-Stein vs positive-part gap through two more independent routes
(a truncated-expectation quadrature and Hansen's central/noncentral cdf
series).  Quadrature accumulates in log space so results stay meaningful when
the expectation is exponentially small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Sequence

import numpy as np

from .errors import DomainError, NonIntegrableError
from .numerics import (
    LogValue,
    geometric_edges,
    log_gammainc_lower,
    panel_nodes,
    panels_from_edges,
    signed_log_sum_exp,
    standard_normal_array,
    _noncentral_logpdf_grid,
    _noncentral_logcdf_grid,
    _initial_window,
    _series_cap,
    _SERIES_DROP,
)
from .shrinkage import ShrinkageFactor

__all__ = [
    "MonteCarloSettings",
    "RiskQuery",
    "RiskPoint",
    "RiskProfile",
    "BaranchikReport",
    "sure_integrand",
    "truncated_expectation_log",
    "risk_quadrature",
    "risk_monte_carlo",
    "risk_profile",
    "js_gap_direct",
    "js_gap_hansen",
    "baranchik_check",
]

# quadrature targets ~1e-10; the declared absolute bound for risk values
QUAD_ERROR_BOUND = 1e-8
_MC_BATCH = 1 << 17


@dataclass(frozen=True)
class MonteCarloSettings:
    seed: int
    replications: int

    def __post_init__(self):
        if self.replications < 1000:
            raise DomainError(
                f"Monte Carlo needs >= 1000 replications, got {self.replications}")


@dataclass(frozen=True)
class RiskQuery:
    """One risk evaluation: factor, dimension, noncentrality, method."""

    factor: ShrinkageFactor
    p: int
    nu: float
    method: Literal["quadrature", "monte_carlo"] = "quadrature"
    mc: MonteCarloSettings | None = None

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise DomainError(f"dimension must be an integer >= 1, got {self.p!r}")
        if not math.isfinite(self.nu) or self.nu < 0:
            raise DomainError(f"noncentrality must be finite and >= 0, got {self.nu}")
        if self.method not in ("quadrature", "monte_carlo"):
            raise DomainError(f"unknown method {self.method!r}")
        if self.method == "monte_carlo" and self.mc is None:
            raise DomainError("monte_carlo queries need MonteCarloSettings")
        if self.factor.name in ("js", "js_plus"):
            if self.p < 3:
                raise DomainError("James-Stein factors need p >= 3")
            if int(self.factor.params["p"]) != int(self.p):
                raise DomainError(
                    f"factor was built for p={int(self.factor.params['p'])} "
                    f"but the query uses p={self.p}")


@dataclass(frozen=True)
class RiskPoint:
    nu: float
    risk: float
    error: float  # std error (MC) or declared quadrature bound
    method: str


@dataclass(frozen=True)
class RiskProfile:
    rows: tuple[RiskPoint, ...]
    p: int
    factor_label: str

    def __post_init__(self):
        nus = [r.nu for r in self.rows]
        if nus != sorted(nus):
            raise DomainError("profile rows must be sorted by nu")
        if any(not math.isfinite(r.risk) for r in self.rows):
            raise DomainError("profile risks must be finite")


# ---------------------------------------------------------------------------
# SURE integrand
# ---------------------------------------------------------------------------

def sure_integrand(factor: ShrinkageFactor, p: int, w):
    """r_phi(w) = (phi/w)(phi - 2(p-2)) - 4 phi' (vectorized).

    At w = 0 the limit is used: -2(p-2) lim phi(w)/w - 4 phi'(0), which is
    -inf for the James-Stein factor.
    """
    w_arr = np.asarray(w, dtype=float)
    scalar = w_arr.ndim == 0
    w_arr = np.atleast_1d(w_arr)
    out = np.empty_like(w_arr)
    pos = w_arr > 0.0
    if np.any(pos):
        wp = w_arr[pos]
        phi = np.atleast_1d(np.asarray(factor.phi(wp), dtype=float))
        dphi = np.atleast_1d(np.asarray(factor.dphi(wp), dtype=float))
        out[pos] = phi / wp * (phi - 2.0 * (p - 2)) - 4.0 * dphi
    if np.any(~pos):
        ratio = factor.origin_ratio
        if math.isinf(ratio):
            limit = -math.inf if p > 2 else math.inf  # sign of -2(p-2)*inf
        else:
            limit = -2.0 * (p - 2) * ratio - 4.0 * float(factor.dphi(0.0))
        out[~pos] = limit
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Quadrature of g against the noncentral chi-square density
# ---------------------------------------------------------------------------

def _expectation_panels(p: int, nu: float, hi: float,
                        breaks: Sequence[float]) -> tuple[list, list]:
    """Panels for integrating against chi-square(p, nu) on [0, hi].

    Returns (t_panels, w_panels): the region next to 0 is integrated in
    t = sqrt(w) (which absorbs both half-integer density powers and any 1/w
    blowup of the integrand), the rest in w with edges at integrand kinks,
    across the distribution bulk, and geometrically refined toward ``hi``
    when the density is exponentially localized there.
    """
    interior = sorted(b for b in breaks if 0.0 < b < hi)
    first = interior[0] if interior else hi
    w_cut = min(first, hi / 4.0, 1.0)
    if w_cut <= 0.0 or hi < 1e-12:
        w_cut = hi

    t_hi = math.sqrt(w_cut)
    t_edges = geometric_edges(0.0, t_hi, toward=0.0, levels=4) \
        + list(np.linspace(0.0, t_hi, 7))
    t_panels = panels_from_edges(t_edges)

    if w_cut >= hi:
        return t_panels, []

    mu = p + nu
    sigma = math.sqrt(2.0 * (p + 2.0 * nu))
    edges = {w_cut, hi}
    edges.update(b for b in interior if b > w_cut)
    for z in np.linspace(-40.0, 40.0, 41):
        e = mu + z * sigma
        if w_cut < e < hi:
            edges.add(float(e))
    if math.sqrt(nu) - math.sqrt(hi) > 4.0:
        # density varies on scale 2 sqrt(hi)/(sqrt(nu)-sqrt(hi)) near hi
        edges.update(e for e in geometric_edges(w_cut, hi, toward=hi, levels=44))
    sorted_edges = sorted(edges)
    # cap panel width so the density bulk is always resolved
    max_width = max(4.0 * sigma, (hi - w_cut) / 64.0)
    final = [sorted_edges[0]]
    for e in sorted_edges[1:]:
        while e - final[-1] > max_width * 1.5:
            final.append(final[-1] + max_width)
        final.append(e)
    return t_panels, panels_from_edges(final)


def truncated_expectation_log(g: Callable[[np.ndarray], np.ndarray], p: int,
                              nu: float, hi: float,
                              breaks: Sequence[float] = (),
                              nodes_per_panel: int = 32) -> LogValue:
    """E[g(W) 1{W <= hi}] for W ~ chi-square(p, nu), as a ``LogValue``.

    Signed log-space accumulation: each Gauss-Legendre node contributes
    ``log|g w_weight| + logpdf`` with the sign of g, so exponentially small
    truncated expectations (large nu, small hi) remain exact in log scale.
    ``g`` may blow up like 1/w at the origin when p >= 3.
    """
    if hi <= 0.0:
        return LogValue.zero()
    t_panels, w_panels = _expectation_panels(p, nu, hi, breaks)
    t_nodes, t_weights = panel_nodes(t_panels, nodes_per_panel)
    w_nodes, w_weights = panel_nodes(w_panels, nodes_per_panel)
    # t-substitution: integral f(w) dw = integral f(t^2) 2t dt
    all_w = np.concatenate([t_nodes * t_nodes, w_nodes])
    all_c = np.concatenate([t_weights * 2.0 * t_nodes, w_weights])
    logpdf = _noncentral_logpdf_grid(all_w, p, nu)
    gv = np.asarray(g(all_w), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_terms = np.log(np.abs(gv * all_c)) + logpdf
    log_terms = np.where(np.isnan(log_terms), -math.inf, log_terms)
    return signed_log_sum_exp(log_terms, np.sign(gv))


def risk_quadrature(query: RiskQuery) -> float:
    """p + E[r_phi(W)] by panel quadrature.

    Declared absolute error <= 1e-8 at native scale (p >= 3, nu <= ~100); the
    integral itself is carried in log space, so for debiased factors at large
    nu the exponentially small excess simply underflows gracefully to p.
    """
    factor, p, nu = query.factor, query.p, query.nu
    if p <= 2 and math.isinf(factor.origin_ratio):
        raise NonIntegrableError(
            f"r_phi ~ c/w with c != 0 is not integrable against "
            f"chi-square({p}); need p >= 3")
    if math.isfinite(factor.support_end):
        hi = factor.support_end
    else:
        sigma = math.sqrt(2.0 * (p + 2.0 * nu))
        hi = p + nu + 25.0 * sigma + 400.0
    excess = truncated_expectation_log(
        lambda w: sure_integrand(factor, p, w), p, nu, hi,
        breaks=factor.breakpoints)
    return float(p) + excess.to_float()


# ---------------------------------------------------------------------------
# Monte Carlo risk
# ---------------------------------------------------------------------------

def _pairwise_sum(values: list[float]) -> float:
    if not values:
        return 0.0
    while len(values) > 1:
        merged = [values[i] + values[i + 1] for i in range(0, len(values) - 1, 2)]
        if len(values) % 2:
            merged.append(values[-1])
        values = merged
    return values[0]


def risk_monte_carlo(query: RiskQuery) -> tuple[float, float]:
    """Sample-mean risk and its standard error.

    theta is canonicalized to (sqrt(nu), 0, ..., 0): all catalog estimators
    are orthogonally equivariant, so risk depends on theta only through nu.
    Replications are split into fixed-size batches on disjoint RNG streams
    and merged pairwise, so the value is deterministic for a given seed no
    matter how batches are scheduled.
    """
    if query.mc is None:
        raise DomainError("risk_monte_carlo needs MonteCarloSettings")
    factor, p, nu = query.factor, query.p, query.nu
    seed, reps = query.mc.seed, query.mc.replications
    theta = np.zeros(p)
    theta[0] = math.sqrt(nu)
    sums: list[float] = []
    sums_sq: list[float] = []
    done = 0
    stream = 0
    while done < reps:
        n = min(_MC_BATCH, reps - done)
        z = standard_normal_array(seed, stream, n * p).reshape(n, p)
        x = z + theta
        w = np.einsum("ij,ij->i", x, x)
        phi_w = np.asarray(factor.phi(w), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            sw = np.where(w >= factor.support_end, 1.0,
                          np.where(w > 0.0, 1.0 - phi_w / w,
                                   1.0 - factor.origin_ratio))
        diff = sw[:, None] * x - theta
        loss = np.einsum("ij,ij->i", diff, diff)
        sums.append(float(np.sum(loss)))
        sums_sq.append(float(np.sum(loss * loss)))
        done += n
        stream += 1
    s1 = _pairwise_sum(sums)
    s2 = _pairwise_sum(sums_sq)
    mean = s1 / reps
    var = max(s2 - reps * mean * mean, 0.0) / (reps - 1)
    return mean, math.sqrt(var / reps)


def risk_profile(factor: ShrinkageFactor, p: int, nus: Sequence[float],
                 method: str = "quadrature",
                 mc: MonteCarloSettings | None = None) -> RiskProfile:
    """Sweep risk over noncentralities; rows sorted by nu."""
    rows = []
    for nu in sorted(float(v) for v in nus):
        query = RiskQuery(factor=factor, p=p, nu=nu, method=method, mc=mc)
        if method == "quadrature":
            rows.append(RiskPoint(nu, risk_quadrature(query), QUAD_ERROR_BOUND,
                                  "quadrature"))
        else:
            risk, se = risk_monte_carlo(query)
            rows.append(RiskPoint(nu, risk, se, "monte_carlo"))
    return RiskProfile(rows=tuple(rows), p=p, factor_label=factor.label())


# ---------------------------------------------------------------------------
# James-Stein vs positive-part gap, two routes
# ---------------------------------------------------------------------------

def _validate_js_p(p: int) -> int:
    if not isinstance(p, (int, np.integer)) or p < 3:
        raise DomainError(f"the James-Stein gap needs integer p >= 3, got {p!r}")
    return int(p)


def js_gap_direct(p: int, nu: float) -> LogValue:
    """Risk gain of the positive part over plain James-Stein.

    E[{ -(p-2)^2/W + 2p - W } 1{W <= p-2}] for W ~ chi-square(p, nu), kept in
    log space: at large nu the gap is of order exp(-nu/2 + sqrt(nu (p-2))).
    """
    p = _validate_js_p(p)
    c = float(p - 2)

    def integrand(w):
        return -c * c / w + 2.0 * p - w

    return truncated_expectation_log(integrand, p, float(nu), c)


@lru_cache(maxsize=4096)
def _central_cdf_log(dof: int, v: float) -> float:
    return log_gammainc_lower(0.5 * dof, 0.5 * v)


def js_gap_hansen(p: int, nu: float, tol: float = 1e-10) -> float:
    """The same gap through Hansen's cdf series:

    2p F_p(v; nu) - p F_{p+2}(v; nu) - nu F_{p+4}(v; nu)
        - (p-2)^2 sum_i pois_i(nu/2) F_{p+2i-2}(v) / (p+2i-2),   v = p-2.

    Central cdf values are cached across series indices and calls.
    """
    p = _validate_js_p(p)
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    nu = float(nu)
    v = float(p - 2)
    varr = np.array([v])
    f_p = math.exp(_noncentral_logcdf_grid(varr, p, nu)[0])
    f_p2 = math.exp(_noncentral_logcdf_grid(varr, p + 2, nu)[0])
    f_p4 = math.exp(_noncentral_logcdf_grid(varr, p + 4, nu)[0])

    if nu == 0.0:
        series = math.exp(_central_cdf_log(p - 2, v)) / (p - 2)
    else:
        cap = _series_cap(p, nu)
        i_hi = min(_initial_window(p, nu, v, for_cdf=True), cap)
        log_half_nu = math.log(0.5 * nu)
        total = -math.inf
        peak = -math.inf
        i = 0
        while i <= i_hi:
            log_pois = i * log_half_nu - 0.5 * nu - math.lgamma(i + 1.0)
            term = log_pois + _central_cdf_log(p + 2 * i - 2, v) \
                - math.log(p + 2 * i - 2)
            total = np.logaddexp(total, term)
            peak = max(peak, term)
            at_end = i == i_hi
            if at_end and not (term <= peak - _SERIES_DROP) and i_hi < cap:
                i_hi = min(i_hi * 2, cap)  # extend; loop continues
            i += 1
        series = math.exp(total)
    return 2.0 * p * f_p - p * f_p2 - nu * f_p4 - (p - 2) ** 2 * series


# ---------------------------------------------------------------------------
# Baranchik's minimaxity conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaranchikReport:
    """Grid check of 0 <= phi <= 2(p-2) (B1) and phi' >= 0 (B2)."""

    b1_ok: bool
    b2_ok: bool
    witnesses_b1: tuple[float, ...]
    witnesses_b2: tuple[float, ...]


def baranchik_check(factor: ShrinkageFactor, p: int, grid) -> BaranchikReport:
    w = np.asarray(grid, dtype=float)
    if w.size == 0 or np.any(w <= 0):
        raise DomainError("grid must be nonempty with positive entries")
    phi = np.asarray(factor.phi(w), dtype=float)
    dphi = np.asarray(factor.dphi(w), dtype=float)
    bad1 = (phi < -1e-12) | (phi > 2.0 * (p - 2) + 1e-12)
    bad2 = dphi < -1e-12
    return BaranchikReport(
        b1_ok=not bool(np.any(bad1)),
        b2_ok=not bool(np.any(bad2)),
        witnesses_b1=tuple(float(x) for x in w[bad1][:8]),
        witnesses_b2=tuple(float(x) for x in w[bad2][:8]),
    )
