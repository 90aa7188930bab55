"""Shrinkage-factor catalog and scalar penalized least squares.

A shrinkage factor ``phi`` defines the orthogonally equivariant estimator

    estimate(x) = (1 - phi(||x||^2) / ||x||^2) * x.

The catalog covers the James-Stein pair, ridge/soft/hard thresholding, SCAD,
MCP, a quadratic-tail debiased factor, and the identity baseline (phi = 0).
A factor is *debiased* when it shrinks only below a finite support bound
``a`` (0 < phi(w) <= w on (0, a), phi = 0 beyond) with bounded derivative;
the ``ds_compliant`` flag records which members satisfy that.

The scalar solvers at the bottom reproduce the same estimators as global
minimizers of ``(theta - x)^2 + penalty(|theta|)``, which the brute-force
grid oracle cross-checks in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError

__all__ = [
    "TailHint",
    "ShrinkageFactor",
    "EstimateResult",
    "FACTOR_FAMILIES",
    "PENALTY_NAMES",
    "make_factor",
    "apply_estimator",
    "solve_penalized_ls",
    "brute_force_pls_oracle",
    "pls_objective",
]

FACTOR_FAMILIES = ("identity", "js", "js_plus", "ridge", "soft", "hard",
                   "scad", "mcp", "quad")
PENALTY_NAMES = ("ridge", "lasso", "hard", "scad", "mcp")


@dataclass(frozen=True)
class TailHint:
    """Leading tail behavior phi(w) ~ scale * (a - w)^exponent as w -> a."""

    exponent: float
    scale: float


@dataclass(frozen=True, eq=False)
class ShrinkageFactor:
    """A named shrinkage factor with its weak derivative and tail metadata.

    ``phi`` and ``dphi`` accept floats or numpy arrays of w >= 0.  ``dphi``
    uses the right-hand derivative at kinks.  ``support_end`` is the smallest
    a with phi = 0 on [a, inf), or inf if phi never dies.  ``origin_ratio``
    is lim phi(w)/w as w -> 0 (may be inf for the James-Stein factor).
    ``breakpoints`` lists the kink locations, which quadrature must split at.
    """

    name: str
    params: Mapping[str, float]
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    support_end: float
    origin_ratio: float
    ds_compliant: bool
    breakpoints: tuple[float, ...] = ()
    tail_hint: TailHint | None = None

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={format(v, 'g')}" for k, v in self.params.items())
        return f"{self.name}({inner})"


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """Shrinkage estimate: ``estimate = shrink_weight * x`` with w = ||x||^2."""

    estimate: np.ndarray
    shrink_weight: float
    w: float


def _as_float_or_array(w, out):
    if np.ndim(w) == 0:
        return float(out)
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DomainError(message)


def _positive(value, name: str) -> float:
    _require(value is not None, f"{name} is required for this family")
    v = float(value)
    _require(math.isfinite(v) and v > 0, f"{name} must be positive and finite, got {value}")
    return v


def make_factor(family: str, *, lam: float | None = None, alpha: float | None = None,
                a: float | None = None, p: int | None = None) -> ShrinkageFactor:
    """Build a catalog shrinkage factor.

    Parameter requirements: ``js``/``js_plus`` need ``p >= 3``; ``ridge``,
    ``soft`` and ``hard`` need ``lam > 0``; ``scad`` needs ``lam > 0`` and
    ``alpha > 2``; ``mcp`` needs ``lam > 0`` and ``alpha > 1``; ``quad``
    needs ``a > 0``.
    """
    if family not in FACTOR_FAMILIES:
        raise DomainError(f"unknown factor family {family!r}; expected one of {FACTOR_FAMILIES}")

    if family == "identity":
        zero = lambda w: _as_float_or_array(w, np.zeros_like(np.asarray(w, dtype=float)))
        return ShrinkageFactor(
            name="identity", params={}, phi=zero, dphi=zero,
            support_end=0.0, origin_ratio=0.0, ds_compliant=False)

    if family in ("js", "js_plus"):
        _require(p is not None, "p is required for James-Stein factors")
        _require(isinstance(p, (int, np.integer)) and p >= 3,
                 f"James-Stein factors require integer p >= 3, got {p!r}")
        c = float(p - 2)
        if family == "js":
            phi = lambda w: _as_float_or_array(w, np.full_like(np.asarray(w, dtype=float), c))
            dphi = lambda w: _as_float_or_array(w, np.zeros_like(np.asarray(w, dtype=float)))
            return ShrinkageFactor(
                name="js", params={"p": float(p)}, phi=phi, dphi=dphi,
                support_end=math.inf, origin_ratio=math.inf, ds_compliant=False)
        phi = lambda w: _as_float_or_array(w, np.minimum(np.asarray(w, dtype=float), c))
        dphi = lambda w: _as_float_or_array(
            w, np.where(np.asarray(w, dtype=float) < c, 1.0, 0.0))
        return ShrinkageFactor(
            name="js_plus", params={"p": float(p)}, phi=phi, dphi=dphi,
            support_end=math.inf, origin_ratio=1.0, ds_compliant=False,
            breakpoints=(c,))

    if family == "ridge":
        lam = _positive(lam, "lam")
        phi = lambda w: _as_float_or_array(w, np.asarray(w, dtype=float) / (lam + 1.0))
        dphi = lambda w: _as_float_or_array(
            w, np.full_like(np.asarray(w, dtype=float), 1.0 / (lam + 1.0)))
        return ShrinkageFactor(
            name="ridge", params={"lam": lam}, phi=phi, dphi=dphi,
            support_end=math.inf, origin_ratio=1.0 / (lam + 1.0), ds_compliant=False)

    if family == "soft":
        lam = _positive(lam, "lam")
        l2 = lam * lam

        def phi(w):
            w_arr = np.asarray(w, dtype=float)
            return _as_float_or_array(w, np.where(w_arr <= l2, w_arr, lam * np.sqrt(w_arr)))

        def dphi(w):
            w_arr = np.asarray(w, dtype=float)
            with np.errstate(divide="ignore"):
                tail = lam / (2.0 * np.sqrt(w_arr))
            return _as_float_or_array(w, np.where(w_arr < l2, 1.0, tail))

        return ShrinkageFactor(
            name="soft", params={"lam": lam}, phi=phi, dphi=dphi,
            support_end=math.inf, origin_ratio=1.0, ds_compliant=False,
            breakpoints=(l2,))

    if family == "hard":
        lam = _positive(lam, "lam")
        l2 = lam * lam

        def phi(w):
            w_arr = np.asarray(w, dtype=float)
            return _as_float_or_array(w, np.where(w_arr <= l2, w_arr, 0.0))

        def dphi(w):
            w_arr = np.asarray(w, dtype=float)
            return _as_float_or_array(w, np.where(w_arr < l2, 1.0, 0.0))

        return ShrinkageFactor(
            name="hard", params={"lam": lam}, phi=phi, dphi=dphi,
            support_end=l2, origin_ratio=1.0, ds_compliant=False,
            breakpoints=(l2,))

    if family == "scad":
        lam = _positive(lam, "lam")
        _require(alpha is not None, "alpha is required for scad")
        alpha = float(alpha)
        _require(math.isfinite(alpha) and alpha > 2.0,
                 f"scad requires alpha > 2, got {alpha}")
        l2 = lam * lam
        a_end = alpha * alpha * l2

        def phi(w):
            w_arr = np.asarray(w, dtype=float)
            r = np.sqrt(w_arr)
            out = np.where(
                w_arr < l2, w_arr,
                np.where(w_arr <= 4.0 * l2, lam * r,
                         np.where(w_arr <= a_end,
                                  (alpha * lam * r - w_arr) / (alpha - 2.0),
                                  0.0)))
            return _as_float_or_array(w, out)

        def dphi(w):
            w_arr = np.asarray(w, dtype=float)
            with np.errstate(divide="ignore"):
                inv2r = 1.0 / (2.0 * np.sqrt(w_arr))
            out = np.where(
                w_arr < l2, 1.0,
                np.where(w_arr < 4.0 * l2, lam * inv2r,
                         np.where(w_arr < a_end,
                                  (alpha * lam * inv2r - 1.0) / (alpha - 2.0),
                                  0.0)))
            return _as_float_or_array(w, out)

        return ShrinkageFactor(
            name="scad", params={"lam": lam, "alpha": alpha}, phi=phi, dphi=dphi,
            support_end=a_end, origin_ratio=1.0, ds_compliant=True,
            breakpoints=(l2, 4.0 * l2, a_end),
            tail_hint=TailHint(1.0, 1.0 / (2.0 * (alpha - 2.0))))

    if family == "mcp":
        lam = _positive(lam, "lam")
        _require(alpha is not None, "alpha is required for mcp")
        alpha = float(alpha)
        _require(math.isfinite(alpha) and alpha > 1.0,
                 f"mcp requires alpha > 1, got {alpha}")
        l2 = lam * lam
        a_end = alpha * alpha * l2

        def phi(w):
            w_arr = np.asarray(w, dtype=float)
            r = np.sqrt(w_arr)
            out = np.where(
                w_arr < l2, w_arr,
                np.where(w_arr <= a_end,
                         (alpha * lam * r - w_arr) / (alpha - 1.0),
                         0.0))
            return _as_float_or_array(w, out)

        def dphi(w):
            w_arr = np.asarray(w, dtype=float)
            with np.errstate(divide="ignore"):
                inv2r = 1.0 / (2.0 * np.sqrt(w_arr))
            out = np.where(
                w_arr < l2, 1.0,
                np.where(w_arr < a_end,
                         (alpha * lam * inv2r - 1.0) / (alpha - 1.0),
                         0.0))
            return _as_float_or_array(w, out)

        return ShrinkageFactor(
            name="mcp", params={"lam": lam, "alpha": alpha}, phi=phi, dphi=dphi,
            support_end=a_end, origin_ratio=1.0, ds_compliant=True,
            breakpoints=(l2, a_end),
            tail_hint=TailHint(1.0, 1.0 / (2.0 * (alpha - 1.0))))

    # family == "quad": phi = w below the fixpoint of (a-w)^2, then (a-w)^2 to a.
    a = _positive(a, "a")
    w0 = 0.5 * (2.0 * a + 1.0 - math.sqrt(4.0 * a + 1.0))

    def phi(w):
        w_arr = np.asarray(w, dtype=float)
        out = np.where(w_arr < w0, w_arr,
                       np.where(w_arr <= a, (a - w_arr) ** 2, 0.0))
        return _as_float_or_array(w, out)

    def dphi(w):
        w_arr = np.asarray(w, dtype=float)
        out = np.where(w_arr < w0, 1.0,
                       np.where(w_arr < a, -2.0 * (a - w_arr), 0.0))
        return _as_float_or_array(w, out)

    return ShrinkageFactor(
        name="quad", params={"a": a}, phi=phi, dphi=dphi,
        support_end=a, origin_ratio=1.0, ds_compliant=True,
        breakpoints=(w0, a),
        tail_hint=TailHint(2.0, 1.0))


def apply_estimator(factor: ShrinkageFactor, x) -> EstimateResult:
    """Apply ``x -> (1 - phi(||x||^2)/||x||^2) x``.

    At ``x = 0`` the finite limit of phi(w)/w is used; for w at or past the
    support bound the data pass through unchanged (shrink_weight exactly 1).
    """
    x_arr = np.asarray(x, dtype=float)
    if x_arr.ndim != 1 or x_arr.size < 1:
        raise DomainError(f"x must be a 1-D vector of length >= 1, got shape {x_arr.shape}")
    w = float(np.dot(x_arr, x_arr))
    if w >= factor.support_end:
        sw = 1.0
    elif w == 0.0:
        if not math.isfinite(factor.origin_ratio):
            raise DomainError(
                f"{factor.name}: phi(w)/w has no finite limit at w = 0")
        sw = 1.0 - factor.origin_ratio
    else:
        sw = 1.0 - float(factor.phi(w)) / w
    return EstimateResult(estimate=sw * x_arr, shrink_weight=sw, w=w)


# ---------------------------------------------------------------------------
# Scalar penalized least squares
# ---------------------------------------------------------------------------

def _validate_penalty(penalty: str, lam, alpha) -> tuple[float, float | None]:
    if penalty not in PENALTY_NAMES:
        raise DomainError(f"unknown penalty {penalty!r}; expected one of {PENALTY_NAMES}")
    lam = _positive(lam, "lam")
    if penalty == "scad":
        _require(alpha is not None and float(alpha) > 2.0,
                 f"scad requires alpha > 2, got {alpha}")
        alpha = float(alpha)
    elif penalty == "mcp":
        _require(alpha is not None and float(alpha) > 1.0,
                 f"mcp requires alpha > 1, got {alpha}")
        alpha = float(alpha)
    else:
        alpha = None
    return lam, alpha


def pls_objective(penalty: str, theta, x: float, *, lam: float,
                  alpha: float | None = None):
    """Objective ``(theta - x)^2 + penalty(|theta|)`` (vectorized in theta).

    Penalty normalizations are fixed so the global minimizers coincide with
    the catalog estimators: ridge ``t^2/lam``, lasso ``2 lam t``, hard
    ``lam^2 - (t - lam)^2`` below ``lam`` and ``lam^2`` beyond, SCAD with
    derivative ``2 lam`` / ``2 (alpha lam - t)/(alpha - 1)`` / 0 on its three
    bands, MCP ``2 lam t - t^2/alpha`` capped at ``alpha lam^2``.
    """
    lam, alpha = _validate_penalty(penalty, lam, alpha)
    t = np.abs(np.asarray(theta, dtype=float))
    if penalty == "ridge":
        pen = t * t / lam
    elif penalty == "lasso":
        pen = 2.0 * lam * t
    elif penalty == "hard":
        pen = np.where(t <= lam, lam * lam - (t - lam) ** 2, lam * lam)
    elif penalty == "scad":
        al = alpha * lam
        mid = (2.0 * al * t - t * t - lam * lam) / (alpha - 1.0)
        pen = np.where(t <= lam, 2.0 * lam * t,
                       np.where(t <= al, mid, (alpha + 1.0) * lam * lam))
    else:  # mcp
        al = alpha * lam
        pen = np.where(t <= al, 2.0 * lam * t - t * t / alpha, alpha * lam * lam)
    out = (np.asarray(theta, dtype=float) - x) ** 2 + pen
    return _as_float_or_array(theta, out)


def solve_penalized_ls(penalty: str, x: float, *, lam: float,
                       alpha: float | None = None) -> float:
    """Global minimizer of the scalar penalized least squares problem.

    Ties at a threshold resolve toward 0.  The closed forms are the classical
    thresholding rules: ridge ``(1 - 1/(lam+1)) x``, soft/hard thresholding
    at ``|x| = lam``, and the three-band SCAD / two-band MCP rules.
    """
    lam, alpha = _validate_penalty(penalty, lam, alpha)
    x = float(x)
    ax = abs(x)
    sg = math.copysign(1.0, x)
    if penalty == "ridge":
        return lam / (lam + 1.0) * x
    if penalty == "lasso":
        return sg * (ax - lam) if ax > lam else 0.0
    if penalty == "hard":
        return x if ax > lam else 0.0
    if penalty == "scad":
        al = alpha * lam
        if ax <= lam:
            return 0.0
        if ax <= 2.0 * lam:
            return sg * (ax - lam)
        if ax <= al:
            return sg * ((alpha - 1.0) * ax - al) / (alpha - 2.0)
        return x
    # mcp
    al = alpha * lam
    if ax <= lam:
        return 0.0
    if ax <= al:
        return sg * alpha * (ax - lam) / (alpha - 1.0)
    return x


def brute_force_pls_oracle(penalty: str, x: float, *, lam: float,
                           alpha: float | None = None,
                           grid_halfwidth: float, grid_step: float) -> float:
    """Grid argmin of the penalized objective over [x - hw, x + hw] plus 0.

    Test-only oracle; accuracy is limited by ``grid_step``.
    """
    if grid_halfwidth <= 0 or grid_step <= 0:
        raise DomainError("grid_halfwidth and grid_step must be positive")
    grid = np.arange(x - grid_halfwidth, x + grid_halfwidth + grid_step, grid_step)
    grid = np.append(grid, 0.0)
    vals = pls_objective(penalty, grid, x, lam=lam, alpha=alpha)
    return float(grid[int(np.argmin(vals))])
