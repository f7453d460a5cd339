"""Quadrature, principal-value and Hermite primitives.

The integrator is a globally adaptive Gauss-Kronrod (7, 15) scheme: the
panel with the largest error estimate is bisected until the summed estimate
drops below tolerance.  Infinite ends are mapped to a finite interval with
``x = lo + t / (1 - t)``.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .core import NonConvergence

K_MAX = 80
MAX_PANELS = 20_000
HILBERT_EPS = 1e-6

_EPS = np.finfo(float).eps

# Kronrod 15-point abscissae (non-negative half) and weights; every second
# node from index 1 is also a 7-point Gauss node.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes, ascending
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:7:2] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[9:15:2] = _WG[2::-1]


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    evaluations: int

    def __float__(self):
        return self.value


def _panel_rules(fx: np.ndarray, half: np.ndarray):
    """Kronrod value and QUADPACK-style error for a batch of panels.

    ``fx`` has shape (panels, 15); ``half`` is the half-width per panel.
    """
    resk = fx @ KRONROD_WEIGHTS
    resg = fx @ GAUSS_WEIGHTS
    mean = 0.5 * resk
    resabs = np.abs(fx) @ KRONROD_WEIGHTS
    resasc = np.abs(fx - mean[:, None]) @ KRONROD_WEIGHTS
    err = np.abs((resk - resg) * half)
    resasc = resasc * np.abs(half)
    resabs = resabs * np.abs(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    err = np.where(resabs > np.finfo(float).tiny / (50 * _EPS), np.maximum(50 * _EPS * resabs, err), err)
    return resk * half, err


def _mapped(f: Callable, lo: float, hi: float):
    """Return (g, a, b, to_t) with ∫_lo^hi f = ∫_a^b g on a finite interval."""
    if math.isfinite(lo) and math.isfinite(hi):
        return f, lo, hi, lambda x: x
    if math.isfinite(lo):
        def g(t):
            s = 1.0 - t
            return f(lo + t / s) / (s * s)

        return g, 0.0, 1.0, lambda x: (x - lo) / (1.0 + x - lo)
    if math.isfinite(hi):
        def g(t):
            s = 1.0 - t
            return f(hi - t / s) / (s * s)

        return g, 0.0, 1.0, lambda x: (hi - x) / (1.0 + hi - x)
    raise ValueError("doubly infinite intervals are split before mapping")


def _split_segments(lo, hi, points):
    """Cut [lo, hi] at interior breakpoints; doubly infinite ranges get a cut too."""
    cuts = sorted({float(p) for p in points if lo < p < hi and math.isfinite(p)})
    if not math.isfinite(lo) and not math.isfinite(hi) and not cuts:
        cuts = [0.0]
    edges = [lo, *cuts, hi]
    return list(zip(edges[:-1], edges[1:]))


def adaptive_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-10,
    points: Iterable[float] = (),
    max_panels: int = MAX_PANELS,
) -> QuadResult:
    """Integrate a vectorised ``f`` over ``[lo, hi]``.

    Parameters
    ----------
    f : callable
        Maps a 1-d array of abscissae to values.  Must be finite on the open
        interval.
    lo, hi : float
        Limits; either may be infinite.
    abs_tol, rel_tol : float
        Stop when the summed error estimate is below
        ``max(abs_tol, rel_tol * |value|)``.
    points : iterable of float
        Interior points where ``f`` has kinks or sharp features.
    max_panels : int
        Refinement budget, counted in evaluated panels.

    Raises
    ------
    NonConvergence
        When the budget runs out above tolerance.  The partial
        :class:`QuadResult` is attached as ``exc.partial``.
    """
    if abs_tol <= 0 or rel_tol <= 0:
        raise ValueError("tolerances must be positive")
    if lo == hi:
        return QuadResult(0.0, 0.0, 1)
    sign = 1.0
    if lo > hi:
        lo, hi, sign = hi, lo, -1.0
    points = list(points)

    rules = []
    heap = []
    for a, b in _split_segments(lo, hi, points):
        g, ta, tb, to_t = _mapped(f, a, b)
        rid = len(rules)
        rules.append(g)
        inner = sorted({to_t(p) for p in points if a < p < b})
        edges = [ta, *[t for t in inner if ta < t < tb], tb]
        for pa, pb in zip(edges[:-1], edges[1:]):
            heap.append([0.0, 0.0, pa, pb, rid])

    def evaluate(panels):
        # group by rule so each rule gets one vectorised call
        out_v = np.empty(len(panels))
        out_e = np.empty(len(panels))
        by_rule: dict[int, list[int]] = {}
        for i, p in enumerate(panels):
            by_rule.setdefault(p[4], []).append(i)
        for rid, idx in by_rule.items():
            a = np.array([panels[i][2] for i in idx])
            b = np.array([panels[i][3] for i in idx])
            centre = 0.5 * (a + b)
            half = 0.5 * (b - a)
            x = centre[:, None] + half[:, None] * NODES[None, :]
            fx = np.asarray(rules[rid](x.ravel()), dtype=float).reshape(x.shape)
            if not np.all(np.isfinite(fx)):
                raise ValueError("integrand returned a non-finite value")
            v, e = _panel_rules(fx, half)
            out_v[idx] = v
            out_e[idx] = e
        return out_v, out_e

    tie = itertools.count()  # heap tie-breaker
    vals, errs = evaluate(heap)
    panels = len(heap)
    entries = []
    for p, v, e in zip(heap, vals, errs):
        entries.append((-e, next(tie), v, p[2], p[3], p[4]))
    heapq.heapify(entries)
    total = float(np.sum(vals))
    err_total = float(np.sum(errs))
    evaluations = 15 * panels
    frozen_err = 0.0
    frozen_vals: list[float] = []

    while True:
        target = max(abs_tol, rel_tol * abs(total))
        if err_total <= target or not entries:
            break
        if panels + 2 > max_panels:
            res = QuadResult(sign * total, err_total, evaluations)
            raise NonConvergence(
                f"quadrature budget of {max_panels} panels exhausted "
                f"(error estimate {err_total:.3g} > {target:.3g})", partial=res)
        negerr, _, v, a, b, rid = heapq.heappop(entries)
        mid = 0.5 * (a + b)
        if not (a < mid < b) or (b - a) <= 64 * _EPS * max(abs(a), abs(b), 1e-300):
            # cannot split further; its error stays in the total
            frozen_err += -negerr
            frozen_vals.append(v)
            if not entries:
                break
            continue
        kids = [[0, 0, a, mid, rid], [0, 0, mid, b, rid]]
        kv, ke = evaluate(kids)
        panels += 2
        evaluations += 30
        total += kv.sum() - v
        err_total += ke.sum() + negerr
        for (k, kvv, kee) in zip(kids, kv, ke):
            heapq.heappush(entries, (-kee, next(tie), kvv, k[2], k[3], rid))

    # re-sum to shed accumulated rounding from incremental updates
    total = math.fsum([e[2] for e in entries] + frozen_vals)
    err_total = float(sum(-e[0] for e in entries) + frozen_err)
    return QuadResult(float(sign * total), err_total, evaluations)


def hilbert_transform(
    f: Callable[[np.ndarray], np.ndarray],
    y: float,
    abs_tol: float = 1e-10,
    l1_bound: float = 1.0,
    fprime: Callable[[float], float] | None = None,
    points: Sequence[float] = (),
    eps: float = HILBERT_EPS,
) -> QuadResult:
    """Principal-value transform ``(1/pi) ∫_0^∞ (f(y-t) - f(y+t)) / t dt``.

    Parameters
    ----------
    f : callable
        Vectorised, continuously differentiable near ``y``.
    y : float
    abs_tol : float
    l1_bound : float
        Bound on ``∫|f|``; controls the outer cut-off ``T``.
    fprime : callable, optional
        Derivative of ``f``; used for the removable singularity on
        ``t < eps``.  A central difference is used when omitted.
    points : sequence of float
        Offsets ``t > 0`` where the integrand has sharp features.
    """
    if fprime is not None:
        slope = float(fprime(y))
    else:
        h = 1e-5
        slope = float((f(np.array([y + h])) - f(np.array([y - h])))[0] / (2 * h))
    inner = -2.0 * slope * eps / math.pi

    T = 4.0 * l1_bound / (math.pi * abs_tol)
    tail_bound = l1_bound / (math.pi * T)

    def integrand(t):
        return (f(y - t) - f(y + t)) / (math.pi * t)

    # geometric breakpoints keep panels proportionate across many decades
    decades = [eps * 10.0 ** k for k in range(1, 40) if eps * 10.0 ** k < T]
    pts = sorted({*decades, *(p for p in points if eps < p < T)})
    res = adaptive_integrate(integrand, eps, T, abs_tol=abs_tol / 2, rel_tol=1e-14, points=pts)
    return QuadResult(res.value + inner, res.error_estimate + tail_bound, res.evaluations + 2)


# --------------------------------------------------------------------------
# Hermite polynomials and derivatives of the normal CDF


def _check_order(k: int, limit: int):
    if int(k) != k or k < 0:
        raise ValueError("order must be a non-negative integer")
    if k > limit:
        raise ValueError(f"order {k} exceeds the ceiling {limit}")


def hermite_he_all(kmax: int, x) -> np.ndarray:
    """``He_0 .. He_kmax`` at ``x``; shape ``(kmax + 1,) + shape(x)``."""
    _check_order(kmax, K_MAX + 1)
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for k in range(1, kmax):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


def hermite_he(k: int, x):
    """Probabilists' Hermite polynomial ``He_k(x)``."""
    _check_order(k, K_MAX)
    out = hermite_he_all(k, x)[k]
    return out if out.ndim else float(out)


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


def phi_deriv_all(kmax: int, x) -> np.ndarray:
    """``Φ^(0) .. Φ^(kmax)`` at ``x``."""
    _check_order(kmax, K_MAX + 1)
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = ndtr(x)
    if kmax >= 1:
        he = hermite_he_all(kmax - 1, x)
        signs = np.where(np.arange(kmax) % 2 == 0, 1.0, -1.0).reshape((-1,) + (1,) * x.ndim)
        out[1:] = signs * he * norm_pdf(x)
    return out


def phi_deriv(k: int, x):
    """k-th derivative of the standard normal CDF."""
    _check_order(k, K_MAX + 1)
    out = phi_deriv_all(k, x)[k]
    return out if out.ndim else float(out)


def neville_at_zero(h: Sequence[float], values: Sequence[float]) -> float:
    """Value at ``h = 0`` of the interpolating polynomial through ``(h_i, v_i)``."""
    h = np.asarray(h, dtype=float)
    p = np.array(values, dtype=float)
    n = len(h)
    for m in range(1, n):
        p[: n - m] = (h[m:] * p[: n - m] - h[: n - m] * p[1: n - m + 1]) / (h[m:] - h[: n - m])
    return float(p[0])
