"""NumPy implementation of the solver kernels.

This module is the reference for ``_ckernels``: both expose the same functions
with the same semantics, and ``msprox._backend`` picks one at import time.
Inputs are assumed validated (contiguous float64, matching lengths).
"""

import math
import time

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

NAME = "python"

# method / step / termination codes shared with the compiled kernels
GRADIENT_DESCENT, NEWTON_DENSE, NEWTON_SM = 0, 1, 2
UNIT, OPTIMAL = 0, 1
TOLERANCE, MAX_ITER, STALLED, TIME_LIMIT = 0, 1, 2, 3
EVENT_NEWTON, EVENT_FALLBACK, EVENT_GUARD, EVENT_REFLECT, EVENT_ESCAPE = 0, 1, 2, 3, 4

XI_REL_EPS = 1e-12
SM_DEN_EPS = 1e-12
STALL_REL = 1e-16
STALL_COUNT = 20
EPS = float(np.finfo(float).eps)
POLISH_STEPS = 8


def objective(sigma, u, b, x):
    r = x - u
    s = x @ x - b
    return float(s * s + (sigma * r) @ r)


def rounding_band(sigma, u, b, x):
    """Bound on the floating-point error of ``objective`` at ``x``."""
    xx = x @ x
    r = x - u
    return 8.0 * EPS * (abs(xx - b) * (xx + abs(b)) + (sigma * np.abs(r)) @ (np.abs(x) + np.abs(u)))


def gradient(sigma, u, b, x):
    return 4.0 * (x @ x - b) * x + 2.0 * sigma * (x - u)


def sm_direction(sigma, b, x, g):
    """Newton direction via Sherman-Morrison, or ``None`` if the Hessian is not PD.

    The Hessian is ``diag(xi) + 8 x x^T``.  By interlacing it has at most one
    more negative eigenvalue than ``diag(xi)``, and by the determinant lemma
    ``det H = det(diag(xi)) * c`` with ``c = 1 + 8 x^T (x / xi)``.  So H is PD
    iff either no ``xi`` is negative and ``c > 0``, or exactly one is negative
    and ``c < 0``.
    """
    xi = 2.0 * sigma + 4.0 * (x @ x - b)
    scale = np.max(np.abs(xi))
    if not scale > 0.0 or np.any(np.abs(xi) <= XI_REL_EPS * scale):
        return None
    neg = int(np.count_nonzero(xi < 0.0))
    if neg > 1:
        return None
    gx = g / xi
    xx = x / xi
    c = 1.0 + 8.0 * (x @ xx)
    if (neg == 0 and c <= SM_DEN_EPS) or (neg == 1 and c >= -SM_DEN_EPS):
        return None
    return -(gx - (8.0 * (x @ gx) / c) * xx)


def dense_direction(sigma, b, x, g):
    """Newton direction from a dense Cholesky solve, or ``None`` if not PD."""
    h = 8.0 * np.outer(x, x)
    h[np.diag_indices_from(h)] += 2.0 * sigma + 4.0 * (x @ x - b)
    try:
        factor = cho_factor(h, lower=True, check_finite=False)
    except LinAlgError:
        return None
    return -cho_solve(factor, g, check_finite=False)


def quartic_coefficients(sigma, u, b, x, d):
    """Coefficients ``(a4, a3, a2, a1, a0)`` of ``alpha -> f(x + alpha d)``."""
    r = x - u
    s = x @ x - b
    p = 2.0 * (x @ d)
    dd = d @ d
    sd = sigma * d
    return (
        dd * dd,
        2.0 * p * dd,
        p * p + 2.0 * s * dd + sd @ d,
        2.0 * s * p + 2.0 * (sd @ r),
        s * s + (sigma * r) @ r,
    )


def _cubic_eval(c3, c2, c1, c0, t):
    return ((c3 * t + c2) * t + c1) * t + c0


def _polish(c3, c2, c1, c0, t):
    res = abs(_cubic_eval(c3, c2, c1, c0, t))
    for _ in range(POLISH_STEPS):
        if res == 0.0:
            break
        dp = (3.0 * c3 * t + 2.0 * c2) * t + c1
        if dp == 0.0:
            break
        t_new = t - _cubic_eval(c3, c2, c1, c0, t) / dp
        res_new = abs(_cubic_eval(c3, c2, c1, c0, t_new))
        if not res_new < res:
            break
        t, res = t_new, res_new
    return t


def cubic_real_roots(c3, c2, c1, c0):
    """Real roots of ``c3 t^3 + c2 t^2 + c1 t + c0``, ascending.

    Closed form (trigonometric when three real roots, Cardano otherwise),
    followed by Newton polishing.  A root of multiplicity two is returned twice
    only when the discriminant is exactly zero; otherwise rounding decides
    whether it shows up once or twice.
    """
    if c3 == 0.0:
        raise ValueError("leading coefficient must be nonzero")
    a = c2 / c3
    bb = c1 / c3
    c = c0 / c3
    q = (a * a - 3.0 * bb) / 9.0
    r = (2.0 * a * a * a - 9.0 * a * bb + 27.0 * c) / 54.0
    q3 = q * q * q
    shift = a / 3.0
    if r * r < q3:
        theta = math.acos(max(-1.0, min(1.0, r / math.sqrt(q3))))
        m = -2.0 * math.sqrt(q)
        roots = [
            m * math.cos(theta / 3.0) - shift,
            m * math.cos((theta + 2.0 * math.pi) / 3.0) - shift,
            m * math.cos((theta - 2.0 * math.pi) / 3.0) - shift,
        ]
    else:
        big = -math.copysign(abs(r) + math.sqrt(r * r - q3), r)
        big = math.copysign(abs(big) ** (1.0 / 3.0), big)
        small = q / big if big != 0.0 else 0.0
        roots = [big + small - shift]
        if r * r == q3 and big != 0.0:
            double = -0.5 * (big + small) - shift
            roots += [double, double]
    return sorted(_polish(c3, c2, c1, c0, t) for t in roots)


def line_min(a4, a3, a2, a1):
    """Global minimizer of the quartic with the given (non-constant) coefficients.

    Candidates are the real critical points plus ``alpha = 1``; values are
    compared without the constant term.  Ties go to the smaller ``|alpha|``.
    """
    best = 1.0
    best_val = a1 + a2 + a3 + a4
    for t in cubic_real_roots(4.0 * a4, 3.0 * a3, 2.0 * a2, a1):
        val = t * (a1 + t * (a2 + t * (a3 + t * a4)))
        if val < best_val or (val == best_val and abs(t) < abs(best)):
            best, best_val = t, val
    return best


def line_search(sigma, u, b, x, d):
    a4, a3, a2, a1, _ = quartic_coefficients(sigma, u, b, x, d)
    return line_min(a4, a3, a2, a1)


def _escape(sigma, u, b, x, f):
    """Move off a saddle: ``(x_new, f_new, alpha, event)`` or ``None`` entries.

    Only a decrease larger than the stall threshold counts.
    """
    floor = STALL_REL * max(1.0, f)
    xn = np.abs(x)
    fn = objective(sigma, u, b, xn)
    if f - fn > floor:
        return xn, fn, 0.0, EVENT_REFLECT
    j = int(np.argmin(sigma))
    if 2.0 * (x @ x - b) + sigma[j] < 0.0:
        d = np.zeros_like(x)
        d[j] = 1.0
        alpha = line_search(sigma, u, b, x, d)
        xn = x + alpha * d
        fn = objective(sigma, u, b, xn)
        if f - fn > floor:
            return xn, fn, alpha, EVENT_ESCAPE
    return None, None, None, None


def run(sigma, u, b, x0, method, step, tol, max_iter, trace, time_limit):
    """Iterate to termination.

    Returns ``(x, f, grad_sq, iterations, code, trace, fallbacks, guards,
    escapes, elapsed)``; ``trace`` is an ``(iterations, 4)`` array of
    (objective, grad_sq, alpha, event) rows or ``None`` and ``elapsed`` is the
    monotonic time spent in the loop.

    Stopping is final only at a minimizer.  When the tolerance is met, or the
    run stalls, at a point where some ``mu_i = 2 (x^T x - b) + sigma_i`` is
    negative, the point is near a saddle and one of two cheap moves leaves it:

    * ``EVENT_REFLECT``: replace ``x`` by ``|x|``.  Since ``u >= 0`` this never
      hurts, and it helps whenever ``x_i < 0 < u_i``.
    * ``EVENT_ESCAPE``: otherwise the saddle has ``x_j ~ u_j = 0`` for the
      smallest ``sigma_j``, where the curvature along ``e_j`` is about
      ``2 mu_j < 0``; take the exact step along ``e_j``.

    Either move counts only if it lowers the objective by more than the stall
    threshold; then iteration resumes.

    A step is accepted if it does not raise the objective, or raises it by
    no more than :func:`rounding_band` while lowering the gradient norm.
    """
    x = np.array(x0, dtype=float)
    rows = [] if trace else None
    k = 0
    stall = 0
    fallbacks = guards = escapes = 0
    code = -1
    start = time.perf_counter()
    f = objective(sigma, u, b, x)
    g = gradient(sigma, u, b, x)
    gg = float(g @ g)
    stuck = False
    while k < max_iter:
        if gg <= tol or stuck:
            xn, fn, alpha, event = _escape(sigma, u, b, x, f)
            if xn is None:
                break
            stuck = False
            escapes += 1
        else:
            event = EVENT_NEWTON
            if method == GRADIENT_DESCENT:
                d = -g
            elif method == NEWTON_DENSE:
                d = dense_direction(sigma, b, x, g)
            else:
                d = sm_direction(sigma, b, x, g)
            if d is None:
                d = -g
                event = EVENT_FALLBACK
                fallbacks += 1
            if step == UNIT and event == EVENT_NEWTON:
                alpha = 1.0
                xn = x + d
                fn = objective(sigma, u, b, xn)
                if fn > f:
                    event = EVENT_GUARD
                    guards += 1
                    alpha = line_search(sigma, u, b, x, d)
                    xn = x + alpha * d
                    fn = objective(sigma, u, b, xn)
            else:
                alpha = line_search(sigma, u, b, x, d)
                xn = x + alpha * d
                fn = objective(sigma, u, b, xn)
        gn = gradient(sigma, u, b, xn)
        ggn = float(gn @ gn)
        floor = STALL_REL * max(1.0, f)
        # inside the rounding band the objective cannot rank the two points,
        # so the gradient decides
        band = max(floor, rounding_band(sigma, u, b, x))
        if not (fn <= f or (fn - f <= band and ggn < gg)):
            # rejected; repeating it would change nothing
            stuck = True
            continue
        if f - fn < floor and not ggn < gg:
            stall += 1
        else:
            stall = 0
        x = xn
        f = fn
        g = gn
        gg = ggn
        k += 1
        if rows is not None:
            rows.append((f, gg, alpha, event))
        if stall >= STALL_COUNT:
            stuck = True
            stall = 0
        if time_limit > 0.0 and (k & 63) == 0 and time.perf_counter() - start > time_limit:
            code = TIME_LIMIT
            break
    elapsed = time.perf_counter() - start
    if gg <= tol:
        code = TOLERANCE
    elif stuck:
        code = STALLED
    elif code < 0:
        code = MAX_ITER
    tr = None
    if rows is not None:
        tr = np.array(rows, dtype=float).reshape(-1, 4)
    return x, f, gg, k, code, tr, fallbacks, guards, escapes, elapsed
