# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled solver kernels.

Function-for-function mirror of ``msprox._pykernels``; see that module for
the semantics.  The whole iteration loop of ``run`` executes without the GIL.
The dense Newton direction uses an unblocked row-oriented Cholesky, an honest
O(N^3) reference factorization.
"""

import numpy as np

from libc.math cimport acos, cos, cbrt, fabs, sqrt, copysign, M_PI
from posix.time cimport clock_gettime, timespec, CLOCK_MONOTONIC

NAME = "cython"

cdef double XI_REL_EPS = 1e-12
cdef double SM_DEN_EPS = 1e-12
cdef double STALL_REL = 1e-16
cdef double EPS = 2.220446049250313e-16

cdef enum:
    STALL_COUNT = 20
    POLISH_STEPS = 8
    GD = 0
    DENSE = 1
    SM = 2
    UNIT = 0
    TOLERANCE = 0
    MAX_ITER = 1
    STALLED = 2
    TIME_LIMIT = 3
    EV_NEWTON = 0
    EV_FALLBACK = 1
    EV_GUARD = 2
    EV_REFLECT = 3
    EV_ESCAPE = 4


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t i = 0
    while i + 4 <= n:
        s0 += a[i] * b[i]
        s1 += a[i + 1] * b[i + 1]
        s2 += a[i + 2] * b[i + 2]
        s3 += a[i + 3] * b[i + 3]
        i += 4
    while i < n:
        s0 += a[i] * b[i]
        i += 1
    return (s0 + s1) + (s2 + s3)


cdef double _objective(const double* sigma, const double* u, double b,
                       const double* x, Py_ssize_t n) noexcept nogil:
    cdef double xx = 0.0, q = 0.0, r
    cdef Py_ssize_t i
    for i in range(n):
        r = x[i] - u[i]
        xx += x[i] * x[i]
        q += sigma[i] * r * r
    xx -= b
    return xx * xx + q


cdef double _rounding_band(const double* sigma, const double* u, double b,
                          const double* x, Py_ssize_t n) noexcept nogil:
    cdef double xx = 0.0, q = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        xx += x[i] * x[i]
        q += sigma[i] * fabs(x[i] - u[i]) * (fabs(x[i]) + fabs(u[i]))
    return 8.0 * EPS * (fabs(xx - b) * (xx + fabs(b)) + q)


cdef double _gradient(const double* sigma, const double* u, double b,
                      const double* x, double* g, Py_ssize_t n) noexcept nogil:
    """Writes the gradient into ``g`` and returns its squared norm."""
    cdef double s = 4.0 * (_dot(x, x, n) - b), gg = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        g[i] = s * x[i] + 2.0 * sigma[i] * (x[i] - u[i])
        gg += g[i] * g[i]
    return gg


cdef int _sm_direction(const double* sigma, double b, const double* x,
                       const double* g, double* d, double* xx,
                       Py_ssize_t n) noexcept nogil:
    """0 on success (direction in ``d``), 1 when a fallback is required."""
    cdef double shift = 4.0 * (_dot(x, x, n) - b)
    cdef double scale = 0.0, xi, c = 0.0, coef
    cdef Py_ssize_t i, neg = 0
    for i in range(n):
        xi = fabs(2.0 * sigma[i] + shift)
        if xi > scale:
            scale = xi
    if not scale > 0.0:
        return 1
    for i in range(n):
        xi = 2.0 * sigma[i] + shift
        if fabs(xi) <= XI_REL_EPS * scale:
            return 1
        if xi < 0.0:
            neg += 1
        d[i] = g[i] / xi
        xx[i] = x[i] / xi
    if neg > 1:
        return 1
    c = 1.0 + 8.0 * _dot(x, xx, n)
    if (neg == 0 and c <= SM_DEN_EPS) or (neg == 1 and c >= -SM_DEN_EPS):
        return 1
    coef = 8.0 * _dot(x, d, n) / c
    for i in range(n):
        d[i] = -(d[i] - coef * xx[i])
    return 0


cdef int _dense_direction(const double* sigma, double b, const double* x,
                          const double* g, double* d, double* L,
                          Py_ssize_t n) noexcept nogil:
    """Cholesky of ``diag(xi) + 8 x x^T`` in ``L`` (row-major lower), then solve."""
    cdef double shift = 4.0 * (_dot(x, x, n) - b)
    cdef double s
    cdef Py_ssize_t i, j, k
    cdef double* Li
    cdef double* Lj
    for i in range(n):
        Li = L + i * n
        for j in range(i + 1):
            Lj = L + j * n
            s = 8.0 * x[i] * x[j] - _dot(Li, Lj, j)
            if i == j:
                s += 2.0 * sigma[i] + shift
                if not s > 0.0:
                    return 1
                Li[i] = sqrt(s)
            else:
                Li[j] = s / Lj[j]
    # forward: L y = -g  (y stored in d)
    for i in range(n):
        Li = L + i * n
        d[i] = (-g[i] - _dot(Li, d, i)) / Li[i]
    # backward: L^T d = y, column sweep so rows of L stay contiguous
    for i in range(n - 1, -1, -1):
        Li = L + i * n
        d[i] = d[i] / Li[i]
        s = d[i]
        for k in range(i):
            d[k] -= Li[k] * s
    return 0


cdef void _quartic(const double* sigma, const double* u, double b,
                   const double* x, const double* d, double* a,
                   Py_ssize_t n) noexcept nogil:
    cdef double xx = 0.0, xd = 0.0, dd = 0.0, dsd = 0.0, dsr = 0.0, rsr = 0.0
    cdef double r, sd, s, p
    cdef Py_ssize_t i
    for i in range(n):
        r = x[i] - u[i]
        sd = sigma[i] * d[i]
        xx += x[i] * x[i]
        xd += x[i] * d[i]
        dd += d[i] * d[i]
        dsd += sd * d[i]
        dsr += sd * r
        rsr += sigma[i] * r * r
    s = xx - b
    p = 2.0 * xd
    a[4] = dd * dd
    a[3] = 2.0 * p * dd
    a[2] = p * p + 2.0 * s * dd + dsd
    a[1] = 2.0 * s * p + 2.0 * dsr
    a[0] = s * s + rsr


cdef inline double _ceval(double c3, double c2, double c1, double c0, double t) noexcept nogil:
    return ((c3 * t + c2) * t + c1) * t + c0


cdef double _polish(double c3, double c2, double c1, double c0, double t) noexcept nogil:
    cdef double res = fabs(_ceval(c3, c2, c1, c0, t)), dp, tn, rn
    cdef int it
    for it in range(POLISH_STEPS):
        if res == 0.0:
            break
        dp = (3.0 * c3 * t + 2.0 * c2) * t + c1
        if dp == 0.0:
            break
        tn = t - _ceval(c3, c2, c1, c0, t) / dp
        rn = fabs(_ceval(c3, c2, c1, c0, tn))
        if not rn < res:
            break
        t = tn
        res = rn
    return t


cdef int _cubic_roots(double c3, double c2, double c1, double c0, double* out) noexcept nogil:
    cdef double a = c2 / c3, bb = c1 / c3, c = c0 / c3
    cdef double q = (a * a - 3.0 * bb) / 9.0
    cdef double r = (2.0 * a * a * a - 9.0 * a * bb + 27.0 * c) / 54.0
    cdef double q3 = q * q * q, shift = a / 3.0
    cdef double theta, m, big, small, ratio, tmp
    cdef int cnt, i, j
    if r * r < q3:
        ratio = r / sqrt(q3)
        if ratio > 1.0:
            ratio = 1.0
        elif ratio < -1.0:
            ratio = -1.0
        theta = acos(ratio)
        m = -2.0 * sqrt(q)
        out[0] = m * cos(theta / 3.0) - shift
        out[1] = m * cos((theta + 2.0 * M_PI) / 3.0) - shift
        out[2] = m * cos((theta - 2.0 * M_PI) / 3.0) - shift
        cnt = 3
    else:
        big = -copysign(fabs(r) + sqrt(r * r - q3), r)
        big = cbrt(big)
        small = q / big if big != 0.0 else 0.0
        out[0] = big + small - shift
        cnt = 1
        if r * r == q3 and big != 0.0:
            out[1] = -0.5 * (big + small) - shift
            out[2] = out[1]
            cnt = 3
    for i in range(cnt):
        out[i] = _polish(c3, c2, c1, c0, out[i])
    # insertion sort, at most three entries
    for i in range(1, cnt):
        tmp = out[i]
        j = i - 1
        while j >= 0 and out[j] > tmp:
            out[j + 1] = out[j]
            j -= 1
        out[j + 1] = tmp
    return cnt


cdef double _line_min(const double* a) noexcept nogil:
    cdef double roots[3]
    cdef int cnt = _cubic_roots(4.0 * a[4], 3.0 * a[3], 2.0 * a[2], a[1], roots)
    cdef double best = 1.0, best_val = a[1] + a[2] + a[3] + a[4], t, val
    cdef int i
    for i in range(cnt):
        t = roots[i]
        val = t * (a[1] + t * (a[2] + t * (a[3] + t * a[4])))
        if val < best_val or (val == best_val and fabs(t) < fabs(best)):
            best = t
            best_val = val
    return best


cdef inline double _now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + 1e-9 * ts.tv_nsec


# ---------------------------------------------------------------- Python API

def objective(const double[::1] sigma, const double[::1] u, double b, const double[::1] x):
    return _objective(&sigma[0] if sigma.shape[0] else NULL,
                      &u[0] if u.shape[0] else NULL, b,
                      &x[0] if x.shape[0] else NULL, x.shape[0])


def gradient(const double[::1] sigma, const double[::1] u, double b, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] g = out
    if n:
        _gradient(&sigma[0], &u[0], b, &x[0], &g[0], n)
    return out


def sm_direction(const double[::1] sigma, double b, const double[::1] x, const double[::1] g):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n)
    work = np.empty(n)
    cdef double[::1] d = out, w = work
    if n == 0 or _sm_direction(&sigma[0], b, &x[0], &g[0], &d[0], &w[0], n):
        return None
    return out


def dense_direction(const double[::1] sigma, double b, const double[::1] x, const double[::1] g):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n)
    buf = np.empty(n * n)
    cdef double[::1] d = out, L = buf
    if n == 0 or _dense_direction(&sigma[0], b, &x[0], &g[0], &d[0], &L[0], n):
        return None
    return out


def quartic_coefficients(const double[::1] sigma, const double[::1] u, double b,
                         const double[::1] x, const double[::1] d):
    cdef double a[5]
    _quartic(&sigma[0], &u[0], b, &x[0], &d[0], a, x.shape[0])
    return (a[4], a[3], a[2], a[1], a[0])


def cubic_real_roots(double c3, double c2, double c1, double c0):
    cdef double out[3]
    if c3 == 0.0:
        raise ValueError("leading coefficient must be nonzero")
    cdef int cnt = _cubic_roots(c3, c2, c1, c0, out)
    return [out[i] for i in range(cnt)]


def line_min(double a4, double a3, double a2, double a1):
    cdef double a[5]
    a[0] = 0.0
    a[1] = a1
    a[2] = a2
    a[3] = a3
    a[4] = a4
    return _line_min(a)


def line_search(const double[::1] sigma, const double[::1] u, double b,
                const double[::1] x, const double[::1] d):
    cdef double a[5]
    _quartic(&sigma[0], &u[0], b, &x[0], &d[0], a, x.shape[0])
    return _line_min(a)


cdef int _escape(const double* sigma, const double* u, double b, const double* x,
                 double f, double* xn, double* d, double* fn, double* alpha,
                 Py_ssize_t n) noexcept nogil:
    """Saddle move into ``xn``; returns the event code or -1 if none helps."""
    cdef double floor = STALL_REL * (f if f > 1.0 else 1.0)
    cdef double a[5]
    cdef Py_ssize_t i, j = 0
    for i in range(n):
        xn[i] = fabs(x[i])
    fn[0] = _objective(sigma, u, b, xn, n)
    alpha[0] = 0.0
    if f - fn[0] > floor:
        return EV_REFLECT
    for i in range(1, n):
        if sigma[i] < sigma[j]:
            j = i
    if 2.0 * (_dot(x, x, n) - b) + sigma[j] < 0.0:
        for i in range(n):
            d[i] = 0.0
        d[j] = 1.0
        _quartic(sigma, u, b, x, d, a, n)
        alpha[0] = _line_min(a)
        for i in range(n):
            xn[i] = x[i]
        xn[j] = x[j] + alpha[0]
        fn[0] = _objective(sigma, u, b, xn, n)
        if f - fn[0] > floor:
            return EV_ESCAPE
    return -1


def run(const double[::1] sigma, const double[::1] u, double b, const double[::1] x0,
        int method, int step, double tol, Py_ssize_t max_iter, bint trace,
        double time_limit):
    cdef Py_ssize_t n = x0.shape[0]
    if n == 0:
        raise ValueError("empty instance")
    x_arr = np.array(x0, dtype=np.float64)
    xn_arr = np.empty(n)
    g_arr = np.empty(n)
    gn_arr = np.empty(n)
    d_arr = np.empty(n)
    w_arr = np.empty(n)
    l_arr = np.empty(n * n if method == DENSE else 1)
    t_arr = np.empty((max_iter if trace else 1, 4))
    cdef double[::1] xv = x_arr, xnv = xn_arr, gv = g_arr, gnv = gn_arr, dv = d_arr, wv = w_arr, lv = l_arr
    cdef double[:, ::1] tv = t_arr
    cdef double* x = &xv[0]
    cdef double* xn = &xnv[0]
    cdef double* g = &gv[0]
    cdef double* gn = &gnv[0]
    cdef double* d = &dv[0]
    cdef double* w = &wv[0]
    cdef double* L = &lv[0]
    cdef double* tmp
    cdef const double* sg = &sigma[0]
    cdef const double* uu = &u[0]
    cdef double a[5]
    cdef double f, fn, gg, ggn, floor, band, alpha, start, elapsed
    cdef Py_ssize_t k = 0, i
    cdef int stall = 0, event, failed, code = -1, stuck = 0
    cdef Py_ssize_t fallbacks = 0, guards = 0, escapes = 0

    with nogil:
        start = _now()
        f = _objective(sg, uu, b, x, n)
        gg = _gradient(sg, uu, b, x, g, n)
        while k < max_iter:
            if gg <= tol or stuck:
                event = _escape(sg, uu, b, x, f, xn, d, &fn, &alpha, n)
                if event < 0:
                    break
                stuck = 0
                escapes += 1
            else:
                event = EV_NEWTON
                if method == GD:
                    failed = 0
                    for i in range(n):
                        d[i] = -g[i]
                elif method == DENSE:
                    failed = _dense_direction(sg, b, x, g, d, L, n)
                else:
                    failed = _sm_direction(sg, b, x, g, d, w, n)
                if failed:
                    for i in range(n):
                        d[i] = -g[i]
                    event = EV_FALLBACK
                    fallbacks += 1
                if step == UNIT and event == EV_NEWTON:
                    alpha = 1.0
                    for i in range(n):
                        xn[i] = x[i] + d[i]
                    fn = _objective(sg, uu, b, xn, n)
                    if fn > f:
                        event = EV_GUARD
                        guards += 1
                        _quartic(sg, uu, b, x, d, a, n)
                        alpha = _line_min(a)
                        for i in range(n):
                            xn[i] = x[i] + alpha * d[i]
                        fn = _objective(sg, uu, b, xn, n)
                else:
                    _quartic(sg, uu, b, x, d, a, n)
                    alpha = _line_min(a)
                    for i in range(n):
                        xn[i] = x[i] + alpha * d[i]
                    fn = _objective(sg, uu, b, xn, n)
            ggn = _gradient(sg, uu, b, xn, gn, n)
            floor = STALL_REL * (f if f > 1.0 else 1.0)
            band = _rounding_band(sg, uu, b, x, n)
            if band < floor:
                band = floor
            if not (fn <= f or (fn - f <= band and ggn < gg)):
                stuck = 1
                continue
            if f - fn < floor and not ggn < gg:
                stall += 1
            else:
                stall = 0
            tmp = x
            x = xn
            xn = tmp
            tmp = g
            g = gn
            gn = tmp
            f = fn
            gg = ggn
            if trace:
                tv[k, 0] = f
                tv[k, 1] = gg
                tv[k, 2] = alpha
                tv[k, 3] = event
            k += 1
            if stall >= STALL_COUNT:
                stuck = 1
                stall = 0
            if time_limit > 0.0 and (k & 63) == 0 and _now() - start > time_limit:
                code = TIME_LIMIT
                break
        elapsed = _now() - start
    if gg <= tol:
        code = TOLERANCE
    elif stuck:
        code = STALLED
    elif code < 0:
        code = MAX_ITER
    out = x_arr if x == &xv[0] else xn_arr
    tr = np.array(t_arr[:k]) if trace else None
    return out, f, gg, k, code, tr, fallbacks, guards, escapes, elapsed
