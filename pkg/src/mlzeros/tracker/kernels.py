"""Compiled inner loops: homotopy evaluation, dense LU and path tracking.

A homotopy is encoded in flat arrays (see :class:`mlzeros.tracker.homotopy.Homotopy`)::

    H_i(x, t) = sum_k (c0_k + t c1_k) x^e_k  +  w_i t prod_l (A_l . x + b_l)

where the first sum runs over sparse terms of equation ``i`` and the product
over the linear factors of a linear-product start system.
"""

import numpy as np
from numba import njit

CONVERGED = 0
DIVERGED = 1
STEP_FAILURE = 2
SINGULAR = 3

STATUS_NAMES = ("converged", "diverged", "step_failure", "singular_endpoint")


@njit(cache=True, nogil=True, inline="always")
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


@njit(cache=True, nogil=True)
def _pw_buffer(n, maxexp, nfac):
    """Power table plus one spare scratch row."""
    w = max(n, nfac, 1)
    if maxexp.shape[0]:
        w = max(w, maxexp.max() + 1)
    return np.empty((n + 1, w), np.complex128)


@njit(cache=True, nogil=True)
def _powers(x, maxexp, pw):
    n = x.shape[0]
    for v in range(n):
        pw[v, 0] = 1.0
        for e in range(1, maxexp[v] + 1):
            pw[v, e] = pw[v, e - 1] * x[v]


@njit(cache=True, nogil=True)
def eval_h(x, t, t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp,
           lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx, H, J, Ht, pw, L, want_j):
    n = x.shape[0]
    neq = H.shape[0]
    L2 = pw[n]  # spare row used as scratch for prefix products
    _powers(x, maxexp, pw)
    for i in range(neq):
        H[i] = 0.0
        Ht[i] = 0.0
    if want_j:
        for i in range(neq):
            for v in range(n):
                J[i, v] = 0.0
    nt = t_eq.shape[0]
    k = 0
    while k < nt:
        # terms are grouped by equation
        i = t_eq[k]
        hi = 0.0 + 0.0j
        hti = 0.0 + 0.0j
        while k < nt and t_eq[k] == i:
            c = t_c0[k] + t * t_c1[k]
            a0 = t_ptr[k]
            a1 = t_ptr[k + 1]
            mono = 1.0 + 0.0j
            for m in range(a0, a1):
                mono *= pw[f_var[m], f_exp[m]]
            hi += c * mono
            hti += t_c1[k] * mono
            if want_j and a1 > a0:
                if a1 - a0 == 1:
                    v = f_var[a0]
                    e = f_exp[a0]
                    J[i, v] += c * e * pw[v, e - 1]
                else:
                    # prefix products, then a backward sweep with the suffix product
                    pre = c
                    for m in range(a0, a1):
                        L2[m - a0] = pre
                        pre *= pw[f_var[m], f_exp[m]]
                    suf = 1.0 + 0.0j
                    for m in range(a1 - 1, a0 - 1, -1):
                        v = f_var[m]
                        e = f_exp[m]
                        J[i, v] += L2[m - a0] * suf * e * pw[v, e - 1]
                        suf *= pw[v, e]
            k += 1
        H[i] += hi
        Ht[i] += hti
    for i in range(neq):
        w = lp_w[i]
        if w == 0:
            continue
        l0 = lp_ptr[i]
        l1 = lp_ptr[i + 1]
        g = 1.0 + 0.0j
        for l in range(l0, l1):
            s = lp_b[l]
            for q in range(lp_cptr[l], lp_cptr[l + 1]):
                v = lp_cidx[q]
                s += lp_A[l, v] * x[v]
            L[l] = s
            g *= s
        H[i] += w * t * g
        Ht[i] += w * g
        if want_j:
            pre = w * t
            for l in range(l0, l1):
                L2[l - l0] = pre
                pre *= L[l]
            suf = 1.0 + 0.0j
            for l in range(l1 - 1, l0 - 1, -1):
                others = L2[l - l0] * suf
                suf *= L[l]
                for q in range(lp_cptr[l], lp_cptr[l + 1]):
                    v = lp_cidx[q]
                    J[i, v] += others * lp_A[l, v]


@njit(cache=True, nogil=True)
def lu_factor(A, piv):
    """In-place LU with partial pivoting; returns False on a (numerically) zero pivot."""
    n = A.shape[0]
    amax = 0.0
    for i in range(n):
        for j in range(n):
            a = _abs2(A[i, j])
            if a > amax:
                amax = a
    if amax == 0.0:
        return False
    tiny = 1e-28 * amax  # squared magnitudes: pivot below 1e-14 * max
    for k in range(n):
        p = k
        best = _abs2(A[k, k])
        for i in range(k + 1, n):
            a = _abs2(A[i, k])
            if a > best:
                best = a
                p = i
        if best <= tiny:
            return False
        piv[k] = p
        if p != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
        inv = 1.0 / A[k, k]
        for i in range(k + 1, n):
            f = A[i, k] * inv
            A[i, k] = f
            if f != 0:
                for j in range(k + 1, n):
                    A[i, j] -= f * A[k, j]
    return True


@njit(cache=True, nogil=True)
def lu_solve(A, piv, b):
    n = A.shape[0]
    for k in range(n):
        p = piv[k]
        if p != k:
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
    for i in range(1, n):
        s = b[i]
        for j in range(i):
            s -= A[i, j] * b[j]
        b[i] = s
    for i in range(n - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, n):
            s -= A[i, j] * b[j]
        b[i] = s / A[i, i]


@njit(cache=True, nogil=True)
def _norm_inf(x):
    m = 0.0
    for i in range(x.shape[0]):
        a = _abs2(x[i])
        if a > m:
            m = a
    return np.sqrt(m)


@njit(cache=True, nogil=True)
def _affine_norm(x, grp, hom):
    """Largest dehomogenized coordinate (plain max-norm when there are no groups)."""
    if hom.shape[0] == 0:
        return _norm_inf(x)
    m = 0.0
    for v in range(x.shape[0]):
        g = grp[v]
        if g < 0:
            continue
        d = abs(x[hom[g]])
        a = abs(x[v])
        if d == 0.0:
            if a > 0:
                return np.inf
            continue
        r = a / d
        if r > m:
            m = r
    return m


@njit(cache=True, nogil=True)
def _tangent(x, t, arrs, H, J, Ht, pw, L, piv, out):
    t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx = arrs
    eval_h(x, t, t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx, H, J, Ht, pw, L, True)
    if not lu_factor(J, piv):
        return False
    for i in range(out.shape[0]):
        out[i] = -Ht[i]
    lu_solve(J, piv, out)
    return True


@njit(cache=True, nogil=True)
def _newton(x, t, arrs, tol, max_iters, H, J, Ht, pw, L, piv, dx, norms):
    """Newton on H(., t). Returns (converged, iterations); step norms go to ``norms``."""
    t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx = arrs
    n = x.shape[0]
    prev = np.inf
    for it in range(max_iters):
        eval_h(x, t, t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx, H, J, Ht, pw, L, True)
        if not lu_factor(J, piv):
            return False, it
        for i in range(n):
            dx[i] = -H[i]
        lu_solve(J, piv, dx)
        for i in range(n):
            x[i] += dx[i]
        d = _norm_inf(dx)
        norms[it] = d
        if d <= tol * (1.0 + _norm_inf(x)):
            return True, it + 1
        if it > 0 and d > prev:
            return False, it + 1
        prev = d
    return False, max_iters


@njit(cache=True, nogil=True)
def track_one(x, arrs, grp, hom, t_end, h0, hmin, hmax, ctol, max_corr,
              div_norm, final_tol, max_final, use_rk4, max_steps, stats):
    """Track one path from t=1 to t=0; ``x`` is updated in place. Returns a status code."""
    n = x.shape[0]
    H = np.empty(n, np.complex128)
    J = np.empty((n, n), np.complex128)
    Ht = np.empty(n, np.complex128)
    maxexp = arrs[6]
    pw = _pw_buffer(n, maxexp, arrs[8].shape[0])
    L = np.empty(max(1, arrs[8].shape[0]), np.complex128)
    piv = np.empty(n, np.int64)
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    k4 = np.empty(n, np.complex128)
    xt = np.empty(n, np.complex128)
    xp = np.empty(n, np.complex128)
    dx = np.empty(n, np.complex128)
    norms = np.empty(max(max_corr, max_final) + 1, np.float64)

    t = 1.0
    h = h0
    easy = 0
    have_k1 = False
    steps = 0
    rejects = 0
    status = CONVERGED
    while t > t_end:
        if h > t - t_end:
            h = t - t_end
        if not have_k1:
            have_k1 = _tangent(x, t, arrs, H, J, Ht, pw, L, piv, k1)
        ok = have_k1
        if ok and use_rk4:
            for i in range(n):
                xt[i] = x[i] - 0.5 * h * k1[i]
            ok = _tangent(xt, t - 0.5 * h, arrs, H, J, Ht, pw, L, piv, k2)
            if ok:
                for i in range(n):
                    xt[i] = x[i] - 0.5 * h * k2[i]
                ok = _tangent(xt, t - 0.5 * h, arrs, H, J, Ht, pw, L, piv, k3)
            if ok:
                for i in range(n):
                    xt[i] = x[i] - h * k3[i]
                ok = _tangent(xt, t - h, arrs, H, J, Ht, pw, L, piv, k4)
            if ok:
                for i in range(n):
                    xp[i] = x[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        elif ok:
            for i in range(n):
                xp[i] = x[i] - h * k1[i]
        iters = 0
        if ok:
            pn = _norm_inf(xp)
            ok, iters = _newton(xp, t - h, arrs, ctol, max_corr, H, J, Ht, pw, L, piv, dx, norms)
            # a large first correction means the corrector left the path
            if ok and norms[0] > 0.1 * (1.0 + pn):
                ok = False
        if ok:
            for i in range(n):
                x[i] = xp[i]
            t = t - h
            steps += 1
            have_k1 = False
            if iters <= 2:
                easy += 1
                if easy >= 3:
                    h = min(2.0 * h, hmax)
                    easy = 0
            else:
                easy = 0
            if _affine_norm(x, grp, hom) > div_norm:
                status = DIVERGED
                break
        else:
            rejects += 1
            easy = 0
            h *= 0.5
            if h < hmin:
                status = STEP_FAILURE
                break
        if steps + rejects > max_steps:
            status = STEP_FAILURE
            break
    if status == CONVERGED:
        for i in range(n):
            xp[i] = x[i]
        ok, iters = _newton(xp, 0.0, arrs, final_tol, max_final, H, J, Ht, pw, L, piv, dx, norms)
        if ok:
            for i in range(n):
                x[i] = xp[i]
        else:
            status = SINGULAR
        if _affine_norm(x, grp, hom) > div_norm:
            status = DIVERGED
    stats[0] = t
    stats[1] = steps
    stats[2] = rejects
    return status


@njit(cache=True, nogil=True)
def track_many(X, arrs, grp, hom, t_end, h0, hmin, hmax, ctol, max_corr,
               div_norm, final_tol, max_final, use_rk4, max_steps, status, stats):
    for b in range(X.shape[0]):
        status[b] = track_one(X[b], arrs, grp, hom, t_end, h0, hmin, hmax, ctol, max_corr,
                              div_norm, final_tol, max_final, use_rk4, max_steps, stats[b])


@njit(cache=True, nogil=True)
def eval_many(X, t, arrs, out_h, out_j):
    n = X.shape[1]
    t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx = arrs
    Ht = np.empty(n, np.complex128)
    pw = _pw_buffer(n, maxexp, arrs[8].shape[0])
    L = np.empty(max(1, lp_A.shape[0]), np.complex128)
    for b in range(X.shape[0]):
        eval_h(X[b], t, t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx,
               out_h[b], out_j[b], Ht, pw, L, True)


@njit(cache=True, nogil=True)
def refine_many(X, arrs, tol, max_iters, residual, contraction, iters, ok):
    """Newton refinement at t=0 with the last significant contraction ratio."""
    n = X.shape[1]
    t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx = arrs
    H = np.empty(n, np.complex128)
    J = np.empty((n, n), np.complex128)
    Ht = np.empty(n, np.complex128)
    pw = _pw_buffer(n, maxexp, arrs[8].shape[0])
    L = np.empty(max(1, lp_A.shape[0]), np.complex128)
    piv = np.empty(n, np.int64)
    dx = np.empty(n, np.complex128)
    cs = np.empty(n)
    for b in range(X.shape[0]):
        x = X[b]
        prev = -1.0
        ratio = 0.0
        ok[b] = False
        k = 0
        for k in range(max_iters):
            eval_h(x, 0.0, t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx,
                   H, J, Ht, pw, L, True)
            # equilibrate: columns by max(1,|x_j|), then rows to unit max, so a
            # regular root with a large multiplier is not mistaken for singular
            for j in range(n):
                cs[j] = max(1.0, abs(x[j]))
            for i in range(n):
                m = 0.0
                for j in range(n):
                    J[i, j] *= cs[j]
                    m = max(m, abs(J[i, j]))
                if m > 0.0:
                    for j in range(n):
                        J[i, j] /= m
                    dx[i] = -H[i] / m
                else:
                    dx[i] = -H[i]
            if not lu_factor(J, piv):
                break
            lu_solve(J, piv, dx)
            for i in range(n):
                dx[i] *= cs[i]
                x[i] += dx[i]
            # steps in the scaled units; below ~1e-9 they are rounding noise
            # amplified by the condition number, not information about the rate
            d = 0.0
            for i in range(n):
                d = max(d, abs(dx[i]) / cs[i])
            if prev > 1e-9:
                ratio = d / prev
            prev = d
            if d <= tol:
                ok[b] = True
                break
        if not ok[b] and 0.0 <= prev <= 1e-9:
            ok[b] = True
        iters[b] = k + 1
        contraction[b] = ratio
        eval_h(x, 0.0, t_eq, t_c0, t_c1, t_ptr, f_var, f_exp, maxexp, lp_ptr, lp_A, lp_b, lp_w, lp_cptr, lp_cidx,
               H, J, Ht, pw, L, False)
        residual[b] = _norm_inf(H)
