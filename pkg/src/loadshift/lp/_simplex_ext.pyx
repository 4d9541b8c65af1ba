# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled bounded-variable primal simplex.

Same algorithm, tolerances and tie-breaking as ``_simplex_py``; see that
module for the working-basis formulation.  The solve loop runs without the
GIL so independent LPs can be solved from a thread pool.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memset, memcpy
from scipy.linalg.cython_lapack cimport dgetrf, dgetri

cnp.import_array()

DEF OPTIMAL = 0
DEF INFEASIBLE = 1
DEF UNBOUNDED = 2
DEF ITERATION_LIMIT = 3
DEF SINGULAR = 4

DEF BASIC = 0
DEF AT_LB = 1
DEF AT_UB = 2
DEF FREE = 3

DEF PIVOT_TOL = 1e-9
DEF REFACTOR_EVERY = 100
DEF BLAND_AFTER = 50
DEF TIE_TOL = 1e-12


cdef struct State:
    int m
    int n
    int kmax
    int k
    const double* G      # m x n row-major
    const double* GT     # n x m row-major
    const double* c
    const double* h
    const double* lb
    const double* ub
    double* x
    double* s
    signed char* stat
    char* slack_basic
    int* S
    int* RN
    int* pos_S
    int* pos_RN
    double* Winv         # kmax x kmax row-major, top-left k x k in use
    double* y
    double* d
    double* rhs
    double* alpha_S
    double* alpha
    double* work
    double* work2
    int* ipiv
    double* lwork
    int lwork_size


cdef int refactor(State* st) nogil:
    cdef int k = st.k, ld = st.kmax, n = st.n, m = st.m
    cdef int t, p, i, j, info = 0
    cdef double acc
    cdef double* W = st.work   # needs kmax*kmax
    if k > 0:
        # W[p, t] = G[RN[p], S[t]]; row-major W handed to LAPACK is W^T in
        # column-major, and (W^T)^{-1} column-major is W^{-1} row-major.
        for p in range(k):
            for t in range(k):
                W[p * k + t] = st.G[st.RN[p] * n + st.S[t]]
        dgetrf(&k, &k, W, &k, st.ipiv, &info)
        if info != 0:
            return -1
        dgetri(&k, W, &k, st.ipiv, st.lwork, &st.lwork_size, &info)
        if info != 0:
            return -1
        for t in range(k):
            for p in range(k):
                st.Winv[t * ld + p] = W[t * k + p]
        # basic structurals from tight rows
        for p in range(k):
            i = st.RN[p]
            acc = st.h[i]
            for j in range(n):
                if st.stat[j] != BASIC:
                    acc -= st.G[i * n + j] * st.x[j]
            st.rhs[p] = acc
        for t in range(k):
            acc = 0.0
            for p in range(k):
                acc += st.Winv[t * ld + p] * st.rhs[p]
            st.x[st.S[t]] = acc
    for i in range(m):
        if st.slack_basic[i]:
            acc = st.h[i]
            for j in range(n):
                acc -= st.G[i * n + j] * st.x[j]
            st.s[i] = acc
        else:
            st.s[i] = 0.0
    return 0


cdef inline bint better(double tb, double piv, int idx, double t_best, double best_piv,
                        int leave, int n, int* S, bint bland) nogil:
    cdef int cur
    if tb < t_best - TIE_TOL:
        return True
    if tb > t_best + TIE_TOL:
        return False
    if leave == -1 or leave == -2:
        return True
    if bland:
        cur = S[leave] if leave < n else leave
        return idx < cur
    return piv > best_piv


cdef int run(State* st, double tol_feas, double tol_opt, int max_iter,
             int* iterations_out, double* info_out) nogil:
    cdef int m = st.m, n = st.n, ld = st.kmax
    cdef int k, i, j, t, p, a, b, q, last, leave, leave_to, to, j_out, i_in, j_row
    cdef int iterations = 0, updates = 0, degenerate_run = 0
    cdef bint bland = False, phase1, has_cand, is_inc
    cdef double v, g, tb, t_best, best_piv, step, direction, dj, best_score, sc, piv, sigma, tmp
    cdef double lo, hi, acc, infeas
    cdef int n_inf
    cdef double* x = st.x
    cdef double* s = st.s
    cdef double* Winv = st.Winv
    cdef double* alpha_S = st.alpha_S
    cdef double* alpha = st.alpha
    cdef double* y = st.y
    cdef double* d = st.d
    cdef double* rhs = st.rhs
    cdef double* w = st.work2
    cdef const double* row
    cdef const double* col

    while True:
        k = st.k
        # phase and phase-1 basic costs (kept in rhs)
        phase1 = False
        for t in range(k):
            j = st.S[t]
            if x[j] < st.lb[j] - tol_feas:
                rhs[t] = -1.0
                phase1 = True
            elif x[j] > st.ub[j] + tol_feas:
                rhs[t] = 1.0
                phase1 = True
            else:
                rhs[t] = 0.0
        n_inf = 0
        for i in range(m):
            y[i] = 0.0
            if st.slack_basic[i] and s[i] < -tol_feas:
                y[i] = -1.0
                n_inf += 1
        if n_inf:
            phase1 = True
        if phase1:
            if n_inf:
                for i in range(m):
                    if y[i] != 0.0:
                        row = st.G + i * n
                        for t in range(k):
                            rhs[t] += row[st.S[t]]
        else:
            for t in range(k):
                rhs[t] = st.c[st.S[t]]
        for p in range(k):
            acc = 0.0
            for t in range(k):
                acc += Winv[t * ld + p] * rhs[t]
            y[st.RN[p]] = acc

        # reduced costs of structurals
        if phase1:
            memset(d, 0, n * sizeof(double))
        else:
            memcpy(d, st.c, n * sizeof(double))
        for i in range(m):
            v = y[i]
            if v != 0.0:
                row = st.G + i * n
                for j in range(n):
                    d[j] -= v * row[j]

        # pricing: Dantzig, smallest index on ties; Bland when stalled
        q = -1
        best_score = 0.0
        is_inc = True
        for j in range(n):
            if st.stat[j] == BASIC:
                continue
            dj = d[j]
            sc = 0.0
            if st.stat[j] == FREE:
                sc = fabs(dj) if fabs(dj) > tol_opt else 0.0
            elif st.ub[j] - st.lb[j] <= 0.0:
                continue
            elif st.stat[j] == AT_LB:
                sc = -dj if dj < -tol_opt else 0.0
            else:
                sc = dj if dj > tol_opt else 0.0
            if sc > 0.0:
                if bland:
                    if q < 0:
                        q = j
                        best_score = sc
                elif sc > best_score:
                    q = j
                    best_score = sc
        for i in range(m):
            if st.slack_basic[i]:
                continue
            if -y[i] < -tol_opt:
                sc = y[i]
                if bland:
                    if q < 0:
                        q = n + i
                        best_score = sc
                elif sc > best_score:
                    q = n + i
                    best_score = sc

        if q < 0:
            if updates:
                if refactor(st) != 0:
                    iterations_out[0] = iterations
                    return SINGULAR
                updates = 0
                continue
            iterations_out[0] = iterations
            if phase1:
                infeas = 0.0
                for i in range(m):
                    if st.slack_basic[i] and s[i] < 0.0:
                        infeas -= s[i]
                for t in range(k):
                    j = st.S[t]
                    if x[j] < st.lb[j]:
                        infeas += st.lb[j] - x[j]
                    elif x[j] > st.ub[j]:
                        infeas += x[j] - st.ub[j]
                info_out[0] = infeas
                return INFEASIBLE
            return OPTIMAL
        if iterations >= max_iter:
            iterations_out[0] = iterations
            return ITERATION_LIMIT

        # ftran
        if q < n:
            if st.stat[q] == FREE:
                direction = 1.0 if d[q] < 0.0 else -1.0
            else:
                direction = 1.0 if st.stat[q] == AT_LB else -1.0
            col = st.GT + q * m
            for t in range(k):
                acc = 0.0
                for p in range(k):
                    acc += Winv[t * ld + p] * col[st.RN[p]]
                alpha_S[t] = acc
            memcpy(alpha, col, m * sizeof(double))
        else:
            direction = 1.0
            a = st.pos_RN[q - n]
            for t in range(k):
                alpha_S[t] = Winv[t * ld + a]
            memset(alpha, 0, m * sizeof(double))
        for t in range(k):
            v = alpha_S[t]
            if v != 0.0:
                col = st.GT + st.S[t] * m
                for i in range(m):
                    alpha[i] -= v * col[i]
        for p in range(k):
            alpha[st.RN[p]] = 0.0

        # ratio test; basic value rates are -direction * alpha
        t_best = INFINITY
        leave = -1
        leave_to = AT_LB
        best_piv = 0.0
        if q < n and isfinite(st.lb[q]) and isfinite(st.ub[q]):
            t_best = st.ub[q] - st.lb[q]
            leave = -2
        for t in range(k):
            g = -direction * alpha_S[t]
            if fabs(g) <= PIVOT_TOL:
                continue
            j = st.S[t]
            v = x[j]
            lo = st.lb[j]
            hi = st.ub[j]
            if g < 0.0:
                if phase1 and v > hi + tol_feas:
                    tb = (v - hi) / -g
                    to = AT_UB
                elif v >= lo - tol_feas and isfinite(lo):
                    tb = (v - lo if v > lo else 0.0) / -g
                    to = AT_LB
                else:
                    continue
            else:
                if phase1 and v < lo - tol_feas:
                    tb = (lo - v) / g
                    to = AT_LB
                elif v <= hi + tol_feas and isfinite(hi):
                    tb = (hi - v if hi > v else 0.0) / g
                    to = AT_UB
                else:
                    continue
            if better(tb, fabs(g), j, t_best, best_piv, leave, n, st.S, bland):
                t_best = tb
                leave = t
                leave_to = to
                best_piv = fabs(g)
        for i in range(m):
            if not st.slack_basic[i]:
                continue
            g = -direction * alpha[i]
            if fabs(g) <= PIVOT_TOL:
                continue
            v = s[i]
            if g < 0.0:
                if v < -tol_feas:
                    continue
                tb = (v if v > 0.0 else 0.0) / -g
            else:
                if phase1 and v < -tol_feas:
                    tb = -v / g
                else:
                    continue
            if better(tb, fabs(g), n + i, t_best, best_piv, leave, n, st.S, bland):
                t_best = tb
                leave = n + i
                leave_to = AT_LB
                best_piv = fabs(g)

        if leave == -1:
            iterations_out[0] = iterations
            if phase1:
                return ITERATION_LIMIT
            info_out[0] = q
            return UNBOUNDED

        iterations += 1
        step = t_best
        if step <= tol_feas:
            degenerate_run += 1
            if degenerate_run >= BLAND_AFTER:
                bland = True
        else:
            degenerate_run = 0
            bland = False

        # move along the edge
        if step != 0.0:
            for t in range(k):
                x[st.S[t]] -= step * direction * alpha_S[t]
            for i in range(m):
                if st.slack_basic[i]:
                    s[i] -= step * direction * alpha[i]
            if q < n:
                x[q] += direction * step
            else:
                s[q - n] += step

        if leave == -2:
            if st.stat[q] == AT_LB:
                st.stat[q] = AT_UB
                x[q] = st.ub[q]
            else:
                st.stat[q] = AT_LB
                x[q] = st.lb[q]
            continue

        if q < n:
            if leave < n:
                # structural replaces structural: column swap in W
                p = leave
                j_out = st.S[p]
                piv = alpha_S[p]
                for a in range(k):
                    w[a] = Winv[p * ld + a] / piv
                for t in range(k):
                    v = alpha_S[t]
                    if t != p and v != 0.0:
                        for a in range(k):
                            Winv[t * ld + a] -= v * w[a]
                for a in range(k):
                    Winv[p * ld + a] = w[a]
                st.S[p] = q
                st.pos_S[q] = p
                st.pos_S[j_out] = -1
                st.stat[j_out] = leave_to
                x[j_out] = st.lb[j_out] if leave_to == AT_LB else st.ub[j_out]
                st.stat[q] = BASIC
            else:
                # structural enters, slack of row i leaves: W grows by one
                i = leave - n
                sigma = alpha[i]
                row = st.G + i * n
                for a in range(k):
                    acc = 0.0
                    for t in range(k):
                        acc += row[st.S[t]] * Winv[t * ld + a]
                    w[a] = acc
                for t in range(k):
                    v = alpha_S[t] / sigma
                    if v != 0.0:
                        for a in range(k):
                            Winv[t * ld + a] += v * w[a]
                    Winv[t * ld + k] = -alpha_S[t] / sigma
                for a in range(k):
                    Winv[k * ld + a] = -w[a] / sigma
                Winv[k * ld + k] = 1.0 / sigma
                st.S[k] = q
                st.RN[k] = i
                st.pos_S[q] = k
                st.pos_RN[i] = k
                st.k = k + 1
                st.slack_basic[i] = 0
                s[i] = 0.0
                st.stat[q] = BASIC
        else:
            i_in = q - n
            a = st.pos_RN[i_in]
            if leave < n:
                # slack enters, structural leaves: W shrinks by one
                b = leave
                j_out = st.S[b]
                last = k - 1
                if a != last:
                    for t in range(k):
                        tmp = Winv[t * ld + a]
                        Winv[t * ld + a] = Winv[t * ld + last]
                        Winv[t * ld + last] = tmp
                    st.RN[a] = st.RN[last]
                    st.RN[last] = i_in
                    st.pos_RN[st.RN[a]] = a
                if b != last:
                    for p in range(k):
                        tmp = Winv[b * ld + p]
                        Winv[b * ld + p] = Winv[last * ld + p]
                        Winv[last * ld + p] = tmp
                    st.S[b] = st.S[last]
                    st.S[last] = j_out
                    st.pos_S[st.S[b]] = b
                piv = Winv[last * ld + last]
                for t in range(last):
                    v = Winv[t * ld + last] / piv
                    if v != 0.0:
                        for p in range(last):
                            Winv[t * ld + p] -= v * Winv[last * ld + p]
                st.k = last
                st.pos_RN[i_in] = -1
                st.pos_S[j_out] = -1
                st.slack_basic[i_in] = 1
                st.stat[j_out] = leave_to
                x[j_out] = st.lb[j_out] if leave_to == AT_LB else st.ub[j_out]
            else:
                # slack replaces slack: row swap in W
                j_row = leave - n
                row = st.G + j_row * n
                acc = 0.0
                for t in range(k):
                    w[t] = Winv[t * ld + a]     # c = Winv[:, a]
                    acc += row[st.S[t]] * w[t]  # g . c
                for p in range(k):
                    tmp = 0.0
                    for t in range(k):
                        tmp += row[st.S[t]] * Winv[t * ld + p]
                    rhs[p] = tmp                # z = g Winv
                rhs[a] -= 1.0
                for t in range(k):
                    v = w[t] / acc
                    if v != 0.0:
                        for p in range(k):
                            Winv[t * ld + p] -= v * rhs[p]
                st.RN[a] = j_row
                st.pos_RN[j_row] = a
                st.pos_RN[i_in] = -1
                st.slack_basic[i_in] = 1
                st.slack_basic[j_row] = 0
                s[j_row] = 0.0

        updates += 1
        if updates >= REFACTOR_EVERY:
            if refactor(st) != 0:
                iterations_out[0] = iterations
                return SINGULAR
            updates = 0


def solve_bounded(c, G, h, lb, ub, double tol_feas=1e-8, double tol_opt=1e-9, int max_iter=-1):
    """Two-phase bounded simplex; returns ``(status, z, iterations, info)``."""
    cdef cnp.ndarray[double, ndim=1, mode="c"] c_ = np.ascontiguousarray(c, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] G_ = np.ascontiguousarray(G, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] GT_ = np.ascontiguousarray(G_.T)
    cdef cnp.ndarray[double, ndim=1, mode="c"] h_ = np.ascontiguousarray(h, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] lb_ = np.ascontiguousarray(lb, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] ub_ = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int m = G_.shape[0], n = G_.shape[1]
    cdef int kmax = min(m, n)
    cdef int j, i, code, iterations = 0
    cdef double info = 0.0, acc
    if max_iter < 0:
        max_iter = 50 * (m + n) + 100

    cdef cnp.ndarray[double, ndim=1, mode="c"] x = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1, mode="c"] s = np.empty(m)
    cdef cnp.ndarray[signed char, ndim=1, mode="c"] stat = np.full(n, FREE, dtype=np.int8)
    cdef State st
    st.m = m
    st.n = n
    st.kmax = kmax if kmax > 0 else 1
    st.k = 0
    st.G = &G_[0, 0] if m * n > 0 else NULL
    st.GT = &GT_[0, 0] if m * n > 0 else NULL
    st.c = &c_[0] if n else NULL
    st.h = &h_[0] if m else NULL
    st.lb = &lb_[0] if n else NULL
    st.ub = &ub_[0] if n else NULL
    st.x = &x[0] if n else NULL
    st.s = &s[0] if m else NULL
    st.stat = &stat[0] if n else NULL

    for j in range(n):
        if isfinite(lb_[j]):
            x[j] = lb_[j]
            stat[j] = AT_LB
        elif isfinite(ub_[j]):
            x[j] = ub_[j]
            stat[j] = AT_UB
    for i in range(m):
        acc = h_[i]
        for j in range(n):
            acc -= G_[i, j] * x[j]
        s[i] = acc

    cdef int ksq = st.kmax * st.kmax
    st.slack_basic = <char*> malloc((m + 1) * sizeof(char))
    st.S = <int*> malloc((st.kmax + 1) * sizeof(int))
    st.RN = <int*> malloc((st.kmax + 1) * sizeof(int))
    st.pos_S = <int*> malloc((n + 1) * sizeof(int))
    st.pos_RN = <int*> malloc((m + 1) * sizeof(int))
    st.Winv = <double*> malloc(ksq * sizeof(double))
    st.y = <double*> malloc((m + 1) * sizeof(double))
    st.d = <double*> malloc((n + 1) * sizeof(double))
    st.rhs = <double*> malloc((m + st.kmax + 1) * sizeof(double))
    st.alpha_S = <double*> malloc((st.kmax + 1) * sizeof(double))
    st.alpha = <double*> malloc((m + 1) * sizeof(double))
    st.work = <double*> malloc(ksq * sizeof(double))
    st.work2 = <double*> malloc((st.kmax + 1) * sizeof(double))
    st.ipiv = <int*> malloc((st.kmax + 1) * sizeof(int))
    st.lwork_size = 64 * st.kmax
    st.lwork = <double*> malloc(st.lwork_size * sizeof(double))
    try:
        for i in range(m):
            st.slack_basic[i] = 1
            st.pos_RN[i] = -1
        for j in range(n):
            st.pos_S[j] = -1
        with nogil:
            code = run(&st, tol_feas, tol_opt, max_iter, &iterations, &info)
    finally:
        free(st.slack_basic)
        free(st.S)
        free(st.RN)
        free(st.pos_S)
        free(st.pos_RN)
        free(st.Winv)
        free(st.y)
        free(st.d)
        free(st.rhs)
        free(st.alpha_S)
        free(st.alpha)
        free(st.work)
        free(st.work2)
        free(st.ipiv)
        free(st.lwork)
    if code == SINGULAR:
        code = ITERATION_LIMIT
    return code, x, iterations, info
