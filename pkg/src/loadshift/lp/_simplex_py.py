"""Pure numpy bounded-variable primal simplex (fallback kernel).

Solves ``min c'z  s.t.  G z + s = h,  lb <= z <= ub,  s >= 0``.

Only the "working basis" is factored: if ``S`` is the set of basic structural
columns and ``RN`` the set of rows whose slack is nonbasic (tight rows), then
``|S| == |RN| == k`` and the basis inverse is fully determined by the inverse
of ``W = G[RN][:, S]``.  Per-iteration work is O(m*k) instead of O(m^2), which
is what makes the scheduler LPs cheap (k is typically well below m).

The compiled kernel in ``_simplex_ext.pyx`` implements the identical
algorithm; keep the two in step.
"""

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

BASIC = 0
AT_LB = 1
AT_UB = 2
FREE = 3

PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
BLAND_AFTER = 50


def _initial_point(lb, ub):
    n = lb.shape[0]
    x = np.zeros(n)
    stat = np.full(n, FREE, dtype=np.int8)
    fin_lb = np.isfinite(lb)
    fin_ub = np.isfinite(ub)
    x[fin_lb] = lb[fin_lb]
    stat[fin_lb] = AT_LB
    only_ub = ~fin_lb & fin_ub
    x[only_ub] = ub[only_ub]
    stat[only_ub] = AT_UB
    return x, stat


def solve_bounded(c, G, h, lb, ub, tol_feas=1e-8, tol_opt=1e-9, max_iter=None):
    """Run the two-phase bounded simplex.

    Returns ``(status, z, iterations, info)`` where ``info`` is the phase-1
    infeasibility sum when infeasible, or the index of the unbounded entering
    variable (structural index, or ``n + row`` for a slack) when unbounded.
    """
    c = np.ascontiguousarray(c, dtype=float)
    G = np.ascontiguousarray(G, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    lb = np.ascontiguousarray(lb, dtype=float)
    ub = np.ascontiguousarray(ub, dtype=float)
    m, n = G.shape
    if max_iter is None or max_iter < 0:
        max_iter = 50 * (m + n) + 100

    x, stat = _initial_point(lb, ub)
    s = h - G @ x
    slack_basic = np.ones(m, dtype=bool)

    S = []          # basic structural columns, by working-basis position
    RN = []         # tight rows, by working-basis position
    pos_S = np.full(n, -1)
    pos_RN = np.full(m, -1)
    Winv = np.zeros((0, 0))

    iterations = 0
    updates = 0
    degenerate_run = 0
    bland = False

    def refactor():
        nonlocal Winv, updates
        k = len(S)
        if k:
            Winv = np.linalg.inv(G[np.ix_(RN, S)])
            xN = np.where(stat == BASIC, 0.0, x)
            rhs = h[RN] - G[RN] @ xN
            x[S] = Winv @ rhs
        else:
            Winv = np.zeros((0, 0))
        s[:] = h - G @ x
        s[RN] = 0.0
        updates = 0

    while True:
        k = len(S)
        Sa = np.asarray(S, dtype=np.intp)
        RNa = np.asarray(RN, dtype=np.intp)

        # phase-1 costs of the basic variables
        xS = x[Sa]
        cS1 = np.where(xS < lb[Sa] - tol_feas, -1.0,
                       np.where(xS > ub[Sa] + tol_feas, 1.0, 0.0))
        infeasible_rows = np.flatnonzero(slack_basic & (s < -tol_feas))
        phase1 = bool(infeasible_rows.size) or bool(np.any(cS1))

        y = np.zeros(m)
        if phase1:
            cS = cS1
            y[infeasible_rows] = -1.0
            rhs = cS + G[np.ix_(infeasible_rows, Sa)].sum(axis=0)
        else:
            rhs = c[Sa]
        if k:
            y[RNa] = Winv.T @ rhs

        nz = np.flatnonzero(y)
        d = (np.zeros(n) if phase1 else c.copy()) - y[nz] @ G[nz]
        d_slack = -y  # only meaningful for tight rows

        # entering candidates, scored by improvement rate
        score = np.zeros(n + m)
        at_lb = stat == AT_LB
        at_ub = stat == AT_UB
        free = stat == FREE
        fixed = (ub - lb) <= 0.0
        inc = (at_lb & ~fixed & (d < -tol_opt)) | (free & (d < -tol_opt))
        dec = (at_ub & ~fixed & (d > tol_opt)) | (free & (d > tol_opt))
        score[:n][inc | dec] = np.abs(d[inc | dec])
        tight = ~slack_basic
        slack_inc = tight & (d_slack < -tol_opt)
        score[n:][slack_inc] = -d_slack[slack_inc]

        cand = np.flatnonzero(score > 0.0)
        if cand.size == 0 and updates:
            # confirm on a fresh factorization before stopping
            refactor()
            continue
        if cand.size == 0:
            if phase1:
                infeas = float(np.sum(np.maximum(0.0, -s[slack_basic]))
                               + np.sum(np.maximum(0.0, lb[Sa] - xS))
                               + np.sum(np.maximum(0.0, xS - ub[Sa])))
                return INFEASIBLE, x.copy(), iterations, infeas
            return OPTIMAL, x.copy(), iterations, 0.0
        if iterations >= max_iter:
            return ITERATION_LIMIT, x.copy(), iterations, 0.0

        q = int(cand[0]) if bland else int(np.argmax(score))
        if q < n:
            direction = 1.0 if (inc[q]) else -1.0
            col = G[:, q]
            alpha_S = Winv @ col[RNa] if k else np.zeros(0)
            alpha = col - (G[:, Sa] @ alpha_S if k else 0.0)
        else:
            direction = 1.0
            a = pos_RN[q - n]
            alpha_S = Winv[:, a].copy()
            alpha = -(G[:, Sa] @ alpha_S)
        alpha[RNa] = 0.0
        # basic values move as  v(t) = v - t * direction * alpha
        rate_S = -direction * alpha_S
        rate_R = -direction * alpha

        # ratio test over basic structurals then basic slacks
        t_best = np.inf
        leave = -1          # encoded: position in S, or m-index + n for slack
        leave_to = AT_LB
        best_piv = 0.0

        if q < n and np.isfinite(lb[q]) and np.isfinite(ub[q]):
            t_best = ub[q] - lb[q]
            leave = -2  # bound flip

        for t_pos in range(k):
            g = rate_S[t_pos]
            if abs(g) <= PIVOT_TOL:
                continue
            j = S[t_pos]
            v = x[j]
            lo, hi = lb[j], ub[j]
            if g < 0.0:
                if phase1 and v > hi + tol_feas:
                    tb, to = (v - hi) / -g, AT_UB
                elif v >= lo - tol_feas and np.isfinite(lo):
                    tb, to = max(v - lo, 0.0) / -g, AT_LB
                else:
                    continue
            else:
                if phase1 and v < lo - tol_feas:
                    tb, to = (lo - v) / g, AT_LB
                elif v <= hi + tol_feas and np.isfinite(hi):
                    tb, to = max(hi - v, 0.0) / g, AT_UB
                else:
                    continue
            if _better(tb, abs(g), j, t_best, best_piv, leave, n, S, bland):
                t_best, leave, leave_to, best_piv = tb, t_pos, to, abs(g)

        rows = np.flatnonzero(slack_basic & (np.abs(rate_R) > PIVOT_TOL))
        for i in rows:
            g = rate_R[i]
            v = s[i]
            if g < 0.0:
                if v < -tol_feas:
                    continue
                tb = max(v, 0.0) / -g
            else:
                if phase1 and v < -tol_feas:
                    tb = -v / g
                else:
                    continue
            if _better(tb, abs(g), n + i, t_best, best_piv, leave, n, S, bland):
                t_best, leave, leave_to, best_piv = tb, n + int(i), AT_LB, abs(g)

        if leave == -1:
            if phase1:
                # cannot happen for a bounded infeasibility measure; bail out
                return ITERATION_LIMIT, x.copy(), iterations, 0.0
            return UNBOUNDED, x.copy(), iterations, float(q)

        iterations += 1
        step = t_best
        if step <= tol_feas:
            degenerate_run += 1
            if degenerate_run >= BLAND_AFTER:
                bland = True
        else:
            degenerate_run = 0
            bland = False

        # move
        if k:
            x[Sa] += step * rate_S
        s[slack_basic] += step * rate_R[slack_basic]
        if q < n:
            x[q] += direction * step
        else:
            s[q - n] += step

        if leave == -2:
            stat[q] = AT_UB if stat[q] == AT_LB else AT_LB
            x[q] = ub[q] if stat[q] == AT_UB else lb[q]
            continue

        # basis change
        if q < n:
            if leave < n:
                p = leave
                j_out = S[p]
                piv = alpha_S[p]
                row_p = Winv[p, :] / piv
                Winv -= np.outer(alpha_S, row_p)
                Winv[p, :] = row_p
                S[p] = q
                pos_S[q] = p
                pos_S[j_out] = -1
                stat[j_out] = leave_to
                x[j_out] = lb[j_out] if leave_to == AT_LB else ub[j_out]
                stat[q] = BASIC
            else:
                i = leave - n
                g_row = G[i, Sa]
                sigma = alpha[i]
                w = g_row @ Winv if k else np.zeros(0)
                new = np.empty((k + 1, k + 1))
                if k:
                    new[:k, :k] = Winv + np.outer(alpha_S, w) / sigma
                    new[:k, k] = -alpha_S / sigma
                    new[k, :k] = -w / sigma
                new[k, k] = 1.0 / sigma
                Winv = new
                S.append(q)
                RN.append(i)
                pos_S[q] = k
                pos_RN[i] = k
                slack_basic[i] = False
                s[i] = 0.0
                stat[q] = BASIC
        else:
            i_in = q - n
            a = pos_RN[i_in]
            if leave < n:
                b = leave
                j_out = S[b]
                last = k - 1
                _swap_cols(Winv, a, last)
                _swap_rows(Winv, b, last)
                RN[a], RN[last] = RN[last], RN[a]
                S[b], S[last] = S[last], S[b]
                pos_RN[RN[a]] = a
                pos_S[S[b]] = b
                M = Winv
                piv = M[last, last]
                Winv = M[:last, :last] - np.outer(M[:last, last], M[last, :last]) / piv
                RN.pop()
                S.pop()
                pos_RN[i_in] = -1
                pos_S[j_out] = -1
                slack_basic[i_in] = True
                stat[j_out] = leave_to
                x[j_out] = lb[j_out] if leave_to == AT_LB else ub[j_out]
            else:
                j_row = leave - n
                cvec = Winv[:, a].copy()
                g_row = G[j_row, Sa]
                z = g_row @ Winv
                z[a] -= 1.0
                Winv -= np.outer(cvec, z) / (g_row @ cvec)
                RN[a] = j_row
                pos_RN[j_row] = a
                pos_RN[i_in] = -1
                slack_basic[i_in] = True
                slack_basic[j_row] = False
                s[j_row] = 0.0

        updates += 1
        if updates >= REFACTOR_EVERY:
            refactor()


def _better(tb, piv, idx, t_best, best_piv, leave, n, S, bland):
    if tb < t_best - 1e-12:
        return True
    if tb > t_best + 1e-12:
        return False
    if leave == -1:
        return True
    if leave == -2:
        # prefer a real pivot over a bound flip on ties
        return True
    if bland:
        cur = S[leave] if leave < n else leave
        return idx < cur
    return piv > best_piv


def _swap_rows(M, i, j):
    if i != j:
        M[[i, j], :] = M[[j, i], :]


def _swap_cols(M, i, j):
    if i != j:
        M[:, [i, j]] = M[:, [j, i]]
