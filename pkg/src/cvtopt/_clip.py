"""Compiled half-plane clipping kernel.

Each cell starts as the box polygon and is clipped by the bisector
half-planes of its candidate neighbours, nearest first.  Every polygon
edge carries a label: the neighbour site index (>= 0) or a box side
encoded as -1 (bottom), -2 (right), -3 (top), -4 (left).
"""
import numpy as np
from numba import njit

OK = 0
NEED_MORE = 1
OVERFLOW = 2
EMPTY = 3


@njit(cache=True, nogil=True)
def clip_cells(pts, rows, side, cand, complete, eps, out_xy, out_lab, out_cnt, out_status, lo, hi):
    maxv = out_lab.shape[1]
    ax_ = np.empty(maxv)
    ay_ = np.empty(maxv)
    al_ = np.empty(maxv, np.int64)
    bx_ = np.empty(maxv)
    by_ = np.empty(maxv)
    bl_ = np.empty(maxv, np.int64)
    sd = np.empty(maxv)
    ncand = cand.shape[1]
    for r in range(lo, hi):
        i = rows[r]
        px = pts[i, 0]
        py = pts[i, 1]
        ax_[0] = 0.0
        ay_[0] = 0.0
        al_[0] = -1
        ax_[1] = side
        ay_[1] = 0.0
        al_[1] = -2
        ax_[2] = side
        ay_[2] = side
        al_[2] = -3
        ax_[3] = 0.0
        ay_[3] = side
        al_[3] = -4
        n = 4
        cx = ax_
        cy = ay_
        cl = al_
        ox = bx_
        oy = by_
        ol = bl_
        status = NEED_MORE
        if complete:
            status = OK
        for c in range(ncand):
            k = cand[r, c]
            if k < 0:
                status = OK
                break
            dx = pts[k, 0] - px
            dy = pts[k, 1] - py
            dist = np.sqrt(dx * dx + dy * dy)
            # security radius: farther sites cannot cut the current polygon
            r2 = 0.0
            for j in range(n):
                ex = cx[j] - px
                ey = cy[j] - py
                q = ex * ex + ey * ey
                if q > r2:
                    r2 = q
            if dist > 2.0 * np.sqrt(r2) + eps:
                status = OK
                break
            mx = 0.5 * (pts[k, 0] + px)
            my = 0.5 * (pts[k, 1] + py)
            smax = -1e300
            for j in range(n):
                s = ((cx[j] - mx) * dx + (cy[j] - my) * dy) / dist
                sd[j] = s
                if s > smax:
                    smax = s
            if smax <= eps:
                continue
            m = 0
            for j in range(n):
                jn = j + 1
                if jn == n:
                    jn = 0
                sj = sd[j]
                sn = sd[jn]
                if m + 2 > maxv:
                    m = maxv + 1
                    break
                if sj <= eps:
                    if sj >= -eps and sn > eps:
                        ox[m] = cx[j]
                        oy[m] = cy[j]
                        ol[m] = k
                        m += 1
                    else:
                        ox[m] = cx[j]
                        oy[m] = cy[j]
                        ol[m] = cl[j]
                        m += 1
                        if sn > eps:
                            t = sj / (sj - sn)
                            ox[m] = cx[j] + t * (cx[jn] - cx[j])
                            oy[m] = cy[j] + t * (cy[jn] - cy[j])
                            ol[m] = k
                            m += 1
                elif sn < -eps:
                    t = sj / (sj - sn)
                    ox[m] = cx[j] + t * (cx[jn] - cx[j])
                    oy[m] = cy[j] + t * (cy[jn] - cy[j])
                    ol[m] = cl[j]
                    m += 1
            if m > maxv:
                status = OVERFLOW
                n = 0
                break
            n = m
            tx = cx
            ty = cy
            tl = cl
            cx = ox
            cy = oy
            cl = ol
            ox = tx
            oy = ty
            ol = tl
            if n < 3:
                status = EMPTY
                break
        if status == OK and n < 3:
            status = EMPTY
        out_status[r] = status
        out_cnt[r] = n
        for j in range(n):
            out_xy[r, j, 0] = cx[j]
            out_xy[r, j, 1] = cy[j]
            out_lab[r, j] = cl[j]
