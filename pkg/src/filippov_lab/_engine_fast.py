"""Compiled stepping engine for systems whose pieces are both affine.

A line-by-line port of the reference drivers in _engine (same tableau, step
control, arming rule, event priorities, and tolerances); the two must be
kept in sync.  Status codes are imported from _engine.  Bisection failures
surface as the FAIL status instead of an exception; the orchestrator raises.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._engine import (
    CONVERGED,
    ESCAPED,
    EXIT_LEFT,
    EXIT_RIGHT,
    FAIL,
    HORIZON,
    SURFACE,
    TWOFOLD,
)

# Dormand-Prince 5(4) coefficients as scalars for loop kernels
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (
    9017 / 3168,
    -355 / 33,
    46732 / 5247,
    49 / 176,
    -5103 / 18656,
)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_MAX_STEPS = 5_000_000
_MAX_BISECT = 200
_ARM_FACTOR = 10.0
_SIGN_TOL = 1e-12  # matches systems.SIGN_TOL


@njit(cache=True, nogil=True)
def _norm(y):
    s = 0.0
    for i in range(y.shape[0]):
        s += y[i] * y[i]
    return np.sqrt(s)


@njit(cache=True, nogil=True)
def _mv(m, b, x, out):
    n = x.shape[0]
    for i in range(n):
        acc = b[i]
        for j in range(n):
            acc += m[i, j] * x[j]
        out[i] = acc


@njit(cache=True, nogil=True)
def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = (s3 - 2 * s2 + s) * h
    h01 = -2 * s3 + 3 * s2
    h11 = (s3 - s2) * h
    out = np.empty(y0.shape[0])
    for i in range(y0.shape[0]):
        out[i] = h00 * y0[i] + h10 * f0[i] + h01 * y1[i] + h11 * f1[i]
    return out


@njit(cache=True, nogil=True)
def _error_norm(err, y0, y1, rtol, atol):
    n = y0.shape[0]
    s = 0.0
    for i in range(n):
        a0 = abs(y0[i])
        a1 = abs(y1[i])
        big = a0 if a0 > a1 else a1
        r = err[i] / (atol + rtol * big)
        s += r * r
    return np.sqrt(s / n)


@njit(cache=True, nogil=True)
def _append(ts, ys, fs, m, t, y, f, store):
    """Append a sample; when store is off, keep only the first and last."""
    if (not store) and m >= 2:
        ts[m - 1] = t
        for i in range(y.shape[0]):
            ys[m - 1, i] = y[i]
            fs[m - 1, i] = f[i]
        return ts, ys, fs, m
    cap = ts.shape[0]
    if m == cap:
        n = ys.shape[1]
        nts = np.empty(2 * cap)
        nys = np.empty((2 * cap, n))
        nfs = np.empty((2 * cap, n))
        nts[:cap] = ts
        nys[:cap] = ys
        nfs[:cap] = fs
        ts, ys, fs = nts, nys, nfs
    ts[m] = t
    for i in range(y.shape[0]):
        ys[m, i] = y[i]
        fs[m, i] = f[i]
    return ts, ys, fs, m + 1


@njit(cache=True, nogil=True)
def _dp_step_affine(m, b, y, f, h, y1, f1, err, k2, k3, k4, k5, k6, ytmp):
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * (_A21 * f[i])
    _mv(m, b, ytmp, k2)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A31 * f[i] + _A32 * k2[i])
    _mv(m, b, ytmp, k3)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A41 * f[i] + _A42 * k2[i] + _A43 * k3[i])
    _mv(m, b, ytmp, k4)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A51 * f[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
    _mv(m, b, ytmp, k5)
    for i in range(n):
        ytmp[i] = y[i] + h * (
            _A61 * f[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
        )
    _mv(m, b, ytmp, k6)
    for i in range(n):
        y1[i] = y[i] + h * (
            _B1 * f[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
        )
    _mv(m, b, y1, f1)
    for i in range(n):
        err[i] = h * (
            _E1 * f[i]
            + _E3 * k3[i]
            + _E4 * k4[i]
            + _E5 * k5[i]
            + _E6 * k6[i]
            + _E7 * f1[i]
        )


@njit(cache=True, nogil=True)
def _g_smooth(y, code, outward, rconv, resc):
    if code == 0:
        return outward * y[0]
    if code == 1:
        return rconv - _norm(y)
    return _norm(y) - resc


@njit(cache=True, nogil=True)
def _bisect_smooth(t0, y0, f0, t1, y1, f1, ga, gb, gtol, code, outward, rconv, resc):
    """Returns (ok, t*, y*) with |g| <= gtol."""
    if abs(ga) <= gtol:
        return True, t0, y0.copy()
    sign_b = gb > 0
    ta = t0
    tb = t1
    ym = y0.copy()
    for _ in range(_MAX_BISECT):
        tm = 0.5 * (ta + tb)
        ym = _hermite(t0, y0, f0, t1, y1, f1, tm)
        gm = _g_smooth(ym, code, outward, rconv, resc)
        if abs(gm) <= gtol:
            return True, tm, ym
        if (gm > 0) == sign_b:
            tb = tm
        else:
            ta = tm
    return False, ta, ym


@njit(cache=True, nogil=True)
def run_smooth_affine(
    m, b, x0, t0, region_sign, rtol, atol, etol, hmax, tstop, rconv, resc, store
):
    n = x0.shape[0]
    y = x0.copy()
    t = t0
    f = np.empty(n)
    _mv(m, b, y, f)

    ts = np.empty(128)
    ys = np.empty((128, n))
    fs = np.empty((128, n))
    cnt = 0
    ts, ys, fs, cnt = _append(ts, ys, fs, cnt, t, y, f, store)
    max_norm = _norm(y)

    arm_level = _ARM_FACTOR * etol
    outward = -region_sign
    armed = region_sign * y[0] > arm_level
    h = min(hmax, 0.01 * (1.0 + _norm(y)) / (1.0 + _norm(f)))
    rad_tol = etol * (1.0 + rconv + resc)

    y1 = np.empty(n)
    f1 = np.empty(n)
    err = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    ytmp = np.empty(n)

    status = FAIL
    for _ in range(_MAX_STEPS):
        remaining = tstop - t
        if remaining <= 1e-14 * (1.0 + abs(tstop)):
            status = HORIZON
            break
        clamped = remaining <= h
        h_step = remaining if clamped else h
        _dp_step_affine(m, b, y, f, h_step, y1, f1, err, k2, k3, k4, k5, k6, ytmp)
        enorm = _error_norm(err, y, y1, rtol, atol)
        if not np.isfinite(enorm) or enorm > 1.0:
            if not np.isfinite(enorm):
                shrink = 0.25
            else:
                shrink = max(_MIN_FACTOR, _SAFETY * enorm ** -0.2)
            h = h_step * shrink
            if h < 1e-15 * (1.0 + abs(t)):
                status = FAIL
                break
            continue
        t1 = tstop if clamped else t + h_step

        # event scan; lowest (time, priority) wins
        ev_t = np.inf
        ev_status = -1
        ev_y = y1
        depth1 = region_sign * y1[0]
        if armed:
            if depth1 < 0.0:
                ok, ts_, ys_ = _bisect_smooth(
                    t, y, f, t1, y1, f1,
                    outward * y[0], outward * y1[0], etol, 0, outward, rconv, resc,
                )
                if not ok:
                    status = FAIL
                    break
                ev_t, ev_status, ev_y = ts_, SURFACE, ys_
        else:
            if depth1 > arm_level:
                armed = True
            elif depth1 < -arm_level:
                ga = outward * y[0]
                if ga > 0.0:
                    ga = 0.0
                ok, ts_, ys_ = _bisect_smooth(
                    t, y, f, t1, y1, f1,
                    ga, outward * y1[0], arm_level, 0, outward, rconv, resc,
                )
                if not ok:
                    status = FAIL
                    break
                ev_t, ev_status, ev_y = ts_, SURFACE, ys_
        n1 = _norm(y1)
        if n1 <= rconv:
            ok, ts_, ys_ = _bisect_smooth(
                t, y, f, t1, y1, f1,
                rconv - _norm(y), rconv - n1, rad_tol, 1, outward, rconv, resc,
            )
            if not ok:
                status = FAIL
                break
            if ts_ < ev_t or (ts_ == ev_t and ev_status == -1):
                ev_t, ev_status, ev_y = ts_, CONVERGED, ys_
        if n1 >= resc:
            ok, ts_, ys_ = _bisect_smooth(
                t, y, f, t1, y1, f1,
                _norm(y) - resc, n1 - resc, rad_tol, 2, outward, rconv, resc,
            )
            if not ok:
                status = FAIL
                break
            if ts_ < ev_t or (ts_ == ev_t and ev_status == -1):
                ev_t, ev_status, ev_y = ts_, ESCAPED, ys_
        if ev_status >= 0:
            y_ev = ev_y.copy()
            if ev_status == SURFACE:
                y_ev[0] = 0.0
            f_ev = np.empty(n)
            _mv(m, b, y_ev, f_ev)
            ts, ys, fs, cnt = _append(ts, ys, fs, cnt, ev_t, y_ev, f_ev, store)
            nrm = _norm(y_ev)
            if nrm > max_norm:
                max_norm = nrm
            status = ev_status
            break

        t = t1
        for i in range(n):
            y[i] = y1[i]
            f[i] = f1[i]
        if n1 > max_norm:
            max_norm = n1
        ts, ys, fs, cnt = _append(ts, ys, fs, cnt, t, y, f, store)
        if enorm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * enorm ** -0.2)
        if factor < _MIN_FACTOR:
            factor = _MIN_FACTOR
        h = min(hmax, h_step * factor)

    return status, ts[:cnt].copy(), ys[:cnt].copy(), fs[:cnt].copy(), max_norm


@njit(cache=True, nogil=True)
def _slide_rhs(ml, bl, mr, br, y, wa, wb, out):
    """Filippov combination; False when the denominator vanishes."""
    _mv(ml, bl, y, wa)
    _mv(mr, br, y, wb)
    den = wa[0] - wb[0]
    if den == 0.0:
        return False
    for i in range(y.shape[0]):
        out[i] = (wa[0] * wb[i] - wb[0] * wa[i]) / den
    return True


@njit(cache=True, nogil=True)
def _dp_step_slide(
    ml, bl, mr, br, y, f, h, y1, f1, err, k2, k3, k4, k5, k6, ytmp, wa, wb
):
    """Returns False if any stage lands on the degenerate set."""
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * (_A21 * f[i])
    if not _slide_rhs(ml, bl, mr, br, ytmp, wa, wb, k2):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (_A31 * f[i] + _A32 * k2[i])
    if not _slide_rhs(ml, bl, mr, br, ytmp, wa, wb, k3):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (_A41 * f[i] + _A42 * k2[i] + _A43 * k3[i])
    if not _slide_rhs(ml, bl, mr, br, ytmp, wa, wb, k4):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (_A51 * f[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
    if not _slide_rhs(ml, bl, mr, br, ytmp, wa, wb, k5):
        return False
    for i in range(n):
        ytmp[i] = y[i] + h * (
            _A61 * f[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
        )
    if not _slide_rhs(ml, bl, mr, br, ytmp, wa, wb, k6):
        return False
    for i in range(n):
        y1[i] = y[i] + h * (
            _B1 * f[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
        )
    # the driver pins y1[0] = 0 and recomputes f1 itself; fill err with the
    # FSAL stage at the unpinned endpoint to match the reference engine
    if not _slide_rhs(ml, bl, mr, br, y1, wa, wb, f1):
        return False
    for i in range(n):
        err[i] = h * (
            _E1 * f[i]
            + _E3 * k3[i]
            + _E4 * k4[i]
            + _E5 * k5[i]
            + _E6 * k6[i]
            + _E7 * f1[i]
        )
    return True


@njit(cache=True, nogil=True)
def _g_slide(y, code, ml, bl, mr, br, rconv, resc, wa, wb):
    if code == 3:
        return rconv - _norm(y)
    if code == 4:
        return _norm(y) - resc
    _mv(ml, bl, y, wa)
    _mv(mr, br, y, wb)
    den = wa[0] - wb[0]
    if code == 2:
        return den
    if den == 0.0:
        if wa[0] > 0.0:
            base = 1e300
        elif wa[0] < 0.0:
            base = -1e300
        else:
            base = 0.0
    else:
        base = wa[0] / den
    if code == 0:
        return base
    return base - 1.0


@njit(cache=True, nogil=True)
def _bisect_slide(
    t0, y0, f0, t1, y1, f1, ga, gb, gtol, code, ml, bl, mr, br, rconv, resc, wa, wb
):
    if abs(ga) <= gtol:
        return True, t0, y0.copy()
    sign_b = gb > 0
    ta = t0
    tb = t1
    ym = y0.copy()
    for _ in range(_MAX_BISECT):
        tm = 0.5 * (ta + tb)
        ym = _hermite(t0, y0, f0, t1, y1, f1, tm)
        gm = _g_slide(ym, code, ml, bl, mr, br, rconv, resc, wa, wb)
        if abs(gm) <= gtol:
            return True, tm, ym
        if (gm > 0) == sign_b:
            tb = tm
        else:
            ta = tm
    return False, ta, ym


@njit(cache=True, nogil=True)
def run_sliding_affine(
    ml, bl, mr, br, x0, t0, rtol, atol, etol, hmax, tstop, rconv, resc, store
):
    n = x0.shape[0]
    y = x0.copy()
    y[0] = 0.0
    t = t0

    wa = np.empty(n)
    wb = np.empty(n)
    f = np.empty(n)
    if not _slide_rhs(ml, bl, mr, br, y, wa, wb, f):
        for i in range(n):
            f[i] = 0.0

    ts = np.empty(128)
    ys = np.empty((128, n))
    fs = np.empty((128, n))
    cnt = 0
    ts, ys, fs, cnt = _append(ts, ys, fs, cnt, t, y, f, store)
    max_norm = _norm(y)
    h = min(hmax, 0.01 * (1.0 + _norm(y)) / (1.0 + _norm(f)))
    rad_tol = etol * (1.0 + rconv + resc)

    _mv(ml, bl, y, wa)
    _mv(mr, br, y, wb)
    den_prev = wa[0] - wb[0]

    y1 = np.empty(n)
    f1 = np.empty(n)
    err = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    ytmp = np.empty(n)

    status = FAIL
    for _ in range(_MAX_STEPS):
        _mv(ml, bl, y, wa)
        _mv(mr, br, y, wb)
        fl1 = wa[0]
        fr1 = wb[0]
        tol = _SIGN_TOL * (1.0 + _norm(y))
        if abs(fl1) <= tol and abs(fr1) <= tol:
            status = TWOFOLD
            break
        remaining = tstop - t
        if remaining <= 1e-14 * (1.0 + abs(tstop)):
            status = HORIZON
            break
        clamped = remaining <= h
        h_step = remaining if clamped else h
        ok = _dp_step_slide(
            ml, bl, mr, br, y, f, h_step, y1, f1, err, k2, k3, k4, k5, k6, ytmp, wa, wb
        )
        enorm = _error_norm(err, y, y1, rtol, atol) if ok else np.inf
        if not np.isfinite(enorm) or enorm > 1.0:
            if not np.isfinite(enorm):
                shrink = 0.25
            else:
                shrink = max(_MIN_FACTOR, _SAFETY * enorm ** -0.2)
            h = h_step * shrink
            if h < 1e-15 * (1.0 + abs(t)):
                status = FAIL
                break
            continue
        y1[0] = 0.0
        if not _slide_rhs(ml, bl, mr, br, y1, wa, wb, f1):
            h = h_step * 0.25
            if h < 1e-15 * (1.0 + abs(t)):
                status = TWOFOLD
                break
            continue
        t1 = tstop if clamped else t + h_step

        ev_t = np.inf
        ev_prio = 99
        ev_status = -1
        ev_y = y1
        lam1 = _g_slide(y1, 0, ml, bl, mr, br, rconv, resc, wa, wb)
        if lam1 < 0.0:
            ga = _g_slide(y, 0, ml, bl, mr, br, rconv, resc, wa, wb)
            ok2, ts_, ys_ = _bisect_slide(
                t, y, f, t1, y1, f1, ga, lam1, etol, 0, ml, bl, mr, br, rconv, resc, wa, wb
            )
            if not ok2:
                status = FAIL
                break
            ev_t, ev_prio, ev_status, ev_y = ts_, 0, EXIT_LEFT, ys_
        elif lam1 > 1.0:
            ga = _g_slide(y, 1, ml, bl, mr, br, rconv, resc, wa, wb)
            ok2, ts_, ys_ = _bisect_slide(
                t, y, f, t1, y1, f1, ga, lam1 - 1.0, etol, 1, ml, bl, mr, br, rconv, resc, wa, wb
            )
            if not ok2:
                status = FAIL
                break
            ev_t, ev_prio, ev_status, ev_y = ts_, 1, EXIT_RIGHT, ys_
        den1 = _g_slide(y1, 2, ml, bl, mr, br, rconv, resc, wa, wb)
        den_tol = _SIGN_TOL * (1.0 + _norm(y1))
        if (den1 > 0.0) != (den_prev > 0.0):
            ok2, ts_, ys_ = _bisect_slide(
                t, y, f, t1, y1, f1, den_prev, den1, den_tol, 2, ml, bl, mr, br, rconv, resc, wa, wb
            )
            if not ok2:
                status = FAIL
                break
            if ts_ < ev_t or (ts_ == ev_t and 2 < ev_prio):
                ev_t, ev_prio, ev_status, ev_y = ts_, 2, TWOFOLD, ys_
        elif abs(den1) <= den_tol:
            if t1 < ev_t or (t1 == ev_t and 2 < ev_prio):
                ev_t, ev_prio, ev_status, ev_y = t1, 2, TWOFOLD, y1
        n1 = _norm(y1)
        if n1 <= rconv:
            ok2, ts_, ys_ = _bisect_slide(
                t, y, f, t1, y1, f1, rconv - _norm(y), rconv - n1, rad_tol, 3,
                ml, bl, mr, br, rconv, resc, wa, wb,
            )
            if not ok2:
                status = FAIL
                break
            if ts_ < ev_t or (ts_ == ev_t and 3 < ev_prio):
                ev_t, ev_prio, ev_status, ev_y = ts_, 3, CONVERGED, ys_
        if n1 >= resc:
            ok2, ts_, ys_ = _bisect_slide(
                t, y, f, t1, y1, f1, _norm(y) - resc, n1 - resc, rad_tol, 4,
                ml, bl, mr, br, rconv, resc, wa, wb,
            )
            if not ok2:
                status = FAIL
                break
            if ts_ < ev_t or (ts_ == ev_t and 4 < ev_prio):
                ev_t, ev_prio, ev_status, ev_y = ts_, 4, ESCAPED, ys_
        if ev_status >= 0:
            y_ev = ev_y.copy()
            y_ev[0] = 0.0
            f_ev = np.empty(n)
            if not _slide_rhs(ml, bl, mr, br, y_ev, wa, wb, f_ev):
                for i in range(n):
                    f_ev[i] = 0.0
            ts, ys, fs, cnt = _append(ts, ys, fs, cnt, ev_t, y_ev, f_ev, store)
            nrm = _norm(y_ev)
            if nrm > max_norm:
                max_norm = nrm
            status = ev_status
            break

        t = t1
        for i in range(n):
            y[i] = y1[i]
            f[i] = f1[i]
        den_prev = den1
        if n1 > max_norm:
            max_norm = n1
        ts, ys, fs, cnt = _append(ts, ys, fs, cnt, t, y, f, store)
        if enorm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * enorm ** -0.2)
        if factor < _MIN_FACTOR:
            factor = _MIN_FACTOR
        h = min(hmax, h_step * factor)

    return status, ts[:cnt].copy(), ys[:cnt].copy(), fs[:cnt].copy(), max_norm
