"""Compiled Langevin stepping with boundary-crossing localization.

Only built-in potentials and ball regions are handled here; everything else
goes through the reference engine in :mod:`hillgate.integrator`.  Both
engines consume the same pre-drawn Gaussian buffer and perform the same
floating point operations, so they produce identical event streams.
"""
import math

import numpy as np
from numba import njit

SCHEME_BAOAB = 0
SCHEME_EULER = 1

OBS_NONE = 0
OBS_CONSTANT = 1
OBS_SPEED_ABOVE = 2
OBS_KINETIC = 3

STOP_ANY = 0
STOP_NEVER = 2

STATUS_DONE = 0
STATUS_NOISE = 1
STATUS_MAX_STEPS = 2
STATUS_BLOWUP = 3
STATUS_PATH_FULL = 4
STATUS_BISECTION = 5

# istate layout
I_STEPS, I_NOISE, I_EVENTS, I_DISCARDED, I_PATH = 0, 1, 2, 3, 4
# fstate layout
F_TIME, F_GACC, F_GTOTAL = 0, 1, 2


@njit(cache=True)
def force_into(kind, params, q, out):
    d = q.shape[0]
    if kind == 0:
        a = params[0]
        h = params[1]
        out[0] = -4.0 * h * q[0] * (q[0] * q[0] - a * a)
    elif kind == 1:
        k = params[0]
        length = params[1]
        r1 = 0.0
        r2 = 0.0
        for i in range(d):
            u1 = q[i] - params[2 + i]
            u2 = q[i] - params[2 + d + i]
            r1 += u1 * u1
            r2 += u2 * u2
        c = k * 16.0 / length ** 4 * 2.0
        for i in range(d):
            out[i] = -c * ((q[i] - params[2 + i]) * r2 + (q[i] - params[2 + d + i]) * r1)
    elif kind == 2:
        k = params[0]
        for i in range(d):
            out[i] = -k * (q[i] - params[1 + i])
    else:
        for i in range(d):
            out[i] = 0.0


@njit(cache=True)
def observable(kind, params, q, p):
    if kind == OBS_NONE:
        return 0.0
    if kind == OBS_CONSTANT:
        return params[0]
    s = 0.0
    for i in range(p.shape[0]):
        s += p[i] * p[i]
    if kind == OBS_SPEED_ABOVE:
        return 1.0 if math.sqrt(s) > params[0] else 0.0
    return 0.5 * s


@njit(cache=True)
def _phi_on_segment(center, r2, qs, qe, s):
    val = 0.0
    for i in range(qs.shape[0]):
        x = qs[i] + s * (qe[i] - qs[i]) - center[i]
        val += x * x
    return val - r2


@njit(cache=True)
def _locate(center, r2, qs, qe, inside, crossing_tol):
    """Bisection for the membership change along ``qs -> qe``.

    Returns 2.0 when membership does not change, -1.0 on failure.
    """
    end_in = _phi_on_segment(center, r2, qs, qe, 1.0) < 0.0
    if end_in == inside:
        return 2.0
    lo = 0.0
    hi = 1.0
    for _ in range(200):
        s = 0.5 * (lo + hi)
        val = _phi_on_segment(center, r2, qs, qe, s)
        if abs(val) <= crossing_tol:
            return s
        if (val < 0.0) == inside:
            lo = s
        else:
            hi = s
    return -1.0


@njit(cache=True)
def _record(r, s, qs, qe, v, ts, te, centers, flags, tol_tangent, g_val,
            fstate, istate, ev_time, ev_side, ev_label, ev_q, ev_p, ev_g, qwork):
    d = qs.shape[0]
    t_ev = ts + s * (te - ts)
    nrm = 0.0
    for i in range(d):
        qwork[i] = qs[i] + s * (qe[i] - qs[i])
        nrm += (qwork[i] - centers[r, i]) ** 2
    nrm = math.sqrt(nrm)
    vn = 0.0
    for i in range(d):
        vn += v[i] * (qwork[i] - centers[r, i]) / nrm
    entering = flags[r] == 0
    flags[r] = 1 if entering else 0
    fstate[F_GACC] += g_val * (t_ev - fstate[F_TIME])
    fstate[F_TIME] = t_ev
    if abs(vn) <= tol_tangent or (entering and vn > 0.0) or ((not entering) and vn < 0.0):
        # tangential crossing: measure zero in continuous time, dropped
        istate[I_DISCARDED] += 1
        return 0
    k = istate[I_EVENTS]
    if k >= ev_time.shape[0]:
        return 0
    ev_time[k] = t_ev
    ev_side[k] = -1 if entering else 1
    ev_label[k] = r
    for i in range(d):
        ev_q[k, i] = qwork[i]
        ev_p[k, i] = v[i]
    ev_g[k] = fstate[F_GACC]
    fstate[F_GACC] = 0.0
    istate[I_EVENTS] = k + 1
    return ev_side[k]


@njit(cache=True)
def _segment(qs, qe, v, ts, te, centers, radii, flags, crossing_tol, tol_tangent,
             g_val, fstate, istate, ev_time, ev_side, ev_label, ev_q, ev_p, ev_g, qwork):
    """Handle crossings of the straight drift ``qs -> qe`` at velocity ``v``.

    Returns (status, side of the last recorded event or 0).
    """
    s0 = _locate(centers[0], radii[0] * radii[0], qs, qe, flags[0] == 1, crossing_tol)
    s1 = _locate(centers[1], radii[1] * radii[1], qs, qe, flags[1] == 1, crossing_tol)
    if s0 < 0.0 or s1 < 0.0:
        return STATUS_BISECTION, 0
    if s0 > 1.0 and s1 > 1.0:
        return STATUS_DONE, 0
    side = 0
    first, second = (0, 1) if s0 <= s1 else (1, 0)
    sf = s0 if first == 0 else s1
    ss = s1 if first == 0 else s0
    res = _record(first, sf, qs, qe, v, ts, te, centers, flags, tol_tangent, g_val,
                  fstate, istate, ev_time, ev_side, ev_label, ev_q, ev_p, ev_g, qwork)
    if res != 0:
        side = res
    if ss <= 1.0:
        res = _record(second, ss, qs, qe, v, ts, te, centers, flags, tol_tangent, g_val,
                      fstate, istate, ev_time, ev_side, ev_label, ev_q, ev_p, ev_g, qwork)
        if res != 0:
            side = res
    return STATUS_DONE, side


@njit(cache=True, nogil=True)
def advance(q, p, fstate, istate, flags,
            pot_kind, pot_params, centers, radii,
            gamma, beta, dt, scheme, noise_mult, noise,
            obs_kind, obs_params,
            stop_side, max_events, max_steps, crossing_tol, tol_tangent,
            ev_time, ev_side, ev_label, ev_q, ev_p, ev_g,
            record, path_q, path_p, path_t, path_g):
    """Integrate until a stop condition; returns a ``STATUS_*`` code.

    State lives in the mutable arrays ``q, p, fstate, istate, flags``.  At
    step boundaries ``fstate[F_TIME]`` is the current time; inside a step it
    marks how far the observable integral has been accumulated.
    """
    d = q.shape[0]
    f = np.empty(d)
    p1 = np.empty(d)
    p2 = np.empty(d)
    qb = np.empty(d)
    qh = np.empty(d)
    qn = np.empty(d)
    qwork = np.empty(d)
    c1 = math.exp(-gamma * dt)
    c2 = math.sqrt((1.0 - c1 * c1) / beta) * noise_mult
    sig_em = math.sqrt(2.0 * gamma / beta * dt) * noise_mult
    n_noise = noise.shape[0]
    force_into(pot_kind, pot_params, q, f)
    while True:
        if istate[I_STEPS] >= max_steps:
            return STATUS_MAX_STEPS
        if istate[I_NOISE] >= n_noise:
            return STATUS_NOISE
        if record and istate[I_PATH] >= path_q.shape[0]:
            return STATUS_PATH_FULL
        xi = noise[istate[I_NOISE]]
        istate[I_NOISE] += 1
        t0 = fstate[F_TIME]
        g_val = observable(obs_kind, obs_params, q, p)
        for i in range(d):
            qb[i] = q[i]
        if scheme == SCHEME_BAOAB:
            for i in range(d):
                p1[i] = p[i] + 0.5 * dt * f[i]
                qh[i] = q[i] + 0.5 * dt * p1[i]
                p2[i] = c1 * p1[i] + c2 * xi[i]
                qn[i] = qh[i] + 0.5 * dt * p2[i]
            st, s1 = _segment(qb, qh, p1, t0, t0 + 0.5 * dt, centers, radii, flags,
                              crossing_tol, tol_tangent, g_val, fstate, istate,
                              ev_time, ev_side, ev_label, ev_q, ev_p, ev_g, qwork)
            if st != STATUS_DONE:
                return st
            st, s2 = _segment(qh, qn, p2, t0 + 0.5 * dt, t0 + dt, centers, radii, flags,
                              crossing_tol, tol_tangent, g_val, fstate, istate,
                              ev_time, ev_side, ev_label, ev_q, ev_p, ev_g, qwork)
            if st != STATUS_DONE:
                return st
            force_into(pot_kind, pot_params, qn, f)
            for i in range(d):
                q[i] = qn[i]
                p[i] = p2[i] + 0.5 * dt * f[i]
        else:
            for i in range(d):
                qn[i] = q[i] + dt * p[i]
                p2[i] = p[i]
            st, s1 = _segment(qb, qn, p2, t0, t0 + dt, centers, radii, flags,
                              crossing_tol, tol_tangent, g_val, fstate, istate,
                              ev_time, ev_side, ev_label, ev_q, ev_p, ev_g, qwork)
            if st != STATUS_DONE:
                return st
            s2 = 0
            for i in range(d):
                p[i] = p[i] + dt * (f[i] - gamma * p[i]) + sig_em * xi[i]
                q[i] = qn[i]
            force_into(pot_kind, pot_params, q, f)
        t1 = t0 + dt
        fstate[F_GACC] += g_val * (t1 - fstate[F_TIME])
        fstate[F_GTOTAL] += g_val * dt
        fstate[F_TIME] = t1
        istate[I_STEPS] += 1
        for i in range(d):
            if not (math.isfinite(q[i]) and math.isfinite(p[i])):
                return STATUS_BLOWUP
        if record:
            k = istate[I_PATH]
            for i in range(d):
                path_q[k, i] = q[i]
                path_p[k, i] = p[i]
            path_t[k] = t1
            path_g[k] = fstate[F_GTOTAL]
            istate[I_PATH] = k + 1
        if stop_side != STOP_NEVER:
            if (s1 != 0 and (stop_side == STOP_ANY or s1 == stop_side)) or \
               (s2 != 0 and (stop_side == STOP_ANY or s2 == stop_side)):
                return STATUS_DONE
        if istate[I_EVENTS] >= max_events:
            return STATUS_DONE
