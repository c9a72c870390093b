"""Pure-Python integration kernel.

Fallback twin of the compiled kernel in _kernel.pyx.  The two must
stay bitwise identical: every floating-point operation appears in the
same order in both, scratch values are plain doubles, and both call
the same libm for sqrt/exp.  Do not "simplify" arithmetic here without
mirroring the change in the .pyx file (and vice versa); the parity
test suite compares full trajectories for exact equality.

The kernel consumes the packed dict produced by sim._pack_scenario and
knows nothing about specs, signals, or configs.
"""

import math

import numpy as np

KERNEL_IMPL = "python"

DIVERGE_LIMIT = 1e12


def integrate_packed(pk):
    """Run fixed-step RK4 over the packed scenario pk.

    Returns a dict of sample arrays (state, deriv, u, r, d_held,
    n_held, t), the repair counter, a status flag (0 done, 1 nonfinite
    abort), and n_done, the number of valid samples.
    """
    arch = int(pk["arch"])
    n = int(pk["n"])
    steps = int(pk["steps"])
    h = float(pk["h"])
    D = int(pk["D"])
    off_xm = int(pk["off_xm"])
    off_sh = int(pk["off_sh"])
    off_aux = int(pk["off_aux"])
    off_th = int(pk["off_th"])
    off_thh = int(pk["off_thh"])
    ell = float(pk["ell"])
    mu = float(pk["mu"])
    gamma = float(pk["gamma"])
    eta = float(pk["eta"])
    use_proj = int(pk["use_proj"])
    vt2 = float(pk["vt2"])
    denomw = float(pk["denomw"])
    r2 = float(pk["r2"])
    J = int(pk["J"])
    has_d = int(pk["has_d"])
    has_n = int(pk["has_n"])
    rate_d = float(pk["rate_d"])
    rate_n = float(pk["rate_n"])
    start_d = float(pk["start_d"])
    start_n = float(pk["start_n"])
    r_kind = int(pk["r_kind"])
    r_amp = float(pk["r_amp"])
    r_t0 = float(pk["r_t0"])
    r_tau = float(pk["r_tau"])

    Am = pk["A_m"].tolist()
    b = pk["b"].tolist()
    Pb = pk["Pb"].tolist()
    Pib = pk["Pib"].tolist()
    knots_t = pk["knots_t"].tolist()
    knots_A = [row.tolist() for row in pk["knots_A"]]
    d_samples = [row.tolist() for row in pk["d_samples"]]
    n_samples = [row.tolist() for row in pk["n_samples"]]
    md_last = len(d_samples) - 1
    mn_last = len(n_samples) - 1

    t_out = np.empty(steps + 1)
    state_out = np.empty((steps + 1, D))
    deriv_out = np.empty((steps + 1, D))
    u_out = np.empty(steps + 1)
    r_out = np.empty(steps + 1)
    d_out = np.empty((steps + 1, n))
    n_out = np.empty((steps + 1, n))

    S = list(pk["S0"])
    k1 = [0.0] * D
    k2 = [0.0] * D
    k3 = [0.0] * D
    k4 = [0.0] * D
    Sx = [0.0] * D
    xbuf = [0.0] * n
    dbuf = [0.0] * n
    nbuf = [0.0] * n
    embuf = [0.0] * n
    y1 = [0.0] * n
    y2 = [0.0] * n
    A_cur = [0.0] * (n * n)
    if J == 1:
        A_cur = list(knots_A[0])

    half_h = h / 2.0
    sixth_h = h / 6.0
    repairs = 0
    status = 0
    n_done = steps + 1

    def rhs(t, Sv, out):
        """Fill out with dS/dt at (t, Sv); return (u, r) at that point.

        Side effect: xbuf/dbuf/nbuf hold the measured state and held
        signal samples used, so the sampling loop can record them.
        """
        # held disturbance and measurement noise
        if has_d and t >= start_d:
            idx = int(t * rate_d)
            if idx > md_last:
                idx = md_last
            row = d_samples[idx]
            for c in range(n):
                dbuf[c] = row[c]
        else:
            for c in range(n):
                dbuf[c] = 0.0
        if has_n and t >= start_n:
            idx = int(t * rate_n)
            if idx > mn_last:
                idx = mn_last
            row = n_samples[idx]
            for c in range(n):
                nbuf[c] = row[c]
        else:
            for c in range(n):
                nbuf[c] = 0.0
        # measured state
        for c in range(n):
            xbuf[c] = Sv[c] + nbuf[c]
        # reference input
        if r_kind == 1:
            if t >= r_t0:
                r_t = r_amp * (1.0 - math.exp(-(t - r_t0) / r_tau))
            else:
                r_t = 0.0
        else:
            r_t = r_amp
        # control input
        acc = 0.0
        if arch == 2:
            for c in range(n):
                acc = acc + Sv[off_th + c] * Sv[off_aux + c]
        else:
            for c in range(n):
                acc = acc + Sv[off_th + c] * xbuf[c]
        u = acc + r_t
        # plant matrix at t
        if J > 1:
            if t <= knots_t[0]:
                row = knots_A[0]
                for i in range(n * n):
                    A_cur[i] = row[i]
            elif t >= knots_t[J - 1]:
                row = knots_A[J - 1]
                for i in range(n * n):
                    A_cur[i] = row[i]
            else:
                j = 0
                while t >= knots_t[j + 1]:
                    j = j + 1
                w = (t - knots_t[j]) / (knots_t[j + 1] - knots_t[j])
                rowa = knots_A[j]
                rowb = knots_A[j + 1]
                for i in range(n * n):
                    A_cur[i] = rowa[i] + (rowb[i] - rowa[i]) * w
        # true plant state derivative
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + A_cur[i * n + j] * Sv[j]
            out[i] = acc + b[i] * u + dbuf[i]
        # model-following error (measured)
        for c in range(n):
            embuf[c] = xbuf[c] - Sv[off_xm + c]
        # reference model
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + Am[i * n + j] * Sv[off_xm + j]
            out[off_xm + i] = acc + b[i] * r_t + ell * embuf[i]
        # open-loop shadow model
        if off_sh >= 0:
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + Am[i * n + j] * Sv[off_sh + j]
                out[off_sh + i] = acc + b[i] * r_t
        # identifier / observer
        if arch == 1:
            acc = 0.0
            for c in range(n):
                acc = acc + Sv[off_thh + c] * xbuf[c]
            thx = acc
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + Am[i * n + j] * xbuf[j]
                out[off_aux + i] = (-mu * (Sv[off_aux + i] - xbuf[i]) + acc
                                    - b[i] * thx + b[i] * u)
        elif arch == 2:
            acc = 0.0
            for c in range(n):
                acc = acc + Sv[off_thh + c] * Sv[off_aux + c]
            thxo = acc
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + Am[i * n + j] * Sv[off_aux + j]
                out[off_aux + i] = (-mu * (Sv[off_aux + i] - xbuf[i]) + acc
                                    - b[i] * thxo + b[i] * u)
        # adaptive laws
        acc = 0.0
        for c in range(n):
            acc = acc + embuf[c] * Pb[c]
        epb = acc
        if arch == 0:
            for c in range(n):
                y1[c] = -xbuf[c] * epb
            _proj_into(Sv, off_th, y1, out, off_th)
        else:
            if arch == 1:
                for c in range(n):
                    y1[c] = -xbuf[c] * epb
                acc = 0.0
                for c in range(n):
                    acc = acc + (Sv[off_aux + c] - xbuf[c]) * Pib[c]
                eipb = acc
                for c in range(n):
                    y2[c] = xbuf[c] * eipb
            else:
                for c in range(n):
                    y1[c] = -Sv[off_aux + c] * epb
                acc = 0.0
                for c in range(n):
                    acc = acc + (Sv[off_aux + c] - xbuf[c]) * Pb[c]
                eopb = acc
                for c in range(n):
                    y2[c] = Sv[off_aux + c] * eopb
            _proj_into(Sv, off_th, y1, out, off_th)
            _proj_into(Sv, off_thh, y2, out, off_thh)
            for c in range(n):
                epsc = Sv[off_th + c] - Sv[off_thh + c]
                out[off_th + c] = out[off_th + c] - eta * epsc
                out[off_thh + c] = out[off_thh + c] + eta * epsc
        return u, r_t

    def _proj_into(Sv, offt, y, out, offo):
        thth = 0.0
        for c in range(n):
            thth = thth + Sv[offt + c] * Sv[offt + c]
        ty = 0.0
        for c in range(n):
            ty = ty + Sv[offt + c] * y[c]
        f = (thth - vt2) / denomw
        if use_proj and f > 0.0 and ty > 0.0:
            q = ty / thth
            for c in range(n):
                out[offo + c] = gamma * (y[c] - (f * Sv[offt + c]) * q)
        else:
            for c in range(n):
                out[offo + c] = gamma * y[c]

    for k in range(steps + 1):
        t = k * h
        u, r_t = rhs(t, S, k1)
        t_out[k] = t
        u_out[k] = u
        r_out[k] = r_t
        for i in range(D):
            state_out[k, i] = S[i]
            deriv_out[k, i] = k1[i]
        for c in range(n):
            d_out[k, c] = dbuf[c]
            n_out[k, c] = nbuf[c]
        if k == steps:
            break
        t_half = t + half_h
        for i in range(D):
            Sx[i] = S[i] + half_h * k1[i]
        rhs(t_half, Sx, k2)
        for i in range(D):
            Sx[i] = S[i] + half_h * k2[i]
        rhs(t_half, Sx, k3)
        for i in range(D):
            Sx[i] = S[i] + h * k3[i]
        rhs(t + h, Sx, k4)
        for i in range(D):
            S[i] = S[i] + sixth_h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        # pull gains back onto the boundary sphere if the step left D1
        if use_proj:
            thth = 0.0
            for c in range(n):
                thth = thth + S[off_th + c] * S[off_th + c]
            if thth > r2:
                scale = math.sqrt(r2 / thth)
                for c in range(n):
                    S[off_th + c] = S[off_th + c] * scale
                repairs = repairs + 1
            if off_thh >= 0:
                thth = 0.0
                for c in range(n):
                    thth = thth + S[off_thh + c] * S[off_thh + c]
                if thth > r2:
                    scale = math.sqrt(r2 / thth)
                    for c in range(n):
                        S[off_thh + c] = S[off_thh + c] * scale
                    repairs = repairs + 1
        bad = 0
        for i in range(D):
            v = S[i]
            if not (-DIVERGE_LIMIT <= v <= DIVERGE_LIMIT):
                bad = 1
                break
        if bad:
            status = 1
            n_done = k + 1
            break

    return {
        "t": t_out,
        "state": state_out,
        "deriv": deriv_out,
        "u": u_out,
        "r": r_out,
        "d_held": d_out,
        "n_held": n_out,
        "repairs": repairs,
        "status": status,
        "n_done": n_done,
    }
