# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled integration kernel.

Twin of _kernel_py.py.  Every floating-point operation here appears in
the same order as in the pure-Python kernel, scratch values are plain
doubles, and sqrt/exp come from the same libm, so the two kernels
produce bitwise identical trajectories (the extension is compiled with
-ffp-contract=off to keep the compiler from fusing multiply-adds).
Do not change arithmetic in one kernel without mirroring the other.
"""

import numpy as np

from libc.math cimport exp, sqrt

KERNEL_IMPL = "compiled"

cdef double DIVERGE_LIMIT = 1e12


cdef class _Kernel:
    cdef int arch, n, steps, D
    cdef int off_xm, off_sh, off_aux, off_th, off_thh
    cdef int use_proj, J, has_d, has_n, r_kind
    cdef int md_last, mn_last
    cdef double h, ell, mu, gamma, eta, vt2, denomw, r2
    cdef double rate_d, rate_n, start_d, start_n, r_amp, r_t0, r_tau
    cdef double u_cur, r_cur
    cdef double[::1] Am, b, Pb, Pib, knots_t
    cdef double[:, ::1] knots_A, d_samples, n_samples
    cdef double[::1] S, k1, k2, k3, k4, Sx
    cdef double[::1] xbuf, dbuf, nbuf, embuf, y1, y2, A_cur

    def __init__(self, pk):
        cdef int i
        self.arch = pk["arch"]
        self.n = pk["n"]
        self.steps = pk["steps"]
        self.h = pk["h"]
        self.D = pk["D"]
        self.off_xm = pk["off_xm"]
        self.off_sh = pk["off_sh"]
        self.off_aux = pk["off_aux"]
        self.off_th = pk["off_th"]
        self.off_thh = pk["off_thh"]
        self.ell = pk["ell"]
        self.mu = pk["mu"]
        self.gamma = pk["gamma"]
        self.eta = pk["eta"]
        self.use_proj = pk["use_proj"]
        self.vt2 = pk["vt2"]
        self.denomw = pk["denomw"]
        self.r2 = pk["r2"]
        self.J = pk["J"]
        self.has_d = pk["has_d"]
        self.has_n = pk["has_n"]
        self.rate_d = pk["rate_d"]
        self.rate_n = pk["rate_n"]
        self.start_d = pk["start_d"]
        self.start_n = pk["start_n"]
        self.r_kind = pk["r_kind"]
        self.r_amp = pk["r_amp"]
        self.r_t0 = pk["r_t0"]
        self.r_tau = pk["r_tau"]
        self.Am = np.ascontiguousarray(pk["A_m"], dtype=np.float64)
        self.b = np.ascontiguousarray(pk["b"], dtype=np.float64)
        self.Pb = np.ascontiguousarray(pk["Pb"], dtype=np.float64)
        self.Pib = np.ascontiguousarray(pk["Pib"], dtype=np.float64)
        self.knots_t = np.ascontiguousarray(pk["knots_t"], dtype=np.float64)
        self.knots_A = np.ascontiguousarray(pk["knots_A"], dtype=np.float64)
        self.d_samples = np.ascontiguousarray(pk["d_samples"], dtype=np.float64)
        self.n_samples = np.ascontiguousarray(pk["n_samples"], dtype=np.float64)
        self.md_last = self.d_samples.shape[0] - 1
        self.mn_last = self.n_samples.shape[0] - 1
        self.S = np.array(pk["S0"], dtype=np.float64, copy=True)
        self.k1 = np.zeros(self.D)
        self.k2 = np.zeros(self.D)
        self.k3 = np.zeros(self.D)
        self.k4 = np.zeros(self.D)
        self.Sx = np.zeros(self.D)
        self.xbuf = np.zeros(self.n)
        self.dbuf = np.zeros(self.n)
        self.nbuf = np.zeros(self.n)
        self.embuf = np.zeros(self.n)
        self.y1 = np.zeros(self.n)
        self.y2 = np.zeros(self.n)
        self.A_cur = np.zeros(self.n * self.n)
        if self.J == 1:
            for i in range(self.n * self.n):
                self.A_cur[i] = self.knots_A[0, i]

    cdef void _proj_into(self, double[::1] Sv, int offt, double[::1] y,
                         double[::1] out, int offo):
        cdef int c
        cdef double thth, ty, f, q
        thth = 0.0
        for c in range(self.n):
            thth = thth + Sv[offt + c] * Sv[offt + c]
        ty = 0.0
        for c in range(self.n):
            ty = ty + Sv[offt + c] * y[c]
        f = (thth - self.vt2) / self.denomw
        if self.use_proj and f > 0.0 and ty > 0.0:
            q = ty / thth
            for c in range(self.n):
                out[offo + c] = self.gamma * (y[c] - (f * Sv[offt + c]) * q)
        else:
            for c in range(self.n):
                out[offo + c] = self.gamma * y[c]

    cdef void rhs(self, double t, double[::1] Sv, double[::1] out):
        cdef int n = self.n
        cdef int i, j, c
        cdef long idx
        cdef double acc, u, r_t, w
        cdef double thx, thxo, epb, eipb, eopb, epsc
        # held disturbance and measurement noise
        if self.has_d and t >= self.start_d:
            idx = <long>(t * self.rate_d)
            if idx > self.md_last:
                idx = self.md_last
            for c in range(n):
                self.dbuf[c] = self.d_samples[idx, c]
        else:
            for c in range(n):
                self.dbuf[c] = 0.0
        if self.has_n and t >= self.start_n:
            idx = <long>(t * self.rate_n)
            if idx > self.mn_last:
                idx = self.mn_last
            for c in range(n):
                self.nbuf[c] = self.n_samples[idx, c]
        else:
            for c in range(n):
                self.nbuf[c] = 0.0
        # measured state
        for c in range(n):
            self.xbuf[c] = Sv[c] + self.nbuf[c]
        # reference input
        if self.r_kind == 1:
            if t >= self.r_t0:
                r_t = self.r_amp * (1.0 - exp(-(t - self.r_t0) / self.r_tau))
            else:
                r_t = 0.0
        else:
            r_t = self.r_amp
        # control input
        acc = 0.0
        if self.arch == 2:
            for c in range(n):
                acc = acc + Sv[self.off_th + c] * Sv[self.off_aux + c]
        else:
            for c in range(n):
                acc = acc + Sv[self.off_th + c] * self.xbuf[c]
        u = acc + r_t
        # plant matrix at t
        if self.J > 1:
            if t <= self.knots_t[0]:
                for i in range(n * n):
                    self.A_cur[i] = self.knots_A[0, i]
            elif t >= self.knots_t[self.J - 1]:
                for i in range(n * n):
                    self.A_cur[i] = self.knots_A[self.J - 1, i]
            else:
                j = 0
                while t >= self.knots_t[j + 1]:
                    j = j + 1
                w = (t - self.knots_t[j]) / (self.knots_t[j + 1] - self.knots_t[j])
                for i in range(n * n):
                    self.A_cur[i] = (self.knots_A[j, i]
                                     + (self.knots_A[j + 1, i] - self.knots_A[j, i]) * w)
        # true plant state derivative
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + self.A_cur[i * n + j] * Sv[j]
            out[i] = acc + self.b[i] * u + self.dbuf[i]
        # model-following error (measured)
        for c in range(n):
            self.embuf[c] = self.xbuf[c] - Sv[self.off_xm + c]
        # reference model
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + self.Am[i * n + j] * Sv[self.off_xm + j]
            out[self.off_xm + i] = acc + self.b[i] * r_t + self.ell * self.embuf[i]
        # open-loop shadow model
        if self.off_sh >= 0:
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + self.Am[i * n + j] * Sv[self.off_sh + j]
                out[self.off_sh + i] = acc + self.b[i] * r_t
        # identifier / observer
        if self.arch == 1:
            acc = 0.0
            for c in range(n):
                acc = acc + Sv[self.off_thh + c] * self.xbuf[c]
            thx = acc
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + self.Am[i * n + j] * self.xbuf[j]
                out[self.off_aux + i] = (-self.mu * (Sv[self.off_aux + i] - self.xbuf[i]) + acc
                                         - self.b[i] * thx + self.b[i] * u)
        elif self.arch == 2:
            acc = 0.0
            for c in range(n):
                acc = acc + Sv[self.off_thh + c] * Sv[self.off_aux + c]
            thxo = acc
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + self.Am[i * n + j] * Sv[self.off_aux + j]
                out[self.off_aux + i] = (-self.mu * (Sv[self.off_aux + i] - self.xbuf[i]) + acc
                                         - self.b[i] * thxo + self.b[i] * u)
        # adaptive laws
        acc = 0.0
        for c in range(n):
            acc = acc + self.embuf[c] * self.Pb[c]
        epb = acc
        if self.arch == 0:
            for c in range(n):
                self.y1[c] = -self.xbuf[c] * epb
            self._proj_into(Sv, self.off_th, self.y1, out, self.off_th)
        else:
            if self.arch == 1:
                for c in range(n):
                    self.y1[c] = -self.xbuf[c] * epb
                acc = 0.0
                for c in range(n):
                    acc = acc + (Sv[self.off_aux + c] - self.xbuf[c]) * self.Pib[c]
                eipb = acc
                for c in range(n):
                    self.y2[c] = self.xbuf[c] * eipb
            else:
                for c in range(n):
                    self.y1[c] = -Sv[self.off_aux + c] * epb
                acc = 0.0
                for c in range(n):
                    acc = acc + (Sv[self.off_aux + c] - self.xbuf[c]) * self.Pb[c]
                eopb = acc
                for c in range(n):
                    self.y2[c] = Sv[self.off_aux + c] * eopb
            self._proj_into(Sv, self.off_th, self.y1, out, self.off_th)
            self._proj_into(Sv, self.off_thh, self.y2, out, self.off_thh)
            for c in range(n):
                epsc = Sv[self.off_th + c] - Sv[self.off_thh + c]
                out[self.off_th + c] = out[self.off_th + c] - self.eta * epsc
                out[self.off_thh + c] = out[self.off_thh + c] + self.eta * epsc
        self.u_cur = u
        self.r_cur = r_t

    def run(self):
        cdef int steps = self.steps
        cdef int D = self.D
        cdef int n = self.n
        cdef int k, i, c, bad
        cdef int repairs = 0
        cdef int status = 0
        cdef int n_done = steps + 1
        cdef double t, thth, scale, v
        cdef double h = self.h
        cdef double half_h = h / 2.0
        cdef double sixth_h = h / 6.0

        t_np = np.empty(steps + 1)
        state_np = np.empty((steps + 1, D))
        deriv_np = np.empty((steps + 1, D))
        u_np = np.empty(steps + 1)
        r_np = np.empty(steps + 1)
        d_np = np.empty((steps + 1, n))
        n_np = np.empty((steps + 1, n))
        cdef double[::1] t_out = t_np
        cdef double[:, ::1] state_out = state_np
        cdef double[:, ::1] deriv_out = deriv_np
        cdef double[::1] u_out = u_np
        cdef double[::1] r_out = r_np
        cdef double[:, ::1] d_out = d_np
        cdef double[:, ::1] n_out = n_np

        for k in range(steps + 1):
            t = k * h
            self.rhs(t, self.S, self.k1)
            t_out[k] = t
            u_out[k] = self.u_cur
            r_out[k] = self.r_cur
            for i in range(D):
                state_out[k, i] = self.S[i]
                deriv_out[k, i] = self.k1[i]
            for c in range(n):
                d_out[k, c] = self.dbuf[c]
                n_out[k, c] = self.nbuf[c]
            if k == steps:
                break
            for i in range(D):
                self.Sx[i] = self.S[i] + half_h * self.k1[i]
            self.rhs(t + half_h, self.Sx, self.k2)
            for i in range(D):
                self.Sx[i] = self.S[i] + half_h * self.k2[i]
            self.rhs(t + half_h, self.Sx, self.k3)
            for i in range(D):
                self.Sx[i] = self.S[i] + h * self.k3[i]
            self.rhs(t + h, self.Sx, self.k4)
            for i in range(D):
                self.S[i] = self.S[i] + sixth_h * (self.k1[i] + 2.0 * self.k2[i]
                                                   + 2.0 * self.k3[i] + self.k4[i])
            # pull gains back onto the boundary sphere if the step left D1
            if self.use_proj:
                thth = 0.0
                for c in range(n):
                    thth = thth + self.S[self.off_th + c] * self.S[self.off_th + c]
                if thth > self.r2:
                    scale = sqrt(self.r2 / thth)
                    for c in range(n):
                        self.S[self.off_th + c] = self.S[self.off_th + c] * scale
                    repairs = repairs + 1
                if self.off_thh >= 0:
                    thth = 0.0
                    for c in range(n):
                        thth = thth + self.S[self.off_thh + c] * self.S[self.off_thh + c]
                    if thth > self.r2:
                        scale = sqrt(self.r2 / thth)
                        for c in range(n):
                            self.S[self.off_thh + c] = self.S[self.off_thh + c] * scale
                        repairs = repairs + 1
            bad = 0
            for i in range(D):
                v = self.S[i]
                if not (v >= -DIVERGE_LIMIT and v <= DIVERGE_LIMIT):
                    bad = 1
                    break
            if bad:
                status = 1
                n_done = k + 1
                break

        return {
            "t": t_np,
            "state": state_np,
            "deriv": deriv_np,
            "u": u_np,
            "r": r_np,
            "d_held": d_np,
            "n_held": n_np,
            "repairs": repairs,
            "status": status,
            "n_done": n_done,
        }


def integrate_packed(pk):
    """Run fixed-step RK4 over the packed scenario pk (compiled)."""
    return _Kernel(pk).run()
