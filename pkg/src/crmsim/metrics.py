"""Trace metrics, derived signals, and bound certification.

Everything the guarantees are stated in: truncated L2 norms, interval
sups, settle times, the sampled Lyapunov functions, and check_bounds,
which walks a trace against its BoundLedger and records violations
with margins.  Violations are data, not exceptions; the CLI turns them
into exit status 2.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as bnd
from .errors import MissingShadow, UnknownSignal
from .signals import ConstantSignal, FilteredStep

# slack for inequalities proven strict in continuous time, evaluated in floats
ABS_SLACK = 1e-9


def _norms(arr):
    """Euclidean norm per sample for (m,) or (m, n) arrays."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        return np.abs(arr)
    return np.sqrt((arr * arr).sum(axis=1))


def derive_signals(trace):
    """Fill trace.derived with the error and rate signals.

    e      measured model-following error x - x_m
    e_orm  open-loop model-following error x - x_m_o (shadow runs)
    e_aux  identifier/observer error x_i - x or x_o - x
    e_true, e_aux_true
           the same errors formed with the true (noise-free) state,
           which is what the noisy-measurement guarantees bound
    udot   control-input rate: exact expression for the direct
           noise-free architecture (theta' xterm + theta x' + r'),
           central difference of the sampled u otherwise
    thetadot, thetahatdot
           stored update directions (exact right-hand sides)
    """
    if trace.derived.get("_done"):
        return trace
    scn = trace.scenario
    d = trace.derived
    d["e"] = trace.x - trace.x_m
    d["e_true"] = trace.x_true - trace.x_m
    if trace.x_m_o is not None:
        d["e_orm"] = trace.x - trace.x_m_o
    if trace.aux is not None:
        d["e_aux"] = trace.aux - trace.x
        d["e_aux_true"] = trace.aux - trace.x_true
    d["thetadot"] = trace.deriv_theta
    if trace.deriv_theta_hat is not None:
        d["thetahatdot"] = trace.deriv_theta_hat

    analytic = scn.arch == 0 and scn.plant.noise is None
    if analytic:
        ref = scn.reference
        t = trace.t
        if isinstance(ref, FilteredStep):
            rdot = np.where(
                t >= ref.step_time,
                (ref.amplitude / ref.tau_f)
                * np.exp(-(np.maximum(t - ref.step_time, 0.0)) / ref.tau_f),
                0.0,
            )
        elif isinstance(ref, ConstantSignal):
            rdot = np.zeros_like(t)
        else:
            rdot = None
        if rdot is not None:
            d["rdot"] = rdot
            d["udot"] = ((trace.deriv_theta * trace.x).sum(axis=1)
                         + (trace.theta * trace.deriv_x).sum(axis=1)
                         + rdot)
    if "udot" not in d:
        u = trace.u
        h = trace.step
        udot = np.empty_like(u)
        if len(u) >= 2:
            udot[0] = (u[1] - u[0]) / h
            udot[-1] = (u[-1] - u[-2]) / h
            if len(u) > 2:
                udot[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
        else:
            udot[:] = 0.0
        d["udot"] = udot
    d["_done"] = True
    return trace


def signal_array(trace, name):
    """Resolve a signal name to its sample array."""
    derive_signals(trace)
    direct = {
        "x": trace.x, "x_true": trace.x_true, "x_m": trace.x_m,
        "theta": trace.theta, "u": trace.u, "r": trace.r, "d": trace.d,
        "n": trace.noise,
    }
    if name in direct:
        return direct[name]
    if name == "x_m_o":
        if trace.x_m_o is None:
            raise MissingShadow("scenario did not co-simulate the "
                                "open-loop reference model")
        return trace.x_m_o
    if name in ("x_i", "x_o", "aux"):
        if trace.aux is None:
            raise UnknownSignal("trace has no identifier/observer state")
        return trace.aux
    if name == "theta_hat":
        if trace.theta_hat is None:
            raise UnknownSignal("trace has no theta_hat")
        return trace.theta_hat
    if name in ("e_i", "e_o"):
        name = "e_aux"
    if name == "e_orm" and "e_orm" not in trace.derived:
        raise MissingShadow("scenario did not co-simulate the "
                            "open-loop reference model")
    if name in trace.derived:
        return trace.derived[name]
    raise UnknownSignal("unknown signal %r" % name)


def truncated_l2(trace, signal, tau):
    """Trapezoidal approximation of the truncated L2 norm
    (integral over [0, tau] of norm(signal)**2) ** [1/2]."""
    if tau < 0.0:
        raise UnknownSignal("tau must be nonnegative")
    sq = _norms(signal_array(trace, signal)) ** 2
    t = trace.t
    if tau == 0.0 or len(t) < 2:
        return 0.0
    k = int(np.searchsorted(t, tau + 1e-12, side="right")) - 1
    k = max(k, 1)
    h = trace.step
    integral = h * (sq[:k + 1].sum() - 0.5 * (sq[0] + sq[k]))
    return math.sqrt(max(integral, 0.0))


def l2_norm_sq(trace, signal):
    """Trapezoid of norm(signal)**2 over the whole trace."""
    sq = _norms(signal_array(trace, signal)) ** 2
    h = trace.step
    return float(h * (sq.sum() - 0.5 * (sq[0] + sq[-1])))


def rms(trace, signal, t_lo, t_hi):
    """Root-mean-square of norm(signal) over samples with
    t_lo <= t <= t_hi."""
    vals = _norms(signal_array(trace, signal))
    mask = (trace.t >= t_lo - 1e-12) & (trace.t <= t_hi + 1e-12)
    if not mask.any():
        raise UnknownSignal("window [%g, %g] contains no samples"
                            % (t_lo, t_hi))
    return float(np.sqrt((vals[mask] ** 2).mean()))


def sup_by_interval(trace, signal, t_lo, t_hi):
    """sup of norm(signal) over samples with t_lo <= t < t_hi
    (right-open, matching the interval split of the timescale
    analysis); the final sample is included when t_hi passes the
    horizon."""
    vals = _norms(signal_array(trace, signal))
    mask = (trace.t >= t_lo - 1e-12) & (trace.t < t_hi - 1e-12)
    if t_hi >= trace.t[-1]:
        mask = mask | (trace.t >= t_hi - 1e-12)
    if not mask.any():
        return 0.0
    return float(vals[mask].max())


def settle_time(trace, signal, eps):
    """First sample time after which norm(signal) stays <= eps for the
    rest of the trace; None if it never settles."""
    vals = _norms(signal_array(trace, signal))
    above = np.nonzero(vals > eps)[0]
    if len(above) == 0:
        return float(trace.t[0])
    last = above[-1]
    if last + 1 >= len(vals):
        return None
    return float(trace.t[last + 1])


def theta_star_samples(trace):
    """Ground-truth matching parameter per sample, (m, n)."""
    scn = trace.scenario
    plant = scn.plant
    if plant.theta_star_schedule is not None:
        out = np.empty_like(trace.theta)
        for k, tk in enumerate(trace.t):
            out[k] = plant.theta_star_at(float(tk))
        return out
    return np.tile(plant.theta_star, (len(trace.t), 1))


def theta_star_drift_bound(plant):
    """sup norm of the matching-parameter rate for a scheduled plant
    (0 for constant plants)."""
    sched = plant.theta_star_schedule
    if sched is None:
        return 0.0
    worst = 0.0
    for j in range(len(sched.times) - 1):
        dt = sched.times[j + 1] - sched.times[j]
        rate = (sched.values[j + 1] - sched.values[j]).reshape(-1) / dt
        worst = max(worst, float(np.sqrt((rate * rate).sum())))
    return worst


def ledger_for_scenario(scn, consts=None):
    """Build the BoundLedger matching a scenario's design point.

    Initial error norms come from the scenario's initial conditions
    and ground truth; disturbance/noise bounds from the signal
    handles; the drift bound from the schedule slope.
    """
    from .matan import spectral_constants

    if consts is None:
        consts = spectral_constants(scn.ref_model.A_m)
    cfg = scn.controller.projection
    b_norm = float(np.sqrt(np.dot(scn.plant.b, scn.plant.b)))
    e0 = float(np.sqrt(((scn.x0 - scn.x_m0) ** 2).sum()))
    th_star0 = scn.plant.theta_star_at(0.0)
    tt0 = float(np.sqrt(((scn.theta0 - th_star0) ** 2).sum()))
    d_bound = (scn.plant.disturbance.bound()
               if scn.plant.disturbance is not None else 0.0)
    n_bound = (scn.plant.noise.bound()
               if scn.plant.noise is not None else 0.0)
    drift = theta_star_drift_bound(scn.plant)
    if scn.arch == 0:
        return bnd.direct_ledger(
            consts, scn.ref_model.ell, cfg.gamma, cfg, b_norm,
            e0_norm=e0, theta_tilde0_norm=tt0,
            d_bound=d_bound, theta_dot_star_bound=drift,
        )
    em0 = e0
    ei0 = float(np.sqrt(((scn.aux0 - scn.x0) ** 2).sum()))
    tb0 = float(np.sqrt(((scn.theta_hat0 - th_star0) ** 2).sum()))
    return bnd.cmrac_ledgers(
        consts, scn.ref_model.ell, cfg.gamma, cfg, b_norm,
        em0_norm=em0, ei0_norm=ei0,
        theta_tilde0_norm=tt0, theta_bar0_norm=tb0,
        n_bound=n_bound,
    )


@dataclass
class MetricReport:
    """Outcome of check_bounds: named checks with worst margins,
    flattened violations, free-form notes, and headline norms."""

    checks: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    l2: dict = field(default_factory=dict)
    terminal: dict = field(default_factory=dict)

    def add_check(self, name, passed, worst_margin, t_worst, info=None):
        entry = {"name": name, "passed": bool(passed),
                 "worst_margin": float(worst_margin),
                 "t_worst": None if t_worst is None else float(t_worst)}
        if info:
            entry["info"] = info
        self.checks.append(entry)
        if not passed:
            self.violations.append({
                "bound": name,
                "t": None if t_worst is None else float(t_worst),
                "margin": float(worst_margin),
            })

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": self.checks,
            "violations": self.violations,
            "notes": self.notes,
            "l2": self.l2,
            "terminal": self.terminal,
        }


def _samplewise(report, name, values, limits, t, tol=None):
    """Record a check that values[k] <= limits[k] (+ slack) for all k."""
    values = np.asarray(values, dtype=float)
    limits = np.asarray(limits, dtype=float)
    if limits.ndim == 0:
        limits = np.full_like(values, float(limits))
    slack = ABS_SLACK * (1.0 + np.abs(limits)) if tol is None else tol
    margins = limits + slack - values
    worst = int(np.argmin(margins))
    report.add_check(name, margins[worst] >= 0.0,
                     float(margins[worst]), float(t[worst]))


def _plant_is_static_clean(scn):
    """True when the plant is constant, undisturbed, and noise-free
    over the scenario's own window (a schedule whose first knot lies
    past the horizon never moves, a disturbance that starts past the
    horizon never fires)."""
    plant = scn.plant
    sched = plant.schedule
    static = (sched is None or sched.constant
              or sched.times[0] >= scn.horizon - 1e-12)
    quiet = (plant.disturbance is None
             or plant.disturbance.start_time >= scn.horizon - 1e-12)
    return static and quiet and plant.noise is None


def check_bounds(trace, ledger, udot_intervals=None):
    """Evaluate every applicable proven inequality along the trace.

    udot_intervals, when given, is (N, eps) for the interval sup
    checks of the control-input rate (direct architecture, requires
    ell at or above the timescale threshold).

    Checks whose premises the scenario violates (time-varying plant
    for the static-plant guarantees, overridden identifier/observer
    gains for the Lyapunov decrease arguments) are skipped with a
    note, never silently passed.
    """
    scn = trace.scenario
    derive_signals(trace)
    report = MetricReport()
    t = trace.t
    theta_star = theta_star_samples(trace)
    e = trace.derived["e"]
    e_norm = _norms(e)
    clean = _plant_is_static_clean(scn)

    report.l2["e"] = l2_norm_sq(trace, "e")
    report.l2["udot"] = l2_norm_sq(trace, "udot")
    report.terminal["e_norm"] = float(e_norm[-1])
    report.terminal["theta"] = [float(v) for v in trace.theta[-1]]

    # parameter containment (both gains, all architectures)
    if scn.controller.use_projection:
        _samplewise(report, "theta_norm_le_theta_max",
                    _norms(trace.theta), ledger.theta_max, t)
        if trace.theta_hat is not None:
            _samplewise(report, "theta_hat_norm_le_theta_max",
                        _norms(trace.theta_hat), ledger.theta_max, t)
    else:
        report.notes.append("projection disabled: no containment bound")

    if scn.arch == 0:
        _check_direct(trace, ledger, report, theta_star, e_norm, clean,
                      udot_intervals)
    elif scn.arch == 1:
        _check_cmracc(trace, ledger, report, theta_star, clean)
    else:
        _check_cmracco(trace, ledger, report, theta_star, clean)
    return report


def _vdot_check(report, name, V, h, t, rate, level):
    """Differenced Lyapunov decrease: (V[k+1]-V[k])/h <=
    -rate V[k] + level + 1e-3 (1 + |V[k]|)."""
    dV = (V[1:] - V[:-1]) / h
    lhs = dV
    rhs = -rate * V[:-1] + level
    tol = 1e-3 * (1.0 + np.abs(V[:-1]))
    margins = rhs + tol - lhs
    worst = int(np.argmin(margins))
    report.add_check(name, margins[worst] >= 0.0, float(margins[worst]),
                     float(t[worst]))


def _check_direct(trace, ledger, report, theta_star, e_norm, clean,
                  udot_intervals):
    scn = trace.scenario
    t = trace.t
    P = scn.controller.P_m
    gamma = scn.controller.projection.gamma
    theta_tilde = trace.theta - theta_star
    e = trace.derived["e"]

    if clean:
        V = ((e @ P) * e).sum(axis=1) + (theta_tilde ** 2).sum(axis=1) / gamma
        _vdot_check(report, "lyapunov_decrease", V, trace.step, t,
                    ledger.alpha1, ledger.alpha2)
        e0 = float(e_norm[0])
        ptw = (ledger.kappa1 * e0 ** 2 * np.exp(-ledger.alpha1 * t)
               + (ledger.kappa2 / ledger.rho) * ledger.theta_tilde_max ** 2)
        _samplewise(report, "transient_pointwise", e_norm ** 2, ptw, t)
        l2sq = l2_norm_sq(trace, "e")
        bound = ledger.nu / (ledger.sigma + ledger.ell)
        report.add_check("transient_l2", l2sq <= bound + ABS_SLACK,
                         bound - l2sq, None)
        report.add_check(
            "terminal_set",
            e_norm[-1] ** 2 <= ledger.beta1 * ledger.theta_tilde_max ** 2
            + ABS_SLACK,
            ledger.beta1 * ledger.theta_tilde_max ** 2 - e_norm[-1] ** 2,
            float(t[-1]))
        if "e_orm" in trace.derived:
            eo = _norms(trace.derived["e_orm"])
            lim = e_norm + math.sqrt(ledger.ell / ledger.sigma) * ledger.m \
                * math.sqrt(ledger.nu)
            _samplewise(report, "open_loop_error_pointwise", eo, lim, t)
    else:
        report.notes.append(
            "time-varying or disturbed plant: static-plant transient "
            "checks skipped; robust terminal set applies instead")
        rad = bnd.robust_set_radius_sq(ledger)
        report.add_check("robust_terminal_set",
                         e_norm[-1] ** 2 <= rad + ABS_SLACK,
                         rad - e_norm[-1] ** 2, float(t[-1]))

    if udot_intervals is not None and clean:
        _udot_interval_checks(trace, ledger, report, e_norm,
                              udot_intervals)


def _udot_interval_checks(trace, ledger, report, e_norm, udot_intervals):
    scn = trace.scenario
    N, eps = udot_intervals
    from .matan import SpectralConstants
    consts = SpectralConstants(sigma=ledger.sigma, s=ledger.s, a=ledger.a,
                               kappa=ledger.a / ledger.sigma, m=ledger.m,
                               n=ledger.n)
    ell_star = bnd.find_ell_star(consts, ledger.b_norm,
                                 ledger.theta_tilde_max, N, 1.0)
    if ledger.ell + bnd.ELL_BISECT_TOL < ell_star:
        report.notes.append(
            "ell=%.4f below ell_star=%.4f: interval sup checks skipped"
            % (ledger.ell, ell_star))
        return
    ref = scn.reference
    r0, r1 = ref.r0, ref.r1
    e0 = float(e_norm[0])
    settle = settle_time(trace, "e", eps)
    if settle is None:
        report.notes.append(
            "tracking error never settles under eps=%g: T3 check "
            "skipped" % eps)
    T1_end = N * ledger.tau1
    T2_end = max(N * ledger.tau2, settle if settle is not None else np.inf)
    spans = [("T1", 0.0, T1_end), ("T2", T1_end, T2_end)]
    if settle is not None and T2_end < float(trace.t[-1]):
        spans.append(("T3", T2_end, float(trace.t[-1]) + trace.step))
    for name, lo, hi in spans:
        try:
            env = bnd.udot_envelope(ledger, name, e0, 0.0, 0.0, r0, r1, N,
                                    eps, "direct")
        except Exception as exc:
            report.notes.append("udot envelope %s unavailable: %s"
                                % (name, exc))
            continue
        sup = sup_by_interval(trace, "udot", lo, hi)
        report.add_check("udot_sup_%s" % name, sup <= env + ABS_SLACK,
                         env - sup, lo,
                         info={"sup": sup, "envelope": env})


def _check_cmracc(trace, ledger, report, theta_star, clean):
    scn = trace.scenario
    t = trace.t
    e_m = trace.derived["e_true"]
    em_n = _norms(e_m)
    ei_n = _norms(trace.derived["e_aux_true"])
    prescribed = scn.identifier.prescribed
    if clean and prescribed:
        P_m = scn.controller.P_m
        P_i = scn.controller.P_i
        gamma = scn.controller.projection.gamma
        tt = trace.theta - theta_star
        tb = trace.theta_hat - theta_star
        ei = trace.derived["e_aux"]
        V = (((e_m @ P_m) * e_m).sum(axis=1)
             + ((ei @ P_i) * ei).sum(axis=1)
             + (tt ** 2).sum(axis=1) / gamma
             + (tb ** 2).sum(axis=1) / gamma)
        _vdot_check(report, "lyapunov_decrease_combined", V, trace.step, t,
                    ledger.alpha1, 2.0 * ledger.alpha2)
    elif not prescribed:
        report.notes.append(
            "identifier gain overridden (not sigma+ell): Lyapunov "
            "decrease check skipped")
    ttm2 = ledger.theta_tilde_max ** 2
    report.add_check("terminal_set_em",
                     em_n[-1] ** 2 <= ledger.beta4 * ttm2 + ABS_SLACK,
                     ledger.beta4 * ttm2 - em_n[-1] ** 2, float(t[-1]))
    report.add_check("terminal_set_ei",
                     ei_n[-1] ** 2 <= ledger.beta5 * ttm2 + ABS_SLACK,
                     ledger.beta5 * ttm2 - ei_n[-1] ** 2, float(t[-1]))


def _check_cmracco(trace, ledger, report, theta_star, clean):
    scn = trace.scenario
    t = trace.t
    noisy = scn.plant.noise is not None
    e_m_true = trace.derived["e_true"]
    e_o_true = trace.aux - trace.x_true
    em_n = _norms(e_m_true)
    eo_n = _norms(e_o_true)
    prescribed = scn.observer.prescribed
    ttm2 = ledger.theta_tilde_max ** 2

    if ledger.delta_ge_one:
        report.notes.append(
            "Delta(ell) >= 1: observer-architecture guarantees do not "
            "apply at this design point")
        return
    if clean and prescribed:
        P = scn.controller.P_m
        gamma = scn.controller.projection.gamma
        tt = trace.theta - theta_star
        tb = trace.theta_hat - theta_star
        V = (((e_m_true @ P) * e_m_true).sum(axis=1)
             + ((e_o_true @ P) * e_o_true).sum(axis=1)
             + (tt ** 2).sum(axis=1) / gamma
             + (tb ** 2).sum(axis=1) / gamma)
        _vdot_check(report, "lyapunov_decrease_observer", V, trace.step, t,
                    ledger.alpha5, ledger.alpha6)
    elif not prescribed:
        report.notes.append(
            "observer gain overridden (not ell): Lyapunov decrease "
            "check skipped")
    if noisy:
        rad = ledger.beta6 * ttm2 + ledger.beta7 * ledger.n_bound ** 2
        name = "noisy_terminal_set"
    else:
        rad = ledger.beta6 * ttm2
        name = "terminal_set"
    report.add_check(name + "_em", em_n[-1] ** 2 <= rad + ABS_SLACK,
                     rad - em_n[-1] ** 2, float(t[-1]))
    report.add_check(name + "_eo", eo_n[-1] ** 2 <= rad + ABS_SLACK,
                     rad - eo_n[-1] ** 2, float(t[-1]))
