"""Scenario assembly, fixed-step integration, and trace export.

A Scenario is the complete, immutable description of one run: plant,
reference model, controller, signal handles, horizon, step, seed, and
initial conditions.  integrate() packs it into flat arrays, hands it
to the selected kernel (compiled or pure Python, bitwise identical),
and wraps the sampled result in a Trace.

Integration is classical fixed-step fourth-order Runge-Kutta over the
stacked state [x, x_m, x_m_open?, x_i/x_o?, theta, theta_hat?].  Held
signals (disturbance, noise) are sampled with zero-order hold at their
own rates; after every step the parameter vectors are radially
rescaled onto the projection ball boundary if the discrete step left
it (an O(h**2) repair, counted on the trace).
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend
from .adaptlaw import ControllerSpec
from .errors import ConfigError, NonFinite
from .models import IdentifierSpec, ObserverSpec, PlantSpec, ReferenceModelSpec
from .proj import f_eval
from .signals import (
    ConstantSignal,
    FilteredStep,
    PiecewiseLinearMatrixSchedule,
    SaturatedGaussianZOH,
)

ARCH_CODE = {"direct": 0, "cmracc": 1, "cmracco": 2}


@dataclass(frozen=True)
class Scenario:
    """Everything one deterministic run depends on."""

    plant: PlantSpec
    ref_model: ReferenceModelSpec
    controller: ControllerSpec
    reference: object
    horizon: float
    step: float
    seed: int
    x0: np.ndarray
    x_m0: np.ndarray
    aux0: Optional[np.ndarray] = None
    theta0: Optional[np.ndarray] = None
    theta_hat0: Optional[np.ndarray] = None
    identifier: Optional[IdentifierSpec] = None
    observer: Optional[ObserverSpec] = None
    orm_shadow: bool = False
    name: str = ""

    def __post_init__(self):
        n = self.plant.n
        if self.step <= 0.0:
            raise ConfigError("step must be positive")
        if self.horizon < self.step:
            raise ConfigError("horizon must be at least one step")
        kind = self.controller.kind
        if kind == "cmracc" and self.identifier is None:
            raise ConfigError("identifier architecture needs an IdentifierSpec")
        if kind == "cmracco" and self.observer is None:
            raise ConfigError("observer architecture needs an ObserverSpec")
        for name, vec in (("x0", self.x0), ("x_m0", self.x_m0)):
            if np.asarray(vec).shape != (n,):
                raise ConfigError("%s must have shape (%d,)" % (name, n))
        theta0 = self.theta0 if self.theta0 is not None else np.zeros(n)
        object.__setattr__(self, "theta0", np.asarray(theta0, dtype=float))
        if kind in ("cmracc", "cmracco"):
            aux0 = self.aux0 if self.aux0 is not None else np.array(self.x0)
            hat0 = (self.theta_hat0 if self.theta_hat0 is not None
                    else np.zeros(n))
            object.__setattr__(self, "aux0", np.asarray(aux0, dtype=float))
            object.__setattr__(self, "theta_hat0", np.asarray(hat0, dtype=float))
        if self.controller.use_projection:
            cfg = self.controller.projection
            if f_eval(self.theta0, cfg) > 1.0:
                raise ConfigError("theta0 lies outside the projection ball")
            if self.theta_hat0 is not None and f_eval(self.theta_hat0, cfg) > 1.0:
                raise ConfigError("theta_hat0 lies outside the projection ball")

    @property
    def arch(self):
        return ARCH_CODE[self.controller.kind]

    @property
    def n(self):
        return self.plant.n

    @property
    def steps(self):
        return int(round(self.horizon / self.step))


@dataclass
class Trace:
    """Uniformly sampled result of one integration.

    x is the measured state (x_true plus held noise); x_true the plant
    state; aux holds the identifier or observer state when the
    architecture has one.  deriv rows are the exact right-hand side at
    each sample, so thetadot and xdot need no differencing.  derived
    caches signals filled in by metrics.derive_signals.
    """

    scenario: Scenario
    t: np.ndarray
    x: np.ndarray
    x_true: np.ndarray
    x_m: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    r: np.ndarray
    d: np.ndarray
    noise: np.ndarray
    deriv_x: np.ndarray
    deriv_theta: np.ndarray
    x_m_o: Optional[np.ndarray] = None
    aux: Optional[np.ndarray] = None
    theta_hat: Optional[np.ndarray] = None
    deriv_theta_hat: Optional[np.ndarray] = None
    repairs: int = 0
    status: int = 0
    kernel: str = ""
    derived: dict = field(default_factory=dict)

    @property
    def step(self):
        return self.scenario.step

    @property
    def complete(self):
        return self.status == 0

    def last_time(self):
        return float(self.t[-1])


def _pack_scenario(scn):
    """Flatten a Scenario into the dict the kernels consume."""
    n = scn.n
    plant = scn.plant
    ctrl = scn.controller
    arch = scn.arch
    shadow = 1 if scn.orm_shadow else 0
    coupled = 1 if arch in (1, 2) else 0

    off_xm = n
    off_sh = 2 * n if shadow else -1
    off_aux = (2 + shadow) * n if coupled else -1
    off_th = (2 + shadow + coupled) * n
    off_thh = off_th + n if coupled else -1
    D = off_th + n + (n if coupled else 0)

    S0 = np.zeros(D)
    S0[0:n] = scn.x0
    S0[off_xm:off_xm + n] = scn.x_m0
    if shadow:
        S0[off_sh:off_sh + n] = scn.x_m0
    if coupled:
        S0[off_aux:off_aux + n] = scn.aux0
        S0[off_thh:off_thh + n] = scn.theta_hat0
    S0[off_th:off_th + n] = scn.theta0

    if plant.schedule is not None:
        knots_t = np.asarray(plant.schedule.times, dtype=float)
        knots_A = plant.schedule.values.reshape(len(knots_t), n * n)
    else:
        knots_t = np.zeros(1)
        knots_A = plant.A_p.reshape(1, n * n)

    if plant.disturbance is not None:
        d_samples, rate_d, start_d = plant.disturbance.materialize(scn.horizon)
        has_d = 1
    else:
        d_samples, rate_d, start_d = np.zeros((1, n)), 1.0, 0.0
        has_d = 0
    if plant.noise is not None:
        n_samples, rate_n, start_n = plant.noise.materialize(scn.horizon)
        has_n = 1
    else:
        n_samples, rate_n, start_n = np.zeros((1, n)), 1.0, 0.0
        has_n = 0

    ref = scn.reference
    if isinstance(ref, FilteredStep):
        r_kind, r_amp, r_t0, r_tau = 1, ref.amplitude, ref.step_time, ref.tau_f
    elif isinstance(ref, ConstantSignal):
        r_kind, r_amp, r_t0, r_tau = 0, ref.level, 0.0, 1.0
    else:
        raise ConfigError("unsupported reference signal %r" % (ref,))

    if arch == 1:
        mu = scn.identifier.mu
    elif arch == 2:
        mu = scn.observer.mu
    else:
        mu = 0.0

    cfg = ctrl.projection
    Pib = ctrl.Pib if ctrl.Pib is not None else np.zeros(n)
    return {
        "arch": arch,
        "n": n,
        "steps": scn.steps,
        "h": float(scn.step),
        "D": D,
        "off_xm": off_xm,
        "off_sh": off_sh,
        "off_aux": off_aux,
        "off_th": off_th,
        "off_thh": off_thh,
        "ell": float(scn.ref_model.ell),
        "mu": float(mu),
        "gamma": float(cfg.gamma),
        "eta": float(cfg.eta),
        "use_proj": 1 if ctrl.use_projection else 0,
        "vt2": cfg.vartheta * cfg.vartheta,
        "denomw": cfg.denom,
        "r2": cfg.vartheta * cfg.vartheta + cfg.denom,
        "J": len(knots_t),
        "knots_t": knots_t,
        "knots_A": np.ascontiguousarray(knots_A),
        "has_d": has_d,
        "d_samples": np.ascontiguousarray(d_samples),
        "rate_d": rate_d,
        "start_d": start_d,
        "has_n": has_n,
        "n_samples": np.ascontiguousarray(n_samples),
        "rate_n": rate_n,
        "start_n": start_n,
        "r_kind": r_kind,
        "r_amp": float(r_amp),
        "r_t0": float(r_t0),
        "r_tau": float(r_tau),
        "A_m": np.ascontiguousarray(scn.ref_model.A_m.reshape(n * n)),
        "b": np.ascontiguousarray(scn.plant.b),
        "Pb": np.ascontiguousarray(ctrl.Pb),
        "Pib": np.ascontiguousarray(Pib),
        "S0": S0,
    }


def integrate(scn, backend_name=None, raise_on_divergence=True):
    """Integrate a Scenario and return its Trace.

    Bit-reproducible for a fixed scenario regardless of backend.  On
    divergence (a state component beyond 1e12) the partial trace is
    attached to the NonFinite exception, or returned with
    status != 0 when raise_on_divergence is false.
    """
    kern = backend.get_kernel(backend_name)
    pk = _pack_scenario(scn)
    out = kern.integrate_packed(pk)

    n = scn.n
    m = int(out["n_done"])
    state = out["state"][:m]
    deriv = out["deriv"][:m]
    off_xm, off_sh = pk["off_xm"], pk["off_sh"]
    off_aux, off_th, off_thh = pk["off_aux"], pk["off_th"], pk["off_thh"]

    x_true = state[:, 0:n]
    noise = out["n_held"][:m]
    trace = Trace(
        scenario=scn,
        t=out["t"][:m],
        x=x_true + noise,
        x_true=x_true,
        x_m=state[:, off_xm:off_xm + n],
        theta=state[:, off_th:off_th + n],
        u=out["u"][:m],
        r=out["r"][:m],
        d=out["d_held"][:m],
        noise=noise,
        deriv_x=deriv[:, 0:n],
        deriv_theta=deriv[:, off_th:off_th + n],
        x_m_o=state[:, off_sh:off_sh + n] if off_sh >= 0 else None,
        aux=state[:, off_aux:off_aux + n] if off_aux >= 0 else None,
        theta_hat=state[:, off_thh:off_thh + n] if off_thh >= 0 else None,
        deriv_theta_hat=deriv[:, off_thh:off_thh + n] if off_thh >= 0 else None,
        repairs=int(out["repairs"]),
        status=int(out["status"]),
        kernel=kern.KERNEL_IMPL,
    )
    if trace.status != 0 and raise_on_divergence:
        raise NonFinite(
            "state exceeded 1e12 at t=%.6f" % trace.last_time(), trace
        )
    return trace


def gen_saturated_gaussian(seed, rate_hz, variance, sat_bound, start_time=0.0,
                           dim=1):
    """Seeded, saturated, zero-order-held Gaussian signal handle."""
    return SaturatedGaussianZOH(seed=seed, rate_hz=rate_hz, variance=variance,
                                sat=sat_bound, start_time=start_time, dim=dim)


def gen_filtered_step(step_time, amplitude, filter_time_constant=1.0):
    """First-order-filtered step reference handle."""
    return FilteredStep(step_time=step_time, amplitude=amplitude,
                        tau_f=filter_time_constant)


def gen_ltv_schedule_sec4():
    """The scheduled scalar plant of the published time-varying study:
    A_p(t) = 1 until t=20, ramping linearly to 2 at t=24, constant 2
    afterwards."""
    return PiecewiseLinearMatrixSchedule([20.0, 24.0], [[[1.0]], [[2.0]]])


def _fmt(v):
    return repr(float(v))


def _component_columns(name, arr):
    """(header, column) pairs for a (m, n) array; scalar signals keep
    the bare name, vector ones get _0.._{n-1} suffixes."""
    if arr.ndim == 1:
        return [(name, arr)]
    n = arr.shape[1]
    if n == 1:
        return [(name, arr[:, 0])]
    return [("%s_%d" % (name, c), arr[:, c]) for c in range(n)]


def trace_columns(trace):
    """Ordered (header, values) pairs for CSV export.

    Schemas by architecture (scalar case):

    * direct:  t,x,x_m[,x_m_o],e[,e_o],u,udot,theta,r,d
      (e_o is the open-loop model-following error, present with the
      shadow model)
    * cmracc:  t[,x_true],x,x_m[,x_m_o],x_i,e_m,e_i[,e_orm],u,udot,
      theta,theta_hat,r[,d][,n]
    * cmracco: t[,x_true],x,x_m[,x_m_o],x_o,e_m,e_o[,e_orm],u,udot,
      theta,theta_hat,r[,d][,n]
      (here e_o is the observer error x_o - x)

    Vector states expand to one column per component with _0.. _{n-1}
    suffixes.
    """
    from .metrics import derive_signals

    derive_signals(trace)
    scn = trace.scenario
    arch = scn.arch
    has_noise = scn.plant.noise is not None
    has_dist = scn.plant.disturbance is not None
    cols = [("t", trace.t)]
    if arch == 0:
        cols += _component_columns("x", trace.x)
        cols += _component_columns("x_m", trace.x_m)
        if trace.x_m_o is not None:
            cols += _component_columns("x_m_o", trace.x_m_o)
        cols += _component_columns("e", trace.derived["e"])
        if trace.x_m_o is not None:
            cols += _component_columns("e_o", trace.derived["e_orm"])
        cols += [("u", trace.u), ("udot", trace.derived["udot"])]
        cols += _component_columns("theta", trace.theta)
        cols += [("r", trace.r)]
        cols += _component_columns("d", trace.d)
    else:
        aux_name = "x_i" if arch == 1 else "x_o"
        err_name = "e_i" if arch == 1 else "e_o"
        if has_noise:
            cols += _component_columns("x_true", trace.x_true)
        cols += _component_columns("x", trace.x)
        cols += _component_columns("x_m", trace.x_m)
        if trace.x_m_o is not None:
            cols += _component_columns("x_m_o", trace.x_m_o)
        cols += _component_columns(aux_name, trace.aux)
        cols += _component_columns("e_m", trace.derived["e"])
        cols += _component_columns(err_name, trace.derived["e_aux"])
        if trace.x_m_o is not None:
            cols += _component_columns("e_orm", trace.derived["e_orm"])
        cols += [("u", trace.u), ("udot", trace.derived["udot"])]
        cols += _component_columns("theta", trace.theta)
        cols += _component_columns("theta_hat", trace.theta_hat)
        cols += [("r", trace.r)]
        if has_dist:
            cols += _component_columns("d", trace.d)
        if has_noise:
            cols += _component_columns("n", trace.noise)
    return cols


def write_trace_csv(trace, path):
    """Write the trace as RFC-4180-style CSV with a fixed schema.

    Floats are rendered with repr (shortest round-trip form), so the
    file is a bit-exact record of the run and byte-identical across
    repeat runs and backends.
    """
    cols = trace_columns(trace)
    headers = [h for h, _ in cols]
    arrays = [v for _, v in cols]
    m = len(trace.t)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(headers)
        for k in range(m):
            writer.writerow([_fmt(a[k]) for a in arrays])
