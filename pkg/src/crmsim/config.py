"""YAML scenario configuration.

A config file describes one run in five sections.  Example, scalar
direct law on a drifting plant:

    name: drifting-demo
    plant:
      b: [1.0]
      schedule:
        times: [20.0, 24.0]
        values: [[[1.0]], [[2.0]]]
      disturbance: {seed: 11, rate_hz: 10.0, variance: 1.0,
                    sat: 0.2, start: 20.0}
    reference_model:
      A_m: [[-1.0]]
      ell: 10.0
    controller:
      kind: direct
      vartheta: 3.0
      epsilon: 1.0
      rho: 100.0          # or gamma:, not both
    signals:
      reference: {type: filtered_step, step_time: 10.0,
                  amplitude: 1.0, tau: 1.0}
    sim:
      horizon: 35.0
      step: 0.001
      initial: {x: [0.5], x_m: [0.0]}
      orm_shadow: true
    outputs:
      csv: run.csv
      report: report.json

The plant is specified through the matching ground truth (theta_star
or a schedule of system matrices); the open-loop matrix is derived.
Exactly one of controller.gamma and controller.rho is required; rho is
the feedback-normalized learning rate, gamma = rho (sigma + ell).
controller.gain_override replaces the prescribed identifier/observer
gain and marks the run so certification skips the decrease checks the
prescription backs.
"""

import numpy as np
import yaml

from .adaptlaw import KINDS, ControllerSpec
from .errors import ConfigError
from .matan import solve_lyapunov, spectral_constants
from .models import (
    IdentifierSpec,
    ObserverSpec,
    ReferenceModelSpec,
    ltv_plant_from_schedule,
    plant_from_matching,
)
from .proj import ProjectionConfig
from .sim import Scenario
from .signals import (
    ConstantSignal,
    FilteredStep,
    PiecewiseLinearMatrixSchedule,
    SaturatedGaussianZOH,
)

_TOP_KEYS = {"name", "plant", "reference_model", "controller", "signals",
             "sim", "outputs"}


def _require(section, key, where):
    if key not in section:
        raise ConfigError("missing %r in %s section" % (key, where))
    return section[key]


def _vector(value, what):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ConfigError("%s must be a nonempty vector" % what)
    return arr


def _held_signal(node, where):
    for key in ("seed", "rate_hz", "variance", "sat"):
        _require(node, key, where)
    return SaturatedGaussianZOH(
        seed=int(node["seed"]),
        rate_hz=float(node["rate_hz"]),
        variance=float(node["variance"]),
        sat=float(node["sat"]),
        start_time=float(node.get("start", 0.0)),
        dim=int(node.get("dim", 1)),
    )


def _reference_signal(node):
    kind = _require(node, "type", "signals.reference")
    if kind == "filtered_step":
        return FilteredStep(
            step_time=float(_require(node, "step_time", "reference")),
            amplitude=float(_require(node, "amplitude", "reference")),
            tau_f=float(node.get("tau", 1.0)),
        )
    if kind == "constant":
        return ConstantSignal(level=float(node.get("level", 0.0)))
    raise ConfigError("unknown reference type %r" % kind)


def scenario_from_dict(cfg):
    """Build a Scenario from a parsed config mapping."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError("unknown config sections: %s"
                          % ", ".join(sorted(unknown)))
    rm_node = _require(cfg, "reference_model", "config")
    plant_node = _require(cfg, "plant", "config")
    ctrl_node = _require(cfg, "controller", "config")
    sim_node = _require(cfg, "sim", "config")

    A_m = np.atleast_2d(np.asarray(_require(rm_node, "A_m",
                                            "reference_model"), dtype=float))
    ell = float(_require(rm_node, "ell", "reference_model"))
    b = _vector(_require(plant_node, "b", "plant"), "plant.b")
    rm = ReferenceModelSpec(A_m=A_m, b=b, ell=ell)

    disturbance = noise = None
    if plant_node.get("disturbance") is not None:
        disturbance = _held_signal(plant_node["disturbance"],
                                   "plant.disturbance")
        if disturbance.dim != b.shape[0]:
            disturbance = SaturatedGaussianZOH(
                seed=disturbance.seed, rate_hz=disturbance.rate_hz,
                variance=disturbance.variance, sat=disturbance.sat,
                start_time=disturbance.start_time, dim=b.shape[0])
    if plant_node.get("noise") is not None:
        noise = _held_signal(plant_node["noise"], "plant.noise")
        if noise.dim != b.shape[0]:
            noise = SaturatedGaussianZOH(
                seed=noise.seed, rate_hz=noise.rate_hz,
                variance=noise.variance, sat=noise.sat,
                start_time=noise.start_time, dim=b.shape[0])

    has_star = plant_node.get("theta_star") is not None
    has_sched = plant_node.get("schedule") is not None
    if has_star == has_sched:
        raise ConfigError("plant needs exactly one of theta_star and "
                          "schedule")
    kind_node = ctrl_node.get("kind", "direct")
    if kind_node not in KINDS:
        raise ConfigError("controller kind must be one of %r" % (KINDS,))
    noisy = noise is not None
    if has_sched:
        sched_node = plant_node["schedule"]
        times = [float(v) for v in _require(sched_node, "times", "schedule")]
        values = [np.atleast_2d(np.asarray(v, dtype=float))
                  for v in _require(sched_node, "values", "schedule")]
        schedule = PiecewiseLinearMatrixSchedule(times, values)
        plant = ltv_plant_from_schedule(A_m, b, schedule,
                                        disturbance=disturbance, noise=noise)
    else:
        theta_star = _vector(plant_node["theta_star"], "plant.theta_star")
        plant = plant_from_matching(A_m, b, theta_star,
                                    kind="noisy" if noisy else "lti",
                                    disturbance=disturbance, noise=noise)

    has_gamma = ctrl_node.get("gamma") is not None
    has_rho = ctrl_node.get("rho") is not None
    if has_gamma == has_rho:
        raise ConfigError("controller needs exactly one of gamma and rho")
    sigma = spectral_constants(A_m).sigma
    if has_rho:
        gamma = float(ctrl_node["rho"]) * (sigma + ell)
    else:
        gamma = float(ctrl_node["gamma"])
    proj_cfg = ProjectionConfig(
        vartheta=float(_require(ctrl_node, "vartheta", "controller")),
        epsilon=float(_require(ctrl_node, "epsilon", "controller")),
        gamma=gamma,
        eta=float(ctrl_node.get("eta", 0.0)),
    )
    use_projection = bool(ctrl_node.get("use_projection", True))

    identifier = observer = None
    override = ctrl_node.get("gain_override")
    P_m = solve_lyapunov(A_m, ell).P
    P_i = None
    if kind_node == "cmracc":
        mu = float(override) if override is not None else sigma + ell
        identifier = IdentifierSpec(mu=mu, prescribed=override is None)
        P_i = np.eye(b.shape[0]) / (2.0 * mu)
    elif kind_node == "cmracco":
        mu = float(override) if override is not None else ell
        observer = ObserverSpec(mu=mu, prescribed=override is None)
    elif override is not None:
        raise ConfigError("gain_override only applies to the identifier "
                          "and observer architectures")
    controller = ControllerSpec(kind=kind_node, projection=proj_cfg, P_m=P_m,
                                b=b, P_i=P_i, use_projection=use_projection)

    signals_node = cfg.get("signals") or {}
    ref_node = signals_node.get("reference")
    reference = (_reference_signal(ref_node) if ref_node is not None
                 else ConstantSignal(level=0.0))

    initial = sim_node.get("initial") or {}
    n = b.shape[0]
    x0 = _vector(initial.get("x", np.zeros(n)), "initial.x")
    x_m0 = _vector(initial.get("x_m", np.zeros(n)), "initial.x_m")
    theta0 = (None if initial.get("theta") is None
              else _vector(initial["theta"], "initial.theta"))
    theta_hat0 = (None if initial.get("theta_hat") is None
                  else _vector(initial["theta_hat"], "initial.theta_hat"))
    aux0 = (None if initial.get("x_aux") is None
            else _vector(initial["x_aux"], "initial.x_aux"))

    try:
        return Scenario(
            plant=plant,
            ref_model=rm,
            controller=controller,
            reference=reference,
            horizon=float(_require(sim_node, "horizon", "sim")),
            step=float(_require(sim_node, "step", "sim")),
            seed=int(sim_node.get("seed", 0)),
            x0=x0,
            x_m0=x_m0,
            aux0=aux0,
            theta0=theta0,
            theta_hat0=theta_hat0,
            identifier=identifier,
            observer=observer,
            orm_shadow=bool(sim_node.get("orm_shadow", False)),
            name=str(cfg.get("name", "")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("invalid scenario: %s" % exc) from exc


def load_scenario(path):
    """Parse a YAML config file.

    Returns (scenario, outputs) where outputs is the (possibly empty)
    mapping of requested output paths.  Any structural problem raises
    ConfigError; nothing is written.
    """
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError("malformed YAML in %s: %s" % (path, exc)) from exc
    scenario = scenario_from_dict(cfg)
    outputs = cfg.get("outputs") or {}
    if not isinstance(outputs, dict):
        raise ConfigError("outputs section must be a mapping")
    return scenario, outputs
