"""Shared helpers: cached builtin traces and small scalar scenarios.

Integrations are deterministic, so traces are cached per (name,
backend) for the whole session; tests must not mutate cached traces
(tests that want to overwrite signals build their own scenario).
"""

import numpy as np

from crmsim import studies
from crmsim.adaptlaw import ControllerSpec
from crmsim.matan import solve_lyapunov
from crmsim.models import ReferenceModelSpec, plant_from_matching
from crmsim.proj import ProjectionConfig
from crmsim.sim import Scenario, integrate
from crmsim.signals import ConstantSignal, FilteredStep

A_M = np.array([[-1.0]])
B = np.array([1.0])

_TRACES = {}


def builtin_trace(name, backend=None):
    key = (name, backend)
    if key not in _TRACES:
        _TRACES[key] = integrate(studies.get_builtin(name),
                                 backend_name=backend)
    return _TRACES[key]


def scalar_direct(theta_star=-2.0, ell=0.0, gamma=100.0, vartheta=2.0,
                  epsilon=1.0, horizon=5.0, step=1e-3, x0=0.5, x_m0=0.0,
                  theta0=0.0, reference=None, shadow=False, name="scalar",
                  use_projection=True):
    """Scalar direct-law scenario with lti plant and no noise."""
    cfg = ProjectionConfig(vartheta=vartheta, epsilon=epsilon, gamma=gamma)
    ctrl = ControllerSpec(kind="direct", projection=cfg,
                          P_m=solve_lyapunov(A_M, ell).P, b=B,
                          use_projection=use_projection)
    if reference is None:
        reference = FilteredStep(step_time=1.0, amplitude=1.0, tau_f=1.0)
    return Scenario(
        plant=plant_from_matching(A_M, B, np.array([theta_star])),
        ref_model=ReferenceModelSpec(A_m=A_M, b=B, ell=ell),
        controller=ctrl,
        reference=reference,
        horizon=horizon,
        step=step,
        seed=0,
        x0=np.array([float(x0)]),
        x_m0=np.array([float(x_m0)]),
        theta0=np.array([float(theta0)]),
        orm_shadow=shadow,
        name=name,
    )


def diverging_scenario():
    """Unstable plant with numerically dead adaptation: the state
    passes 1e12 near t=28.3."""
    return scalar_direct(gamma=1e-30, horizon=40.0, step=0.01,
                         reference=ConstantSignal(level=0.0),
                         name="blowup")


def pinned_scenario():
    """theta* outside a small projection ball: the estimate rides the
    boundary and the discrete-step repair fires repeatedly."""
    return scalar_direct(vartheta=1.0, epsilon=1.0, gamma=200.0,
                         horizon=5.0, x0=1.0,
                         reference=ConstantSignal(level=1.0),
                         name="pinned")
