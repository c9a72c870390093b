"""Control inputs and adaptive update directions.

Three architectures share the same control structure
u = theta' regressor + r and differ in which state feeds the regressor
and which errors drive adaptation:

* direct: regressor x, single gain theta driven by the model-following
  error.
* combined with identifier: regressor x, second gain theta_hat driven
  by the identification error, both gains pulled together by eta.
* combined with observer: regressor x_o (the observer state, clean of
  measurement noise), both gains driven through the same Lyapunov
  solution P.

Update directions are pure; integration and the ball repair live in
sim so the laws stay testable in isolation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidConfig
from .proj import ProjectionConfig, coupled_update_direction, project

KINDS = ("direct", "cmracc", "cmracco")


@dataclass(frozen=True)
class ControllerSpec:
    """Controller kind, projection parameters, and Lyapunov weights.

    P_m weighs the model-following error in the direct law; P_i weighs
    the identification error (identifier architecture only, diagonal
    1/(2 mu) by construction).  The observer architecture uses P_m for
    both laws.  use_projection = False selects the legacy unprojected
    law gamma * y, kept for A/B comparisons; no boundedness guarantee
    covers it.
    """

    kind: str
    projection: ProjectionConfig
    P_m: np.ndarray
    b: np.ndarray
    P_i: Optional[np.ndarray] = None
    use_projection: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfig("controller kind must be one of %r" % (KINDS,))
        n = self.b.shape[0]
        if self.P_m.shape != (n, n):
            raise DimensionMismatch("P_m must be n x n")
        if self.kind == "cmracc" and self.P_i is None:
            raise InvalidConfig("identifier architecture needs P_i")

    @property
    def Pb(self):
        return self.P_m @ self.b

    @property
    def Pib(self):
        if self.P_i is None:
            return None
        return self.P_i @ self.b


def control_input(theta, regressor, r):
    """u = theta' regressor + r."""
    theta = np.asarray(theta, dtype=float)
    regressor = np.asarray(regressor, dtype=float)
    if theta.shape != regressor.shape:
        raise DimensionMismatch("theta and regressor sizes differ")
    return float(np.dot(theta, regressor)) + float(r)


def _raw_or_projected(theta, y, spec):
    if spec.use_projection:
        return project(theta, y, spec.projection)
    return spec.projection.gamma * np.asarray(y, dtype=float)


def direct_update_direction(theta, x, e, spec):
    """Direct law direction from the model-following error e = x - x_m:
    the projected image of y = -x (e' P_m b)."""
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    y = -x * float(np.dot(e, spec.Pb))
    return _raw_or_projected(theta, y, spec)


def cmracc_update_direction(theta, theta_hat, x, e_m, e_i, spec):
    """Identifier-architecture directions.

    Direct gain driven by e_m = x - x_m through P_m, indirect gain by
    e_i = x_i - x through P_i (note the positive sign), both coupled by
    eta (theta - theta_hat).
    """
    x = np.asarray(x, dtype=float)
    y1 = -x * float(np.dot(np.asarray(e_m, dtype=float), spec.Pb))
    y2 = x * float(np.dot(np.asarray(e_i, dtype=float), spec.Pib))
    if spec.use_projection:
        return coupled_update_direction(theta, theta_hat, y1, y2,
                                        spec.projection)
    cfg = spec.projection
    eps_theta = np.asarray(theta, dtype=float) - np.asarray(theta_hat, dtype=float)
    return (cfg.gamma * y1 - cfg.eta * eps_theta,
            cfg.gamma * y2 + cfg.eta * eps_theta)


def cmracco_update_direction(theta, theta_hat, x_o, e_m, e_o, spec):
    """Observer-architecture directions.

    Both laws use the observer state x_o as regressor and the same P;
    e_m = x - x_m drives the direct gain, e_o = x_o - x the indirect
    one.
    """
    x_o = np.asarray(x_o, dtype=float)
    y1 = -x_o * float(np.dot(np.asarray(e_m, dtype=float), spec.Pb))
    y2 = x_o * float(np.dot(np.asarray(e_o, dtype=float), spec.Pb))
    if spec.use_projection:
        return coupled_update_direction(theta, theta_hat, y1, y2,
                                        spec.projection)
    cfg = spec.projection
    eps_theta = np.asarray(theta, dtype=float) - np.asarray(theta_hat, dtype=float)
    return (cfg.gamma * y1 - cfg.eta * eps_theta,
            cfg.gamma * y2 + cfg.eta * eps_theta)
