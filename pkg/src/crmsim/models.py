"""Right-hand sides of every dynamical block.

Plants (time-invariant, scheduled time-varying with an additive
disturbance, and noisy-measurement), the reference model in open- and
closed-loop form, the state identifier used by the combined direct plus
indirect architecture, and the adaptive observer variant that filters
the regressor.

These are the reference implementations: plain, allocation-heavy, and
easy to audit.  The integration kernels reimplement the same arithmetic
in a flat loop; tests hold the two against each other.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch, InvalidConfig
from .matan import assert_hurwitz, spectral_constants
from .signals import PiecewiseLinearMatrixSchedule, SaturatedGaussianZOH

MATCHING_TOL = 1e-9


@dataclass(frozen=True)
class PlantSpec:
    """Plant description.

    kind is one of "lti", "ltv", "noisy".  For "ltv" the system matrix
    comes from a schedule and theta_star_schedule holds the matching
    ground truth per knot; otherwise A_p and theta_star are fixed
    arrays.  disturbance enters the state equation, noise corrupts the
    measurement only.
    """

    kind: str
    b: np.ndarray
    A_p: Optional[np.ndarray] = None
    schedule: Optional[PiecewiseLinearMatrixSchedule] = None
    theta_star: Optional[np.ndarray] = None
    theta_star_schedule: Optional[PiecewiseLinearMatrixSchedule] = None
    disturbance: Optional[SaturatedGaussianZOH] = None
    noise: Optional[SaturatedGaussianZOH] = None

    @property
    def n(self):
        return self.b.shape[0]

    def A_at(self, t):
        if self.schedule is not None:
            return self.schedule.value(t)
        return self.A_p

    def theta_star_at(self, t):
        if self.theta_star_schedule is not None:
            return self.theta_star_schedule.value(t).reshape(-1)
        return self.theta_star


@dataclass(frozen=True)
class ReferenceModelSpec:
    """Reference model matrix, input vector, and feedback magnitude.

    ell = 0 recovers the open-loop reference model; ell > 0 feeds the
    tracking error back into the model state.
    """

    A_m: np.ndarray
    b: np.ndarray
    ell: float

    def __post_init__(self):
        assert_hurwitz(self.A_m, "reference-model matrix")
        if self.ell < 0.0:
            raise InvalidConfig("ell must be nonnegative")
        if self.b.shape != (self.A_m.shape[0],):
            raise DimensionMismatch("b must be a length-n vector")


@dataclass(frozen=True)
class IdentifierSpec:
    """Identifier loop gain magnitude (loop matrix -mu * I).

    The stability analysis prescribes mu = sigma + ell; overrides are
    allowed for reproducing published test cases that deviate, and are
    marked so certification can skip the checks the prescription backs.
    """

    mu: float
    prescribed: bool = True

    def __post_init__(self):
        if self.mu <= 0.0:
            raise InvalidConfig("identifier gain magnitude must be positive")


@dataclass(frozen=True)
class ObserverSpec:
    """Observer injection gain magnitude (injection -mu * (x_o - x)).

    The analysis prescribes mu = ell.  Same override policy as
    IdentifierSpec.
    """

    mu: float
    prescribed: bool = True

    def __post_init__(self):
        if self.mu < 0.0:
            raise InvalidConfig("observer gain magnitude must be nonnegative")


def prescribed_identifier_mu(A_m, ell):
    """sigma + ell for the supplied reference-model matrix."""
    return spectral_constants(A_m).sigma + ell


def plant_from_matching(A_m, b, theta_star, kind="lti", disturbance=None,
                        noise=None):
    """Build the plant A_p = A_m - b theta_star' that the matching
    condition pairs with A_m.

    theta_star is stored as ground truth for diagnostics; the
    controller never reads it.
    """
    A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    theta_star = np.asarray(theta_star, dtype=float).reshape(-1)
    n = A_m.shape[0]
    if A_m.shape != (n, n):
        raise DimensionMismatch("A_m must be square")
    if b.shape != (n,) or theta_star.shape != (n,):
        raise DimensionMismatch("b and theta_star must be length-n vectors")
    A_p = A_m - np.outer(b, theta_star)
    return PlantSpec(kind=kind, b=b, A_p=A_p, theta_star=theta_star,
                     disturbance=disturbance, noise=noise)


def ltv_plant_from_schedule(A_m, b, schedule, disturbance=None, noise=None):
    """Scheduled plant with the matching ground truth derived per knot.

    Each knot matrix must satisfy A_m - A_knot = b theta' for some
    theta (rank-one difference aligned with b); otherwise no matching
    parameter exists and the architecture does not apply.
    """
    A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A_m.shape[0]
    bb = float(np.dot(b, b))
    if bb == 0.0:
        raise InvalidConfig("b must be nonzero")
    theta_knots = []
    for j in range(len(schedule.times)):
        A_j = schedule.values[j]
        diff = A_m - A_j
        theta_j = b @ diff / bb
        if np.max(np.abs(diff - np.outer(b, theta_j))) > MATCHING_TOL:
            raise ConfigError(
                "schedule knot %d violates the matching condition" % j
            )
        theta_knots.append(theta_j.reshape(1, n))
    theta_schedule = PiecewiseLinearMatrixSchedule(schedule.times, theta_knots)
    return PlantSpec(kind="ltv", b=b, schedule=schedule,
                     theta_star_schedule=theta_schedule,
                     disturbance=disturbance, noise=noise)


def plant_rhs(spec, t, x_a, u, d_value=None, n_value=None):
    """State derivative and measurement of the plant at time t.

    Parameters
    ----------
    spec : PlantSpec
    t : float
    x_a : ndarray
        True plant state.
    u : float
        Control input.
    d_value, n_value : ndarray or None
        Current held disturbance and noise samples; zeros when the
        spec has no such channel.

    Returns
    -------
    (dx, x_measured)
    """
    x_a = np.asarray(x_a, dtype=float)
    A = spec.A_at(t)
    dx = A @ x_a + spec.b * u
    if d_value is not None:
        dx = dx + d_value
    if n_value is not None:
        x_meas = x_a + n_value
    else:
        x_meas = x_a
    return dx, x_meas


def crm_rhs(spec, x_m, x_measured, r):
    """Closed-loop reference model derivative
    A_m x_m + b r + ell (x - x_m); ell = 0 gives the open-loop model."""
    x_m = np.asarray(x_m, dtype=float)
    x_measured = np.asarray(x_measured, dtype=float)
    return spec.A_m @ x_m + spec.b * r + spec.ell * (x_measured - x_m)


def orm_rhs(spec, x_m_o, r):
    """Open-loop reference model derivative A_m x_m_o + b r."""
    x_m_o = np.asarray(x_m_o, dtype=float)
    return spec.A_m @ x_m_o + spec.b * r


def identifier_rhs(spec, x_i, x_measured, theta_hat, u, A_m, b):
    """Identifier derivative
    -mu (x_i - x) + (A_m - b theta_hat') x + b u; regressor is the
    measured plant state."""
    x_i = np.asarray(x_i, dtype=float)
    x = np.asarray(x_measured, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    return -spec.mu * (x_i - x) + A_m @ x - b * float(np.dot(theta_hat, x)) + b * u


def observer_rhs(spec, x_o, x_measured, theta_hat, u, A_m, b):
    """Observer derivative
    -mu (x_o - x) + (A_m - b theta_hat') x_o + b u; note the regressor
    is the observer state itself, so measurement noise enters only
    through the injection term."""
    x_o = np.asarray(x_o, dtype=float)
    x = np.asarray(x_measured, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    return -spec.mu * (x_o - x) + A_m @ x_o - b * float(np.dot(theta_hat, x_o)) + b * u
