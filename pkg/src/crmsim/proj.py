"""Parameter projection inside a convex ball.

The adaptive laws keep their gain vectors inside the set D1 where the
convex boundary function

    f(theta) = (norm(theta)**2 - vartheta**2) / (2 eps vartheta - eps**2)

satisfies f <= 1.  On the shell 0 < f <= 1 the raw update direction is
blended with its component tangent to the sphere, reaching a pure
tangent on f = 1, so trajectories never leave D1 in continuous time.
The gain matrix is restricted to Gamma = gamma * I throughout.

Explicit integration can still step slightly outside D1; callers repair
that by radially rescaling onto the f = 1 sphere (see d1_repair), an
O(h**2) correction that is counted, not hidden.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGradient, InvalidConfig


@dataclass(frozen=True)
class ProjectionConfig:
    """Convex boundary parameters and gains for the projected laws.

    Attributes
    ----------
    vartheta : float
        Radius of the inner ball D0 (must cover the true parameter).
    epsilon : float
        Shell width; must satisfy 0 < epsilon < 2 * vartheta.
    gamma : float
        Scalar adaptation gain (Gamma = gamma * I).
    eta : float
        Coupling gain between the direct and indirect estimates
        (combined architectures only).
    theta_max : float
        Derived: vartheta + epsilon, bounds norm(theta).
    theta_tilde_max : float
        Derived: 2 * vartheta + epsilon, bounds the parameter error.
    """

    vartheta: float
    epsilon: float
    gamma: float
    eta: float = 0.0
    theta_max: float = field(init=False)
    theta_tilde_max: float = field(init=False)

    def __post_init__(self):
        if self.vartheta <= 0.0:
            raise InvalidConfig("vartheta must be positive")
        if self.epsilon <= 0.0 or self.epsilon >= 2.0 * self.vartheta:
            raise InvalidConfig(
                "epsilon must be in (0, 2*vartheta) so the boundary "
                "denominator 2*eps*vartheta - eps**2 stays positive"
            )
        if self.gamma <= 0.0:
            raise InvalidConfig("gamma must be positive")
        if self.eta < 0.0:
            raise InvalidConfig("eta must be nonnegative")
        object.__setattr__(self, "theta_max", self.vartheta + self.epsilon)
        object.__setattr__(
            self, "theta_tilde_max", 2.0 * self.vartheta + self.epsilon
        )

    @property
    def denom(self):
        """Boundary denominator 2*eps*vartheta - eps**2 > 0."""
        return 2.0 * self.epsilon * self.vartheta - self.epsilon ** 2

    def d1_radius(self):
        """Euclidean radius of D1, the f <= 1 ball: sqrt(vartheta**2 + denom).

        Note this is <= theta_max (equality only when epsilon hits its
        open upper limit), so theta_max remains a valid norm bound.
        """
        return math.sqrt(self.vartheta ** 2 + self.denom)


def f_eval(theta, cfg):
    """Boundary function value f(theta); negative inside D0, 1 on the
    outer sphere."""
    theta = np.asarray(theta, dtype=float)
    return (float(np.dot(theta, theta)) - cfg.vartheta ** 2) / cfg.denom


def grad_f(theta, cfg):
    """Gradient of the boundary function, 2*theta/denom."""
    theta = np.asarray(theta, dtype=float)
    return 2.0 * theta / cfg.denom


def project(theta, y, cfg):
    """Projected update direction Proj(theta, y) with Gamma = gamma I.

    Returns gamma*y unless both f(theta) > 0 and y'*Gamma*grad_f > 0
    hold strictly, in which case the outward component is scaled down
    by f:

        gamma * (y - f * theta * (theta'y) / norm(theta)**2).

    Equality in either activation test takes the inactive branch.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    f = f_eval(theta, cfg)
    # With Gamma = gamma*I and grad_f parallel to theta, the activation
    # test y'*Gamma*grad_f > 0 reduces to theta'y > 0.
    ty = float(np.dot(theta, y))
    if f > 0.0 and ty > 0.0:
        tt = float(np.dot(theta, theta))
        if tt == 0.0:
            raise DegenerateGradient(
                "active projection branch with zero gradient"
            )
        return cfg.gamma * (y - f * theta * (ty / tt))
    return cfg.gamma * y


def coupled_update_direction(theta, theta_hat, y1, y2, cfg):
    """Direct and indirect update directions tied together by eta.

    dtheta     = Proj(theta, y1)     - eta * (theta - theta_hat)
    dtheta_hat = Proj(theta_hat, y2) + eta * (theta - theta_hat)

    Both components stay in D1 when integrated from D1 because the
    coupling term points inward on the boundary of whichever estimate
    is further out.
    """
    theta = np.asarray(theta, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    eps_theta = theta - theta_hat
    d_theta = project(theta, y1, cfg) - cfg.eta * eps_theta
    d_theta_hat = project(theta_hat, y2, cfg) + cfg.eta * eps_theta
    return d_theta, d_theta_hat


def d1_repair(theta, cfg):
    """Rescale theta onto the f = 1 sphere if a discrete step left D1.

    Returns (theta, repaired) where repaired says whether a rescale
    happened.  The rescale is radial, so it never increases f and never
    moves a compliant theta.
    """
    theta = np.asarray(theta, dtype=float)
    tt = float(np.dot(theta, theta))
    r2 = cfg.vartheta ** 2 + cfg.denom
    if tt > r2:
        return theta * math.sqrt(r2 / tt), True
    return theta, False
