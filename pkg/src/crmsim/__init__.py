"""Simulation and bound certification for adaptive control with
closed-loop reference models.

The package simulates direct model-reference adaptive controllers
driven by open-loop or closed-loop reference models, as well as the
two combined direct plus indirect variants (identifier based and
observer based), computes the analytical constants that govern their
transient behavior, and checks the proven inequalities along the
simulated trajectories.

Modules
-------
matan
    Spectral constants of Hurwitz matrices, Lyapunov solver, norm bounds.
proj
    Rate-limited parameter projection inside a convex ball.
signals
    Deterministic seeded signal generators (reference, disturbance, noise).
models
    Right-hand sides of plants, reference models, identifier, observer.
adaptlaw
    Control inputs and adaptive update directions for each architecture.
sim
    Scenario packing and fixed-step integration, compiled or pure Python.
bounds
    Analytical constants, transient envelopes, and gain root-finders.
metrics
    Trace norms, derived signals, and bound certification reports.
studies
    Builtin scenario registry reproducing the published test cases.
cli
    Command line front end (simulate, reproduce, bounds, optimize, verify).
"""

from .errors import (
    ConfigError,
    CrmsimError,
    DegenerateGradient,
    DeltaTooLarge,
    DimensionMismatch,
    InvalidConfig,
    MissingShadow,
    NonFinite,
    NonSquare,
    NotHurwitz,
    SingularM1,
    SolveFailure,
    TimescaleViolation,
    UnknownSignal,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CrmsimError",
    "DegenerateGradient",
    "DeltaTooLarge",
    "DimensionMismatch",
    "InvalidConfig",
    "MissingShadow",
    "NonFinite",
    "NonSquare",
    "NotHurwitz",
    "SingularM1",
    "SolveFailure",
    "TimescaleViolation",
    "UnknownSignal",
    "__version__",
]
