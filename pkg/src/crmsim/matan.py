"""Matrix analysis for Hurwitz system matrices.

Every guarantee in the package is phrased in terms of a handful of
spectral quantities of the reference-model matrix: the decay rate
``sigma`` (slowest eigenvalue real part, negated), the symmetric-part
rate ``s``, the operator norm ``a``, their ratio ``kappa``, and the
exponential-bound coefficient ``m`` with

    norm(expm(A t)) <= m * exp(-sigma * t / 2).

This module computes those constants, solves the small dense Lyapunov
equations the adaptive laws need, and evaluates the two-sided bounds on
the Lyapunov solution P:

    norm(P) <= m**2 / (sigma + 2 ell),    min eig(P) >= 1 / (2 (s + ell)).

The coefficient uses m = (3/2)(1 + 4 kappa)**(n - 1).  A tighter form
without the 3/2 factor circulates for the same bound but does not
follow from the underlying exponential estimate; we keep the provable
constant.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonSquare, NotHurwitz, SolveFailure

# Eigenvalues with real part >= -HURWITZ_TOL are treated as unstable so
# that marginal matrices are rejected deterministically.
HURWITZ_TOL = 1e-12

# Acceptable residual norm(Abar' P + P Abar + I) for a Lyapunov solve.
LYAP_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SpectralConstants:
    """Spectral quantities of a Hurwitz matrix.

    Attributes
    ----------
    sigma : float
        Decay rate, -max_i Re(lambda_i(A)) > 0.
    s : float
        Symmetric-part rate, -min eig((A + A') / 2).  Satisfies
        s >= sigma > 0.
    a : float
        Induced Euclidean operator norm of A.
    kappa : float
        Conditioning ratio a / sigma >= 1.
    m : float
        Exponential-bound coefficient (3/2)(1 + 4 kappa)**(n - 1).
    n : int
        Matrix dimension.
    """

    sigma: float
    s: float
    a: float
    kappa: float
    m: float
    n: int


@dataclass(frozen=True)
class LyapunovSolution:
    """Solution of Abar' P + P Abar = -I with Abar = A - ell * I.

    Attributes
    ----------
    P : numpy.ndarray
        Symmetric positive definite solution.
    ell : float
        Feedback magnitude used to form Abar.
    residual_norm : float
        Spectral norm of Abar' P + P Abar + I.
    """

    P: np.ndarray
    ell: float
    residual_norm: float


def _as_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSquare("expected a square matrix, got shape %r" % (A.shape,))
    return A


def matrix_norm(A):
    """Induced Euclidean (spectral) norm, largest singular value.

    Computed through a symmetric eigensolve of A'A so the same routine
    serves square and rectangular arrays.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        return abs(float(A))
    if A.ndim == 1:
        return float(np.sqrt(np.dot(A, A)))
    w = np.linalg.eigvalsh(A.T @ A)
    return float(np.sqrt(max(w[-1], 0.0)))


def assert_hurwitz(A, what="matrix"):
    """Raise NotHurwitz unless every eigenvalue satisfies Re < -1e-12."""
    A = _as_square(A)
    reals = np.linalg.eigvals(A).real
    worst = float(reals.max())
    if worst >= -HURWITZ_TOL:
        raise NotHurwitz(
            "%s has an eigenvalue with real part %.3e >= -%.0e"
            % (what, worst, HURWITZ_TOL)
        )
    return A


def spectral_constants(A):
    """Compute the SpectralConstants of a Hurwitz matrix.

    Parameters
    ----------
    A : array_like
        Square Hurwitz matrix (typically the reference-model matrix).

    Returns
    -------
    SpectralConstants

    Raises
    ------
    NonSquare
        If A is not square.
    NotHurwitz
        If any eigenvalue has real part >= -1e-12.
    """
    A = assert_hurwitz(A)
    n = A.shape[0]
    sigma = float(-np.linalg.eigvals(A).real.max())
    sym = (A + A.T) / 2.0
    s = float(-np.linalg.eigvalsh(sym)[0])
    a = matrix_norm(A)
    kappa = a / sigma
    m = 1.5 * (1.0 + 4.0 * kappa) ** (n - 1)
    return SpectralConstants(sigma=sigma, s=s, a=a, kappa=kappa, m=m, n=n)


def solve_lyapunov(A_m, ell=0.0):
    """Solve Abar' P + P Abar = -I for Abar = A_m - ell * I.

    Uses a dense Kronecker-product linear solve; the systems here are
    tiny (n <= ~50), so no structured solver is needed.  The raw
    solution is symmetrized and the residual is verified against
    LYAP_RESIDUAL_TOL.

    Parameters
    ----------
    A_m : array_like
        Hurwitz matrix.
    ell : float
        Nonnegative feedback magnitude.

    Returns
    -------
    LyapunovSolution

    Raises
    ------
    NotHurwitz
        If A_m (hence Abar for ell >= 0) is not Hurwitz.
    SolveFailure
        If the linear system is singular, the residual exceeds
        tolerance, or P is not positive definite.
    """
    A_m = assert_hurwitz(A_m, "reference-model matrix")
    if ell < 0.0:
        raise SolveFailure("ell must be nonnegative, got %r" % ell)
    n = A_m.shape[0]
    Abar = A_m - ell * np.eye(n)
    eye = np.eye(n)
    # Row-major vec identity: vec(A X B) = kron(A, B') vec(X).
    K = np.kron(Abar.T, eye) + np.kron(eye, Abar.T)
    try:
        p = np.linalg.solve(K, -eye.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise SolveFailure("Lyapunov system is singular: %s" % exc) from exc
    P = p.reshape(n, n)
    P = (P + P.T) / 2.0
    residual = matrix_norm(Abar.T @ P + P @ Abar + eye)
    if not np.isfinite(residual) or residual > LYAP_RESIDUAL_TOL:
        raise SolveFailure(
            "Lyapunov residual %.3e exceeds %.0e" % (residual, LYAP_RESIDUAL_TOL)
        )
    if np.linalg.eigvalsh(P)[0] <= 0.0:
        raise SolveFailure("Lyapunov solution is not positive definite")
    return LyapunovSolution(P=P, ell=float(ell), residual_norm=residual)


def p_norm_bounds(consts, ell):
    """Two-sided bounds on the Lyapunov solution for Abar = A - ell I.

    Returns
    -------
    (upper, lower) : tuple of float
        upper = m**2 / (sigma + 2 ell) bounds norm(P) from above;
        lower = 1 / (2 (s + ell)) bounds min eig(P) from below.
    """
    upper = consts.m ** 2 / (consts.sigma + 2.0 * ell)
    lower = 1.0 / (2.0 * (consts.s + ell))
    return upper, lower


def exp_norm_envelope(consts, t, ell=0.0):
    """Envelope m * exp(-(sigma / 2 + ell) t) for norm(expm((A - ell I) t)).

    Accepts scalar or array t.
    """
    t = np.asarray(t, dtype=float)
    out = consts.m * np.exp(-(consts.sigma / 2.0 + ell) * t)
    return float(out) if out.ndim == 0 else out
