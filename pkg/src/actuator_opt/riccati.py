"""Dense Lyapunov, algebraic Riccati and symmetric-pencil eigen solvers."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "ConvergenceError",
    "RiccatiSolution",
    "solve_lyapunov",
    "solve_are",
    "are_residual",
    "generalized_symmetric_eig",
    "spectral_abscissa",
]


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    Pi: np.ndarray
    residual_norm: float
    iterations: int


def spectral_abscissa(A):
    return float(np.max(np.linalg.eigvals(A).real))


def solve_lyapunov(A, Q, check_stable=True):
    """X with A^T X + X A + Q = 0 (Bartels-Stewart on the real Schur form)."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if check_stable and spectral_abscissa(A) >= 0:
        raise ConvergenceError("Lyapunov operator is singular or unstable: A is not Hurwitz")
    X = sla.solve_continuous_lyapunov(A.T, -Q)
    return 0.5 * (X + X.T)


def are_residual(A, B, Q, gamma, Pi):
    PB = Pi @ B
    R = A.T @ Pi + Pi @ A - np.outer(PB, PB) / gamma + Q
    return float(np.linalg.norm(R))


def solve_are(A, B, Q, gamma, tol=1e-9, max_iter=50, Pi0=None):
    """Stabilizing solution of A^T P + P A - P B B^T P / gamma + Q = 0.

    Newton-Kleinman for a single input column ``B``.  Without ``Pi0`` the
    iteration starts from zero feedback, which requires a Hurwitz ``A``.
    A warm start ``Pi0`` must yield a stabilizing feedback; if it does not,
    the solver silently restarts from zero feedback.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).ravel()
    Q = np.asarray(Q, dtype=float)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    qnorm = np.linalg.norm(Q)
    target = tol * max(qnorm, np.finfo(float).tiny)

    K = np.zeros_like(B) if Pi0 is None else (B @ Pi0) / gamma
    warm = Pi0 is not None
    residual = np.inf
    for it in range(1, max_iter + 1):
        Acl = A - np.outer(B, K)
        try:
            Pi = solve_lyapunov(Acl, Q + gamma * np.outer(K, K), check_stable=(it == 1))
        except ConvergenceError:
            if warm:
                return solve_are(A, B, Q, gamma, tol=tol, max_iter=max_iter)
            raise
        residual = are_residual(A, B, Q, gamma, Pi)
        if residual <= target:
            return RiccatiSolution(Pi=Pi, residual_norm=residual, iterations=it)
        if not np.all(np.isfinite(Pi)):
            break
        K = (B @ Pi) / gamma
    if warm:
        return solve_are(A, B, Q, gamma, tol=tol, max_iter=max_iter)
    raise ConvergenceError(
        f"Newton-Kleinman did not reach residual {target:.3e} in {max_iter} steps (residual {residual:.3e})",
        residual=residual,
    )


def generalized_symmetric_eig(P, G):
    """Eigenpairs of P v = lam G v, eigenvalues descending, V^T G V = I."""
    P = np.asarray(P, dtype=float)
    G = np.asarray(G, dtype=float)
    try:
        lam, V = sla.eigh(0.5 * (P + P.T), 0.5 * (G + G.T))
    except np.linalg.LinAlgError as exc:
        raise ValueError("G is not symmetric positive definite") from exc
    return lam[::-1], V[:, ::-1]
