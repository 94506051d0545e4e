"""Seven retraction maps onto the Stiefel / Grassmann manifold.

Five free-direction retractions (geodesic, QR, polar, Cayley, subspace)
accept an arbitrary tangent direction.  The two gradient-coupled maps
(gradient projection, gradient reflection) take the Euclidean gradient
itself; their derivatives at t = 0 are -d_rho(X, g) with rho = 1/4 and
-2 d_0(X, g) respectively.  t is nonnegative in the optimizers; descent is
encoded in the direction sign.
"""

import enum

import numpy as np

from .errors import SingularStep
from .linalg import expm, polar_project, pinv_gram, qr_positive
from .manifold import StiefelPoint, TangentVector, d_rho_array

__all__ = [
    "RetractionKind",
    "FREE_KINDS",
    "GRADIENT_KINDS",
    "phi_half_t",
    "phi_saturating",
    "retract_array",
    "retract",
    "retract_gp",
    "retract_gr",
    "declared_derivative",
    "estimate_l1_l2",
]


class RetractionKind(enum.Enum):
    EXP1 = "exp"     # Stiefel geodesic via the block exponential
    QR = "qr"        # QR factorization of X + tE
    PD = "pd"        # polar decomposition of X + tE
    WY = "wy"        # Cayley-type low-rank update
    JD = "jd"        # subspace update with the phi weight
    GP = "gp"        # polar projection of a Euclidean gradient step
    GR = "gr"        # Householder reflection of a Euclidean gradient step
    EXP2 = "exp2"    # Grassmann geodesic via the compact SVD

    @classmethod
    def from_name(cls, name):
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown retraction {name!r}")


FREE_KINDS = (RetractionKind.EXP1, RetractionKind.QR, RetractionKind.PD,
              RetractionKind.WY, RetractionKind.JD, RetractionKind.EXP2)
GRADIENT_KINDS = (RetractionKind.GP, RetractionKind.GR)


def phi_half_t(t):
    """Smooth weight phi(t) = t/2; makes the jd map identical to wy."""
    return 0.5 * t


def phi_saturating(t, threshold=1e-10):
    """Weight that saturates at 1/2 once t reaches the threshold.

    Emphasizes the X^T E term at small steps; phi(0) = 0 and the one-sided
    derivative at 0 is 1/2, but the function jumps at the threshold, so
    derivative probes with h above the threshold must use phi_half_t.
    """
    return 0.5 * t if abs(t) < threshold else 0.5


def _qr_relaxed(D):
    # Thin QR with the positive-diagonal convention but without the rank
    # check: a vertical direction makes D = (I - XX^T)E rank deficient and
    # the block exponential degenerates gracefully with zero rows in R.
    Q, R = np.linalg.qr(D)
    signs = np.sign(np.diagonal(R))
    signs = np.where(signs == 0, 1.0, signs)
    return Q * signs, R * signs[:, None]


def _retract_exp1(X, E, t):
    r = X.shape[1]
    D = E - X @ (X.T @ E)
    Q, R = _qr_relaxed(D)
    A = X.T @ E
    blk = np.block([[A, -R.T], [R, np.zeros((r, r))]])
    M = expm(t * blk)
    return np.hstack([X, Q]) @ M[:, :r]


def _retract_qr(X, E, t):
    return qr_positive(X + t * E)[0]


def _retract_pd(X, E, t):
    return polar_project(X + t * E)


def _retract_wy(X, E, t):
    r = X.shape[1]
    PE = E - 0.5 * X @ (X.T @ E)
    U = np.hstack([-PE, X])
    V = np.hstack([X, PE])
    M = np.eye(2 * r) + (0.5 * t) * (V.T @ U)
    try:
        W = np.linalg.solve(M, V.T @ X)
    except np.linalg.LinAlgError as exc:
        raise SingularStep("wy inner solve is singular; tangent is corrupted") from exc
    return X - t * (U @ W)


def _retract_jd(X, E, t, phi):
    r = X.shape[1]
    XtE = X.T @ E
    D = E - X @ XtE
    J = np.eye(r) + (0.25 * t * t) * (D.T @ D) - phi(t) * XtE
    try:
        Ji = np.linalg.inv(J)
    except np.linalg.LinAlgError as exc:
        raise SingularStep("jd inner solve is singular; tangent is corrupted") from exc
    return (2.0 * X + t * D) @ Ji - X


def _retract_exp2(X, E, t):
    if not np.any(E):
        return X.copy()  # continuous limit: SVD of zero is ambiguous
    U, s, Vt = np.linalg.svd(E, full_matrices=False)
    return (X @ Vt.T * np.cos(s * t) + U * np.sin(s * t)) @ Vt


def retract_array(kind, X, E, t, phi=phi_half_t):
    """Retraction on raw arrays: feasible point with R(0) = X, R'(0) = E."""
    if kind is RetractionKind.EXP1:
        return _retract_exp1(X, E, t)
    if kind is RetractionKind.QR:
        return _retract_qr(X, E, t)
    if kind is RetractionKind.PD:
        return _retract_pd(X, E, t)
    if kind is RetractionKind.WY:
        return _retract_wy(X, E, t)
    if kind is RetractionKind.JD:
        return _retract_jd(X, E, t, phi)
    if kind is RetractionKind.EXP2:
        return _retract_exp2(X, E, t)
    raise ValueError(f"{kind} couples to the Euclidean gradient; use retract_gp / retract_gr")


def retract(kind, X: StiefelPoint, E: TangentVector, t, phi=phi_half_t) -> StiefelPoint:
    """Typed wrapper around retract_array; validates feasibility on return."""
    return StiefelPoint(retract_array(kind, X.X, E.E, t, phi))


def retract_gp_array(X, eucl_dir, t):
    return polar_project(X - t * eucl_dir)


def retract_gr_array(X, eucl_dir, t):
    Xb = X - t * eucl_dir
    return 2.0 * Xb @ (pinv_gram(Xb.T @ Xb) @ (Xb.T @ X)) - X


def retract_gp(X: StiefelPoint, eucl_dir, t) -> StiefelPoint:
    """Polar projection of the Euclidean gradient step X - t g."""
    return StiefelPoint(retract_gp_array(X.X, np.asarray(eucl_dir, float), t))


def retract_gr(X: StiefelPoint, eucl_dir, t) -> StiefelPoint:
    """Householder-reflection step built from X - t g (pseudo-inverse Gram)."""
    return StiefelPoint(retract_gr_array(X.X, np.asarray(eucl_dir, float), t))


def declared_derivative(kind, X, direction):
    """The analytic R'(0) for a given kind and direction array.

    Free retractions return the direction itself; the gradient-coupled maps
    return -d_{1/4}(X, g) (gp) and -2 d_0(X, g) (gr).
    """
    if kind is RetractionKind.GP:
        return -d_rho_array(X, direction, 0.25)
    if kind is RetractionKind.GR:
        return -2.0 * d_rho_array(X, direction, 0.0)
    return direction


def _apply(kind, X, direction, t, phi):
    if kind is RetractionKind.GP:
        return retract_gp_array(X, direction, t)
    if kind is RetractionKind.GR:
        return retract_gr_array(X, direction, t)
    return retract_array(kind, X, direction, t, phi)


def estimate_l1_l2(kind, trials, d=50, r=5, seed=0, phi=phi_half_t):
    """Empirical suprema of the two retraction-deviation ratios.

    Samples random (X, direction, t in (0, 10]) and returns

        L1_hat = sup ||R(t) - X|| / (t ||R'(0)||)
        L2_hat = sup ||R(t) - X - t R'(0)|| / (t^2 ||R'(0)||^2)

    For the polar and QR retractions these never exceed (1, 1/2) and
    (1 + sqrt(2)/2, sqrt(10)/2).  kind="line" measures the Euclidean
    straight-line baseline (L1 = 1, L2 = 0), used as an oracle in tests.
    """
    rng = np.random.default_rng(seed)
    l1 = 0.0
    l2 = 0.0
    for _ in range(trials):
        X, _ = np.linalg.qr(rng.standard_normal((d, r)))
        Z = rng.standard_normal((d, r))
        t = rng.uniform(1e-3, 10.0)
        if kind == "line":
            E = Z
            Rt = X + t * E
            deriv = E
        else:
            if kind in GRADIENT_KINDS:
                direction = Z
            elif kind is RetractionKind.EXP2:
                direction = Z - X @ (X.T @ Z)
            else:
                direction = Z - 0.5 * X @ (X.T @ Z + Z.T @ X)
            deriv = declared_derivative(kind, X, direction)
            Rt = _apply(kind, X, direction, t, phi)
        nd = np.linalg.norm(deriv)
        if nd < 1e-12:
            continue
        l1 = max(l1, np.linalg.norm(Rt - X) / (t * nd))
        l2 = max(l2, np.linalg.norm(Rt - X - t * deriv) / (t * t * nd * nd))
    return l1, l2
