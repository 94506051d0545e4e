"""Finite-sum problem instances on the Stiefel / Grassmann manifold.

Two families: the covariance-trace (PCA) objective

    f_i(X) = -tr(X^T B_i B_i^T X),   B_i = A_i - column_mean(A),

stored as a minimization with the 1/n outer average, and low-rank matrix
completion by subspace fitting

    f_i(X) = min_a ||P_{Omega_i}(X a) - P_{Omega_i}(M_i)||^2,

whose Euclidean gradient follows from the envelope argument: with a_i*
optimal, grad_X f_i = 2 * scatter(residual) a_i*^T over the observed rows.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TooManySamples
from .linalg import pinv_gram, qr_positive
from .oracles import dense_pca_eig

__all__ = [
    "ProblemConstants",
    "PcaInstance",
    "McInstance",
    "pca_generate",
    "pca_load",
    "mc_generate",
    "mc_save_observations",
    "mc_load_observations",
    "g1_regularizer",
    "tilde_f",
]


@dataclass(frozen=True)
class ProblemConstants:
    """Component-gradient Lipschitz constant L and gradient bound C."""

    L: float
    C: float
    source: str = "analytic"  # analytic | sampled | user

    def __post_init__(self):
        if self.L <= 0 or self.C <= 0:
            raise ValueError("constants must be positive")


class PcaInstance:
    """Leading-subspace estimation of a d x n data matrix.

    The objective is the negated average explained variance; its optimum is
    the span of the top-r eigenvectors of the centered covariance.
    """

    kind = "pca"
    default_rho = 0.0  # X^T grad is symmetric, so the skew term vanishes

    def __init__(self, A, r):
        A = np.asarray(A, dtype=float)
        self.A = A
        self.d, self.n = A.shape
        self.r = int(r)
        self.A_bar = A.mean(axis=1, keepdims=True)
        self.B = A - self.A_bar
        self._col_sq = np.sum(self.B ** 2, axis=0)

    def value(self, X):
        return -float(np.sum((self.B.T @ X) ** 2)) / self.n

    def full_value_egrad(self, X):
        G = self.B.T @ X
        f = -float(np.sum(G ** 2)) / self.n
        return f, (-2.0 / self.n) * (self.B @ G)

    def component_value(self, X, i):
        g = self.B[:, i] @ X
        return -float(g @ g)

    def component_egrad(self, X, i):
        b = self.B[:, i]
        return -2.0 * np.outer(b, b @ X)

    def batch_egrad(self, X, idx):
        Bs = self.B[:, idx]
        return (-2.0 / len(idx)) * (Bs @ (Bs.T @ X))

    def batch_egrad_diff(self, Xk, X0, idx):
        # mean_i grad f_i(Xk) - grad f_i(X0); one pass over the batch slab
        Bs = self.B[:, idx]
        return (-2.0 / len(idx)) * (Bs @ (Bs.T @ (Xk - X0)))

    def constants(self):
        m = float(self._col_sq.max())
        return ProblemConstants(L=2.0 * m, C=2.0 * m * math.sqrt(self.r))

    def optimum(self):
        """Optimal value and a maximizing subspace from the dense eigensolver."""
        w, V = dense_pca_eig(self.B, 1.0 / self.n)
        return -float(np.sum(w[: self.r])), V[:, : self.r]


class McInstance:
    """Low-rank matrix completion from uniformly observed entries.

    Lives on the Grassmann manifold (rho = 0 by default): the objective is
    invariant to right rotation of X.  Column i stores observed row indices
    Omega_i and values; a column with no observations contributes zero.
    """

    kind = "mc"
    default_rho = 0.0

    def __init__(self, d, n, r, rows, vals, M_true=None, mu0=1.0, varrho=1.0):
        self.d, self.n, self.r = int(d), int(n), int(r)
        self.rows = [np.asarray(ri, dtype=np.intp) for ri in rows]
        self.vals = [np.asarray(vi, dtype=float) for vi in vals]
        if len(self.rows) != self.n or len(self.vals) != self.n:
            raise ValueError("need one observation list per column")
        self.M_true = None if M_true is None else np.asarray(M_true, dtype=float)
        self.mu0 = float(mu0)
        self.varrho = float(varrho)
        self.num_observed = int(sum(len(ri) for ri in self.rows))
        if self.num_observed == 0:
            raise ValueError("no observed entries")
        self._build_padded()

    def _build_padded(self):
        # pad every column's observation list to the same length so the
        # normal-equation solves batch through one stacked LAPACK call; the
        # sentinel row index d maps to an appended zero row of X, making
        # padded residuals vanish identically
        m_max = max(len(ri) for ri in self.rows)
        self._pad_rows = np.full((self.n, m_max), self.d, dtype=np.intp)
        self._pad_vals = np.zeros((self.n, m_max))
        for i in range(self.n):
            k = len(self.rows[i])
            self._pad_rows[i, :k] = self.rows[i]
            self._pad_vals[i, :k] = self.vals[i]
        self._all_full_rank = all(len(ri) >= self.r for ri in self.rows)

    def _fit_batch(self, X, idx):
        """Stacked least-squares fits; falls back to the loop when singular."""
        Xp = np.vstack([X, np.zeros((1, X.shape[1]))])
        Xi = Xp[self._pad_rows[idx]]                  # (b, m_max, r)
        v = self._pad_vals[idx][:, :, None]           # (b, m_max, 1)
        G = Xi.transpose(0, 2, 1) @ Xi
        rhs = Xi.transpose(0, 2, 1) @ v
        a = np.linalg.solve(G, rhs)                   # (b, r, 1)
        resid = Xi @ a - v
        return a, resid

    def _accumulate(self, idx, a, resid, egrad):
        contrib = 2.0 * resid * a.transpose(0, 2, 1)  # (b, m_max, r)
        ext = np.zeros((self.d + 1, egrad.shape[1]))
        np.add.at(ext, self._pad_rows[idx].reshape(-1), contrib.reshape(-1, contrib.shape[2]))
        egrad += ext[: self.d]

    def _fit_column(self, X, i):
        rows = self.rows[i]
        if len(rows) == 0:
            return None, None, None
        Xi = X[rows]
        v = self.vals[i]
        G = Xi.T @ Xi
        rhs = Xi.T @ v
        if len(rows) < self.r:
            a = pinv_gram(G) @ rhs  # minimum-norm fit
        else:
            try:
                a = np.linalg.solve(G, rhs)
            except np.linalg.LinAlgError:
                a = pinv_gram(G) @ rhs
        resid = Xi @ a - v
        return a, resid, rows

    def component_value_grad(self, X, i):
        a, resid, rows = self._fit_column(X, i)
        if a is None:
            return 0.0, np.zeros_like(X)
        egrad = np.zeros_like(X)
        egrad[rows] = 2.0 * np.outer(resid, a)
        return float(resid @ resid), egrad

    def component_value(self, X, i):
        return self.component_value_grad(X, i)[0]

    def component_egrad(self, X, i):
        return self.component_value_grad(X, i)[1]

    def value(self, X):
        return self.full_value_egrad(X)[0]

    def full_value_egrad(self, X):
        if self._all_full_rank:
            try:
                idx = np.arange(self.n)
                a, resid = self._fit_batch(X, idx)
                f = float(np.sum(resid ** 2))
                egrad = np.zeros_like(X)
                self._accumulate(idx, a, resid, egrad)
                return f / self.n, egrad / self.n
            except np.linalg.LinAlgError:
                pass
        f = 0.0
        egrad = np.zeros_like(X)
        for i in range(self.n):
            a, resid, rows = self._fit_column(X, i)
            if a is None:
                continue
            f += resid @ resid
            egrad[rows] += 2.0 * np.outer(resid, a)
        return float(f) / self.n, egrad / self.n

    def batch_egrad(self, X, idx):
        idx = np.asarray(idx, dtype=np.intp)
        if self._all_full_rank:
            try:
                a, resid = self._fit_batch(X, idx)
                egrad = np.zeros_like(X)
                self._accumulate(idx, a, resid, egrad)
                return egrad / len(idx)
            except np.linalg.LinAlgError:
                pass
        egrad = np.zeros_like(X)
        for i in idx:
            a, resid, rows = self._fit_column(X, i)
            if a is None:
                continue
            egrad[rows] += 2.0 * np.outer(resid, a)
        return egrad / len(idx)

    def batch_egrad_diff(self, Xk, X0, idx):
        idx = np.asarray(idx, dtype=np.intp)
        if self._all_full_rank:
            try:
                ak, rk = self._fit_batch(Xk, idx)
                a0, r0 = self._fit_batch(X0, idx)
                contrib = 2.0 * (rk * ak.transpose(0, 2, 1) - r0 * a0.transpose(0, 2, 1))
                ext = np.zeros((self.d + 1, Xk.shape[1]))
                np.add.at(ext, self._pad_rows[idx].reshape(-1),
                          contrib.reshape(-1, contrib.shape[2]))
                return ext[: self.d] / len(idx)
            except np.linalg.LinAlgError:
                pass
        return self.batch_egrad(Xk, idx) - self.batch_egrad(X0, idx)

    def fitted_matrix(self, X):
        """Column-wise least-squares reconstruction X a_i from observed rows."""
        out = np.zeros((self.d, self.n))
        for i in range(self.n):
            a, _, _ = self._fit_column(X, i)
            if a is not None:
                out[:, i] = X @ a
        return out

    def constants(self, probes=50, seed=0):
        """Sampled (not certified) Lipschitz / bound estimates with 2x headroom."""
        rng = np.random.default_rng(seed)
        lip = 0.0
        bound = 0.0
        for _ in range(probes):
            X = qr_positive(rng.standard_normal((self.d, self.r)))[0]
            Y = qr_positive(rng.standard_normal((self.d, self.r)))[0]
            i = int(rng.integers(self.n))
            gx = self.component_egrad(X, i)
            gy = self.component_egrad(Y, i)
            lip = max(lip, np.linalg.norm(gx - gy) / max(np.linalg.norm(X - Y), 1e-300))
            bound = max(bound, np.linalg.norm(gx))
        return ProblemConstants(L=2.0 * max(lip, 1e-12), C=2.0 * max(bound, 1e-12),
                                source="sampled")


def pca_generate(d, n, seed):
    """Synthetic data: row i scaled by i^0.618, normalized by the max entry."""
    rng = np.random.default_rng(seed)
    scale = np.arange(1, d + 1, dtype=float) ** 0.618
    A = rng.standard_normal((d, n)) * scale[:, None]
    A /= np.abs(A).max()
    return A


def pca_load(path, r):
    """Load a dense d x n data matrix from .npy or CSV and wrap it."""
    path = str(path)
    if path.endswith(".npy"):
        A = np.load(path)
    else:
        A = np.loadtxt(path, delimiter=",", ndmin=2)
    return PcaInstance(A, r)


def mc_generate(d, n, r, cond, seed, mu0=1.0, varrho=1.0):
    """Random rank-r ground truth with the given condition number.

    Singular values are geometrically spaced from 1 down to 1/cond; the
    observation set has exactly (n + d - r) r^2 entries drawn uniformly
    without replacement.
    """
    num = (n + d - r) * r * r
    if num > d * n:
        raise TooManySamples(f"|Omega| = {num} exceeds the {d * n} entries available")
    rng = np.random.default_rng(seed)
    U = qr_positive(rng.standard_normal((d, r)))[0]
    V = qr_positive(rng.standard_normal((n, r)))[0]
    if r == 1:
        sigma = np.array([1.0])
    else:
        sigma = cond ** (-np.arange(r) / (r - 1.0))
    M = (U * sigma) @ V.T
    flat = rng.choice(d * n, size=num, replace=False)
    flat.sort()
    ii = flat // n
    jj = flat % n
    rows = [ii[jj == j] for j in range(n)]
    vals = [M[rows[j], j] for j in range(n)]
    return McInstance(d, n, r, rows, vals, M_true=M, mu0=mu0, varrho=varrho)


def mc_save_observations(inst, path):
    """Write observed entries as 'i j value' triples, 1-based indices."""
    with open(path, "w") as fh:
        for j in range(inst.n):
            for i, v in zip(inst.rows[j], inst.vals[j]):
                fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def mc_load_observations(path, r, d=None, n=None, **kwargs):
    """Read 'i j value' triples (1-based); dims default to the max index seen."""
    ii, jj, vv = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, b, c = line.split()
            ii.append(int(a) - 1)
            jj.append(int(b) - 1)
            vv.append(float(c))
    if not ii:
        raise ValueError(f"no observations in {path}")
    d = (max(ii) + 1) if d is None else d
    n = (max(jj) + 1) if n is None else n
    rows = [[] for _ in range(n)]
    vals = [[] for _ in range(n)]
    seen = set()
    for i, j, v in zip(ii, jj, vv):
        if (i, j) in seen:
            raise ValueError(f"duplicate observation ({i + 1}, {j + 1})")
        seen.add((i, j))
        rows[j].append(i)
        vals[j].append(v)
    return McInstance(d, n, r, rows, vals, **kwargs)


def g1_regularizer(z):
    """Incoherence barrier: 0 below 1, exp((z-1)^2) - 1 above (continuous knee)."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    if z <= 1.0:
        return 0.0
    return math.expm1((z - 1.0) ** 2)


def tilde_f(inst, W, Z, varrho=None, mu0=None):
    """Regularized two-factor completion objective (probe only, never optimized).

    F(W, Z) = min_S (1/2) ||P_Omega(M - W S Z^T)||^2 plus the row-norm
    barrier on both factors.  Incoherent factors make the barrier vanish
    and tilde_f equal F exactly.
    """
    W = np.asarray(W, dtype=float)
    Z = np.asarray(Z, dtype=float)
    varrho = inst.varrho if varrho is None else varrho
    mu0 = inst.mu0 if mu0 is None else mu0
    r = W.shape[1]
    design = []
    target = []
    for j in range(inst.n):
        for i, v in zip(inst.rows[j], inst.vals[j]):
            design.append(np.outer(W[i], Z[j]).ravel())
            target.append(v)
    design = np.asarray(design)
    target = np.asarray(target)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = design @ coef - target
    val = 0.5 * float(resid @ resid)
    knee = 3.0 * mu0 * r
    val += varrho * sum(g1_regularizer(float(w @ w) / knee) for w in W)
    val += varrho * sum(g1_regularizer(float(z @ z) / knee) for z in Z)
    return val
