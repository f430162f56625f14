"""Robin eigenproblem, negative counts, Morse bracket and the constrained index.

The pencil is (A, M) with A the matrix of Q and M the interior mass, so an
eigenpair satisfies A phi = lambda M phi. Counts of eigenvalues below a shift
come from the inertia of A - sigma M (Sylvester), read off a symmetric LU
factorization; eigenvalues themselves come from a dense solver for small
problems and shift-invert Lanczos otherwise.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretize import evaluate_Q
from .errors import ArgumentError, DegenerateConstraintError, NumericalError

log = logging.getLogger(__name__)

DENSE_MAX = 3000
EPS_REL = 1e-6
# constrained eigenvalues within this factor of -eps_zero make the verdict indeterminate
GUARD_FACTOR = 3.0


# ---------------------------------------------------------------------------
# inertia
# ---------------------------------------------------------------------------

def _dense_negative_count(S):
    w = sla.eigvalsh(S.toarray() if sp.issparse(S) else S)
    return int(np.sum(w < 0))


class SymmetricFactor:
    """LU of a symmetric matrix with symmetric pivoting; exposes inertia and solves."""

    def __init__(self, S):
        S = sp.csc_matrix(S)
        self.n = S.shape[0]
        self._dense = None
        try:
            lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
            d = lu.U.diagonal()
            ok = np.array_equal(lu.perm_r, lu.perm_c) and np.all(np.isfinite(d)) and np.all(d != 0)
        except RuntimeError:
            ok = False
        if ok:
            self.lu = lu
            self.neg = int(np.sum(d < 0))
            return
        if self.n > 8000:
            raise NumericalError("symmetric factorization failed and the matrix is too large for dense fallback")
        log.debug("symmetric LU fell back to a dense eigendecomposition (n=%d)", self.n)
        w, v = sla.eigh(S.toarray())
        if np.min(np.abs(w)) == 0:
            raise NumericalError("singular matrix in inertia count")
        self._dense = (w, v)
        self.neg = int(np.sum(w < 0))

    def solve(self, b):
        if self._dense is None:
            return self.lu.solve(b)
        w, v = self._dense
        return v @ ((v.T @ b) / w)


def count_below(A, M, sigma):
    """Number of eigenvalues of the pencil (A, M) strictly below ``sigma``."""
    return SymmetricFactor(A - sigma * M).neg


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    k_neg: int
    zero_band: int
    eps_zero: float
    lambda_max: float
    n_unknowns: int
    mesh_size: float
    method: str
    rayleigh_residual: float
    constrained_index: int = -1
    constrained_eigenvalues: np.ndarray = None
    constrained_zero_band: int = 0
    constrained_indeterminate: bool = False
    witness: np.ndarray = field(default=None, repr=False)
    witness_Q: float = float("nan")
    witness_constraint: float = float("nan")
    cross_check: dict = field(default_factory=dict)

    @property
    def bracket(self):
        return index_bracket(self)["bracket"]

    @property
    def verdict(self):
        if self.constrained_index >= 1:
            return "unstable"
        return "indeterminate" if self.constrained_indeterminate else "stable"

    def to_dict(self, n_values=None):
        ev = self.eigenvalues if n_values is None else self.eigenvalues[:n_values]
        br = index_bracket(self)
        out = {
            "eigenvalues": [float(x) for x in ev],
            "k_neg": int(self.k_neg),
            "zero_band": int(self.zero_band),
            "eps_zero": float(self.eps_zero),
            "lambda_max": float(self.lambda_max),
            "n_unknowns": int(self.n_unknowns),
            "mesh_size": float(self.mesh_size),
            "method": self.method,
            "rayleigh_residual": float(self.rayleigh_residual),
            "constrained_index": int(self.constrained_index),
            "constrained_eigenvalues": [] if self.constrained_eigenvalues is None
            else [float(x) for x in self.constrained_eigenvalues],
            "constrained_zero_band": int(self.constrained_zero_band),
            "bracket": list(br["bracket"]),
            "bracket_widened": list(br["widened"]),
            "bracket_indeterminate": bool(br["indeterminate"]),
            "verdict": self.verdict,
            "witness_Q": float(self.witness_Q),
            "witness_constraint": float(self.witness_constraint),
        }
        out.update({f"cross_check_{k}": v for k, v in sorted(self.cross_check.items())})
        return out


def _rayleigh_residual(A, M, lam, V):
    if V.size == 0:
        return 0.0
    AV, MV = A @ V, M @ V
    num = np.abs(np.einsum("ij,ij->j", V, AV) - lam * np.einsum("ij,ij->j", V, MV))
    return float(np.max(num / np.einsum("ij,ij->j", V, MV)))


def _lower_bound(A, M):
    L = -1.0
    for _ in range(80):
        if count_below(A, M, L) == 0:
            return L
        L *= 2.0
    raise NumericalError("could not bracket the bottom of the spectrum")


def robin_spectrum(assembly, count=12, dense_max=DENSE_MAX, eps_rel=EPS_REL):
    """Lowest eigenpairs of (K - P - B_q) phi = lambda M phi.

    Parameters
    ----------
    assembly : StabilityAssembly
    count : int
        Requested eigenpairs; raised automatically if more negative modes exist.
    eps_rel : float
        Zero threshold relative to the largest eigenvalue of the pencil.
    """
    A, M = assembly.A, assembly.M
    n = assembly.n
    if not 1 <= count <= n:
        raise ArgumentError(f"count must lie in [1, {n}]", module="spectrum")
    if n <= dense_max:
        w, V = sla.eigh(A.toarray(), M.toarray())
        lam_max = float(w[-1])
        eps = eps_rel * abs(lam_max)
        k_neg = int(np.sum(w < -eps))
        m = min(n, max(count, k_neg + 4))
        vals, vecs, method = w[:m], V[:, :m], "dense"
    else:
        try:
            lam_max = float(spla.eigsh(A, k=1, M=M, which="LA", tol=1e-4, return_eigenvectors=False)[0])
        except spla.ArpackNoConvergence as exc:
            raise NumericalError("largest eigenvalue did not converge") from exc
        eps = eps_rel * abs(lam_max)
        k_neg = count_below(A, M, -eps)
        m = min(n - 2, max(count, k_neg + 4))
        L = _lower_bound(A, M)
        try:
            vals, vecs = spla.eigsh(A, k=m, M=M, sigma=L, which="LM", tol=1e-12, v0=np.ones(n))
        except spla.ArpackNoConvergence as exc:
            raise NumericalError("shift-invert Lanczos did not converge") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        method = "shift-invert"
    res = _rayleigh_residual(A, M, vals, vecs)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if res > 1e-8 * scale:
        raise NumericalError(f"Rayleigh residual {res:.2e} too large", residual=res)
    zero_band = int(np.sum(np.abs(vals) <= eps))
    return SpectrumReport(vals, vecs, k_neg, zero_band, eps, lam_max, n, assembly.h, method, res)


# ---------------------------------------------------------------------------
# constrained problem
# ---------------------------------------------------------------------------

def _check_constraint(assembly):
    c = assembly.c
    if not np.any(c != 0) or np.linalg.norm(c) == 0:
        raise DegenerateConstraintError("constraint vector vanishes (surface without boundary?)")
    return c


def constrained_index(assembly, eps=None, report=None):
    """Negative inertia of Q on {c^T phi = 0}, counting eigenvalues below -eps.

    Uses the bordered-matrix identity
    ``neg(Z^T A Z) = neg(A) - 1 + [c^T A^{-1} c > 0]`` on the shifted matrix.
    """
    c = _check_constraint(assembly)
    if eps is None:
        eps = report.eps_zero if report is not None else 0.0
    S = assembly.A + eps * assembly.M
    fac = SymmetricFactor(S)
    s = float(c @ fac.solve(c))
    if not np.isfinite(s) or s == 0.0:
        raise NumericalError("bordered Schur complement is singular")
    return int(fac.neg - 1 + (1 if s > 0 else 0))


def projected_index_dense(assembly, eps=0.0):
    """Orthonormal null-space projection, dense (reference path)."""
    c = _check_constraint(assembly)
    Z = sla.null_space(c[None, :])
    A = Z.T @ (assembly.A @ Z)
    Mz = Z.T @ (assembly.M @ Z)
    w = sla.eigh(0.5 * (A + A.T), 0.5 * (Mz + Mz.T), eigvals_only=True)
    return int(np.sum(w < -eps)), w


def constrained_spectrum(assembly, count=8, sigma=None, dense_max=DENSE_MAX):
    """Lowest eigenpairs of the pencil restricted to {c^T phi = 0}.

    Dense: orthonormal null-space basis. Sparse: shift-invert with the bordered
    saddle-point solve, which keeps the Krylov space inside the constraint set.
    """
    c = _check_constraint(assembly)
    A, M = assembly.A, assembly.M
    n = assembly.n
    if n <= dense_max:
        Z = sla.null_space(c[None, :])
        Az = Z.T @ (A @ Z)
        Mz = Z.T @ (M @ Z)
        w, Y = sla.eigh(0.5 * (Az + Az.T), 0.5 * (Mz + Mz.T))
        return w[:count], Z @ Y[:, :count]
    if sigma is None:
        sigma = _lower_bound(A, M)
    border = sp.bmat([[A - sigma * M, sp.csc_matrix(c[:, None])], [sp.csc_matrix(c[None, :]), None]]).tocsc()
    lu = spla.splu(border)

    def op(b):
        rhs = np.r_[b, 0.0]
        return lu.solve(rhs)[:n]

    opinv = spla.LinearOperator((n, n), matvec=op, dtype=float)
    v0 = np.ones(n) - c * (c.sum() / (c @ c))
    try:
        vals, vecs = spla.eigsh(A, k=count, M=M, sigma=sigma, OPinv=opinv, which="LM", tol=1e-12, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise NumericalError("constrained Lanczos did not converge") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def index_bracket(report):
    """Morse bracket [max(k-1, 0), k]; widened by the zero band when it is occupied."""
    k = int(report.k_neg)
    low, high = max(k - 1, 0), k
    ci = report.constrained_index
    if ci >= 0 and not low <= ci <= high:
        raise NumericalError(f"constrained index {ci} outside the bracket [{low}, {high}]")
    widened = (low, high + int(report.zero_band))
    return {"bracket": (low, high), "widened": widened, "indeterminate": report.zero_band > 0}


def analyze_spectrum(assembly, count=12, n_constrained=8, dense_max=DENSE_MAX, eps_rel=EPS_REL,
                     guard_factor=GUARD_FACTOR):
    """Full spectral analysis: eigenvalues, counts, constrained index and witness."""
    rep = robin_spectrum(assembly, count=count, dense_max=dense_max, eps_rel=eps_rel)
    eps = rep.eps_zero
    ci = constrained_index(assembly, eps=eps)
    rep.constrained_index = ci
    ncs = min(max(n_constrained, ci + 3), assembly.n - 2)
    mu, W = constrained_spectrum(assembly, count=ncs, dense_max=dense_max)
    rep.constrained_eigenvalues = mu
    rep.constrained_zero_band = int(np.sum(np.abs(mu) <= eps))
    rep.constrained_indeterminate = bool(np.any((mu >= -guard_factor * eps) & (mu <= -eps / guard_factor)))
    rep.cross_check["eigen_count_agrees"] = bool(int(np.sum(mu < -eps)) == ci)
    # witness: most negative constrained eigenvector, normalised and re-evaluated directly
    w = W[:, 0] / np.sqrt(max(W[:, 0] @ (assembly.M @ W[:, 0]), 1e-300))
    w = w - assembly.c * ((assembly.c @ w) / (assembly.c @ assembly.c))
    rep.witness = w
    rep.witness_Q = evaluate_Q(assembly, w, w)
    rep.witness_constraint = float(assembly.c @ w)
    index_bracket(rep)
    return rep
