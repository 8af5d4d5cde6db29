"""Optimization primitives: lasso, the sum-constrained joint ridge system,
capped-simplex projection and the two-block capped-simplex QP.

Lasso objective throughout is ``||A b - y||^2 + lam * ||b||_1`` (no 1/2
factor), so the smooth-part gradient is ``2 A^T (A b - y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
from numba import njit

from .core import as_array
from .errors import DataError, DegenerateGeometryError, DimensionError, InfeasibleError, SolverError

PROJ_SUM_TOL = 1e-12
PROJ_MAX_BISECT = 200


@dataclass(frozen=True)
class LassoProblem:
    design: np.ndarray
    target: np.ndarray
    lam: float

    def __post_init__(self):
        design = as_array(self.design)
        target = np.asarray(self.target, dtype=float).ravel()
        if design.shape[0] != target.size:
            raise DimensionError("target", design.shape[0], target.size)
        if self.lam < 0:
            raise DataError(f"lasso penalty must be nonnegative, got {self.lam}")
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(target)) and np.isfinite(self.lam)):
            raise DataError("lasso inputs must be finite")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "target", target)


class LassoResult(NamedTuple):
    coef: np.ndarray
    converged: bool
    sweeps: int


@njit(cache=True)
def _kkt_violation(q, c, b, lam):
    worst = 0.0
    for j in range(b.size):
        g = 2.0 * (q[j] - c[j])
        if b[j] == 0.0:
            v = abs(g) - lam
        elif b[j] > 0.0:
            v = abs(g + lam)
        else:
            v = abs(g - lam)
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def _coord_step(G, c, b, q, j, half):
    gjj = G[j, j]
    if gjj <= 0.0:
        return 0.0
    old = b[j]
    rho = c[j] - q[j] + gjj * old
    if rho > half:
        new = (rho - half) / gjj
    elif rho < -half:
        new = (rho + half) / gjj
    else:
        new = 0.0
    delta = new - old
    if delta != 0.0:
        b[j] = new
        for i in range(b.size):
            q[i] += G[j, i] * delta
    return abs(delta) * gjj


@njit(cache=True)
def _cd_sweeps(G, c, b, lam, tol, max_sweeps):
    """Cyclic coordinate descent on the Gram form; ``b`` is updated in place.

    Each full sweep is followed by sweeps restricted to the nonzero
    coordinates. Returns (converged, sweeps done).
    """
    n = b.size
    half = 0.5 * lam
    q = G @ b
    if _kkt_violation(q, c, b, lam) <= tol:
        return True, 0
    for it in range(max_sweeps):
        for j in range(n):
            _coord_step(G, c, b, q, j, half)
        q = G @ b
        if _kkt_violation(q, c, b, lam) <= tol:
            return True, it + 1
        active = np.flatnonzero(b)
        for _ in range(100):
            biggest = 0.0
            for j in active:
                step = _coord_step(G, c, b, q, j, half)
                if step > biggest:
                    biggest = step
            if 2.0 * biggest < tol:
                break
        q = G @ b
    return False, max_sweeps


def _gram_objective(G, c, b, lam):
    return b @ (G @ b) - 2.0 * (c @ b) + lam * np.abs(b).sum()


def _polish(G, c, b, lam):
    """Active-set refinement on the current support (feature-sign style).

    Within the orthant fixed by the current signs the objective is a
    quadratic; step toward its minimizer, stopping at the first coordinate
    that would change sign and zeroing it. Updates ``b`` in place and only
    ever lowers the objective. Returns True if the orthant minimizer was
    reached.
    """
    for _ in range(np.count_nonzero(b) + 1):
        support = np.flatnonzero(b)
        if support.size == 0:
            return False
        signs = np.sign(b[support])
        Gs = G[np.ix_(support, support)]
        rhs = c[support] - 0.5 * lam * signs
        w, V = np.linalg.eigh(Gs)
        keep = w > 1e-10 * max(w.max(), 1e-300)
        proj = V.T @ rhs
        if np.linalg.norm(proj[~keep]) > 1e-9 * (np.linalg.norm(rhs) + 1.0):
            # no stationary point on this face: descend along the null space
            null = V[:, ~keep]
            step = -null @ (null.T @ signs)
            if not np.any(step):
                return False
            full = False
        else:
            x = V[:, keep] @ (proj[keep] / w[keep])
            step = x - b[support]
            full = bool(np.all(np.sign(x) == signs))
        before = _gram_objective(G, c, b, lam)
        old = b[support].copy()
        if full:
            b[support] = x
        else:
            crossing = np.flatnonzero(np.sign(step) == -signs)
            if crossing.size == 0:
                return False
            ratios = -old[crossing] / step[crossing]
            k = int(np.argmin(ratios))
            b[support] = old + ratios[k] * step
            b[support[crossing[k]]] = 0.0
        if _gram_objective(G, c, b, lam) > before:
            b[support] = old
            return False
        if full:
            return True
    return False


POLISH_EVERY = 10


def _cd_solve(G, c, b, lam, tol, max_sweeps):
    done = 0
    while True:
        chunk = min(POLISH_EVERY, max_sweeps - done)
        converged, used = _cd_sweeps(G, c, b, lam, tol, chunk)
        done += used
        if converged:
            return True, done
        if done >= max_sweeps:
            return False, done
        if _polish(G, c, b, lam) and _kkt_violation(G @ b, c, b, lam) <= tol:
            return True, done


def lasso_solve_many(design, targets, lam: float, tol: float = 1e-6, max_iters: int = 5000,
                     init: Optional[np.ndarray] = None):
    """Solve one lasso per column of ``targets`` against a shared design.

    Returns ``(coefs, converged)`` where ``coefs`` is ``n x N`` and
    ``converged`` is a boolean vector of length ``N``. Zero initialization
    unless ``init`` (same shape as ``coefs``) is given.
    """
    A = as_array(design)
    Yt = as_array(targets)
    if A.shape[0] != Yt.shape[0]:
        raise DimensionError("targets", f"{A.shape[0]} rows", f"{Yt.shape[0]} rows")
    _check_lasso_args(A, Yt, lam, tol)
    n, N = A.shape[1], Yt.shape[1]
    G = np.ascontiguousarray(A.T @ A)
    B = np.zeros((n, N)) if init is None else np.array(init, dtype=float).reshape(n, N)
    converged = np.zeros(N, dtype=bool)
    for t in range(N):
        b = np.ascontiguousarray(B[:, t])
        # per-column product keeps results bit-identical to lasso_solve
        c = A.T @ np.ascontiguousarray(Yt[:, t])
        converged[t], _ = _cd_solve(G, c, b, float(lam), float(tol), int(max_iters))
        B[:, t] = b
    return B, converged


def _check_lasso_args(A, Y, lam, tol):
    if lam < 0:
        raise DataError(f"lasso penalty must be nonnegative, got {lam}")
    if not tol > 0:
        raise DataError(f"tolerance must be positive, got {tol}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(Y)) and np.isfinite(lam)):
        raise DataError("lasso inputs must be finite")


def lasso_solve(p: LassoProblem, tol: float = 1e-6, max_iters: int = 5000,
                init: Optional[np.ndarray] = None) -> LassoResult:
    """Minimize ``||design b - target||^2 + lam ||b||_1`` by coordinate descent.

    Deterministic: fixed cyclic order from a zero start (or ``init``).
    Stops once every coordinate meets its subgradient condition within
    ``tol``; otherwise returns the last iterate with ``converged=False``.
    """
    A = p.design
    _check_lasso_args(A, p.target, p.lam, tol)
    n = A.shape[1]
    G = np.ascontiguousarray(A.T @ A)
    c = np.ascontiguousarray(A.T @ p.target)
    b = np.zeros(n) if init is None else np.array(init, dtype=float).ravel()
    converged, sweeps = _cd_solve(G, c, b, float(p.lam), float(tol), int(max_iters))
    return LassoResult(b, bool(converged), int(sweeps))


def lasso_objective(design, target, coef, lam: float) -> float:
    r = as_array(design) @ coef - np.asarray(target, dtype=float).ravel()
    return float(r @ r + lam * np.abs(coef).sum())


def constrained_ridge_solve(Y, D, lambda1: float, lambda2: float):
    """Minimize ``||Y a - D beta||^2 + l1 ||a||^2 + l2 ||beta||^2`` s.t. ``sum(a) = 1``.

    Closed form: ``z0 = (A^T A + B)^{-1} d`` with ``A = [Y, -D]``,
    ``B = diag(l1 I, l2 I)``, ``d = [1..1, 0..0]``; then ``z = z0 / d^T z0``.
    """
    Y = as_array(Y)
    D = as_array(D)
    if Y.shape[0] != D.shape[0]:
        raise DimensionError("D", f"{Y.shape[0]} rows", f"{D.shape[0]} rows")
    if not (lambda1 > 0 and lambda2 > 0):
        raise DataError("lambda1 and lambda2 must both be positive for the closed form")
    n_a = Y.shape[1]
    A = np.hstack([Y, -D])
    M = A.T @ A
    M[np.diag_indices(n_a)] += lambda1
    idx = np.arange(n_a, M.shape[0])
    M[idx, idx] += lambda2
    d = np.zeros(M.shape[0])
    d[:n_a] = 1.0
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"Cholesky factorization failed: {exc}") from exc
    z0 = scipy.linalg.cho_solve(factor, d)
    scale = d @ z0
    if abs(scale) < 1e-12:
        raise DegenerateGeometryError(f"d^T z0 = {scale:.3e}; cannot normalize to sum(a) = 1")
    z = z0 / scale
    return z[:n_a], z[n_a:]


@dataclass(frozen=True)
class CappedSimplex:
    """``{x in R^n : sum(x) = total, 0 <= x_i <= tau}``."""

    n: int
    tau: float = 1.0
    total: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise InfeasibleError(f"capped simplex needs n >= 1, got {self.n}")
        if not self.tau > 0:
            raise InfeasibleError(f"tau must be positive, got {self.tau}")
        if self.n * self.tau < self.total * (1.0 - 1e-12):
            raise InfeasibleError(
                f"n * tau = {self.n * self.tau:g} < {self.total:g}: capped simplex is empty")

    def contains(self, x, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x.size == self.n and abs(x.sum() - self.total) <= tol
                    and x.min() >= -tol and x.max() <= self.tau + tol)


@njit(cache=True)
def _clipped_sum(v, mu, tau):
    s = 0.0
    for i in range(v.size):
        x = v[i] - mu
        if x > tau:
            s += tau
        elif x > 0.0:
            s += x
    return s


@njit(cache=True)
def _bisect_shift(v, tau, total, sum_tol, max_steps):
    lo = v.min() - tau
    hi = v.max()
    mu = 0.5 * (lo + hi)
    for _ in range(max_steps):
        mu = 0.5 * (lo + hi)
        s = _clipped_sum(v, mu, tau)
        if abs(s - total) <= sum_tol:
            break
        if s > total:
            lo = mu
        else:
            hi = mu
    return mu


@njit(cache=True)
def _project_core(v, tau, total):
    """Bisection for the shift, then an exact shift on the free coordinates."""
    n = v.size
    if n * tau <= total * (1.0 + 1e-15):
        return np.full(n, total / n)
    mu = _bisect_shift(v, tau, total, PROJ_SUM_TOL, PROJ_MAX_BISECT)
    x = np.minimum(np.maximum(v - mu, 0.0), tau)
    n_free = 0
    n_upper = 0
    free_sum = 0.0
    for i in range(n):
        if x[i] >= tau:
            n_upper += 1
        elif x[i] > 0.0:
            n_free += 1
            free_sum += v[i]
    if n_free > 0:
        mu_exact = (free_sum + n_upper * tau - total) / n_free
        refined = np.minimum(np.maximum(v - mu_exact, 0.0), tau)
        if abs(refined.sum() - total) <= abs(x.sum() - total):
            x = refined
    return x


def project_capped_simplex(v, c: Optional[CappedSimplex] = None) -> np.ndarray:
    """Euclidean projection onto the capped simplex.

    Finds the shift ``mu`` with ``sum(clip(v - mu, 0, tau)) = total`` by
    bisection, then solves for ``mu`` exactly on the free coordinates.
    """
    v = np.ascontiguousarray(v, dtype=float).ravel()
    if c is None:
        c = CappedSimplex(v.size)
    if v.size != c.n:
        raise DimensionError("v", c.n, v.size)
    if not np.all(np.isfinite(v)):
        raise DataError("projection input must be finite")
    x = _project_core(v, float(c.tau), float(c.total))
    if abs(x.sum() - c.total) > 1e-10:
        raise SolverError(f"projection failed to meet the sum constraint: {x.sum()!r}")
    return x


class QPSolution(NamedTuple):
    a: np.ndarray
    beta: np.ndarray
    objective: float
    trace: tuple
    converged: bool


def _gershgorin(Q):
    return float(np.abs(Q).sum(axis=1).max())


@njit(cache=True)
def _block_fista(Q, g, x0, tau, total, L, max_steps, step_tol):
    """Returns ``(x, curvature)``; a NaN curvature means no negative curvature was seen."""
    x = x0.copy()
    fx = x @ (Q @ x) + 2.0 * (g @ x)
    y = x.copy()
    t = 1.0
    for _ in range(max_steps):
        Qy = Q @ y
        grad = 2.0 * (Qy + g)
        z = _project_core(y - grad / L, tau, total)
        fz = z @ (Q @ z) + 2.0 * (g @ z)
        d = z - y
        # exact for a quadratic: fz - fy - grad.d == d^T Q d
        curvature = fz - (y @ Qy + 2.0 * (g @ y)) - grad @ d
        if curvature < -1e-8 * L * (d @ d) - 1e-14 * (abs(fz) + 1.0):
            return x, curvature
        moved = np.abs(d).max()
        x_prev = x
        if fz <= fx:
            x, fx = z, fz
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        if moved <= step_tol:
            break
    return x, np.nan


def _block_descent(Q, g, x0, box: CappedSimplex, max_steps: int, step_tol: float):
    """Minimize ``x^T Q x + 2 g^T x`` over ``box`` with monotone accelerated
    projected gradient, step ``1/L`` where ``L = 2 * Gershgorin(Q)``.
    """
    if box.n == 1:
        return np.array([box.total])
    L = 2.0 * _gershgorin(Q)
    if L <= 0.0:
        L = 1.0
    x, curvature = _block_fista(Q, np.ascontiguousarray(g), x0, float(box.tau), float(box.total), L,
                                max_steps, step_tol)
    if not np.isnan(curvature):
        raise SolverError(f"negative curvature {curvature:.3e} along a QP step; the Gram matrix is not PSD")
    return x


def qp_capped_simplex_blocks(H, c_a: CappedSimplex, c_b: CappedSimplex, tol: float = 1e-8,
                             max_iters: int = 5000, inner_iters: int = 100) -> QPSolution:
    """Minimize ``z^T H z`` for ``z = [a; beta]`` with each block on its capped simplex.

    Block-coordinate descent: each sweep minimizes over ``a`` with ``beta``
    fixed, then over ``beta``. Stops when a sweep lowers the objective by
    less than ``tol``.
    """
    H = np.asarray(H, dtype=float)
    n_a, n_b = c_a.n, c_b.n
    if H.shape != (n_a + n_b, n_a + n_b):
        raise DimensionError("H", (n_a + n_b, n_a + n_b), H.shape)
    if not np.all(np.isfinite(H)):
        raise DataError("H must be finite")
    asym = np.abs(H - H.T).max()
    if asym > 1e-8:
        raise SolverError(f"H is not symmetric (max asymmetry {asym:.2e})")
    H = 0.5 * (H + H.T)
    Haa, Hab = np.ascontiguousarray(H[:n_a, :n_a]), np.ascontiguousarray(H[:n_a, n_a:])
    Hbb = np.ascontiguousarray(H[n_a:, n_a:])
    a = np.full(n_a, c_a.total / n_a)
    b = np.full(n_b, c_b.total / n_b)

    def objective(a, b):
        return float(a @ Haa @ a + 2.0 * (a @ Hab @ b) + b @ Hbb @ b)

    step_tol = max(np.sqrt(tol) * 1e-2, 1e-15)
    obj = objective(a, b)
    trace = [obj]
    converged = False
    for _ in range(max_iters):
        a = _block_descent(Haa, Hab @ b, a, c_a, inner_iters, step_tol)
        b = _block_descent(Hbb, Hab.T @ a, b, c_b, inner_iters, step_tol)
        new = objective(a, b)
        if new > obj + 1e-12 * max(1.0, abs(obj)):
            raise SolverError(
                f"QP objective increased from {obj!r} to {new!r}; H is likely not PSD")
        trace.append(new)
        decrease = obj - new
        obj = new
        if decrease < tol:
            converged = True
            break
    return QPSolution(a, b, obj, tuple(trace), converged)
