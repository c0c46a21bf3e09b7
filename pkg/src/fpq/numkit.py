"""Numerical substrate: dense linear algebra helpers, a two-phase simplex LP
solver, a small operator-splitting QP solver, and seeded random streams.

Everything here operates on plain numpy arrays.  The solvers are written for
the tiny, dense, well-scaled problems that arise elsewhere in this package
(at most a few dozen constraints); they favor determinism and simplicity over
large-scale performance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-8


class ShapeError(ValueError):
    """Input dimensions are inconsistent or an expected structure is missing."""


class RankError(ValueError):
    """A matrix required to have full column rank does not."""


class SolverStallError(RuntimeError):
    """An iterative solver hit its iteration cap before meeting tolerances."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


def _as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_vector(v, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def pseudo_inverse(f, rcond=1e-10):
    """Moore-Penrose inverse (F*F)^{-1} F* of a full-column-rank matrix.

    Raises RankError when the smallest singular value of F*F falls below
    ``rcond`` relative to the largest, instead of returning a garbage matrix.
    """
    f = _as_matrix(f, "F")
    if f.shape[0] < f.shape[1]:
        raise ShapeError(f"F must have at least as many rows as columns, got {f.shape}")
    u, s, vt = np.linalg.svd(f, full_matrices=False)
    if s[0] == 0.0 or (s[-1] / s[0]) ** 2 <= rcond:
        raise RankError(f"F is column rank deficient (singular values {s})")
    return (vt.T / s) @ u.T


def symmetric_eigenvalues(s, sym_tol=1e-12):
    """Eigenvalues of a symmetric matrix, ascending."""
    s = _as_matrix(s, "S")
    if s.shape[0] != s.shape[1]:
        raise ShapeError(f"S must be square, got {s.shape}")
    scale = max(1.0, float(np.abs(s).max(initial=0.0)))
    if np.abs(s - s.T).max(initial=0.0) > sym_tol * scale:
        raise ShapeError("S is not symmetric within tolerance")
    return np.linalg.eigvalsh(s)


# ---------------------------------------------------------------------------
# Linear programming: minimize c^T z subject to A z <= b, z free.


@dataclass(frozen=True)
class LpProblem:
    """minimize c^T z subject to A z <= b with z unrestricted in sign."""

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _as_vector(self.c, "c"))
        object.__setattr__(self, "a", _as_matrix(self.a, "A"))
        object.__setattr__(self, "b", _as_vector(self.b, "b"))
        if self.a.shape != (self.b.size, self.c.size):
            raise ShapeError(
                f"A must be {self.b.size}x{self.c.size}, got {self.a.shape}"
            )


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    z: np.ndarray | None = None
    objective: float | None = None

    @property
    def is_optimal(self):
        return self.status == "optimal"


_RC_TOL = 1e-10  # reduced-cost threshold
_PIV_TOL = 1e-11  # pivot magnitude threshold


def _simplex_iterate(tableau, cost, basis, max_iter):
    """Run simplex pivots with Bland's rule on a tableau whose basis columns
    are already reduced to the identity.  Returns a status string."""
    m = tableau.shape[0]
    nv = tableau.shape[1] - 1
    for _ in range(max_iter):
        reduced = cost - cost[basis] @ tableau[:, :nv]
        entering = -1
        for j in range(nv):  # Bland: lowest index with negative reduced cost
            if reduced[j] < -_RC_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        col = tableau[:, entering]
        best_ratio = np.inf
        leave = -1
        for i in range(m):
            if col[i] > _PIV_TOL:
                ratio = tableau[i, -1] / col[i]
                if ratio < best_ratio - 1e-12 or (
                    ratio < best_ratio + 1e-12
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        piv = tableau[leave, entering]
        tableau[leave] /= piv
        for i in range(m):
            if i != leave and tableau[i, entering] != 0.0:
                tableau[i] -= tableau[i, entering] * tableau[leave]
        basis[leave] = entering
        np.maximum(tableau[:, -1], 0.0, out=tableau[:, -1])
    return "stalled"


def solve_lp(problem, max_iter=None):
    """Two-phase dense simplex with Bland's anti-cycling rule.

    Free variables are handled by the positive/negative split.  Infeasible and
    unbounded problems are reported through the result status; only an
    iteration-cap overrun raises.
    """
    a, b, c = problem.a, problem.b, problem.c
    m, n = a.shape
    nv = 2 * n + m
    if max_iter is None:
        max_iter = 2000 + 50 * (m + nv)

    std = np.hstack([a, -a, np.eye(m)])
    rhs = b.copy()
    neg = rhs < 0
    std[neg] *= -1.0
    rhs[neg] = -rhs[neg]
    cost = np.concatenate([c, -c, np.zeros(m)])

    if neg.any():
        art_rows = np.flatnonzero(neg)
        n_art = art_rows.size
        tableau = np.zeros((m, nv + n_art + 1))
        tableau[:, :nv] = std
        tableau[art_rows, nv + np.arange(n_art)] = 1.0
        tableau[:, -1] = rhs
        basis = np.where(neg, 0, 2 * n + np.arange(m))
        basis[art_rows] = nv + np.arange(n_art)
        phase1_cost = np.zeros(nv + n_art)
        phase1_cost[nv:] = 1.0
        status = _simplex_iterate(tableau, phase1_cost, basis, max_iter)
        if status == "stalled":
            raise SolverStallError("simplex phase 1 exceeded iteration cap")
        if phase1_cost[basis] @ tableau[:, -1] > 1e-7:
            return LpResult("infeasible")
        # Drive remaining artificials out of the basis; all-zero rows are
        # redundant constraints and can be dropped.
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= nv:
                row = tableau[i, :nv]
                pivots = np.flatnonzero(np.abs(row) > 1e-9)
                if pivots.size == 0:
                    keep[i] = False
                    continue
                j = pivots[0]
                tableau[i] /= tableau[i, j]
                for r in range(m):
                    if r != i and tableau[r, j] != 0.0:
                        tableau[r] -= tableau[r, j] * tableau[i]
                basis[i] = j
        tableau = np.hstack([tableau[keep, :nv], tableau[keep, -1:]])
        basis = basis[keep]
    else:
        tableau = np.hstack([std, rhs[:, None]])
        basis = 2 * n + np.arange(m)

    status = _simplex_iterate(tableau, cost, basis, max_iter)
    if status == "stalled":
        raise SolverStallError("simplex phase 2 exceeded iteration cap")
    if status == "unbounded":
        return LpResult("unbounded")
    u = np.zeros(nv)
    u[basis] = tableau[:, -1]
    z = u[:n] - u[n : 2 * n]
    return LpResult("optimal", z=z, objective=float(c @ z))


# ---------------------------------------------------------------------------
# Quadratic programming: minimize 0.5 z^T H z + c^T z subject to A z <= b.


@dataclass(frozen=True)
class QpProblem:
    """minimize 0.5 z^T H z + c^T z subject to A z <= b; H symmetric PSD."""

    h: np.ndarray
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h", _as_matrix(self.h, "H"))
        object.__setattr__(self, "c", _as_vector(self.c, "c"))
        object.__setattr__(self, "a", _as_matrix(self.a, "A"))
        object.__setattr__(self, "b", _as_vector(self.b, "b"))
        n = self.c.size
        if self.h.shape != (n, n):
            raise ShapeError(f"H must be {n}x{n}, got {self.h.shape}")
        if self.a.shape != (self.b.size, n):
            raise ShapeError(f"A must be {self.b.size}x{n}, got {self.a.shape}")
        scale = max(1.0, float(np.abs(self.h).max(initial=0.0)))
        if np.abs(self.h - self.h.T).max(initial=0.0) > 1e-12 * scale:
            raise ShapeError("H is not symmetric within tolerance")
        if np.linalg.eigvalsh(self.h)[0] < -1e-10 * scale:
            raise ValueError("H has a negative eigenvalue; not PSD")


def _kkt_polish(h, c, a, b, active):
    """Solve the equality-constrained KKT system on an active set and verify
    it solves the inequality problem.  Returns the solution or None."""
    n = c.size
    rows = np.flatnonzero(active)
    k = rows.size
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = h
    kkt[:n, n:] = a[rows].T
    kkt[n:, :n] = a[rows]
    rhs = np.concatenate([-c, b[rows]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    z, lam = sol[:n], sol[n:]
    if lam.size and lam.min(initial=0.0) < -1e-9:
        return None
    if a.shape[0] and (a @ z - b).max(initial=-np.inf) > FEASIBILITY_TOL:
        return None
    grad = h @ z + c + a[rows].T @ lam
    if np.abs(grad).max(initial=0.0) > 1e-9 * max(1.0, np.abs(c).max(initial=0.0)):
        return None
    return z


def solve_qp(problem, max_iter=10**5, eps_feas=FEASIBILITY_TOL, eps_stat=1e-6):
    """Operator-splitting (ADMM) QP solver with an active-set polish step.

    Stops when the primal feasibility residual is below ``eps_feas`` and the
    KKT stationarity residual below ``eps_stat``; the polish step normally
    delivers much better than that.  Raises SolverStallError with the best
    iterate attached when the iteration cap is reached first.
    """
    h, c, a, b = problem.h, problem.c, problem.a, problem.b
    n = c.size
    m = a.shape[0]
    if m == 0:
        z, *_ = np.linalg.lstsq(h, -c, rcond=None)
        if np.abs(h @ z + c).max(initial=0.0) > 1e-8 * max(1.0, np.abs(c).max(initial=0.0)):
            raise ValueError("unconstrained QP is unbounded below")
        return z

    sigma, rho, alpha = 1e-6, 1.0, 1.6
    kkt_mat = h + sigma * np.eye(n) + rho * (a.T @ a)
    kkt_inv = np.linalg.inv(kkt_mat)
    z = np.zeros(n)
    w = np.minimum(a @ z, b)
    y = np.zeros(m)
    c_scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    best = (np.inf, z)

    for it in range(1, max_iter + 1):
        rhs = sigma * z - c + a.T @ (rho * w - y)
        zt = kkt_inv @ rhs
        awt = a @ zt
        z = alpha * zt + (1 - alpha) * z
        wt = alpha * awt + (1 - alpha) * w + y / rho
        w = np.minimum(wt, b)
        y = rho * (wt - w)  # wt already carries y/rho, so this is the full dual update

        if it % 25 == 0 or it == max_iter:
            r_prim = max(0.0, float((a @ z - b).max()))
            r_stat = float(np.abs(h @ z + c + a.T @ y).max())
            score = max(r_prim / eps_feas, r_stat / eps_stat)
            if score < best[0]:
                best = (score, z.copy())
            if r_prim <= 1e-6 and r_stat <= 1e-3 * c_scale:
                slack = b - a @ z
                y_pos = y > 1e-8 * max(1.0, float(np.abs(y).max()))
                tight = slack <= max(1e-6, 1e-6 * float(np.abs(b).max(initial=0.0)))
                for active in (tight | y_pos, y_pos, tight):
                    if active.any():
                        polished = _kkt_polish(h, c, a, b, active)
                        if polished is not None:
                            return polished
            if r_prim <= eps_feas and r_stat <= eps_stat * c_scale:
                return z
    raise SolverStallError(
        "QP solver exceeded iteration cap", best=best[1], residual=best[0]
    )


# ---------------------------------------------------------------------------
# Seeded randomness.


class Rng:
    """Deterministic random stream with the draw shapes used by the harness.

    ``uniform_box`` draws uniform(-1/2, 1/2) components; ``spawn`` derives an
    independent child stream keyed by a small integer, so harness code can
    hand out per-task substreams reproducibly.
    """

    def __init__(self, seed):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(seed)
        self.gen = np.random.default_rng(self._seq)

    def spawn(self, key):
        return Rng(np.random.SeedSequence(entropy=self._seq.entropy, spawn_key=(key,)))

    def standard_gaussian(self, n, count=None):
        size = n if count is None else (count, n)
        return self.gen.standard_normal(size)

    def uniform_box(self, n, count=None):
        size = n if count is None else (count, n)
        return self.gen.uniform(-0.5, 0.5, size)

    def uniform_unit_sphere(self, n, count=None):
        g = self.standard_gaussian(n, count=count if count is not None else None)
        if count is None:
            norm = np.linalg.norm(g)
            while norm < 1e-12:
                g = self.gen.standard_normal(n)
                norm = np.linalg.norm(g)
            return g / norm
        norms = np.linalg.norm(g, axis=1)
        bad = norms < 1e-12
        while bad.any():
            g[bad] = self.gen.standard_normal((int(bad.sum()), n))
            norms = np.linalg.norm(g, axis=1)
            bad = norms < 1e-12
        return g / norms[:, None]


def seeded_rng(seed):
    return Rng(seed)
