"""Reconstruction algorithms: max-slack LP decoding of scalar-quantized frame
expansions, recursive projection decoding of the same, LP decoding of
permutation-quantized expansions for box-bounded sources, QP decoding for
Gaussian sources, and recursive local-consistency decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .frames import Frame
from .numkit import LpProblem, QpProblem, Rng, ShapeError, solve_lp, solve_qp
from .quantizer import CONSISTENCY_TOL, consistency_system

DEGENERATE_TOL = 1e-9  # max-slack at or below this flags an empty-interior cell
_ANGULAR_ZERO = 1e-7  # angular QP solutions below this norm are degenerate


@dataclass(frozen=True)
class QuantizedExpansion:
    """Frame expansion rounded to multiples of a step size; each coefficient
    pins the source to a slab orthogonal to its frame vector."""

    frame: Frame
    step: float
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if coeffs.shape != (self.frame.num_vectors,):
            raise ShapeError(
                f"expected {self.frame.num_vectors} coefficients, got {coeffs.shape}"
            )
        offsets = np.abs(coeffs / self.step - np.round(coeffs / self.step))
        if offsets.max(initial=0.0) > 1e-9:
            raise ValueError("coefficients must be integer multiples of the step")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)


def quantize_expansion(frame, x, step):
    y = frame.expand(x)
    return QuantizedExpansion(
        frame=frame, step=float(step), coefficients=np.round(y / step) * step
    )


@dataclass(frozen=True)
class IndexSetStrategy:
    """Which earlier frame indices each recursion step projects against:
    one ("singleton"), a random floor(sqrt(k))-subset ("sqrt"), or all
    ("exhaustive").  ``seed`` fixes the random-subset draw independently of
    the decoder stream when set."""

    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("singleton", "sqrt", "exhaustive"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")

    def set_size(self, k):
        """|J_k| for 1-based step index k >= 2."""
        if self.kind == "singleton":
            return 1
        if self.kind == "sqrt":
            return min(int(math.isqrt(k)), k - 1)
        return k - 1

    def total_projections(self, m):
        return sum(self.set_size(k) for k in range(2, m + 1))


@dataclass(frozen=True)
class DecodeResult:
    estimate: np.ndarray
    margin: float
    degenerate: bool = False
    projections: int | None = None
    projections_fired: int | None = None
    max_error_increase: float | None = None
    recorded_errors: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Scalar-quantized frame expansions.


def lp_decode_sq(q):
    """Consistent LP reconstruction: maximize the minimum interval slack of
    the quantized expansion.  The reported margin is the worst slab slack of
    the estimate (nonnegative whenever the quantization came from a point)."""
    f = q.frame.matrix
    m, n = f.shape
    a = np.zeros((2 * m, n + 1))
    a[:m, :n] = f
    a[m:, :n] = -f
    a[:, n] = 1.0
    b = np.concatenate([q.coefficients, -q.coefficients])
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    result = solve_lp(LpProblem(c=cost, a=a, b=b))
    if not result.is_optimal:
        raise RuntimeError(f"slab LP ended with status {result.status}")
    xhat = result.z[:n]
    margin = q.step / 2 - float(np.abs(f @ xhat - q.coefficients).max())
    return DecodeResult(estimate=xhat, margin=margin)


@njit(cache=True)
def _recursive_sq_kernel(phis, yhat, half_step, x, grid, x_true):
    m, n = phis.shape
    errs = np.full(grid.shape[0], np.nan)
    gi = 0
    for k in range(m):
        ip = 0.0
        nrm2 = 0.0
        for t in range(n):
            ip += x[t] * phis[k, t]
            nrm2 += phis[k, t] * phis[k, t]
        lo = yhat[k] - half_step
        hi = yhat[k] + half_step
        if nrm2 > 0.0 and ip < lo:
            c = (lo - ip) / nrm2
            for t in range(n):
                x[t] += c * phis[k, t]
        elif nrm2 > 0.0 and ip > hi:
            c = (hi - ip) / nrm2
            for t in range(n):
                x[t] += c * phis[k, t]
        while gi < grid.shape[0] and grid[gi] == k + 1:
            s = 0.0
            for t in range(n):
                d = x_true[t] - x[t]
                s += d * d
            errs[gi] = s
            gi += 1
    return x, errs


def recursive_decode_sq(q, x_true=None, record_at=None):
    """One projection per coefficient, in sequence, onto the nearer slab face
    when the running estimate is outside the slab.  When ``x_true`` and
    ``record_at`` are given, squared errors are recorded after each listed
    prefix length."""
    f = np.ascontiguousarray(q.frame.matrix)
    n = f.shape[1]
    grid = (
        np.asarray(record_at, dtype=np.int64)
        if record_at is not None
        else np.empty(0, dtype=np.int64)
    )
    truth = (
        np.asarray(x_true, dtype=float) if x_true is not None else np.zeros(n)
    )
    xhat, errs = _recursive_sq_kernel(
        f, q.coefficients, q.step / 2, np.zeros(n), grid, truth
    )
    last_slack = q.step / 2 - abs(float(f[-1] @ xhat - q.coefficients[-1]))
    return DecodeResult(
        estimate=xhat,
        margin=last_slack,
        recorded_errors=errs if record_at is not None else None,
    )


# ---------------------------------------------------------------------------
# Permutation-quantized expansions, global consistency.


def lp_decode_uniform(frame, comp, code):
    """Max-slack consistent estimate of a source known to lie in the centered
    unit box.  Degenerate (empty-interior) cells are flagged, not silently
    returned."""
    system = consistency_system(frame, comp, code)
    b_mat = system.matrix
    rows = b_mat.shape[0]
    n = frame.dim
    a = np.zeros((rows + 2 * n, n + 1))
    a[:rows, :n] = -b_mat
    a[rows : rows + n, :n] = -np.eye(n)
    a[rows + n :, :n] = np.eye(n)
    a[:, n] = 1.0
    rhs = np.concatenate([np.zeros(rows), np.full(2 * n, 0.5)])
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    result = solve_lp(LpProblem(c=cost, a=a, b=rhs))
    if result.status == "infeasible":
        raise ValueError("code is not consistent with any point of the box")
    if not result.is_optimal:
        raise RuntimeError(f"cell LP ended with status {result.status}")
    xhat = result.z[:n]
    slack = -result.objective
    return DecodeResult(
        estimate=xhat,
        margin=system.check(xhat),
        degenerate=bool(slack <= DEGENERATE_TOL),
    )


def expected_gaussian_norm(n):
    """Mean length of a standard Gaussian vector: sqrt(2*pi) / B(n/2, 1/2),
    via log-gamma."""
    log_beta = (
        math.lgamma(n / 2) + math.lgamma(0.5) - math.lgamma(n / 2 + 0.5)
    )
    return math.sqrt(2 * math.pi) * math.exp(-log_beta)


def qp_decode_gaussian(frame, comp, code):
    """Angular estimate from the max-slack QP over the cell cone, rescaled to
    the expected Gaussian length.  A vanishing angular solution (possible only
    for zero-volume cells) is flagged degenerate."""
    system = consistency_system(frame, comp, code)
    b_mat = system.matrix
    rows = b_mat.shape[0]
    n = frame.dim
    if rows == 0:
        # single-block composition: the cell is all of space and carries no
        # angular information; the zero vector is the natural estimate
        return DecodeResult(estimate=np.zeros(n), margin=np.inf)
    h = np.zeros((n + 1, n + 1))
    h[:n, :n] = np.eye(n)
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    a = np.zeros((rows, n + 1))
    a[:, :n] = -b_mat
    a[:, n] = 1.0
    z = solve_qp(QpProblem(h=h, c=cost, a=a, b=np.zeros(rows)))
    x_ang = z[:n]
    norm = float(np.linalg.norm(x_ang))
    if norm <= _ANGULAR_ZERO:
        return DecodeResult(estimate=np.zeros(n), margin=0.0, degenerate=True)
    xhat = (expected_gaussian_norm(n) / norm) * x_ang
    return DecodeResult(estimate=xhat, margin=system.check(xhat))


# ---------------------------------------------------------------------------
# Permutation-quantized expansions, local consistency (recursive).


@njit(cache=True)
def _recursive_fpq_kernel(phis, y, idx_flat, offsets, x, grid, x_true, track):
    m, n = phis.shape
    errs = np.full(grid.shape[0], np.nan)
    gi = 0
    max_inc = 0.0
    fired = 0
    prev = 0.0
    if track:
        s = 0.0
        for t in range(n):
            d = x[t] - x_true[t]
            s += d * d
        prev = np.sqrt(s)
    for k in range(1, m):
        for pos in range(offsets[k], offsets[k + 1]):
            j = idx_flat[pos]
            ip = 0.0
            nrm2 = 0.0
            for t in range(n):
                pt = phis[k, t] - phis[j, t]
                ip += x[t] * pt
                nrm2 += pt * pt
            dy = y[k] - y[j]
            nu = 0
            if dy > 0.0:
                nu = 1
            elif dy < 0.0:
                nu = -1
            sgn = 0
            if ip > 0.0:
                sgn = 1
            elif ip < 0.0:
                sgn = -1
            if nu != 0 and sgn != nu and nrm2 > 0.0:
                coef = ip / nrm2
                for t in range(n):
                    x[t] -= coef * (phis[k, t] - phis[j, t])
                fired += 1
                if track:
                    s = 0.0
                    for t in range(n):
                        d = x[t] - x_true[t]
                        s += d * d
                    e = np.sqrt(s)
                    if e - prev > max_inc:
                        max_inc = e - prev
                    prev = e
        while gi < grid.shape[0] and grid[gi] == k + 1:
            nx = 0.0
            for t in range(n):
                nx += x[t] * x[t]
            nx = np.sqrt(nx)
            s = 0.0
            if nx > 0.0:
                for t in range(n):
                    d = x_true[t] - x[t] / nx
                    s += d * d
            else:
                for t in range(n):
                    s += x_true[t] * x_true[t]
            errs[gi] = s
            gi += 1
    return x, errs, max_inc, fired


def _strategy_index_arrays(strategy, m, subset_rng):
    sizes = np.array([0] + [strategy.set_size(k) for k in range(2, m + 1)], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    idx_flat = np.empty(int(offsets[-1]), dtype=np.int64)
    for k in range(2, m + 1):
        lo, hi = offsets[k - 1], offsets[k]
        if strategy.kind == "singleton":
            idx_flat[lo:hi] = k - 2
        elif strategy.kind == "sqrt":
            idx_flat[lo:hi] = subset_rng.gen.choice(k - 1, hi - lo, replace=False)
        else:
            idx_flat[lo:hi] = subset_rng.gen.permutation(k - 1)
    return idx_flat, offsets


def _frame_rows(frame_or_rows):
    if isinstance(frame_or_rows, Frame):
        return np.ascontiguousarray(frame_or_rows.matrix)
    return np.ascontiguousarray(np.asarray(frame_or_rows, dtype=float))


def recursive_decode_fpq(frame_vectors, coeffs, strategy, seed, x_true=None, record_at=None):
    """Recursive projection decoding of an all-singleton-blocks ordering code.

    ``coeffs`` supplies the pairwise sign data: only signs of coefficient
    differences are consulted, and an exact tie (sign 0) never triggers a
    projection.  The start vector and per-step constraint order come from the
    decoder's own seeded stream.  Returns the unit-normalized final estimate;
    when ``x_true``/``record_at`` are given, squared errors of the normalized
    estimate are recorded at the listed prefix lengths, along with the largest
    raw-error increase over all projection steps.
    """
    phis = _frame_rows(frame_vectors)
    m, n = phis.shape
    y = np.asarray(coeffs, dtype=float)
    if y.shape != (m,):
        raise ShapeError(f"expected {m} coefficients, got {y.shape}")
    rng = seed if isinstance(seed, Rng) else Rng(seed)
    subset_rng = Rng(strategy.seed) if strategy.seed is not None else rng
    idx_flat, offsets = _strategy_index_arrays(strategy, m, subset_rng)
    x0 = rng.uniform_unit_sphere(n)
    grid = (
        np.asarray(record_at, dtype=np.int64)
        if record_at is not None
        else np.empty(0, dtype=np.int64)
    )
    track = x_true is not None
    truth = np.asarray(x_true, dtype=float) if track else np.zeros(n)
    xhat, errs, max_inc, fired = _recursive_fpq_kernel(
        phis, y, idx_flat, offsets, x0, grid, truth, track
    )
    norm = float(np.linalg.norm(xhat))
    degenerate = norm == 0.0
    estimate = xhat if degenerate else xhat / norm

    yh = phis @ estimate
    ks = np.repeat(np.arange(m), np.diff(offsets))
    nu = np.sign(y[ks] - y[idx_flat])
    used = nu != 0
    margin = float((nu[used] * (yh[ks[used]] - yh[idx_flat[used]])).min()) if used.any() else np.inf

    return DecodeResult(
        estimate=estimate,
        margin=margin,
        degenerate=degenerate,
        projections=int(idx_flat.size),
        projections_fired=int(fired),
        max_error_increase=float(max_inc) if track else None,
        recorded_errors=errs if record_at is not None else None,
    )


def reencodes_identically(frame, comp, code, xhat):
    """Consistency in the encoder's own terms: quantizing the estimate again
    yields the same code."""
    from .quantizer import fpq_encode

    redone = fpq_encode(frame, comp, xhat, code.variant)
    return redone.perm == code.perm and redone.signs == code.signs


__all__ = [
    "QuantizedExpansion",
    "IndexSetStrategy",
    "DecodeResult",
    "quantize_expansion",
    "lp_decode_sq",
    "recursive_decode_sq",
    "lp_decode_uniform",
    "qp_decode_gaussian",
    "expected_gaussian_norm",
    "recursive_decode_fpq",
    "reencodes_identically",
    "CONSISTENCY_TOL",
    "DEGENERATE_TOL",
]
