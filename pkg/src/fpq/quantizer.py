"""Frame permutation quantization: encode a vector by the block ordering (and
signs) of its frame expansion, express the induced cell as a linear
inequality system, decode with the canonical dual, and interrogate cell
geometry.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import psc
from .numkit import LpProblem, Rng, ShapeError, solve_lp
from .psc import Composition, InitialCodeword

CONSISTENCY_TOL = -1e-9  # min(Bx) above this counts as consistent


@functools.lru_cache(maxsize=4096)
def _difference_matrix_cached(parts):
    comp = Composition(parts)
    m = comp.total
    bounds = comp.boundaries()
    rows = []
    for i in range(comp.num_blocks - 1):
        lo, hi = bounds[i], bounds[i + 1]
        for col in range(bounds[i + 1], bounds[i + 2]):
            for k in range(lo, hi):
                row = np.zeros(m)
                row[k] = 1.0
                row[col] = -1.0
                rows.append(row)
    out = np.array(rows).reshape(-1, m)
    out.setflags(write=False)
    return out


def difference_matrix(comp):
    """Differencing matrix whose nonnegativity on a vector says the vector is
    descending up to the block structure of ``comp``.  One row per (upper
    block entry, next block entry) pair: +1 and -1 in those columns."""
    return _difference_matrix_cached(comp.parts).copy()


def descending_constraint_count(comp):
    """Row count of the differencing matrix: sum of adjacent part products."""
    return int(sum(a * b for a, b in zip(comp.parts, comp.parts[1:])))


@functools.lru_cache(maxsize=4096)
def _extended_difference_matrix_cached(parts):
    comp = Composition(parts)
    if comp.num_blocks < 2:
        raise ValueError(
            "Variant II constraint structure needs at least two blocks"
        )
    m = comp.total
    bounds = comp.boundaries()
    lo, hi = bounds[-3], bounds[-2]  # next-to-last block
    selector = np.zeros((hi - lo, m))
    selector[np.arange(hi - lo), np.arange(lo, hi)] = 1.0
    out = np.vstack([_difference_matrix_cached(parts), selector])
    out.setflags(write=False)
    return out


def extended_difference_matrix(comp):
    """Differencing matrix stacked over a selector of the next-to-last block:
    nonnegativity expresses Variant II consistency (ordering plus the coded
    signs being positive)."""
    return _extended_difference_matrix_cached(comp.parts).copy()


@dataclass(frozen=True)
class FpqCode:
    """Encoder output: canonical permutation (``perm[i]`` = source coefficient
    index at sorted position i) plus per-sorted-position signs.  Variant I
    carries all +1 signs; Variant II fixes the last block at +1 because those
    signs are not coded."""

    perm: tuple[int, ...]
    signs: tuple[int, ...]
    variant: int

    def sign_vector(self):
        return np.asarray(self.signs, dtype=float)


def fpq_encode_v1(frame, comp, x):
    _check_encode_shapes(frame, comp, x)
    y = frame.expand(x)
    perm = psc.canonical_permutation(y, comp)
    return FpqCode(
        perm=tuple(int(i) for i in perm),
        signs=(1,) * comp.total,
        variant=1,
    )


def fpq_encode_v2(frame, comp, x):
    _check_encode_shapes(frame, comp, x)
    y = frame.expand(x)
    perm = psc.canonical_permutation(y, comp, by_magnitude=True)
    n_coded = comp.total - comp.parts[-1]
    signs = np.ones(comp.total, dtype=int)
    signs[:n_coded] = np.where(y[perm[:n_coded]] < 0, -1, 1)
    return FpqCode(
        perm=tuple(int(i) for i in perm),
        signs=tuple(int(s) for s in signs),
        variant=2,
    )


def fpq_encode(frame, comp, x, variant):
    if variant == 1:
        return fpq_encode_v1(frame, comp, x)
    if variant == 2:
        return fpq_encode_v2(frame, comp, x)
    raise ValueError(f"variant must be 1 or 2, got {variant}")


def _check_encode_shapes(frame, comp, x):
    if comp.total != frame.num_vectors:
        raise ShapeError(
            f"composition of {comp.total} does not match frame with "
            f"{frame.num_vectors} vectors"
        )
    x = np.asarray(x)
    if x.shape != (frame.dim,):
        raise ShapeError(f"expected source vector of length {frame.dim}, got {x.shape}")


def expand_codeword(mu, comp, code):
    """Sorted-position reconstruction values: expanded initial codeword with
    the code's signs applied."""
    if mu.variant != code.variant:
        raise ValueError(
            f"initial codeword variant {mu.variant} != code variant {code.variant}"
        )
    return mu.expand(comp) * code.sign_vector()


def canonical_decode(frame, comp, mu, code):
    """Synthesis with the canonical dual of the permuted (and sign-restored)
    initial codeword."""
    values = expand_codeword(mu, comp, code)
    yhat = np.empty(comp.total)
    yhat[np.asarray(code.perm)] = values
    return frame.pinv @ yhat


@dataclass(frozen=True, eq=False)
class ConsistencySystem:
    """Inequality description of an encoded cell: {x : B x >= 0}."""

    matrix: np.ndarray
    frame: object
    composition: Composition
    code: FpqCode
    variant: int

    def check(self, x):
        """Minimum constraint value at x (+inf when there are no rows)."""
        if self.matrix.shape[0] == 0:
            return np.inf
        return float((self.matrix @ np.asarray(x, dtype=float)).min())

    def is_consistent(self, x, tol=CONSISTENCY_TOL):
        return self.check(x) >= tol


def consistency_system(frame, comp, code):
    """Assemble the cell system for a code.  Variant I applies the
    differencing matrix to the permuted frame; Variant II uses the extended
    matrix on the sign-corrected permuted frame.  A single block has no
    constraints and yields an empty system."""
    permuted = frame.matrix[np.asarray(code.perm), :]
    if code.variant == 1:
        delta = _difference_matrix_cached(comp.parts)
        b = delta @ permuted
    else:
        if comp.num_blocks < 2:
            b = np.zeros((0, frame.dim))
        else:
            delta = _extended_difference_matrix_cached(comp.parts)
            b = delta @ (code.sign_vector()[:, None] * permuted)
    return ConsistencySystem(
        matrix=b, frame=frame, composition=comp, code=code, variant=code.variant
    )


def fpq_rate(comp, variant, n):
    """Per-component rate: log2 of the canonical permutation count, plus one
    bit per coded sign for Variant II, over the source dimension."""
    log_perms = math.log2(psc.codebook_size(comp, variant=1))
    if variant == 1:
        return log_perms / n
    if variant == 2:
        return (comp.total - comp.parts[-1] + log_perms) / n
    raise ValueError(f"variant must be 1 or 2, got {variant}")


def cell_has_interior(frame, comp, code, tol=1e-9):
    """LP decision: does the cell contain a ball?  Maximizes the minimum
    constraint slack over the unit box (cells are cones, so any bounded
    cross-section decides)."""
    system = consistency_system(frame, comp, code)
    b_mat = system.matrix
    n = frame.dim
    if b_mat.shape[0] == 0:
        return True
    rows = b_mat.shape[0]
    a = np.zeros((rows + 2 * n, n + 1))
    a[:rows, :n] = -b_mat
    a[:rows, n] = 1.0
    a[rows : rows + n, :n] = np.eye(n)
    a[rows + n :, :n] = -np.eye(n)
    rhs = np.concatenate([np.zeros(rows), np.ones(2 * n)])
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    result = solve_lp(LpProblem(c=cost, a=a, b=rhs))
    if not result.is_optimal:
        raise RuntimeError(f"interior LP ended with status {result.status}")
    return bool(-result.objective > tol)


# ---------------------------------------------------------------------------
# Bitstream packing: fixed-rate serialization of a code.


def code_bit_length(comp, variant):
    perm_bits = max(math.ceil(math.log2(psc.codebook_size(comp, variant=1))), 0)
    sign_bits = comp.total - comp.parts[-1] if variant == 2 else 0
    return perm_bits, sign_bits


def pack_code(code, comp):
    """Serialize (variant, composition, permutation rank, coded sign bits)
    into bytes.  The payload occupies exactly the ceiling of the fixed-rate
    bit count."""
    m = comp.total
    if m > 255:
        raise ValueError("bitstream format supports at most 255 frame vectors")
    perm_rank = psc.rank_codeword(psc.PscCodeword(perm=code.perm), comp)
    perm_bits, sign_bits = code_bit_length(comp, code.variant)
    payload = perm_rank << sign_bits
    for i in range(sign_bits):
        if code.signs[i] < 0:
            payload |= 1 << i
    total_bits = perm_bits + sign_bits
    n_bytes = (total_bits + 7) // 8 if total_bits else 0
    mask = comp.to_mask()
    mask_bytes = (max(m - 1, 1) + 7) // 8
    return bytes(
        [code.variant, m]
        + list(mask.to_bytes(mask_bytes, "big"))
        + list(payload.to_bytes(n_bytes, "big"))
    )


def unpack_code(data):
    """Inverse of pack_code.  Returns (code, composition)."""
    variant, m = data[0], data[1]
    mask_bytes = (max(m - 1, 1) + 7) // 8
    mask = int.from_bytes(data[2 : 2 + mask_bytes], "big")
    comp = Composition.from_mask(m, mask)
    perm_bits, sign_bits = code_bit_length(comp, variant)
    payload = int.from_bytes(data[2 + mask_bytes :], "big")
    bits = payload & ((1 << sign_bits) - 1)
    perm_rank = payload >> sign_bits
    perm = psc.unrank_codeword(perm_rank, comp, variant=1).perm
    signs = tuple(
        -1 if (i < sign_bits and bits >> i & 1) else 1 for i in range(m)
    )
    return FpqCode(perm=perm, signs=signs, variant=variant), comp


# ---------------------------------------------------------------------------
# Linear reconstruction consistency checks.


@dataclass(frozen=True)
class LinearReconstructionReport:
    """Structure test on A = F R together with an empirical consistency probe
    over random (composition, initial codeword, source) draws."""

    form: str  # "scaled_identity" | "scaled_identity_plus_column_constant" | "other"
    variant_form_holds: bool
    scale: float | None
    max_form_residual: float
    trials: int
    violations: int
    worst_margin: float
    example: tuple | None


def _product_form(a_mat, tol=1e-9):
    m = a_mat.shape[0]
    if m == 1:
        col_b = np.zeros(1)
        scale = float(a_mat[0, 0])
        resid = 0.0
    else:
        off_mask = ~np.eye(m, dtype=bool)
        col_b = np.array([a_mat[off_mask[:, j], j].mean() for j in range(m)])
        resid = float(np.abs(a_mat - np.diag(np.diag(a_mat)) - col_b[None, :] * off_mask).max())
        diag_excess = np.diag(a_mat) - col_b
        scale = float(diag_excess.mean())
        resid = max(resid, float(np.abs(diag_excess - scale).max()))
    ref = max(1.0, float(np.abs(a_mat).max()))
    if resid < tol * ref and scale >= -tol:
        if np.abs(col_b).max(initial=0.0) < tol * ref:
            return "scaled_identity", scale, resid
        return "scaled_identity_plus_column_constant", scale, resid
    return "other", None, resid


def random_initial_codeword(rng, num_blocks, variant):
    draws = rng.standard_gaussian(num_blocks)
    if variant == 2:
        draws = np.abs(draws)
    values = tuple(float(v) for v in -np.sort(-draws))
    return InitialCodeword(values=values, variant=variant)


def check_linear_reconstruction(frame, r_mat, variant, trials=10**4, seed=0):
    """Probe whether reconstruction through ``r_mat`` stays consistent with
    the encoding, over random compositions, initial codewords, and sources.
    Also reports whether A = F R has the matrix form under which zero
    violations are guaranteed (for the given variant)."""
    rng = seed if isinstance(seed, Rng) else Rng(seed)
    a_mat = frame.matrix @ r_mat
    m, n = frame.num_vectors, frame.dim
    form, scale, resid = _product_form(a_mat)
    if variant == 1:
        form_holds = form in ("scaled_identity", "scaled_identity_plus_column_constant")
    else:
        form_holds = form == "scaled_identity" and m == n

    violations = 0
    worst = np.inf
    example = None
    for _ in range(trials):
        mask = int(rng.gen.integers(0, 1 << (m - 1))) if m > 1 else 0
        comp = Composition.from_mask(m, mask)
        mu = random_initial_codeword(rng, comp.num_blocks, variant)
        x = rng.standard_gaussian(n)
        code = fpq_encode(frame, comp, x, variant)
        yhat = np.empty(m)
        yhat[np.asarray(code.perm)] = expand_codeword(mu, comp, code)
        xhat = r_mat @ yhat
        margin = consistency_system(frame, comp, code).check(xhat)
        if margin < worst:
            worst = margin
            if margin < CONSISTENCY_TOL:
                example = (comp, mu, x)
        if margin < CONSISTENCY_TOL:
            violations += 1
    return LinearReconstructionReport(
        form=form,
        variant_form_holds=form_holds,
        scale=scale,
        max_form_residual=resid,
        trials=trials,
        violations=violations,
        worst_margin=float(worst),
        example=example,
    )
