"""Analysis frames for permutation quantization: trigonometric tight frames,
sign-modulated variants, random sphere frames, and classification predicates
(tightness, unit norm, zero sum, restricted equiangularity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import Rng, RankError, ShapeError, pseudo_inverse, symmetric_eigenvalues

STRUCTURAL_TOL = 1e-10  # exact identities (trig accumulation allowance)
FLAG_TOL = 1e-9  # classification flags


@dataclass(frozen=True, eq=False)
class Frame:
    """An M x N analysis operator with full column rank and its cached
    pseudo-inverse.  Row k is the k-th frame vector."""

    matrix: np.ndarray
    pinv: np.ndarray

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] < matrix.shape[1]:
            raise ShapeError(
                f"frame matrix must be M x N with M >= N, got {matrix.shape}"
            )
        pinv = pseudo_inverse(matrix)
        matrix.setflags(write=False)
        pinv.setflags(write=False)
        return cls(matrix=matrix, pinv=pinv)

    @property
    def num_vectors(self):
        return self.matrix.shape[0]

    @property
    def dim(self):
        return self.matrix.shape[1]

    @property
    def redundancy(self):
        return self.matrix.shape[0] / self.matrix.shape[1]

    @property
    def vectors(self):
        """Frame vectors as rows."""
        return self.matrix

    def expand(self, x):
        """Analysis map y = Fx."""
        return self.matrix @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class FrameReport:
    lower_bound: float
    upper_bound: float
    is_tight: bool
    is_unit_norm: bool
    is_zero_sum: bool
    is_restricted_etf: bool
    equiangular_constant: float | None
    is_equiangular_abs: bool
    equiangular_constant_abs: float | None


def real_htf(n, m):
    """Real harmonic tight frame of m vectors in R^n (always a UNTF).

    Row k+1, k = 0..m-1, holds cos/sin samples at odd multiples of k*pi/m for
    even n, and a constant first coordinate plus samples at even multiples of
    k*pi/m for odd n, all scaled by sqrt(2/n).
    """
    if n < 1 or m < n:
        raise ShapeError(f"need m >= n >= 1, got n={n}, m={m}")
    k = np.arange(m)[:, None]
    scale = np.sqrt(2.0 / n)
    if n % 2 == 0:
        freqs = np.arange(1, n, 2)[None, :]  # 1, 3, ..., n-1
        angles = k * freqs * np.pi / m
        rows = scale * np.hstack([np.cos(angles), np.sin(angles)])
    else:
        freqs = np.arange(2, n, 2)[None, :]  # 2, 4, ..., n-1
        angles = k * freqs * np.pi / m
        const = np.full((m, 1), 1.0 / np.sqrt(2.0))
        rows = scale * np.hstack([const, np.cos(angles), np.sin(angles)])
    return Frame.from_matrix(rows)


def modulated_htf(n, m, gamma=-1):
    """Harmonic tight frame with rows sign-modulated by gamma * (-1)^k,
    k = 1..m.  gamma=-1 makes row 1 keep its sign."""
    if gamma not in (1, -1):
        raise ValueError(f"gamma must be +1 or -1, got {gamma}")
    base = real_htf(n, m)
    signs = gamma * np.where(np.arange(1, m + 1) % 2 == 0, 1.0, -1.0)
    return Frame.from_matrix(signs[:, None] * base.matrix)


def random_sphere_frame(n, m, seed):
    """Frame with rows drawn i.i.d. uniformly from the unit sphere in R^n."""
    rng = seed if isinstance(seed, Rng) else Rng(seed)
    for _ in range(16):
        rows = rng.uniform_unit_sphere(n, count=m)
        try:
            return Frame.from_matrix(rows)
        except RankError:
            continue  # rank-deficient draw has probability zero; resample
    raise RankError("could not draw a full-rank sphere frame in 16 attempts")


def classify(frame, flag_tol=FLAG_TOL):
    """Frame bounds plus tightness / unit-norm / zero-sum / equiangularity
    flags.  The restricted (signed) equiangular constant is reported when all
    off-diagonal inner products agree; the absolute-value sense is flagged
    separately."""
    f = frame.matrix
    m, n = f.shape
    evals = symmetric_eigenvalues(f.T @ f)
    lower, upper = float(evals[0]), float(evals[-1])
    is_tight = (upper - lower) < flag_tol
    row_norms = np.linalg.norm(f, axis=1)
    is_unit_norm = bool(np.abs(row_norms - 1.0).max() < flag_tol)
    is_zero_sum = bool(np.abs(f.sum(axis=0)).max() < flag_tol)

    gram = f @ f.T
    off = gram[~np.eye(m, dtype=bool)]
    is_untf = is_tight and is_unit_norm
    c_signed = None
    is_restricted = False
    if off.size == 0:
        c_signed = 0.0
        is_restricted = is_untf
    elif is_untf and (off.max() - off.min()) < flag_tol:
        c_signed = float(off.mean())
        is_restricted = True
    abs_off = np.abs(off)
    c_abs = None
    is_equiangular_abs = False
    if abs_off.size == 0:
        c_abs = 0.0
        is_equiangular_abs = is_untf
    elif is_untf and (abs_off.max() - abs_off.min()) < flag_tol:
        c_abs = float(abs_off.mean())
        is_equiangular_abs = True

    return FrameReport(
        lower_bound=lower,
        upper_bound=upper,
        is_tight=is_tight,
        is_unit_norm=is_unit_norm,
        is_zero_sum=is_zero_sum,
        is_restricted_etf=is_restricted,
        equiangular_constant=c_signed,
        is_equiangular_abs=is_equiangular_abs,
        equiangular_constant_abs=c_abs,
    )


def save_frame(frame, path):
    """Plain-text format: first line "M N", then M rows of N decimals whose
    repr round-trips exactly."""
    m, n = frame.matrix.shape
    lines = [f"{m} {n}"]
    for row in frame.matrix:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_frame(path):
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split("\n")
    header = tokens[0].split()
    m, n = int(header[0]), int(header[1])
    rows = [[float(v) for v in tokens[1 + i].split()] for i in range(m)]
    matrix = np.array(rows, dtype=float)
    if matrix.shape != (m, n):
        raise ShapeError(f"file declared {m}x{n} but parsed {matrix.shape}")
    return Frame.from_matrix(matrix)
