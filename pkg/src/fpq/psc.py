"""Permutation source codes: block compositions, Variant I/II encoding and
decoding, codebook sizing and rates, optimal initial codewords from order
statistics, Monte Carlo distortion, and lexicographic rank/unrank of
codewords for bitstream output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numkit import Rng, ShapeError


@dataclass(frozen=True)
class Composition:
    """Ordered positive integers; block i covers positions
    sum(parts[:i]) .. sum(parts[:i+1])-1 of the sorted vector."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if len(parts) < 1 or any(p < 1 for p in parts):
            raise ValueError(f"composition parts must be positive, got {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def total(self):
        return sum(self.parts)

    @property
    def num_blocks(self):
        return len(self.parts)

    def boundaries(self):
        """Cumulative block boundaries [0, n1, n1+n2, ..., total]."""
        return np.concatenate([[0], np.cumsum(self.parts)])

    def index_sets(self):
        bounds = self.boundaries()
        return [range(int(bounds[i]), int(bounds[i + 1])) for i in range(len(self.parts))]

    def block_labels(self):
        """Vector assigning each sorted position its block index."""
        return np.repeat(np.arange(len(self.parts)), self.parts)

    def refine(self, block, left):
        """Split ``block`` into sizes (left, rest)."""
        p = self.parts[block]
        if not 0 < left < p:
            raise ValueError(f"cannot split block of size {p} at {left}")
        return Composition(self.parts[:block] + (left, p - left) + self.parts[block + 1 :])

    def to_mask(self):
        """Bitmask over the total-1 gaps; bit g set means a block boundary
        after position g."""
        mask = 0
        for b in np.cumsum(self.parts[:-1]):
            mask |= 1 << (int(b) - 1)
        return mask

    @classmethod
    def from_mask(cls, total, mask):
        parts = []
        prev = 0
        for g in range(1, total):
            if mask >> (g - 1) & 1:
                parts.append(g - prev)
                prev = g
        parts.append(total - prev)
        return cls(tuple(parts))

    @classmethod
    def all_compositions(cls, total):
        """All 2^(total-1) ordered compositions, in bitmask order."""
        for mask in range(1 << (total - 1)):
            yield cls.from_mask(total, mask)


@dataclass(frozen=True)
class InitialCodeword:
    """Strictly descending block values; Variant II values are nonnegative."""

    values: tuple[float, ...]
    variant: int = 1

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if self.variant not in (1, 2):
            raise ValueError(f"variant must be 1 or 2, got {self.variant}")
        if any(a <= b for a, b in zip(values, values[1:])):
            raise ValueError(f"initial codeword must be strictly descending: {values}")
        if self.variant == 2 and values[-1] < 0:
            raise ValueError(f"Variant II initial codeword must be nonnegative: {values}")
        object.__setattr__(self, "values", values)

    def expand(self, comp):
        """Replicate value i over block i."""
        if len(self.values) != comp.num_blocks:
            raise ShapeError(
                f"codeword has {len(self.values)} values for {comp.num_blocks} blocks"
            )
        return np.repeat(np.asarray(self.values), comp.parts)


@dataclass(frozen=True)
class PscCodeword:
    """Canonical encoder output: ``perm[i]`` is the source index placed at
    sorted position i; ``signs`` (Variant II) follow sorted positions, with
    the last block fixed at +1 because those signs are not coded."""

    perm: tuple[int, ...]
    signs: tuple[int, ...] | None = None

    @property
    def variant(self):
        return 1 if self.signs is None else 2


def canonical_permutation(values, comp, by_magnitude=False):
    """Stable descending sort compatible with ``comp``: ties keep the earlier
    source index first, and indices are ascending within each block."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size != comp.total:
        raise ShapeError(f"expected vector of length {comp.total}, got {values.shape}")
    key = np.abs(values) if by_magnitude else values
    order = np.argsort(-key, kind="stable")
    bounds = comp.boundaries()
    for i in range(comp.num_blocks):
        lo, hi = bounds[i], bounds[i + 1]
        order[lo:hi] = np.sort(order[lo:hi])
    return order


def encode_v1(x, comp):
    perm = canonical_permutation(x, comp)
    return PscCodeword(perm=tuple(int(i) for i in perm))


def encode_v2(x, comp):
    x = np.asarray(x, dtype=float)
    perm = canonical_permutation(x, comp, by_magnitude=True)
    n_coded = comp.total - comp.parts[-1]
    signs = np.ones(comp.total, dtype=int)
    picked = x[perm[:n_coded]]
    signs[:n_coded] = np.where(picked < 0, -1, 1)
    return PscCodeword(perm=tuple(int(i) for i in perm), signs=tuple(int(s) for s in signs))


def decode(code, mu, comp):
    """Codeword vector: the initial codeword expanded over blocks, signed
    (Variant II), and sent back through the inverse permutation."""
    if mu.variant != code.variant:
        raise ValueError(f"codeword variant {code.variant} != initial codeword variant {mu.variant}")
    expanded = mu.expand(comp)
    if len(code.perm) != comp.total:
        raise ShapeError(f"permutation length {len(code.perm)} != {comp.total}")
    if code.signs is not None:
        expanded = expanded * np.asarray(code.signs, dtype=float)
    out = np.empty(comp.total)
    out[np.asarray(code.perm)] = expanded
    return out


def codebook_size(comp, variant=1, mu_last_zero=False):
    """Exact codebook size; Variant II appends a sign bit per coded position
    (all positions unless the smallest block's value is zero)."""
    size = math.factorial(comp.total)
    for p in comp.parts:
        size //= math.factorial(p)
    if variant == 2:
        h = comp.total - comp.parts[-1] if mu_last_zero else comp.total
        size <<= h
    return size


def rate(comp, variant=1, n=None, mu_last_zero=False):
    """Per-component rate log2(L)/n."""
    if n is None:
        n = comp.total
    return math.log2(codebook_size(comp, variant, mu_last_zero)) / n


def order_statistic_means(source, n, magnitude=False, trials=10**6, seed=0):
    """Means of the descending order statistics of an i.i.d. source
    (components of x, or of |x| when ``magnitude``).

    Returns (means, standard_errors).  The uniform(-1/2,1/2) source has a
    closed form, so ``trials`` is ignored there and the errors are zero.
    """
    if source == "uniform":
        ranks = np.arange(1, n + 1)
        if magnitude:
            means = 0.5 * (n + 1 - ranks) / (n + 1)
        else:
            means = (n + 1 - ranks) / (n + 1) - 0.5
        return means, np.zeros(n)
    if source != "gaussian":
        raise ValueError(f"unknown source {source!r}")
    rng = seed if isinstance(seed, Rng) else Rng(seed)
    total = np.zeros(n)
    total_sq = np.zeros(n)
    done = 0
    chunk = 200_000
    while done < trials:
        take = min(chunk, trials - done)
        draws = rng.standard_gaussian(n, count=take)
        if magnitude:
            draws = np.abs(draws)
        draws = -np.sort(-draws, axis=1)
        total += draws.sum(axis=0)
        total_sq += (draws**2).sum(axis=0)
        done += take
    means = total / trials
    var = total_sq / trials - means**2
    return means, np.sqrt(np.maximum(var, 0.0) / trials)


def optimal_initial_codeword(comp, means, variant=1):
    """Block averages of the order-statistic means; ties between adjacent
    blocks (possible only up to Monte Carlo noise) are nudged apart."""
    means = np.asarray(means, dtype=float)
    if means.size != comp.total:
        raise ShapeError(f"means length {means.size} != {comp.total}")
    if np.any(np.diff(means) > 1e-12):
        raise ValueError("order-statistic means must be non-increasing")
    bounds = comp.boundaries()
    mu = np.array(
        [means[bounds[i] : bounds[i + 1]].mean() for i in range(comp.num_blocks)]
    )
    eps = 1e-12 * max(1.0, float(np.abs(mu).max()))
    for i in range(comp.num_blocks - 2, -1, -1):
        if mu[i] <= mu[i + 1]:
            mu[i] = mu[i + 1] + eps
    if variant == 2 and mu[-1] < 0:
        mu[-1] = 0.0
        for i in range(comp.num_blocks - 2, -1, -1):
            if mu[i] <= mu[i + 1]:
                mu[i] = mu[i + 1] + eps
    return InitialCodeword(values=tuple(float(v) for v in mu), variant=variant)


def psc_distortion(comp, mu, source, variant=1, trials=10**5, seed=0):
    """Monte Carlo per-letter distortion of the optimally encoded code:
    squared distance between the (magnitude) order statistics and the
    expanded initial codeword.  Returns (estimate, standard_error)."""
    if source not in ("uniform", "gaussian"):
        raise ValueError(f"unknown source {source!r}")
    rng = seed if isinstance(seed, Rng) else Rng(seed)
    expanded = mu.expand(comp)
    n = comp.total
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = 200_000
    while done < trials:
        take = min(chunk, trials - done)
        if source == "uniform":
            draws = rng.uniform_box(n, count=take)
        else:
            draws = rng.standard_gaussian(n, count=take)
        if variant == 2:
            draws = np.abs(draws)
        draws = -np.sort(-draws, axis=1)
        per_trial = ((draws - expanded) ** 2).sum(axis=1) / n
        total += per_trial.sum()
        total_sq += (per_trial**2).sum()
        done += take
    mean = total / trials
    var = total_sq / trials - mean**2
    return mean, math.sqrt(max(var, 0.0) / trials)


# ---------------------------------------------------------------------------
# Lexicographic rank/unrank of codewords.


def _assignment(code, comp):
    labels = np.empty(comp.total, dtype=int)
    labels[np.asarray(code.perm)] = comp.block_labels()
    return labels


def _arrangements(counts):
    total = sum(counts)
    out = math.factorial(total)
    for c in counts:
        out //= math.factorial(c)
    return out


def rank_codeword(code, comp):
    """Lexicographic rank.  Variant I ranks the block-assignment word; the
    Variant II rank appends the coded sign bits as the low-order digits."""
    labels = _assignment(code, comp)
    counts = list(comp.parts)
    r = 0
    for pos in range(comp.total):
        s = int(labels[pos])
        for t in range(s):
            if counts[t] > 0:
                counts[t] -= 1
                r += _arrangements(counts)
                counts[t] += 1
        counts[s] -= 1
    if code.signs is None:
        return r
    n_coded = comp.total - comp.parts[-1]
    bits = 0
    for i in range(n_coded):
        if code.signs[i] < 0:
            bits |= 1 << i
    return (r << n_coded) | bits


def unrank_codeword(index, comp, variant=1):
    """Inverse of rank_codeword over {0 .. codebook_size-1} (Variant II sizes
    use the uncoded-smallest-block convention)."""
    size = codebook_size(comp, variant, mu_last_zero=True)
    if not 0 <= index < size:
        raise IndexError(f"rank {index} out of range for codebook of size {size}")
    n_coded = comp.total - comp.parts[-1]
    bits = 0
    if variant == 2:
        bits = index & ((1 << n_coded) - 1)
        index >>= n_coded
    counts = list(comp.parts)
    labels = np.empty(comp.total, dtype=int)
    for pos in range(comp.total):
        for s in range(len(counts)):
            if counts[s] == 0:
                continue
            counts[s] -= 1
            block = _arrangements(counts)
            if index < block:
                labels[pos] = s
                break
            counts[s] += 1
            index -= block
    perm = np.concatenate(
        [np.flatnonzero(labels == s) for s in range(comp.num_blocks)]
    )
    if variant == 1:
        return PscCodeword(perm=tuple(int(i) for i in perm))
    signs = tuple(
        -1 if (i < n_coded and bits >> i & 1) else 1 for i in range(comp.total)
    )
    return PscCodeword(perm=tuple(int(i) for i in perm), signs=signs)
