"""Permutation source code tests: encoders against brute-force
nearest-neighbor search, distortion against quadrature, rank/unrank against
exhaustive enumeration."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpq import psc
from fpq.numkit import Rng
from fpq.psc import Composition, InitialCodeword, PscCodeword


def test_composition_validation_and_index_sets():
    comp = Composition((2, 3, 2))
    assert comp.total == 7
    assert [list(r) for r in comp.index_sets()] == [[0, 1], [2, 3, 4], [5, 6]]
    with pytest.raises(ValueError):
        Composition((2, 0, 1))


def test_composition_mask_roundtrip():
    for comp in Composition.all_compositions(6):
        assert Composition.from_mask(6, comp.to_mask()) == comp
    assert len(list(Composition.all_compositions(6))) == 32


def test_initial_codeword_validation():
    with pytest.raises(ValueError):
        InitialCodeword((1.0, 1.0), 1)
    with pytest.raises(ValueError):
        InitialCodeword((0.5, -0.1), 2)
    InitialCodeword((0.5, -0.1), 1)  # Variant I may go negative


# ---------------------------------------------------------------------------
# encoding


def test_encode_v1_two_components():
    code = psc.encode_v1(np.array([0.2, 0.7]), Composition((1, 1)))
    assert code.perm == (1, 0)


def test_encode_v1_three_components():
    code = psc.encode_v1(np.array([3.0, 1.0, 2.0]), Composition((1, 1, 1)))
    assert code.perm == (0, 2, 1)


def test_encode_v1_stable_ties():
    code = psc.encode_v1(np.array([0.5, 0.5, 0.1]), Composition((2, 1)))
    assert code.perm == (0, 1, 2)  # earlier index wins within the tie


def test_encode_v2_two_components():
    code = psc.encode_v2(np.array([-0.7, 0.2]), Composition((1, 1)))
    assert code.perm == (0, 1)
    assert code.signs == (-1, 1)  # last block sign is +1 by convention


def test_encode_v2_three_components():
    code = psc.encode_v2(np.array([0.1, -0.5, 0.4]), Composition((1, 1, 1)))
    assert code.perm == (1, 2, 0)
    assert code.signs == (-1, 1, 1)


def test_decode_identity_and_swap():
    mu = InitialCodeword((1.0, -1.0), 1)
    comp = Composition((1, 1))
    out = psc.decode(PscCodeword(perm=(0, 1)), mu, comp)
    assert np.abs(out - np.array([1.0, -1.0])).max() < 1e-15
    out = psc.decode(PscCodeword(perm=(1, 0)), mu, comp)
    assert np.abs(out - np.array([-1.0, 1.0])).max() < 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_reencoding_decoded_vector_is_idempotent(seed):
    rng = Rng(seed)
    n = int(rng.gen.integers(2, 7))
    comp = Composition.from_mask(n, int(rng.gen.integers(0, 1 << (n - 1))))
    variant = int(rng.gen.integers(1, 3))
    values = -np.sort(-np.abs(rng.standard_gaussian(comp.num_blocks))) if variant == 2 else -np.sort(-rng.standard_gaussian(comp.num_blocks))
    mu = InitialCodeword(tuple(values), variant)
    x = rng.standard_gaussian(n)
    code = psc.encode_v1(x, comp) if variant == 1 else psc.encode_v2(x, comp)
    decoded = psc.decode(code, mu, comp)
    recoded = psc.encode_v1(decoded, comp) if variant == 1 else psc.encode_v2(decoded, comp)
    redecoded = psc.decode(recoded, mu, comp)
    assert np.abs(decoded - redecoded).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_encoding_scale_invariance(seed):
    rng = Rng(seed)
    n = int(rng.gen.integers(2, 7))
    comp = Composition.from_mask(n, int(rng.gen.integers(0, 1 << (n - 1))))
    x = rng.standard_gaussian(n)
    alpha = float(rng.gen.uniform(0.01, 50))
    assert psc.encode_v1(x, comp) == psc.encode_v1(alpha * x, comp)
    assert psc.encode_v2(x, comp) == psc.encode_v2(alpha * x, comp)


# ---------------------------------------------------------------------------
# nearest-neighbor optimality against enumerated codebooks


def _enumerate_codebook(comp, mu, variant):
    n = comp.total
    vectors = []
    expanded = mu.expand(comp)
    for perm in sorted(set(itertools.permutations(expanded.tolist()))):
        base = np.array(perm)
        if variant == 1:
            vectors.append(base)
            continue
        nonzero = np.flatnonzero(np.abs(base) > 0)
        for signs in itertools.product((1.0, -1.0), repeat=len(nonzero)):
            v = base.copy()
            v[nonzero] *= signs
            vectors.append(v)
    return np.unique(np.array(vectors), axis=0)


@pytest.mark.parametrize(
    "parts,variant,values",
    [
        ((1, 1), 1, (0.6, -0.6)),
        ((2, 1), 1, (0.4, -0.9)),
        ((2, 2), 1, (0.8, 0.2)),
        ((1, 1, 1), 1, (1.0, 0.0, -1.0)),
        ((1, 1), 2, (0.7, 0.0)),
        ((2, 2), 2, (0.9, 0.0)),
        ((1, 2), 2, (1.3, 0.0)),
    ],
)
def test_encoder_is_nearest_neighbor(parts, variant, values):
    comp = Composition(parts)
    mu = InitialCodeword(values, variant)
    codebook = _enumerate_codebook(comp, mu, variant)
    if variant == 2:
        h = comp.total - comp.parts[-1]
        assert len(codebook) == psc.codebook_size(comp, 2, mu_last_zero=True) or h == 0
    rng = Rng(hash(parts) % 2**32)
    for _ in range(150):
        x = rng.standard_gaussian(comp.total)
        code = psc.encode_v1(x, comp) if variant == 1 else psc.encode_v2(x, comp)
        xhat = psc.decode(code, mu, comp)
        achieved = ((x - xhat) ** 2).sum()
        best = ((x[None, :] - codebook) ** 2).sum(axis=1).min()
        assert achieved <= best + 1e-10


# ---------------------------------------------------------------------------
# sizes and rates


def test_codebook_sizes():
    assert psc.codebook_size(Composition((1, 1, 1, 1)), 1) == 24
    assert psc.codebook_size(Composition((2, 2)), 1) == 6
    assert psc.codebook_size(Composition((1, 1)), 2, mu_last_zero=False) == 8
    assert psc.codebook_size(Composition((1, 1)), 2, mu_last_zero=True) == 4
    assert psc.codebook_size(Composition((21,) + (1,) * 4), 1) == math.factorial(25) // math.factorial(21)


def test_rates():
    assert abs(psc.rate(Composition((1, 1, 1, 1)), 1) - math.log2(24) / 4) < 1e-15
    assert psc.rate(Composition((5,)), 1) == 0.0
    assert abs(psc.rate(Composition((1, 1)), 2) - 1.5) < 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10**6))
def test_rate_size_consistency(n, seed):
    rng = Rng(seed)
    comp = Composition.from_mask(n, int(rng.gen.integers(0, 1 << (n - 1))))
    size = psc.codebook_size(comp, 1)
    assert abs(2 ** (n * psc.rate(comp, 1)) - size) <= 1e-9 * size


# ---------------------------------------------------------------------------
# order statistics and optimal codewords


def test_uniform_order_statistic_means_closed_form():
    means, err = psc.order_statistic_means("uniform", 2)
    assert np.abs(means - np.array([1 / 6, -1 / 6])).max() < 1e-15
    assert (err == 0).all()
    means5, _ = psc.order_statistic_means("uniform", 5)
    assert np.abs(means5 - (np.arange(5, 0, -1) / 6 - 0.5)).max() < 1e-15


def test_gaussian_max_mean_matches_known_value():
    means, err = psc.order_statistic_means("gaussian", 2, trials=4 * 10**5, seed=1)
    assert abs(means[0] - 1 / np.sqrt(np.pi)) < 3 * err[0]
    assert means[0] > 0 > means[1]


def test_order_statistic_means_sorted():
    for source, magnitude in [("uniform", False), ("uniform", True), ("gaussian", False), ("gaussian", True)]:
        means, _ = psc.order_statistic_means(source, 6, magnitude=magnitude, trials=10**4, seed=2)
        assert (np.diff(means) <= 1e-12).all()


def test_order_statistic_means_unknown_source():
    with pytest.raises(ValueError):
        psc.order_statistic_means("poisson", 3)


def test_optimal_initial_codeword_block_means():
    mu = psc.optimal_initial_codeword(Composition((1, 1)), np.array([1 / 6, -1 / 6]))
    assert mu.values == (1 / 6, -1 / 6)
    mu = psc.optimal_initial_codeword(Composition((2,)), np.array([1 / 6, -1 / 6]))
    assert abs(mu.values[0]) < 1e-15
    mu = psc.optimal_initial_codeword(Composition((2, 1)), np.array([3.0, 1.0, -1.0]))
    assert mu.values == (2.0, -1.0)


def test_optimal_initial_codeword_rejects_unsorted():
    with pytest.raises(ValueError):
        psc.optimal_initial_codeword(Composition((1, 1)), np.array([0.0, 1.0]))


# ---------------------------------------------------------------------------
# distortion


def test_single_block_distortion_is_source_variance():
    comp = Composition((4,))
    mu = InitialCodeword((0.0,), 1)
    d, se = psc.psc_distortion(comp, mu, "uniform", trials=2 * 10**5, seed=3)
    assert abs(d - 1 / 12) < 3 * se


def _gauss_legendre_distortion_oracle(mu1, mu2, order=24):
    """E[((max-mu1)^2 + (min-mu2)^2)/2] for two uniform(-1/2,1/2) components,
    by tensor quadrature split along the diagonal."""
    nodes, weights = np.polynomial.legendre.leggauss(order)

    def integrate_region(f):
        # integrate over x1 in (-1/2,1/2), x2 in (-1/2, x1)
        total = 0.0
        for xi, wi in zip(nodes, weights):
            x1 = xi / 2
            half_len = (x1 + 0.5) / 2
            mid = (x1 - 0.5) / 2
            inner = sum(
                wj * f(x1, mid + half_len * xj) for xj, wj in zip(nodes, weights)
            )
            total += wi * 0.5 * half_len * inner
        return total

    def integrand(hi, lo):
        return ((hi - mu1) ** 2 + (lo - mu2) ** 2) / 2

    return 2 * integrate_region(integrand)  # symmetric in the two orderings


def test_distortion_matches_quadrature_oracle():
    comp = Composition((1, 1))
    mu = InitialCodeword((1 / 6, -1 / 6), 1)
    oracle = _gauss_legendre_distortion_oracle(1 / 6, -1 / 6)
    d, se = psc.psc_distortion(comp, mu, "uniform", trials=3 * 10**5, seed=4)
    assert abs(d - oracle) < 3 * se


def test_optimal_codeword_beats_perturbations():
    comp = Composition((2, 2))
    means, _ = psc.order_statistic_means("uniform", 4)
    mu_opt = psc.optimal_initial_codeword(comp, means)
    d_opt, se = psc.psc_distortion(comp, mu_opt, "uniform", trials=2 * 10**5, seed=5)
    rng = Rng(6)
    for _ in range(10):
        delta = 0.05 * rng.standard_gaussian(2)
        values = np.asarray(mu_opt.values) + delta
        if values[0] <= values[1]:
            continue
        mu_pert = InitialCodeword(tuple(values), 1)
        d_pert, se_p = psc.psc_distortion(comp, mu_pert, "uniform", trials=2 * 10**5, seed=7)
        assert d_opt <= d_pert + 3 * np.hypot(se, se_p)


def test_refining_composition_reduces_distortion():
    means, _ = psc.order_statistic_means("uniform", 4)
    coarse = Composition((2, 2))
    fine = coarse.refine(0, 1)
    mu_c = psc.optimal_initial_codeword(coarse, means)
    mu_f = psc.optimal_initial_codeword(fine, means)
    d_c, se_c = psc.psc_distortion(coarse, mu_c, "uniform", trials=2 * 10**5, seed=8)
    d_f, se_f = psc.psc_distortion(fine, mu_f, "uniform", trials=2 * 10**5, seed=9)
    assert d_f <= d_c + 3 * np.hypot(se_c, se_f)


# ---------------------------------------------------------------------------
# rank / unrank


def test_rank_two_codewords():
    comp = Composition((1, 1))
    ranks = {psc.rank_codeword(psc.unrank_codeword(i, comp), comp) for i in range(2)}
    assert ranks == {0, 1}


def test_unrank_enumerates_multiset_permutations():
    comp = Composition((2, 2))
    words = []
    for i in range(6):
        code = psc.unrank_codeword(i, comp)
        labels = np.empty(4, dtype=int)
        labels[list(code.perm)] = comp.block_labels()
        words.append(tuple(labels + 1))
    assert words == sorted(set(itertools.permutations((1, 1, 2, 2))))


def test_rank_out_of_range():
    with pytest.raises(IndexError):
        psc.unrank_codeword(6, Composition((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_rank_unrank_roundtrip(n, seed):
    rng = Rng(seed)
    comp = Composition.from_mask(n, int(rng.gen.integers(0, 1 << (n - 1))))
    variant = int(rng.gen.integers(1, 3))
    size = psc.codebook_size(comp, variant, mu_last_zero=True)
    index = int(rng.gen.integers(0, size))
    code = psc.unrank_codeword(index, comp, variant)
    assert psc.rank_codeword(code, comp) == index
    x = rng.standard_gaussian(n)
    encoded = psc.encode_v1(x, comp) if variant == 1 else psc.encode_v2(x, comp)
    r = psc.rank_codeword(encoded, comp)
    assert psc.unrank_codeword(r, comp, variant) == encoded
