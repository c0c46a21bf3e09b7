"""Frame construction and classification tests; the trigonometric frames are
checked against hand-evaluated rows, inner-product identities, and projector
forms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpq.frames import (
    Frame,
    classify,
    load_frame,
    modulated_htf,
    random_sphere_frame,
    real_htf,
    save_frame,
)
from fpq.numkit import Rng, ShapeError

ZETA = 1 / np.sqrt(2)


def test_real_htf_2_4_rows():
    expected = np.array([[1, 0], [ZETA, ZETA], [0, 1], [-ZETA, ZETA]])
    assert np.abs(real_htf(2, 4).matrix - expected).max() < 1e-12


def test_real_htf_2_3_inner_product():
    f = real_htf(2, 3).matrix
    assert abs(f[0] @ f[1] - 0.5) < 1e-12


@pytest.mark.parametrize("n,m", [(1, 3), (2, 5), (3, 3), (3, 7), (4, 9), (5, 8), (6, 11)])
def test_real_htf_is_untf(n, m):
    f = real_htf(n, m).matrix
    assert np.abs(np.linalg.norm(f, axis=1) - 1.0).max() < 1e-12
    assert np.abs(f.T @ f - (m / n) * np.eye(n)).max() < 1e-10


def test_modulated_htf_matches_printed_matrix():
    expected = np.array([[1, 0], [-ZETA, -ZETA], [0, 1], [ZETA, -ZETA]])
    assert np.abs(modulated_htf(2, 4, -1).matrix - expected).max() < 1e-12


def test_modulated_htf_sign_convention():
    base = real_htf(3, 5).matrix
    mod = modulated_htf(3, 5, -1).matrix
    signs = [-(-1) ** k for k in range(1, 6)]
    for k in range(5):
        assert np.abs(mod[k] - signs[k] * base[k]).max() < 1e-15


def test_modulated_htf_zero_sum_when_m_is_n_plus_1():
    f = modulated_htf(4, 5).matrix
    assert np.abs(f.sum(axis=0)).max() < 1e-10


def test_modulated_htf_constant_inner_products():
    f = modulated_htf(3, 4).matrix
    gram = f @ f.T
    for k in range(4):
        for l in range(k + 1, 4):
            assert abs(gram[k, l] + 1 / 3) < 1e-12


def test_gamma_choices_differ_by_global_sign():
    a = modulated_htf(2, 4, -1).matrix
    b = modulated_htf(2, 4, 1).matrix
    assert np.abs(a + b).max() < 1e-15


def test_htf_rejects_bad_shapes():
    with pytest.raises(ShapeError):
        real_htf(3, 2)
    with pytest.raises(ValueError):
        modulated_htf(2, 4, gamma=2)


def test_random_sphere_frame_rows_and_determinism():
    f1 = random_sphere_frame(8, 100, seed=5)
    f2 = random_sphere_frame(8, 100, seed=5)
    assert np.abs(np.linalg.norm(f1.matrix, axis=1) - 1.0).max() < 1e-12
    assert (f1.matrix == f2.matrix).all()
    rep = classify(f1)
    assert 0 < rep.lower_bound <= rep.upper_bound < np.inf


def test_classify_modulated_htf_4_5():
    rep = classify(modulated_htf(4, 5))
    assert rep.is_tight and rep.is_unit_norm and rep.is_zero_sum
    assert rep.is_restricted_etf
    assert abs(rep.equiangular_constant + 0.25) < 1e-9
    assert rep.is_equiangular_abs
    assert abs(rep.equiangular_constant_abs - 0.25) < 1e-9


def test_classify_unmodulated_htf_not_restricted():
    rep = classify(real_htf(4, 5))
    assert rep.is_tight and rep.is_unit_norm
    assert not rep.is_restricted_etf  # off-diagonal signs alternate
    assert rep.is_equiangular_abs


def test_classify_identity():
    rep = classify(Frame.from_matrix(np.eye(4)))
    assert rep.is_tight and rep.is_unit_norm
    assert abs(rep.lower_bound - 1.0) < 1e-12
    assert abs(rep.upper_bound - 1.0) < 1e-12


@pytest.mark.parametrize("n", range(2, 11))
def test_lemma_gram_alternation(n):
    f = real_htf(n, n + 1).matrix
    gram = f @ f.T
    for k in range(n + 1):
        for l in range(k + 1, n + 1):
            assert abs(n * gram[k, l] - (-1) ** (k - l + 1)) < 1e-10


@pytest.mark.parametrize("n", range(2, 11))
def test_canonical_projection_form(n):
    m = n + 1
    frame = modulated_htf(n, m)
    target = np.eye(m) - np.ones((m, m)) / m
    assert np.abs(frame.matrix @ frame.pinv - target).max() < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_classify_rotation_invariant(seed):
    rng = Rng(seed)
    frame = modulated_htf(4, 5)
    u, _ = np.linalg.qr(rng.standard_gaussian(4, count=4))
    rotated = classify(Frame.from_matrix(frame.matrix @ u.T))
    base = classify(frame)
    assert rotated.is_tight == base.is_tight
    assert rotated.is_unit_norm == base.is_unit_norm
    assert rotated.is_restricted_etf == base.is_restricted_etf
    assert abs(rotated.lower_bound - base.lower_bound) < 1e-9
    assert abs(rotated.upper_bound - base.upper_bound) < 1e-9


def test_frame_text_roundtrip(tmp_path):
    frame = random_sphere_frame(3, 7, seed=2)
    path = tmp_path / "frame.txt"
    save_frame(frame, path)
    loaded = load_frame(path)
    assert (loaded.matrix == frame.matrix).all()


def test_frame_requires_full_rank():
    with pytest.raises(Exception):
        Frame.from_matrix(np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]))
