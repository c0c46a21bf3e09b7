"""Solver and substrate tests, each nontrivial path checked against an
independent oracle (vertex enumeration, projected gradient, characteristic
polynomial roots)."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpq import numkit
from fpq.frames import modulated_htf
from fpq.numkit import (
    LpProblem,
    QpProblem,
    RankError,
    Rng,
    ShapeError,
    pseudo_inverse,
    solve_lp,
    solve_qp,
    symmetric_eigenvalues,
)


# ---------------------------------------------------------------------------
# pseudo_inverse


def test_pinv_identity():
    assert np.abs(pseudo_inverse(np.eye(3)) - np.eye(3)).max() < 1e-14


def test_pinv_untf_is_scaled_transpose():
    f = modulated_htf(2, 4).matrix
    assert np.abs(pseudo_inverse(f) - 0.5 * f.T).max() < 1e-12


def test_pinv_defining_identities():
    rng = Rng(5)
    f = rng.standard_gaussian(3, count=5)
    g = pseudo_inverse(f)
    assert np.abs(g @ f - np.eye(3)).max() < 1e-10
    assert np.abs(f @ g @ f - f).max() < 1e-10
    assert np.abs(g @ f @ g - g).max() < 1e-10
    proj = f @ g
    assert np.abs(proj @ proj - proj).max() < 1e-10
    assert np.abs(proj - proj.T).max() < 1e-10


def test_pinv_rank_deficient_raises():
    f = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RankError):
        pseudo_inverse(f)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_pinv_identities_random(seed):
    rng = Rng(seed)
    n = int(rng.gen.integers(2, 5))
    m = int(rng.gen.integers(n, n + 4))
    f = rng.standard_gaussian(n, count=m)
    g = pseudo_inverse(f)
    assert np.abs(f @ g @ f - f).max() < 1e-10
    assert np.abs(g @ f @ g - g).max() < 1e-10


# ---------------------------------------------------------------------------
# solve_lp


def _lp_vertex_oracle(c, a, b):
    """Brute-force vertex enumeration for small bounded LPs."""
    c, a, b = np.asarray(c, float), np.asarray(a, float), np.asarray(b, float)
    n = a.shape[1]
    best = None
    for rows in itertools.combinations(range(a.shape[0]), n):
        sub = a[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        z = np.linalg.solve(sub, b[list(rows)])
        if (a @ z <= b + 1e-9).all():
            val = float(c @ z)
            if best is None or val < best:
                best = val
    return best


def test_lp_single_variable():
    res = solve_lp(LpProblem(c=[-1.0], a=[[1.0]], b=[1.0]))
    assert res.is_optimal
    assert abs(res.z[0] - 1.0) < 1e-10


def test_lp_max_slack_corner():
    # maximize delta s.t. x1 - x2 >= delta, |xi| <= 1/2 - delta
    a = np.array(
        [[-1, 1, 1], [1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]], dtype=float
    )
    b = np.array([0.0, 0.5, 0.5, 0.5, 0.5])
    c = np.array([0.0, 0.0, -1.0])
    res = solve_lp(LpProblem(c=c, a=a, b=b))
    assert res.is_optimal
    assert np.abs(res.z - np.array([1 / 6, -1 / 6, 1 / 3])).max() < 1e-9
    assert abs(res.objective - _lp_vertex_oracle(c, a, b)) < 1e-9


def test_lp_infeasible_status():
    res = solve_lp(LpProblem(c=[0.0], a=[[1.0], [-1.0]], b=[1.0, -2.0]))
    assert res.status == "infeasible"


def test_lp_unbounded_status():
    res = solve_lp(LpProblem(c=[-1.0], a=[[-1.0]], b=[0.0]))
    assert res.status == "unbounded"


def test_lp_negative_rhs_needs_phase1():
    # x >= 2, minimize x
    res = solve_lp(LpProblem(c=[1.0], a=[[-1.0]], b=[-2.0]))
    assert res.is_optimal
    assert abs(res.z[0] - 2.0) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_lp_matches_vertex_oracle(seed):
    rng = Rng(seed)
    n = int(rng.gen.integers(2, 4))
    extra = int(rng.gen.integers(1, 4))
    a = np.vstack([np.eye(n), -np.eye(n), rng.standard_gaussian(n, count=extra)])
    z0 = rng.uniform_box(n)
    b = a @ z0 + rng.gen.uniform(0.05, 1.0, size=a.shape[0])
    c = rng.standard_gaussian(n)
    res = solve_lp(LpProblem(c=c, a=a, b=b))
    assert res.is_optimal
    assert (a @ res.z <= b + 1e-9).all()
    oracle = _lp_vertex_oracle(c, a, b)
    assert abs(res.objective - oracle) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_lp_tightening_never_improves(seed):
    rng = Rng(seed)
    n = int(rng.gen.integers(2, 4))
    a = np.vstack([np.eye(n), -np.eye(n)])
    z0 = rng.uniform_box(n)
    b = a @ z0 + rng.gen.uniform(0.05, 1.0, size=2 * n)
    c = rng.standard_gaussian(n)
    base = solve_lp(LpProblem(c=c, a=a, b=b))
    row = rng.standard_gaussian(n)
    a2 = np.vstack([a, row[None, :]])
    b2 = np.concatenate([b, [row @ z0 + 0.05]])
    tightened = solve_lp(LpProblem(c=c, a=a2, b=b2))
    assert base.is_optimal and tightened.is_optimal
    assert tightened.objective >= base.objective - 1e-8


def test_lp_dimension_mismatch():
    with pytest.raises(ShapeError):
        LpProblem(c=[1.0, 2.0], a=[[1.0]], b=[1.0])


# ---------------------------------------------------------------------------
# solve_qp


def test_qp_halfplane_cone_direction():
    # minimize 0.5||x||^2 - delta s.t. (x1 - x2)/sqrt(2) >= delta
    z2 = 1 / np.sqrt(2)
    h = np.zeros((3, 3))
    h[0, 0] = h[1, 1] = 1.0
    z = solve_qp(QpProblem(h=h, c=[0, 0, -1.0], a=[[-z2, z2, 1.0]], b=[0.0]))
    direction = z[:2] / np.linalg.norm(z[:2])
    assert np.abs(direction - np.array([z2, -z2])).max() < 1e-8


def test_qp_unconstrained_zero():
    z = solve_qp(QpProblem(h=np.eye(2), c=np.zeros(2), a=np.zeros((0, 2)), b=np.zeros(0)))
    assert np.abs(z).max() < 1e-10


def _pg_box_oracle(h, c, lo, hi, iters=10**6):
    step = 1.0 / (np.linalg.eigvalsh(h)[-1] + 1e-9)
    z = np.zeros_like(c)
    for _ in range(iters):
        z = np.clip(z - step * (h @ z + c), lo, hi)
    return z


def test_qp_matches_projected_gradient_oracle():
    rng = Rng(11)
    for _ in range(2):
        n = 4
        g = rng.standard_gaussian(n, count=n)
        h = g.T @ g + 0.5 * np.eye(n)
        c = rng.standard_gaussian(n)
        lo, hi = -0.6, 0.9
        a = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([np.full(n, hi), np.full(n, -lo)])
        z = solve_qp(QpProblem(h=h, c=c, a=a, b=b))
        oracle = _pg_box_oracle(h, c, lo, hi)
        assert np.abs(z - oracle).max() < 1e-5


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_qp_never_beats_zero_when_zero_feasible(seed):
    rng = Rng(seed)
    n = int(rng.gen.integers(2, 5))
    g = rng.standard_gaussian(n, count=n)
    h = g.T @ g
    c = rng.standard_gaussian(n)
    rows = int(rng.gen.integers(1, 4))
    a = rng.standard_gaussian(n, count=rows)
    b = rng.gen.uniform(0.0, 1.0, size=rows)
    z = solve_qp(QpProblem(h=h, c=c, a=a, b=b))
    assert (a @ z <= b + 1e-9).all()
    assert 0.5 * z @ h @ z + c @ z <= 1e-10


def test_qp_rejects_indefinite():
    with pytest.raises(ValueError):
        QpProblem(h=-np.eye(2), c=np.zeros(2), a=np.zeros((0, 2)), b=np.zeros(0))


def test_qp_rejects_asymmetric():
    with pytest.raises(ShapeError):
        QpProblem(h=[[1.0, 0.5], [0.0, 1.0]], c=np.zeros(2), a=np.zeros((0, 2)), b=np.zeros(0))


# ---------------------------------------------------------------------------
# symmetric_eigenvalues


def _charpoly_root_oracle(s):
    """Faddeev-LeVerrier characteristic polynomial, then companion-matrix
    roots; a path independent of the symmetric eigendecomposition."""
    n = s.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    m = np.eye(n)
    for k in range(1, n + 1):
        if k > 1:
            m = s @ m + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(s @ m) / k
    return np.sort(np.roots(coeffs).real)


def test_eig_identity():
    assert np.abs(symmetric_eigenvalues(np.eye(3)) - 1.0).max() < 1e-14


def test_eig_untf_gram():
    f = modulated_htf(2, 4).matrix
    ev = symmetric_eigenvalues(f.T @ f)
    assert np.abs(ev - 2.0).max() < 1e-12


def test_eig_matches_charpoly_oracle():
    rng = Rng(3)
    g = rng.standard_gaussian(4, count=4)
    s = (g + g.T) / 2
    ours = symmetric_eigenvalues(s)
    assert np.abs(ours - _charpoly_root_oracle(s)).max() < 1e-8


def test_eig_residual_and_trace():
    rng = Rng(4)
    g = rng.standard_gaussian(5, count=5)
    s = (g + g.T) / 2
    ev = symmetric_eigenvalues(s)
    assert abs(ev.sum() - np.trace(s)) < 1e-9
    vals, vecs = np.linalg.eigh(s)
    for lam, v in zip(vals, vecs.T):
        assert np.linalg.norm(s @ v - lam * v) < 1e-9 * np.linalg.norm(v)


def test_eig_rejects_nonsymmetric():
    with pytest.raises(ShapeError):
        symmetric_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))


# ---------------------------------------------------------------------------
# Rng


def test_rng_determinism():
    a = Rng(42)
    b = Rng(42)
    for _ in range(100):
        assert a.gen.random() == b.gen.random()


def test_rng_spawn_streams_differ_but_reproduce():
    a = Rng(7).spawn(3)
    b = Rng(7).spawn(3)
    c = Rng(7).spawn(4)
    va, vb, vc = a.gen.random(8), b.gen.random(8), c.gen.random(8)
    assert (va == vb).all()
    assert not (va == vc).all()


def test_sphere_draws_unit_norm():
    rng = Rng(0)
    v = rng.uniform_unit_sphere(8)
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12
    batch = rng.uniform_unit_sphere(5, count=100)
    assert np.abs(np.linalg.norm(batch, axis=1) - 1.0).max() < 1e-12


def test_uniform_box_moments():
    rng = Rng(123)
    draws = rng.uniform_box(1, count=10**6).ravel()
    se_mean = np.sqrt(1 / 12 / draws.size)
    assert abs(draws.mean()) < 3 * se_mean
    assert abs(draws.var() - 1 / 12) < 0.01 * (1 / 12)


def test_gaussian_moments():
    rng = Rng(9)
    draws = rng.standard_gaussian(1, count=10**6).ravel()
    assert abs(draws.mean()) < 3 / np.sqrt(draws.size)
    assert abs(draws.var() - 1.0) < 0.01
