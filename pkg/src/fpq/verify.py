"""Executable invariant suite: every structural identity, consistency
property, and decoder guarantee the package relies on, run at configurable
scale with measured margins.  The CLI's ``verify`` subcommand exits nonzero
if any check fails.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import bench, decoders, psc, quantizer
from .frames import Frame, classify, modulated_htf, random_sphere_frame, real_htf
from .numkit import LpProblem, QpProblem, Rng, solve_lp, solve_qp
from .psc import Composition


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


def _random_composition(rng, total):
    mask = int(rng.gen.integers(0, 1 << (total - 1))) if total > 1 else 0
    return Composition.from_mask(total, mask)


def check_untf_bounds(seed=0, scale=1.0):
    worst = 0.0
    for n, m in [(2, 2), (2, 4), (3, 5), (4, 5), (4, 6), (5, 7), (6, 9)]:
        for frame in (real_htf(n, m), modulated_htf(n, m, -1), modulated_htf(n, m, 1)):
            rep = classify(frame)
            r = m / n
            worst = max(worst, abs(rep.lower_bound - r), abs(rep.upper_bound - r))
            if not (rep.is_tight and rep.is_unit_norm):
                return CheckResult("untf_bounds", False, worst, f"({n},{m}) not UNTF")
    return CheckResult("untf_bounds", worst < 1e-9, worst, "max |bound - M/N|")


def check_htf_gram_alternation(seed=0, scale=1.0):
    worst = 0.0
    for n in range(2, 11):
        f = real_htf(n, n + 1).matrix
        gram = f @ f.T
        for k in range(n + 1):
            for l in range(k + 1, n + 1):
                worst = max(worst, abs(n * gram[k, l] - (-1) ** (k - l + 1)))
    return CheckResult(
        "htf_gram_alternation", worst < 1e-10, worst, "max |N<phi_k,phi_l> -+ 1|"
    )


def check_mhtf_zero_sum(seed=0, scale=1.0):
    worst = 0.0
    for n in range(2, 11):
        for gamma in (-1, 1):
            f = modulated_htf(n, n + 1, gamma).matrix
            worst = max(worst, float(np.abs(f.sum(axis=0)).max()))
    return CheckResult("mhtf_zero_sum", worst < 1e-10, worst, "max |column sum|")


def check_mhtf_projection(seed=0, scale=1.0):
    worst = 0.0
    for n in range(2, 11):
        m = n + 1
        frame = modulated_htf(n, m)
        proj = frame.matrix @ frame.pinv
        target = np.eye(m) - np.ones((m, m)) / m
        worst = max(worst, float(np.abs(proj - target).max()))
    return CheckResult(
        "mhtf_projection", worst < 1e-10, worst, "max |FF+ - (I - J/M)|"
    )


def check_classify_rotation_invariance(seed=0, scale=1.0):
    rng = Rng(seed)
    worst = 0.0
    for frame in (modulated_htf(4, 5), random_sphere_frame(3, 6, rng)):
        base = classify(frame)
        g = rng.standard_gaussian(frame.dim, count=frame.dim)
        u, _ = np.linalg.qr(g)
        rotated = classify(Frame.from_matrix(frame.matrix @ u.T))
        worst = max(
            worst,
            abs(base.lower_bound - rotated.lower_bound),
            abs(base.upper_bound - rotated.upper_bound),
        )
        if (base.is_tight, base.is_unit_norm, base.is_restricted_etf) != (
            rotated.is_tight,
            rotated.is_unit_norm,
            rotated.is_restricted_etf,
        ):
            return CheckResult(
                "classify_rotation_invariance", False, worst, "flags changed"
            )
    return CheckResult(
        "classify_rotation_invariance", worst < 1e-9, worst, "max bound drift"
    )


def check_difference_matrix_rows(seed=0, scale=1.0):
    rng = Rng(seed)
    for total in range(2, 10):
        for _ in range(8):
            comp = _random_composition(rng, total)
            delta = quantizer.difference_matrix(comp)
            expected = quantizer.descending_constraint_count(comp)
            if delta.shape != (expected, total):
                return CheckResult(
                    "difference_matrix_rows", False, 0.0, f"bad shape for {comp.parts}"
                )
            for row in delta:
                pos = (row == 1).sum()
                negs = (row == -1).sum()
                zero = (row == 0).sum()
                if not (pos == 1 and negs == 1 and zero == total - 2):
                    return CheckResult(
                        "difference_matrix_rows", False, 0.0, f"bad row in {comp.parts}"
                    )
    return CheckResult("difference_matrix_rows", True, 0.0, "all rows +1/-1 pairs")


def check_encode_duality(seed=0, scale=1.0, delta_override=None):
    """Encoded point always satisfies its own cell system, exactly.  The
    override hook lets a corrupted differencing matrix prove the check can
    fail."""
    rng = Rng(seed)
    worst = np.inf
    trials = max(1, int(60 * scale))
    for variant in (1, 2):
        for _ in range(trials):
            n = int(rng.gen.integers(2, 5))
            m = int(rng.gen.integers(n, n + 4))
            frame = random_sphere_frame(n, m, rng)
            comp = _random_composition(rng, m)
            xs = rng.standard_gaussian(n, count=1)
            orders, signs = bench.encode_batch(frame, comp, xs, variant)
            override = None
            if delta_override is not None:
                override = delta_override(comp, variant)
            margins = bench.batch_consistency_margins(
                frame, comp, variant, orders, signs, xs, delta=override
            )
            finite = margins[np.isfinite(margins)]
            if finite.size:
                worst = min(worst, float(finite.min()))
    passed = worst >= 0.0 or not np.isfinite(worst)
    return CheckResult("encode_duality", bool(passed), float(worst), "min margin at encoded x")


def check_identity_frame_reduction(seed=0, scale=1.0):
    rng = Rng(seed)
    for _ in range(max(1, int(40 * scale))):
        n = int(rng.gen.integers(2, 6))
        frame = Frame.from_matrix(np.eye(n))
        comp = _random_composition(rng, n)
        x = rng.standard_gaussian(n)
        for variant in (1, 2):
            fcode = quantizer.fpq_encode(frame, comp, x, variant)
            pcode = psc.encode_v1(x, comp) if variant == 1 else psc.encode_v2(x, comp)
            if fcode.perm != pcode.perm:
                return CheckResult("identity_frame_reduction", False, 0.0, "perm differs")
            if variant == 2 and fcode.signs != pcode.signs:
                return CheckResult("identity_frame_reduction", False, 0.0, "signs differ")
            mu = quantizer.random_initial_codeword(rng, comp.num_blocks, variant)
            a = quantizer.canonical_decode(frame, comp, mu, fcode)
            b = psc.decode(pcode, mu, comp)
            if np.abs(a - b).max() > 1e-12:
                return CheckResult("identity_frame_reduction", False, 0.0, "decode differs")
    return CheckResult("identity_frame_reduction", True, 0.0, "codes and decodes match")


def check_canonical_consistency_n4m5(seed=0, scale=1.0):
    frame = modulated_htf(4, 5)
    rng = Rng(seed)
    trials = max(10, int(1000 * scale))
    worst = np.inf
    for comp in Composition.all_compositions(5):
        xs = rng.standard_gaussian(4, count=trials)
        orders, signs = bench.encode_batch(frame, comp, xs, 1)
        mus = np.sort(rng.standard_gaussian(comp.num_blocks, count=trials), axis=1)[:, ::-1]
        expanded = np.repeat(mus, comp.parts, axis=1)
        yhat = np.empty_like(expanded)
        np.put_along_axis(yhat, orders, expanded, axis=1)
        xhat = yhat @ frame.pinv.T
        margins = bench.batch_consistency_margins(frame, comp, 1, orders, signs, xhat)
        finite = margins[np.isfinite(margins)]
        if finite.size:
            worst = min(worst, float(finite.min()))
    return CheckResult(
        "canonical_consistency_n4m5", worst >= -1e-9, worst, "min decode margin"
    )


def check_canonical_violation_n4m6(seed=0, scale=1.0):
    frame = modulated_htf(4, 6)
    report = quantizer.check_linear_reconstruction(
        frame, np.asarray(frame.pinv), 1, trials=max(100, int(2000 * scale)), seed=seed
    )
    detail = f"form={report.form}, violations={report.violations}"
    return CheckResult(
        "canonical_violation_n4m6",
        report.violations > 0 and report.form == "other",
        report.worst_margin,
        detail,
    )


def check_variant2_basis_consistency(seed=0, scale=1.0):
    rng = Rng(seed)
    f_mat = rng.standard_gaussian(4, count=4)
    while abs(np.linalg.det(f_mat)) < 1e-3:
        f_mat = rng.standard_gaussian(4, count=4)
    frame = Frame.from_matrix(f_mat)
    r_mat = 2 * np.linalg.inv(f_mat)
    report = quantizer.check_linear_reconstruction(
        frame, r_mat, 2, trials=max(100, int(2000 * scale)), seed=seed + 1
    )
    return CheckResult(
        "variant2_basis_consistency",
        report.violations == 0 and report.variant_form_holds,
        report.worst_margin,
        f"form={report.form}, violations={report.violations}",
    )


def check_cell_partition_unity(seed=0, scale=1.0):
    rng = Rng(seed)
    frame = modulated_htf(2, 4)
    for parts in [(2, 2), (1, 1, 1, 1)]:
        comp = Composition(parts)
        systems = []
        for rank in range(psc.codebook_size(comp, variant=1)):
            perm = psc.unrank_codeword(rank, comp).perm
            code = quantizer.FpqCode(perm=perm, signs=(1,) * 4, variant=1)
            systems.append(quantizer.consistency_system(frame, comp, code))
        for _ in range(max(10, int(300 * scale))):
            x = rng.standard_gaussian(2)
            hits = sum(1 for s in systems if s.check(x) > -1e-12)
            if hits != 1:
                return CheckResult(
                    "cell_partition_unity", False, float(hits), f"{parts}: {hits} cells"
                )
    return CheckResult("cell_partition_unity", True, 1.0, "each x in exactly one cell")


def _enumerate_codebook(comp, mu, variant):
    """All decoded codeword vectors (brute force)."""
    n = comp.total
    out = []
    for perm_tuple in sorted(set(itertools.permutations(range(n)))):
        labels = np.empty(n, dtype=int)
        labels[list(perm_tuple)] = comp.block_labels()
        base = np.empty(n)
        base[list(perm_tuple)] = mu.expand(comp)
        if variant == 1:
            out.append(base)
        else:
            nonzero = np.flatnonzero(np.abs(base) > 0)
            for signs in itertools.product((1.0, -1.0), repeat=len(nonzero)):
                v = base.copy()
                v[nonzero] *= signs
                out.append(v)
    return np.unique(np.round(np.array(out), 12), axis=0)


def check_psc_nearest_neighbor(seed=0, scale=1.0):
    rng = Rng(seed)
    cases = [
        ((2, 1, 1), 1, psc.InitialCodeword((0.9, 0.1, -0.8), 1)),
        ((1, 1), 1, psc.InitialCodeword((0.5, -0.5), 1)),
        ((2, 2), 2, psc.InitialCodeword((0.7, 0.0), 2)),
        ((1, 2), 2, psc.InitialCodeword((1.1, 0.0), 2)),
    ]
    worst = 0.0
    for parts, variant, mu in cases:
        comp = Composition(parts)
        codebook = _enumerate_codebook(comp, mu, variant)
        for _ in range(max(5, int(60 * scale))):
            x = rng.standard_gaussian(comp.total)
            code = psc.encode_v1(x, comp) if variant == 1 else psc.encode_v2(x, comp)
            xhat = psc.decode(code, mu, comp)
            achieved = float(((x - xhat) ** 2).sum())
            best = float(((x[None, :] - codebook) ** 2).sum(axis=1).min())
            worst = max(worst, achieved - best)
    return CheckResult(
        "psc_nearest_neighbor", worst < 1e-10, worst, "encode vs brute-force gap"
    )


def check_rate_size_consistency(seed=0, scale=1.0):
    rng = Rng(seed)
    worst = 0.0
    for total in range(2, 11):
        for _ in range(6):
            comp = _random_composition(rng, total)
            size = psc.codebook_size(comp, variant=1)
            back = 2 ** (total * psc.rate(comp, variant=1))
            worst = max(worst, abs(back - size) / size)
    return CheckResult(
        "rate_size_consistency", worst < 1e-9, worst, "relative 2^(N R) vs L"
    )


def check_encode_scale_invariance(seed=0, scale=1.0):
    rng = Rng(seed)
    for _ in range(max(5, int(50 * scale))):
        n = int(rng.gen.integers(2, 5))
        m = int(rng.gen.integers(n, n + 3))
        frame = random_sphere_frame(n, m, rng)
        comp = _random_composition(rng, m)
        x = rng.standard_gaussian(n)
        alpha = float(rng.gen.uniform(0.1, 10.0))
        for variant in (1, 2):
            a = quantizer.fpq_encode(frame, comp, x, variant)
            b = quantizer.fpq_encode(frame, comp, alpha * x, variant)
            if a != b:
                return CheckResult(
                    "encode_scale_invariance", False, alpha, "code changed under scaling"
                )
    return CheckResult("encode_scale_invariance", True, 0.0, "cones confirmed")


def check_distortion_refinement(seed=0, scale=1.0):
    trials = max(2000, int(40000 * scale))
    worst = -np.inf
    means, _ = psc.order_statistic_means("uniform", 4)
    for coarse_parts, block, left in [((2, 2), 0, 1), ((4,), 0, 2), ((1, 3), 1, 1)]:
        coarse = Composition(coarse_parts)
        fine = coarse.refine(block, left)
        mu_c = psc.optimal_initial_codeword(coarse, means, 1)
        mu_f = psc.optimal_initial_codeword(fine, means, 1)
        d_c, se_c = psc.psc_distortion(coarse, mu_c, "uniform", 1, trials, seed)
        d_f, se_f = psc.psc_distortion(fine, mu_f, "uniform", 1, trials, seed + 1)
        slack = 3 * math.hypot(se_c, se_f)
        worst = max(worst, d_f - d_c - slack)
    return CheckResult(
        "distortion_refinement", worst <= 0, worst, "refined minus coarse (3-se slack)"
    )


def _roundtrip(seed, scale, source, decode):
    # Variant I: for Variant II the cell system is a relaxation of the encoder
    # preimage (uncoded-block magnitudes are only bounded one-sidedly), so
    # exact re-encoding is not guaranteed there.
    rng = Rng(seed)
    failures = 0
    total = 0
    degenerates = 0
    for m in (4, 5, 6):
        frame = modulated_htf(4, m)
        for _ in range(max(5, int(120 * scale))):
            comp = _random_composition(rng, m)
            x = _draw(rng, source, 4)
            code = quantizer.fpq_encode_v1(frame, comp, x)
            res = decode(frame, comp, code)
            if res.degenerate:
                degenerates += 1
                continue
            total += 1
            if not decoders.reencodes_identically(frame, comp, code, res.estimate):
                failures += 1
    return failures, total, degenerates


def _draw(rng, source, n):
    if source == "uniform":
        return rng.uniform_box(n)
    return rng.standard_gaussian(n)


def check_lp_roundtrip(seed=0, scale=1.0):
    failures, total, degenerates = _roundtrip(seed, scale, "uniform", decoders.lp_decode_uniform)
    return CheckResult(
        "lp_roundtrip",
        failures == 0 and degenerates == 0,
        float(failures),
        f"{failures}/{total} failures, {degenerates} degenerate",
    )


def check_qp_roundtrip(seed=0, scale=1.0):
    failures, total, degenerates = _roundtrip(
        seed, scale, "gaussian", decoders.qp_decode_gaussian
    )
    return CheckResult(
        "qp_roundtrip",
        failures == 0 and degenerates == 0,
        float(failures),
        f"{failures}/{total} failures, {degenerates} degenerate",
    )


def check_variant2_decoder_margins(seed=0, scale=1.0):
    """Variant II decodes are consistent in the inequality-system sense (the
    system is a relaxation of the encoder preimage, so system margins, not
    re-encoding, are the guarantee)."""
    rng = Rng(seed)
    worst = np.inf
    for m in (4, 5, 6):
        frame = modulated_htf(4, m)
        for _ in range(max(5, int(60 * scale))):
            comp = _random_composition(rng, m)
            x = rng.uniform_box(4)
            code = quantizer.fpq_encode_v2(frame, comp, x)
            res = decoders.lp_decode_uniform(frame, comp, code)
            worst = min(worst, res.margin)
            xg = rng.standard_gaussian(4)
            code = quantizer.fpq_encode_v2(frame, comp, xg)
            res = decoders.qp_decode_gaussian(frame, comp, code)
            if not res.degenerate:
                worst = min(worst, res.margin)
    return CheckResult(
        "variant2_decoder_margins", worst >= -1e-9, float(worst), "min system margin"
    )


def check_alg5_monotonicity(seed=0, scale=1.0):
    root = Rng(seed)
    worst = 0.0
    m = 300
    for kind in ("singleton", "sqrt", "exhaustive"):
        strategy = decoders.IndexSetStrategy(kind=kind)
        for t in range(max(2, int(12 * scale))):
            rng = root.spawn(t)
            x = rng.uniform_unit_sphere(8)
            frame = random_sphere_frame(8, m, rng)
            res = decoders.recursive_decode_fpq(
                frame.matrix, frame.expand(x), strategy, rng, x_true=x
            )
            worst = max(worst, res.max_error_increase)
    return CheckResult(
        "alg5_monotonicity", worst <= 1e-12, worst, "max per-projection error increase"
    )


def check_alg2_slab(seed=0, scale=1.0):
    rng = Rng(seed)
    worst = np.inf
    for _ in range(max(5, int(40 * scale))):
        n = int(rng.gen.integers(2, 6))
        m = int(rng.gen.integers(n + 1, n + 30))
        frame = random_sphere_frame(n, m, rng)
        x = rng.uniform_unit_sphere(n)
        q = decoders.quantize_expansion(frame, x, 0.25)
        res = decoders.recursive_decode_sq(q)
        worst = min(worst, res.margin)
    return CheckResult(
        "alg2_slab", worst >= -1e-12, float(worst), "min final slab slack"
    )


def check_alg4_scale_invariance(seed=0, scale=1.0):
    rng = Rng(seed)
    worst = 0.0
    frame = modulated_htf(3, 5)
    for _ in range(max(3, int(20 * scale))):
        comp = _random_composition(rng, 5)
        x = rng.standard_gaussian(3)
        a = decoders.qp_decode_gaussian(frame, comp, quantizer.fpq_encode_v1(frame, comp, x))
        b = decoders.qp_decode_gaussian(
            frame, comp, quantizer.fpq_encode_v1(frame, comp, 2.0 * x)
        )
        if a.degenerate or b.degenerate:
            continue
        worst = max(worst, float(np.abs(a.estimate - b.estimate).max()))
    return CheckResult(
        "alg4_scale_invariance", worst < 1e-7, worst, "estimate drift under x -> 2x"
    )


def check_lp_tightening(seed=0, scale=1.0):
    rng = Rng(seed)
    worst = 0.0
    for _ in range(max(5, int(30 * scale))):
        n = int(rng.gen.integers(2, 5))
        extra = int(rng.gen.integers(1, 5))
        box = np.vstack([np.eye(n), -np.eye(n)])
        a = np.vstack([box, rng.standard_gaussian(n, count=extra)])
        z0 = rng.uniform_box(n)
        b = a @ z0 + rng.gen.uniform(0.05, 1.0, size=a.shape[0])
        c = rng.standard_gaussian(n)
        base = solve_lp(LpProblem(c=c, a=a, b=b))
        new_row = rng.standard_gaussian(n)
        a2 = np.vstack([a, new_row[None, :]])
        b2 = np.concatenate([b, [new_row @ z0 + 0.05]])
        tightened = solve_lp(LpProblem(c=c, a=a2, b=b2))
        if not (base.is_optimal and tightened.is_optimal):
            return CheckResult("lp_tightening", False, 0.0, "unexpected LP status")
        worst = max(worst, base.objective - tightened.objective)
    return CheckResult(
        "lp_tightening", worst <= 1e-8, worst, "base minus tightened objective"
    )


def check_qp_zero_bound(seed=0, scale=1.0):
    rng = Rng(seed)
    worst = -np.inf
    for _ in range(max(3, int(15 * scale))):
        n = int(rng.gen.integers(2, 5))
        g = rng.standard_gaussian(n, count=n)
        h = g.T @ g
        c = rng.standard_gaussian(n)
        rows = int(rng.gen.integers(1, 4))
        a = rng.standard_gaussian(n, count=rows)
        b = rng.gen.uniform(0.0, 1.0, size=rows)  # z = 0 feasible
        z = solve_qp(QpProblem(h=h, c=c, a=a, b=b))
        obj = 0.5 * z @ h @ z + c @ z
        worst = max(worst, float(obj))
    return CheckResult(
        "qp_zero_bound", worst <= 1e-12, worst, "objective at solution (0 feasible)"
    )


def check_eig_trace(seed=0, scale=1.0):
    from .numkit import symmetric_eigenvalues

    rng = Rng(seed)
    worst = 0.0
    for _ in range(20):
        n = int(rng.gen.integers(2, 8))
        g = rng.standard_gaussian(n, count=n)
        s = (g + g.T) / 2
        worst = max(worst, abs(symmetric_eigenvalues(s).sum() - np.trace(s)))
    return CheckResult("eig_trace", worst < 1e-9, worst, "max |sum(eig) - trace|")


def check_pinv_identities(seed=0, scale=1.0):
    from .numkit import pseudo_inverse

    rng = Rng(seed)
    worst = 0.0
    for _ in range(20):
        n = int(rng.gen.integers(2, 5))
        m = int(rng.gen.integers(n, n + 5))
        f = rng.standard_gaussian(n, count=m)
        g = pseudo_inverse(f)
        worst = max(
            worst,
            float(np.abs(f @ g @ f - f).max()),
            float(np.abs(g @ f @ g - g).max()),
            float(np.abs(g @ f - np.eye(n)).max()),
        )
    return CheckResult("pinv_identities", worst < 1e-10, worst, "max identity residual")


def check_alg3_vs_canonical(seed=0, scale=1.0):
    """Reported, not asserted: consistent LP decoding is expected to beat the
    canonical dual on the uniform source; exceptions are listed."""
    cfg = bench.ExperimentConfig(
        kind="sweep", n=3, m=4, source="uniform", trials=max(500, int(4000 * scale)), seed=seed
    )
    records = bench.sweep_rate_distortion(cfg)
    by_comp = {}
    for rec in records:
        by_comp.setdefault(rec.composition, {})[rec.decoder] = rec
    exceptions = []
    for comp, recs in by_comp.items():
        lp, can = recs["lp-box"], recs["canonical"]
        slack = 3 * math.hypot(lp.mse_stderr, can.mse_stderr)
        if lp.mse > can.mse + slack:
            exceptions.append(comp)
    detail = "no exceptions" if not exceptions else f"exceptions at {exceptions}"
    return CheckResult("alg3_vs_canonical", True, float(len(exceptions)), detail)


ALL_CHECKS = [
    check_untf_bounds,
    check_htf_gram_alternation,
    check_mhtf_zero_sum,
    check_mhtf_projection,
    check_classify_rotation_invariance,
    check_difference_matrix_rows,
    check_encode_duality,
    check_identity_frame_reduction,
    check_canonical_consistency_n4m5,
    check_canonical_violation_n4m6,
    check_variant2_basis_consistency,
    check_cell_partition_unity,
    check_psc_nearest_neighbor,
    check_rate_size_consistency,
    check_encode_scale_invariance,
    check_distortion_refinement,
    check_lp_roundtrip,
    check_qp_roundtrip,
    check_variant2_decoder_margins,
    check_alg5_monotonicity,
    check_alg2_slab,
    check_alg4_scale_invariance,
    check_lp_tightening,
    check_qp_zero_bound,
    check_eig_trace,
    check_pinv_identities,
    check_alg3_vs_canonical,
]


def verify_suite(seed=0, scale=1.0):
    """Run every check; returns the list of CheckResults."""
    return [check(seed=seed, scale=scale) for check in ALL_CHECKS]
