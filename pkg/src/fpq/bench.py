"""Monte Carlo experiment harness: rate-distortion sweeps over all
compositions, variable-rate (empirical entropy) measurement, MSE-decay curves
for the recursive decoders, zero-volume cell censuses, pure permutation-code
rate-distortion, and a cross-module invariant verification suite.

Records serialize to CSV with 17-significant-digit floats; identical configs
and seeds produce byte-identical output.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import decoders, psc, quantizer
from .frames import Frame, modulated_htf, random_sphere_frame, real_htf
from .numkit import Rng
from .psc import Composition

MAX_SWEEP_M = 12  # exhaustive composition sweeps are 2^(M-1) points
PILOT_TRIALS = 10**5  # coefficient order-statistic pilot for initial codewords


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int
    m: int | None = None
    m_max: int | None = None
    frame: str = "mhtf"  # htf | mhtf | identity | sphere
    gamma: int = -1
    source: str = "uniform"  # uniform | gaussian | sphere
    variant: int = 1
    composition: tuple[int, ...] | None = None  # None means "all"
    trials: int = 10**5
    seed: int = 0
    strategy: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.variant not in (1, 2):
            raise ValueError("variant must be 1 or 2")
        if self.m is not None and self.m < self.n:
            raise ValueError(f"m={self.m} must be at least n={self.n}")
        if self.composition is not None:
            comp = Composition(tuple(self.composition))
            if self.m is not None and comp.total != self.m:
                raise ValueError(
                    f"composition {self.composition} does not sum to m={self.m}"
                )


@dataclass(frozen=True)
class ExperimentRecord:
    frame_id: str
    n: int
    m: int
    variant: int
    composition: str
    rate_fixed: float
    rate_entropy: float
    mse: float
    mse_stderr: float
    trials: int
    decoder: str


@dataclass(frozen=True)
class DecayRecord:
    n: int
    m: int
    strategy: str
    projections: int
    mse: float
    mse_stderr: float
    trials: int


@dataclass(frozen=True)
class CellRecord:
    frame_id: str
    n: int
    m: int
    variant: int
    composition: str
    cell_rank: int
    has_interior: bool


SWEEP_COLUMNS = (
    "frame,N,M,variant,composition,rate_fixed,rate_entropy,mse,mse_stderr,trials,decoder"
)
DECAY_COLUMNS = "N,M,strategy,projections,mse,mse_stderr,trials"
CELL_COLUMNS = "frame,N,M,variant,composition,cell_rank,has_interior"

_SWEEP_FIELDS = (
    "frame_id",
    "n",
    "m",
    "variant",
    "composition",
    "rate_fixed",
    "rate_entropy",
    "mse",
    "mse_stderr",
    "trials",
    "decoder",
)
_DECAY_FIELDS = ("n", "m", "strategy", "projections", "mse", "mse_stderr", "trials")
_CELL_FIELDS = (
    "frame_id",
    "n",
    "m",
    "variant",
    "composition",
    "cell_rank",
    "has_interior",
)


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _records_to_csv(records, header, fields):
    buf = io.StringIO()
    buf.write(header + "\n")
    for rec in records:
        buf.write(",".join(_fmt(getattr(rec, f)) for f in fields) + "\n")
    return buf.getvalue()


def sweep_csv(records):
    return _records_to_csv(records, SWEEP_COLUMNS, _SWEEP_FIELDS)


def decay_csv(records):
    return _records_to_csv(records, DECAY_COLUMNS, _DECAY_FIELDS)


def cells_csv(records):
    return _records_to_csv(records, CELL_COLUMNS, _CELL_FIELDS)


def build_frame(kind, n, m, gamma=-1, seed=0):
    if kind == "htf":
        return real_htf(n, m)
    if kind == "mhtf":
        return modulated_htf(n, m, gamma)
    if kind == "identity":
        if m != n:
            raise ValueError("identity frame requires m == n")
        return Frame.from_matrix(np.eye(n))
    if kind == "sphere":
        return random_sphere_frame(n, m, seed)
    raise ValueError(f"unknown frame kind {kind!r}")


def frame_label(kind, gamma):
    return f"mhtf(g={gamma:+d})" if kind == "mhtf" else kind


def composition_label(comp):
    return "-".join(str(p) for p in comp.parts)


def _draw_source(rng, source, n, count):
    if source == "uniform":
        return rng.uniform_box(n, count=count)
    if source == "gaussian":
        return rng.standard_gaussian(n, count=count)
    if source == "sphere":
        return rng.uniform_unit_sphere(n, count=count)
    raise ValueError(f"unknown source {source!r}")


def encode_batch(frame, comp, xs, variant):
    """Vectorized canonical encoding: per-row permutation (stable descending,
    ascending within blocks) and sorted-position signs."""
    ys = xs @ frame.matrix.T
    key = np.abs(ys) if variant == 2 else ys
    order = np.argsort(-key, axis=1, kind="stable")
    bounds = comp.boundaries()
    for i in range(comp.num_blocks):
        lo, hi = int(bounds[i]), int(bounds[i + 1])
        order[:, lo:hi] = np.sort(order[:, lo:hi], axis=1)
    signs = np.ones(order.shape, dtype=np.int64)
    if variant == 2:
        n_coded = comp.total - comp.parts[-1]
        picked = np.take_along_axis(ys, order[:, :n_coded], axis=1)
        signs[:, :n_coded] = np.where(picked < 0, -1, 1)
    return order, signs


def canonical_decode_batch(frame, comp, mu, orders, signs):
    values = mu.expand(comp)[None, :] * signs
    yhat = np.empty(orders.shape, dtype=float)
    np.put_along_axis(yhat, orders, values, axis=1)
    return yhat @ frame.pinv.T


def batch_consistency_margins(frame, comp, variant, orders, signs, xs, delta=None):
    """min(Bx) per row for per-row codes, without materializing each system.
    ``delta`` overrides the differencing matrix (negative-control hook)."""
    if delta is None:
        if variant == 1:
            delta = quantizer.difference_matrix(comp)
        elif comp.num_blocks < 2:
            return np.full(xs.shape[0], np.inf)
        else:
            delta = quantizer.extended_difference_matrix(comp)
    if delta.shape[0] == 0:
        return np.full(xs.shape[0], np.inf)
    ys = xs @ frame.matrix.T
    permuted = np.take_along_axis(ys, orders, axis=1)
    if variant == 2:
        permuted = permuted * signs
    return (permuted @ delta.T).min(axis=1)


def _code_from_row(order_row, sign_row, variant):
    return quantizer.FpqCode(
        perm=tuple(int(i) for i in order_row),
        signs=tuple(int(s) for s in sign_row),
        variant=variant,
    )


def pilot_coefficient_means(frame, source, variant, rng, trials=PILOT_TRIALS):
    """Monte Carlo means of the descending (magnitude-)sorted frame
    coefficients.  The coefficients are not i.i.d., so feeding these means to
    the block-average initial-codeword rule is a heuristic, not an optimum."""
    total = np.zeros(frame.num_vectors)
    done = 0
    while done < trials:
        take = min(100_000, trials - done)
        xs = _draw_source(rng, source, frame.dim, take)
        ys = xs @ frame.matrix.T
        if variant == 2:
            ys = np.abs(ys)
        ys = -np.sort(-ys, axis=1)
        total += ys.sum(axis=0)
        done += take
    means = total / trials
    return -np.sort(-means)  # true means are non-increasing; undo MC noise


def _compositions_for(cfg):
    m = cfg.m if cfg.m is not None else cfg.n
    if cfg.composition is not None:
        return [Composition(tuple(cfg.composition))]
    if m > MAX_SWEEP_M:
        raise ValueError(
            f"exhaustive composition sweep needs m <= {MAX_SWEEP_M}, got {m}"
        )
    return list(Composition.all_compositions(m))


def _mse_with_stderr(per_trial):
    if per_trial.size == 0:
        return float("nan"), float("nan")
    mse = float(per_trial.mean())
    if per_trial.size < 2:
        return mse, 0.0
    return mse, float(per_trial.std(ddof=1) / math.sqrt(per_trial.size))


def _encode_and_count(frame, comp, xs, variant):
    orders, signs = encode_batch(frame, comp, xs, variant)
    stacked = np.hstack([orders, signs]) if variant == 2 else orders
    uniq, inverse, counts = np.unique(
        stacked, axis=0, return_inverse=True, return_counts=True
    )
    orders_u = uniq[:, : comp.total]
    signs_u = uniq[:, comp.total :] if variant == 2 else np.ones_like(orders_u)
    return orders_u, signs_u, inverse, counts


def sweep_rate_distortion(cfg):
    """Rate-distortion sweep: encode i.i.d. draws for every composition,
    decode both with the consistent LP/QP decoder matched to the source and
    with the canonical dual (block-mean initial codewords from a pilot run),
    and record rate, empirical entropy rate, and MSE per decoder.  Decoding
    runs once per observed cell, since consistent decoders are constant on a
    cell."""
    if cfg.source not in ("uniform", "gaussian"):
        raise ValueError("sweep supports uniform and gaussian sources")
    frame = build_frame(cfg.frame, cfg.n, cfg.m, cfg.gamma, cfg.seed)
    label = frame_label(cfg.frame, cfg.gamma)
    root = Rng(cfg.seed)
    means = pilot_coefficient_means(frame, cfg.source, cfg.variant, root.spawn(0))
    decoder_name = "lp-box" if cfg.source == "uniform" else "qp-gaussian"
    records = []
    for comp in _compositions_for(cfg):
        rng = root.spawn(2 + comp.to_mask())
        xs = _draw_source(rng, cfg.source, cfg.n, cfg.trials)
        orders_u, signs_u, inverse, counts = _encode_and_count(
            frame, comp, xs, cfg.variant
        )
        probs = counts / cfg.trials
        rate_entropy = float(-(probs * np.log2(probs)).sum() / cfg.n) + 0.0  # avoid -0.0
        rate_fixed = quantizer.fpq_rate(comp, cfg.variant, cfg.n)

        mu = psc.optimal_initial_codeword(comp, means, cfg.variant)
        xhat_can = canonical_decode_batch(frame, comp, mu, orders_u, signs_u)
        err_can = ((xs - xhat_can[inverse]) ** 2).sum(axis=1) / cfg.n
        mse_can, se_can = _mse_with_stderr(err_can)

        xhat_dec = np.zeros_like(xhat_can)
        degenerate = np.zeros(len(orders_u), dtype=bool)
        for u in range(len(orders_u)):
            code = _code_from_row(orders_u[u], signs_u[u], cfg.variant)
            if cfg.source == "uniform":
                res = decoders.lp_decode_uniform(frame, comp, code)
            else:
                res = decoders.qp_decode_gaussian(frame, comp, code)
            xhat_dec[u] = res.estimate
            degenerate[u] = res.degenerate
        ok = ~degenerate[inverse]
        err_dec = ((xs[ok] - xhat_dec[inverse][ok]) ** 2).sum(axis=1) / cfg.n
        mse_dec, se_dec = _mse_with_stderr(err_dec)

        common = dict(
            frame_id=label,
            n=cfg.n,
            m=comp.total,
            variant=cfg.variant,
            composition=composition_label(comp),
            rate_fixed=rate_fixed,
            rate_entropy=rate_entropy,
            trials=cfg.trials,
        )
        records.append(
            ExperimentRecord(
                mse=mse_dec, mse_stderr=se_dec, decoder=decoder_name, **common
            )
        )
        records.append(
            ExperimentRecord(
                mse=mse_can, mse_stderr=se_can, decoder="canonical", **common
            )
        )
    return records


def variable_rate_experiment(cfg):
    """Codeword-frequency measurement: empirical entropy rate alongside the
    fixed rate for every composition, with canonical-decode MSE (vectorized,
    so large trial counts stay cheap)."""
    frame = build_frame(cfg.frame, cfg.n, cfg.m, cfg.gamma, cfg.seed)
    label = frame_label(cfg.frame, cfg.gamma)
    root = Rng(cfg.seed)
    means = pilot_coefficient_means(frame, cfg.source, cfg.variant, root.spawn(0))
    records = []
    for comp in _compositions_for(cfg):
        rng = root.spawn(2 + comp.to_mask())
        xs = _draw_source(rng, cfg.source, cfg.n, cfg.trials)
        orders_u, signs_u, inverse, counts = _encode_and_count(
            frame, comp, xs, cfg.variant
        )
        probs = counts / cfg.trials
        rate_entropy = float(-(probs * np.log2(probs)).sum() / cfg.n) + 0.0  # avoid -0.0
        mu = psc.optimal_initial_codeword(comp, means, cfg.variant)
        xhat = canonical_decode_batch(frame, comp, mu, orders_u, signs_u)
        err = ((xs - xhat[inverse]) ** 2).sum(axis=1) / cfg.n
        mse, se = _mse_with_stderr(err)
        records.append(
            ExperimentRecord(
                frame_id=label,
                n=cfg.n,
                m=comp.total,
                variant=cfg.variant,
                composition=composition_label(comp),
                rate_fixed=quantizer.fpq_rate(comp, cfg.variant, cfg.n),
                rate_entropy=rate_entropy,
                mse=mse,
                mse_stderr=se,
                trials=cfg.trials,
                decoder="canonical",
            )
        )
    return records


def decay_grid(m_max, start_exp=4):
    return [2**i for i in range(start_exp, int(math.log2(m_max)) + 1)]


def mse_decay_experiment(cfg):
    """Recursive-decoder MSE versus frame size on a log grid, unit-sphere
    source, i.i.d. sphere frames, all-singleton composition.  One pass per
    trial records every prefix length; this is exact because the recursion
    never looks ahead."""
    if cfg.strategy is None:
        raise ValueError("decay experiment needs a strategy")
    if cfg.source != "sphere":
        raise ValueError("decay experiment uses the unit-sphere source")
    m_max = cfg.m_max if cfg.m_max is not None else 4096
    grid = decay_grid(m_max)
    strategy = decoders.IndexSetStrategy(kind=cfg.strategy)
    root = Rng(cfg.seed)
    sums = np.zeros(len(grid))
    sums_sq = np.zeros(len(grid))
    for t in range(cfg.trials):
        rng = root.spawn(t + 1)
        x = rng.uniform_unit_sphere(cfg.n)
        frame = random_sphere_frame(cfg.n, m_max, rng)
        res = decoders.recursive_decode_fpq(
            frame.matrix, frame.expand(x), strategy, rng, x_true=x, record_at=grid
        )
        errs = res.recorded_errors / cfg.n
        sums += errs
        sums_sq += errs**2
    records = []
    for i, m in enumerate(grid):
        mse = sums[i] / cfg.trials
        var = sums_sq[i] / cfg.trials - mse**2
        records.append(
            DecayRecord(
                n=cfg.n,
                m=m,
                strategy=cfg.strategy,
                projections=strategy.total_projections(m),
                mse=float(mse),
                mse_stderr=math.sqrt(max(var, 0.0) / cfg.trials),
                trials=cfg.trials,
            )
        )
    return records


def sq_decay_experiment(cfg, step=0.1):
    """Decay protocol for the slab-projection decoder of scalar-quantized
    expansions (raw estimates, no normalization)."""
    m_max = cfg.m_max if cfg.m_max is not None else 4096
    grid = decay_grid(m_max, start_exp=6)
    root = Rng(cfg.seed)
    sums = np.zeros(len(grid))
    sums_sq = np.zeros(len(grid))
    for t in range(cfg.trials):
        rng = root.spawn(t + 1)
        x = rng.uniform_unit_sphere(cfg.n)
        frame = random_sphere_frame(cfg.n, m_max, rng)
        q = decoders.quantize_expansion(frame, x, step)
        res = decoders.recursive_decode_sq(q, x_true=x, record_at=grid)
        errs = res.recorded_errors / cfg.n
        sums += errs
        sums_sq += errs**2
    records = []
    for i, m in enumerate(grid):
        mse = sums[i] / cfg.trials
        var = sums_sq[i] / cfg.trials - mse**2
        records.append(
            DecayRecord(
                n=cfg.n,
                m=m,
                strategy="slab",
                projections=m,
                mse=float(mse),
                mse_stderr=math.sqrt(max(var, 0.0) / cfg.trials),
                trials=cfg.trials,
            )
        )
    return records


def fit_loglog_slope(ms, mses, top_decade=True):
    ms = np.asarray(ms, dtype=float)
    mses = np.asarray(mses, dtype=float)
    if top_decade:
        keep = ms >= ms.max() / 10
        ms, mses = ms[keep], mses[keep]
    return float(np.polyfit(np.log2(ms), np.log2(mses), 1)[0])


MAX_CELLS = 20000


def zero_volume_census(cfg):
    """Enumerate every cell of each composition and test interiors by LP."""
    frame = build_frame(cfg.frame, cfg.n, cfg.m, cfg.gamma, cfg.seed)
    label = frame_label(cfg.frame, cfg.gamma)
    records = []
    for comp in _compositions_for(cfg):
        n_perms = psc.codebook_size(comp, variant=1)
        n_coded = comp.total - comp.parts[-1]
        n_signs = 1 << n_coded if cfg.variant == 2 else 1
        if n_perms * n_signs > MAX_CELLS:
            raise ValueError(
                f"composition {comp.parts} has {n_perms * n_signs} cells; "
                f"census capped at {MAX_CELLS}"
            )
        for rank in range(n_perms):
            perm = psc.unrank_codeword(rank, comp).perm
            for sign_bits in range(n_signs):
                signs = tuple(
                    -1 if (i < n_coded and sign_bits >> i & 1) else 1
                    for i in range(comp.total)
                )
                code = quantizer.FpqCode(perm=perm, signs=signs, variant=cfg.variant)
                records.append(
                    CellRecord(
                        frame_id=label,
                        n=cfg.n,
                        m=comp.total,
                        variant=cfg.variant,
                        composition=composition_label(comp),
                        cell_rank=rank * n_signs + sign_bits,
                        has_interior=quantizer.cell_has_interior(frame, comp, code),
                    )
                )
    return records


def psc_rate_distortion(cfg):
    """Pure permutation-code operating points: optimal initial codewords from
    order-statistic means, Monte Carlo distortion, exact rates."""
    if cfg.source not in ("uniform", "gaussian"):
        raise ValueError("psc experiment supports uniform and gaussian sources")
    root = Rng(cfg.seed)
    means, _ = psc.order_statistic_means(
        cfg.source,
        cfg.n,
        magnitude=cfg.variant == 2,
        trials=10**6,
        seed=root.spawn(0),
    )
    means = -np.sort(-means)
    records = []
    for comp in Composition.all_compositions(cfg.n):
        mu = psc.optimal_initial_codeword(comp, means, cfg.variant)
        mu_last_zero = abs(mu.values[-1]) < 1e-12
        dist, se = psc.psc_distortion(
            comp,
            mu,
            cfg.source,
            cfg.variant,
            trials=cfg.trials,
            seed=root.spawn(2 + comp.to_mask()),
        )
        records.append(
            ExperimentRecord(
                frame_id="identity",
                n=cfg.n,
                m=cfg.n,
                variant=cfg.variant,
                composition=composition_label(comp),
                rate_fixed=psc.rate(comp, cfg.variant, mu_last_zero=mu_last_zero),
                rate_entropy=float("nan"),
                mse=dist,
                mse_stderr=se,
                trials=cfg.trials,
                decoder="psc-optimal",
            )
        )
    return records


from .verify import CheckResult, verify_suite  # noqa: E402  (re-export; verify builds on the harness helpers above)
