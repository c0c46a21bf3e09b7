"""Frame permutation quantization: a vector is encoded by a partial ordering
(and optionally signs) of its frame expansion coefficients.  The package
provides frame constructions, permutation source codes, consistency-system
machinery, five reconstruction algorithms, and a Monte Carlo experiment
harness with a CLI (``fpq-bench``).
"""

from . import bench, decoders, frames, numkit, psc, quantizer
from .decoders import (
    DecodeResult,
    IndexSetStrategy,
    QuantizedExpansion,
    lp_decode_sq,
    lp_decode_uniform,
    qp_decode_gaussian,
    quantize_expansion,
    recursive_decode_fpq,
    recursive_decode_sq,
)
from .frames import Frame, FrameReport, classify, modulated_htf, random_sphere_frame, real_htf
from .numkit import LpProblem, QpProblem, Rng, seeded_rng, solve_lp, solve_qp
from .psc import Composition, InitialCodeword, PscCodeword
from .quantizer import (
    ConsistencySystem,
    FpqCode,
    canonical_decode,
    cell_has_interior,
    consistency_system,
    difference_matrix,
    extended_difference_matrix,
    fpq_encode,
    fpq_encode_v1,
    fpq_encode_v2,
    fpq_rate,
)

__version__ = "0.1.0"
