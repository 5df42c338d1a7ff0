"""Cellular sheaves with SPD matrix stalks.

Five layers of machinery, bottom to top:

- :mod:`spdsheaf.spd` — dense SPD geometry: log/exp calculus, the abelian
  group operation, metrics, pairings, Cayley/QR orthogonal parameterizations.
- :mod:`spdsheaf.sheaf` — SPD-valued cellular sheaves: coboundary, adjoint,
  Laplacian, global sections, index, holonomy, diffusion.
- :mod:`spdsheaf.euclid` — vector-stalk sheaves and the rank-one-plus-ridge
  embedding bridge, including the strict-generalization witness.
- :mod:`spdsheaf.stream` — the geometric diffusion stream: coordinate
  lifting, equivariant frames, learned restriction maps, convolution layers,
  pooling and rank diagnostics.
- :mod:`spdsheaf.covgraph` — time-frequency covariance graphs for
  multichannel signals.

:mod:`spdsheaf.verify` checks every theorem-level property against
independent brute-force oracles; ``spd-sheaf`` (see :mod:`spdsheaf.cli`)
exposes everything on the command line.
"""

from .spd import (
    EIG_FLOOR,
    SpectralDecomp,
    as_orth,
    as_spd,
    as_sym,
    cayley,
    clamp_spd,
    congruence,
    conj_operator,
    dist_airm,
    dist_lem,
    erank,
    frechet_log,
    group_inv,
    group_op,
    pairing,
    power_euclidean_mean,
    spd_log,
    spd_power,
    sym_dim,
    sym_eig,
    sym_exp,
    sym_to_vec,
    tg_re_eig,
    vec_to_sym,
)
from .sheaf import (
    SheafGraph,
    adjoint,
    coboundary,
    coboundary_matrix,
    cochain_pairing,
    diffusion_step,
    global_sections,
    holonomy_fixed_space,
    holonomy_reps,
    laplacian,
    sheaf_index,
)
from .euclid import (
    EuclidSheaf,
    check_kernel_correspondence,
    embed_phi,
    euclid_coboundary,
    euclid_sections,
    matched_spd_sheaf,
    strictness_witness,
)
from .stream import (
    LayerParams,
    PointCloud,
    RankTrace,
    diffusion_run,
    geometric_descriptor,
    learnable_isometry,
    lift_coordinates,
    linear_probe,
    local_frame,
    node_features,
    pooled_descriptor,
    rank_trace,
    sheaf_learner,
    spd_sheaf_layer,
)
from .covgraph import Segment, TFGraphConfig, build_tf_graph, segment_covariance
from .verify import SuiteConfig, Verdict, run_suite

__version__ = "0.1.0"
