"""From vector sheaves to SPD sheaves and strictly back again.

The embedding x -> x x^T + eps I carries Euclidean global sections to SPD
global sections. The reverse inclusion fails in two instructive ways: a
frustrated sign cycle has no Euclidean section but an SPD one (the quotient
of a line-bundle obstruction), and any parallel-transported matrix with
three distinct eigenvalues is an SPD section that no embedded vector can
reach.
"""

import numpy as np

import spdsheaf as s
from spdsheaf.euclid import EuclidSheaf, vec_cochain_from_vec
from spdsheaf.verify import frustrated_two_cycle

# identity-map path on 4 vertices, stalk dimension 3
esheaf = EuclidSheaf.identity_maps(3, range(4), [(0, 1), (1, 2), (2, 3)])
ssheaf = s.matched_spd_sheaf(esheaf)

dim_e = s.euclid_sections(esheaf).shape[1]
dim_s = s.global_sections(ssheaf).shape[1]
print(f"Euclidean kernel dim {dim_e}, SPD kernel dim {dim_s} "
      f"(jump = n(n-1)/2 = {dim_s - dim_e})")

# forward: embed a Euclidean section, check the SPD coboundary is the identity
basis = s.euclid_sections(esheaf)
x = vec_cochain_from_vec(esheaf, basis[:, 0])
report = s.check_kernel_correspondence(esheaf, x)
print("forward residual:", report.forward_max_residual,
      "| converse mode:", report.converse_mode, "pass:", report.converse_pass)

# strictness: a section with three distinct eigenvalues is outside the image
witness = s.strictness_witness(ssheaf)
eigs = np.linalg.eigvalsh(witness[0])
print("witness eigenvalues:", eigs, "(embedded points have at most 2 distinct)")

# the frustrated 2-cycle: one edge flips sign (stalk dimension 1)
fr = frustrated_two_cycle()
print("\nfrustrated 2-cycle:")
print("  Euclidean sections:", s.euclid_sections(fr).shape[1])
print("  SPD sections:      ", s.global_sections(s.matched_spd_sheaf(fr)).shape[1])
x = {0: np.array([1.0]), 1: np.array([1.0])}
rep = s.check_kernel_correspondence(fr, x)
print("  embedded x=(1,1) is an SPD section:", rep.spd_section,
      "(signs cancel under congruence)")
