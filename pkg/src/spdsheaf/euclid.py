"""Vector-stalk sheaves and the Euclidean-to-SPD embedding bridge.

The embedding ``phi(x) = x x^T + eps I`` lifts a vector sheaf to an SPD sheaf
with the same orthogonal maps reused as congruence actions. It carries global
sections to global sections, and the SPD side has strictly more of them: any
parallel-transported matrix with three or more distinct eigenvalues is a
section outside the image of the embedding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import InvalidInputError, NotApplicableError
from .sheaf import (
    NULL_TOL,
    SheafGraph,
    _component_transports,
    coboundary,
    connected_components,
    nullspace,
)
from .spd import EIG_FLOOR, ORTH_TOL, _sym_part, dist_lem, is_signed_permutation

VecCochain0 = Mapping[object, np.ndarray]


class EuclidSheaf:
    """Cellular sheaf with R^n stalks and orthogonal restriction maps.

    Mirrors :class:`~spdsheaf.sheaf.SheafGraph` structurally; the maps act on
    vectors instead of by congruence.
    """

    __slots__ = ("n_stalk", "vertices", "edges", "maps", "_vindex")

    def __init__(self, n_stalk, vertices, edges, maps, validate: bool = True):
        self.n_stalk = int(n_stalk)
        self.vertices = tuple(vertices)
        self.edges = tuple((t, h) for t, h in edges)
        self.maps = tuple(
            (np.array(mt, dtype=np.float64), np.array(mh, dtype=np.float64))
            for mt, mh in maps
        )
        self._vindex = {v: i for i, v in enumerate(self.vertices)}
        if validate:
            self._validate()

    def _validate(self):
        n = self.n_stalk
        if len(self.maps) != len(self.edges):
            raise InvalidInputError("one (map_tail, map_head) pair required per edge")
        for k, (t, h) in enumerate(self.edges):
            if t == h:
                raise InvalidInputError(f"self-loop at vertex {t!r}")
            if t not in self._vindex or h not in self._vindex:
                raise InvalidInputError(f"edge {k} references unknown vertex")
            for M in self.maps[k]:
                if M.shape != (n, n):
                    raise InvalidInputError(f"edge {k}: map shape {M.shape} != ({n}, {n})")
                if np.linalg.norm(M.T @ M - np.eye(n)) > ORTH_TOL:
                    raise InvalidInputError(f"edge {k}: restriction map is not orthogonal")

    @classmethod
    def identity_maps(cls, n_stalk, vertices, edges) -> "EuclidSheaf":
        edges = tuple(edges)
        I = np.eye(n_stalk)
        return cls(n_stalk, vertices, edges, [(I, I)] * len(edges))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def vertex_index(self, v) -> int:
        return self._vindex[v]


def _check_vec_cochain(sheaf: EuclidSheaf, x: VecCochain0) -> np.ndarray:
    n = sheaf.n_stalk
    out = np.empty((sheaf.n_vertices, n))
    for i, v in enumerate(sheaf.vertices):
        if v not in x:
            raise InvalidInputError(f"cochain is missing vertex {v!r}")
        xv = np.asarray(x[v], dtype=np.float64).ravel()
        if xv.size != n:
            raise InvalidInputError(f"vertex {v!r}: expected length-{n} vector")
        out[i] = xv
    return out


def euclid_coboundary(sheaf: EuclidSheaf, x: VecCochain0) -> list[np.ndarray]:
    """Per-edge disagreement ``M_tail x_tail - M_head x_head`` (tail-positive)."""
    vals = _check_vec_cochain(sheaf, x)
    out = []
    for (t, h), (Mt, Mh) in zip(sheaf.edges, sheaf.maps):
        out.append(Mt @ vals[sheaf.vertex_index(t)] - Mh @ vals[sheaf.vertex_index(h)])
    return out


def euclid_coboundary_matrix(sheaf: EuclidSheaf) -> np.ndarray:
    """Dense (|E| n, |V| n) block incidence matrix with +M_tail / -M_head blocks."""
    n = sheaf.n_stalk
    B = np.zeros((sheaf.n_edges * n, sheaf.n_vertices * n))
    for k, ((t, h), (Mt, Mh)) in enumerate(zip(sheaf.edges, sheaf.maps)):
        it, ih = sheaf.vertex_index(t), sheaf.vertex_index(h)
        B[k * n : (k + 1) * n, it * n : (it + 1) * n] += Mt
        B[k * n : (k + 1) * n, ih * n : (ih + 1) * n] -= Mh
    return B


def euclid_sections(sheaf: EuclidSheaf, tol: float = NULL_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of the vector coboundary."""
    return nullspace(euclid_coboundary_matrix(sheaf), tol)


def vec_cochain_from_vec(sheaf: EuclidSheaf, vec) -> dict:
    n = sheaf.n_stalk
    vec = np.asarray(vec, dtype=np.float64).reshape(sheaf.n_vertices, n)
    return {v: vec[i].copy() for i, v in enumerate(sheaf.vertices)}


# ---------------------------------------------------------------------------
# the embedding


def embed_phi(x, eps: float = EIG_FLOOR) -> np.ndarray:
    """Rank-one-plus-ridge embedding ``x x^T + eps I`` into the SPD cone.

    Eigenvalues are ``||x||^2 + eps`` once and ``eps`` with multiplicity
    n - 1, so the image consists of matrices with at most two distinct
    eigenvalues.
    """
    if eps <= 0:
        raise InvalidInputError("embedding ridge eps must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    return np.outer(x, x) + eps * np.eye(x.size)


def embed_cochain(x: VecCochain0, eps: float = EIG_FLOOR) -> dict:
    """Apply :func:`embed_phi` vertexwise."""
    return {v: embed_phi(xv, eps) for v, xv in x.items()}


def matched_spd_sheaf(sheaf: EuclidSheaf) -> SheafGraph:
    """SPD sheaf with the same topology and the same orthogonal maps."""
    return SheafGraph(sheaf.n_stalk, sheaf.vertices, sheaf.edges, sheaf.maps)


# ---------------------------------------------------------------------------
# correspondence checks


@dataclass
class CorrespondenceReport:
    """Machine-readable outcome of the kernel-correspondence check."""

    forward_residuals: list[float]
    forward_max_residual: float
    forward_pass: bool
    spd_section: bool
    converse_mode: str  # "entrywise" | "gauge_class_only" | "not_triggered"
    converse_max_residual: float | None
    converse_pass: bool | None

    def to_dict(self) -> dict:
        return {
            "forward_residuals": self.forward_residuals,
            "forward_max_residual": self.forward_max_residual,
            "forward_pass": self.forward_pass,
            "spd_section": self.spd_section,
            "converse_mode": self.converse_mode,
            "converse_max_residual": self.converse_max_residual,
            "converse_pass": self.converse_pass,
        }


def check_kernel_correspondence(sheaf: EuclidSheaf, x: VecCochain0,
                                eps: float = EIG_FLOOR, tol: float = 1e-7,
                                spd_sheaf: SheafGraph | None = None) -> CorrespondenceReport:
    """Check that the embedding carries sections to sections, edge by edge.

    Forward: every edge of the SPD coboundary of the embedded cochain must be
    within log-Euclidean distance `tol` of the identity. Converse: when the
    SPD coboundary is the identity and every map commutes with the entrywise
    absolute value (signed permutations, for which |M z| = |M| |z|), the
    vector coboundary of |x| under the unsigned maps |M| must vanish — the
    line-bundle quotient. For other maps only the gauge class is determined
    and the converse is reported as not checkable.
    """
    if spd_sheaf is None:
        spd_sheaf = matched_spd_sheaf(sheaf)
    I = np.eye(sheaf.n_stalk)
    delta = coboundary(spd_sheaf, embed_cochain(x, eps))
    residuals = [dist_lem(Y, I) for Y in delta]
    fwd_max = max(residuals, default=0.0)
    spd_section = fwd_max <= tol

    mode = "not_triggered"
    conv_max = None
    conv_pass = None
    if spd_section:
        signed_perm = all(
            is_signed_permutation(M) for mm in sheaf.maps for M in mm
        )
        if signed_perm:
            mode = "entrywise"
            unsigned = EuclidSheaf(
                sheaf.n_stalk, sheaf.vertices, sheaf.edges,
                [(np.abs(mt), np.abs(mh)) for mt, mh in sheaf.maps])
            ax = {v: np.abs(np.asarray(xv, dtype=np.float64)) for v, xv in x.items()}
            resid = euclid_coboundary(unsigned, ax)
            conv_max = max((float(np.linalg.norm(r)) for r in resid), default=0.0)
            conv_pass = conv_max <= tol
        else:
            mode = "gauge_class_only"
    return CorrespondenceReport(
        forward_residuals=[float(r) for r in residuals],
        forward_max_residual=float(fwd_max),
        forward_pass=spd_section,
        spd_section=spd_section,
        converse_mode=mode,
        converse_max_residual=conv_max,
        converse_pass=conv_pass,
    )


def strictness_witness(sheaf: SheafGraph, tol: float = 1e-7) -> dict:
    """A global section with >= 3 distinct eigenvalues, hence outside the embedding image.

    Requires trivial holonomy (all cycle representatives equal to the
    identity) and stalk dimension >= 3. The witness is diag(1, ..., n)
    parallel-transported from a root in each component; orthogonal transport
    preserves the eigenvalue multiset, so every vertex value stays outside
    the embedding's two-eigenvalue image.
    """
    n = sheaf.n_stalk
    if n < 3:
        raise NotApplicableError("strictness witness requires stalk dimension >= 3")
    P = np.diag(np.arange(1.0, n + 1.0))
    witness: dict = {}
    for comp in connected_components(sheaf):
        W, chords = _component_transports(sheaf, comp[0])
        for k in chords:
            t, h = sheaf.edges[k]
            Mt, Mh = sheaf.maps[k]
            rho = W[h].T @ (Mh.T @ Mt) @ W[t]
            if np.linalg.norm(rho - np.eye(n)) > 1e-8:
                raise NotApplicableError("sheaf has nontrivial holonomy")
        for v in comp:
            witness[v] = _sym_part(W[v] @ P @ W[v].T)
    I = np.eye(n)
    resid = max((dist_lem(Y, I) for Y in coboundary(sheaf, witness)), default=0.0)
    if resid > tol:
        raise AssertionError(f"transported witness failed the section check ({resid:.3e})")
    return witness
