"""SPD-valued cellular sheaves on graphs.

A sheaf attaches the SPD cone to every vertex and edge of a (multi)graph and
an orthogonal congruence ``P -> M P M^T`` to every incidence. The coboundary
measures per-edge disagreement in the log domain, its adjoint (with respect
to the log-domain Frobenius pairing) aggregates edge values back to vertices,
and the Laplacian is literally the composition of the two.

Sign convention: the tail of an oriented edge carries ``+`` in both the
coboundary and the adjoint (incidence index 0 for the tail, 1 for the head).
This is the unique choice under which the stated adjoint formula satisfies
the Green identity ``<d sigma, tau> = <sigma, d^T tau>`` verbatim.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .spd import (
    EIG_FLOOR,
    ORTH_TOL,
    _expm_stack,
    _logm_stack,
    _sym_part,
    conj_operator,
    sym_dim,
    sym_exp,
    sym_to_vec,
    vec_to_sym,
)

#: Singular values below NULL_TOL * sigma_max count as zero in rank decisions.
NULL_TOL = 1e-8

# Cochain0: mapping vertex id -> SPD array. Cochain1: sequence aligned with edges.
Cochain0 = Mapping[object, np.ndarray]
Cochain1 = Sequence[np.ndarray]


class SheafGraph:
    """Graph + stalk dimension + per-edge orthogonal restriction maps.

    ``edges[k] = (tail, head)`` is an oriented edge; ``maps[k]`` holds the
    pair ``(M_tail, M_head)`` of orthogonal matrices mapping the endpoint
    stalks into the edge stalk. Parallel edges are allowed, self-loops are
    not. Instances are immutable after construction.
    """

    __slots__ = ("n_stalk", "vertices", "edges", "maps", "_vindex")

    def __init__(self, n_stalk, vertices, edges, maps, validate: bool = True):
        self.n_stalk = int(n_stalk)
        self.vertices = tuple(vertices)
        self.edges = tuple((t, h) for t, h in edges)
        frozen_maps = []
        for mt, mh in maps:
            mt = np.array(mt, dtype=np.float64)
            mh = np.array(mh, dtype=np.float64)
            mt.setflags(write=False)
            mh.setflags(write=False)
            frozen_maps.append((mt, mh))
        self.maps = tuple(frozen_maps)
        self._vindex = {v: i for i, v in enumerate(self.vertices)}
        if validate:
            self._validate()

    def __repr__(self):
        return (f"SheafGraph(n_stalk={self.n_stalk}, |V|={self.n_vertices}, "
                f"|E|={self.n_edges})")

    def _validate(self):
        if self.n_stalk < 1:
            raise InvalidInputError("stalk dimension must be positive")
        if len(self._vindex) != len(self.vertices):
            raise InvalidInputError("duplicate vertex ids")
        if len(self.maps) != len(self.edges):
            raise InvalidInputError("one (map_tail, map_head) pair required per edge")
        n = self.n_stalk
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
    def identity_maps(cls, n_stalk: int, vertices: Iterable, edges: Iterable) -> "SheafGraph":
        """Sheaf whose restriction maps are all the identity."""
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

    def incidence_index(self, v, edge_idx: int) -> int:
        """0 if v is the tail of the edge, 1 if the head."""
        t, h = self.edges[edge_idx]
        if v == t:
            return 0
        if v == h:
            return 1
        raise InvalidInputError(f"vertex {v!r} is not incident to edge {edge_idx}")


# ---------------------------------------------------------------------------
# cochain helpers


def _check_cochain0(sheaf: SheafGraph, sigma: Cochain0) -> np.ndarray:
    """Stack a 0-cochain into a (|V|, n, n) array in vertex order."""
    n = sheaf.n_stalk
    out = np.empty((sheaf.n_vertices, n, n))
    for i, v in enumerate(sheaf.vertices):
        if v not in sigma:
            raise InvalidInputError(f"cochain is missing vertex {v!r}")
        X = np.asarray(sigma[v], dtype=np.float64)
        if X.shape != (n, n):
            raise InvalidInputError(f"vertex {v!r}: value shape {X.shape} != ({n}, {n})")
        out[i] = X
    return out


def _check_cochain1(sheaf: SheafGraph, tau: Cochain1) -> np.ndarray:
    n = sheaf.n_stalk
    tau = list(tau)
    if len(tau) != sheaf.n_edges:
        raise InvalidInputError(f"cochain has {len(tau)} edge values, expected {sheaf.n_edges}")
    out = np.empty((sheaf.n_edges, n, n))
    for k, Y in enumerate(tau):
        Y = np.asarray(Y, dtype=np.float64)
        if Y.shape != (n, n):
            raise InvalidInputError(f"edge {k}: value shape {Y.shape} != ({n}, {n})")
        out[k] = Y
    return out


def identity_cochain0(sheaf: SheafGraph) -> dict:
    I = np.eye(sheaf.n_stalk)
    return {v: I.copy() for v in sheaf.vertices}


def _edge_endpoint_indices(sheaf: SheafGraph) -> tuple[np.ndarray, np.ndarray]:
    tails = np.array([sheaf.vertex_index(t) for t, _ in sheaf.edges], dtype=int)
    heads = np.array([sheaf.vertex_index(h) for _, h in sheaf.edges], dtype=int)
    return tails, heads


def _map_stacks(sheaf: SheafGraph) -> tuple[np.ndarray, np.ndarray]:
    n = sheaf.n_stalk
    if sheaf.n_edges == 0:
        return np.zeros((0, n, n)), np.zeros((0, n, n))
    Mt = np.stack([m[0] for m in sheaf.maps])
    Mh = np.stack([m[1] for m in sheaf.maps])
    return Mt, Mh


# ---------------------------------------------------------------------------
# coboundary, adjoint, Laplacian


def _coboundary_logs(sheaf: SheafGraph, logs: np.ndarray) -> np.ndarray:
    """Per-edge log-domain coboundary from stacked vertex logs."""
    tails, heads = _edge_endpoint_indices(sheaf)
    Mt, Mh = _map_stacks(sheaf)
    Tt = Mt @ logs[tails] @ np.swapaxes(Mt, -1, -2)
    Th = Mh @ logs[heads] @ np.swapaxes(Mh, -1, -2)
    return _sym_part(Tt - Th)


def coboundary(sheaf: SheafGraph, sigma: Cochain0) -> list[np.ndarray]:
    """Coboundary: per oriented edge, exp(log F_tail(s_tail) - log F_head(s_head)).

    The result is the identity cochain exactly when sigma is a global section.
    """
    stack = _check_cochain0(sheaf, sigma)
    if sheaf.n_edges == 0:
        return []
    T = _coboundary_logs(sheaf, _logm_stack(stack))
    return list(_expm_stack(T))


def _adjoint_logs(sheaf: SheafGraph, tau_logs: np.ndarray) -> np.ndarray:
    """Per-vertex log-domain adjoint from stacked edge logs."""
    n = sheaf.n_stalk
    acc = np.zeros((sheaf.n_vertices, n, n))
    if sheaf.n_edges:
        tails, heads = _edge_endpoint_indices(sheaf)
        Mt, Mh = _map_stacks(sheaf)
        pulled_t = np.swapaxes(Mt, -1, -2) @ tau_logs @ Mt
        pulled_h = np.swapaxes(Mh, -1, -2) @ tau_logs @ Mh
        np.add.at(acc, tails, pulled_t)
        np.add.at(acc, heads, -pulled_h)
    return _sym_part(acc)


def adjoint(sheaf: SheafGraph, tau: Cochain1) -> dict:
    """Adjoint of the coboundary: exp of the signed pulled-back edge logs.

    Satisfies the Green identity against :func:`coboundary` under
    :func:`cochain_pairing`. Vertices with no incident edges receive the
    identity (empty sum).
    """
    stack = _check_cochain1(sheaf, tau)
    logs = _logm_stack(stack) if sheaf.n_edges else stack
    out = _expm_stack(_adjoint_logs(sheaf, logs))
    return {v: out[i] for i, v in enumerate(sheaf.vertices)}


def laplacian(sheaf: SheafGraph, sigma: Cochain0) -> dict:
    """Sheaf Laplacian, implemented as adjoint(coboundary(sigma))."""
    return adjoint(sheaf, coboundary(sheaf, sigma))


def _laplacian_logs(sheaf: SheafGraph, logs: np.ndarray) -> np.ndarray:
    return _adjoint_logs(sheaf, _coboundary_logs(sheaf, logs))


def cochain_pairing(a, b) -> float:
    """Sum of per-cell log-domain Frobenius pairings of two cochains."""
    if isinstance(a, Mapping) and isinstance(b, Mapping):
        if set(a) != set(b):
            raise InvalidInputError("cochains are defined on different vertex sets")
        keys = list(a)
        A = _logm_stack(np.stack([np.asarray(a[k], dtype=float) for k in keys]))
        B = _logm_stack(np.stack([np.asarray(b[k], dtype=float) for k in keys]))
    elif not isinstance(a, Mapping) and not isinstance(b, Mapping):
        a, b = list(a), list(b)
        if len(a) != len(b):
            raise InvalidInputError("cochains are defined on different edge sets")
        if not a:
            return 0.0
        A = _logm_stack(np.stack([np.asarray(x, dtype=float) for x in a]))
        B = _logm_stack(np.stack([np.asarray(x, dtype=float) for x in b]))
    else:
        raise InvalidInputError("cannot pair a 0-cochain with a 1-cochain")
    return float(np.sum(A * B))


# ---------------------------------------------------------------------------
# the dense log-domain operator


def coboundary_matrix(sheaf: SheafGraph) -> np.ndarray:
    """Dense matrix B with ``vec(log coboundary(sigma)) = B vec(log sigma)``.

    Acts on the sqrt(2)-scaled upper-triangular vectorization, so Euclidean
    inner products of vectors equal the cochain pairings. Shape
    (|E| m, |V| m) with m = n(n+1)/2.
    """
    n, m = sheaf.n_stalk, sym_dim(sheaf.n_stalk)
    B = np.zeros((sheaf.n_edges * m, sheaf.n_vertices * m))
    for k, ((t, h), (Mt, Mh)) in enumerate(zip(sheaf.edges, sheaf.maps)):
        it, ih = sheaf.vertex_index(t), sheaf.vertex_index(h)
        B[k * m : (k + 1) * m, it * m : (it + 1) * m] += conj_operator(Mt)
        B[k * m : (k + 1) * m, ih * m : (ih + 1) * m] -= conj_operator(Mh)
    return B


def log_cochain0_vec(sheaf: SheafGraph, sigma: Cochain0) -> np.ndarray:
    """Concatenated vec(log sigma_v) in vertex order."""
    stack = _check_cochain0(sheaf, sigma)
    return sym_to_vec(_logm_stack(stack)).ravel()


def log_cochain1_vec(sheaf: SheafGraph, tau: Cochain1) -> np.ndarray:
    stack = _check_cochain1(sheaf, tau)
    if sheaf.n_edges == 0:
        return np.zeros(0)
    return sym_to_vec(_logm_stack(stack)).ravel()


def cochain0_from_vec(sheaf: SheafGraph, vec) -> dict:
    """Exponentiate a stacked log-domain vector back into a 0-cochain."""
    n, m = sheaf.n_stalk, sym_dim(sheaf.n_stalk)
    vec = np.asarray(vec, dtype=np.float64).reshape(sheaf.n_vertices, m)
    return {v: sym_exp(vec_to_sym(vec[i], n)) for i, v in enumerate(sheaf.vertices)}


def nullspace(A: np.ndarray, tol: float = NULL_TOL) -> np.ndarray:
    """Orthonormal nullspace basis (columns) via SVD with a relative cutoff."""
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, Vh = np.linalg.svd(A)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    return Vh[rank:].T.copy()


def global_sections(sheaf: SheafGraph, tol: float = NULL_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the log-domain kernel of the coboundary.

    Exponentiating any combination of basis columns via
    :func:`cochain0_from_vec` yields a 0-cochain whose coboundary is the
    identity on every edge.
    """
    if tol <= 0:
        raise InvalidInputError("tolerance must be positive")
    return nullspace(coboundary_matrix(sheaf), tol)


def sheaf_index(sheaf: SheafGraph, tol: float = NULL_TOL) -> int:
    """dim ker(coboundary) - dim ker(adjoint), from SVD ranks.

    Equals (|V| - |E|) * n(n+1)/2 on every sheaf by rank-nullity.
    """
    m = sym_dim(sheaf.n_stalk)
    B = coboundary_matrix(sheaf)
    if B.shape[0] == 0:
        rank = 0
    else:
        s = np.linalg.svd(B, compute_uv=False)
        rank = int(np.sum(s > tol * s[0])) if s.size else 0
    dim_ker_b = sheaf.n_vertices * m - rank
    dim_ker_bt = sheaf.n_edges * m - rank
    return dim_ker_b - dim_ker_bt


# ---------------------------------------------------------------------------
# holonomy


def connected_components(sheaf: SheafGraph) -> list[list]:
    """Vertex lists of the connected components, in vertex order."""
    adj: dict = {v: [] for v in sheaf.vertices}
    for t, h in sheaf.edges:
        adj[t].append(h)
        adj[h].append(t)
    seen = set()
    comps = []
    for v in sheaf.vertices:
        if v in seen:
            continue
        comp, queue = [], [v]
        seen.add(v)
        while queue:
            u = queue.pop()
            comp.append(u)
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def edge_transport(sheaf: SheafGraph, edge_idx: int) -> np.ndarray:
    """Transport tail-stalk logs to head-stalk logs: ``M_head^T M_tail``."""
    Mt, Mh = sheaf.maps[edge_idx]
    return Mh.T @ Mt


def _component_transports(sheaf: SheafGraph, root) -> tuple[dict, list[int]]:
    """BFS spanning tree from `root`: per-vertex transport W_v and chord edges.

    W_v carries the root stalk to the stalk at v along the tree
    (W_root = I); the returned list holds non-tree edge indices inside the
    component.
    """
    n = sheaf.n_stalk
    incident: dict = {v: [] for v in sheaf.vertices}
    for k, (t, h) in enumerate(sheaf.edges):
        incident[t].append((k, h, False))
        incident[h].append((k, t, True))
    W = {root: np.eye(n)}
    tree_edges: set[int] = set()
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for k, w, reverse in incident[u]:
            if w in W:
                continue
            T = edge_transport(sheaf, k)
            W[w] = (T.T if reverse else T) @ W[u]
            tree_edges.add(k)
            queue.append(w)
    chords = [
        k
        for k, (t, h) in enumerate(sheaf.edges)
        if k not in tree_edges and t in W and h in W
    ]
    return W, chords


def holonomy_reps(sheaf: SheafGraph) -> list[np.ndarray]:
    """Based holonomy of each fundamental cycle of a connected sheaf.

    For a chord e = (u, v) with tree transports W, the representative is
    ``W_v^T T_e W_u``: the orthogonal matrix a root-stalk log accumulates
    around the corresponding cycle. Trees return an empty list.
    """
    comps = connected_components(sheaf)
    if len(comps) != 1:
        raise InvalidInputError("holonomy_reps requires a connected graph; split per component")
    W, chords = _component_transports(sheaf, comps[0][0])
    reps = []
    for k in chords:
        t, h = sheaf.edges[k]
        reps.append(W[h].T @ edge_transport(sheaf, k) @ W[t])
    return reps


def holonomy_fixed_space(reps: Sequence[np.ndarray], n: int | None = None,
                         tol: float = NULL_TOL) -> np.ndarray:
    """Orthonormal basis of {A in Sym_n : rho A rho^T = A for all rho}.

    Computed as the joint nullspace of the stacked conjugation-minus-identity
    operators on symmetric-matrix coordinates. With no representatives the
    whole of Sym_n is returned (n must then be given).
    """
    reps = list(reps)
    if not reps:
        if n is None:
            raise InvalidInputError("n is required when the representation list is empty")
        return np.eye(sym_dim(n))
    n = reps[0].shape[0]
    m = sym_dim(n)
    blocks = [conj_operator(r) - np.eye(m) for r in reps]
    return nullspace(np.vstack(blocks), tol)


def section_space_summary(sheaf: SheafGraph, tol: float = NULL_TOL) -> dict:
    """Kernel dimension, index and per-component holonomy fixed dimensions."""
    basis = global_sections(sheaf, tol)
    comps = connected_components(sheaf)
    fixed_dims = []
    for comp in comps:
        sub = _subsheaf(sheaf, comp)
        reps = holonomy_reps(sub)
        fixed_dims.append(holonomy_fixed_space(reps, sheaf.n_stalk, tol).shape[1])
    return {
        "kernel_dim": int(basis.shape[1]),
        "index": sheaf_index(sheaf, tol),
        "components": len(comps),
        "holonomy_fixed_dims": fixed_dims,
        "holonomy_fixed_total": int(sum(fixed_dims)),
    }


def _subsheaf(sheaf: SheafGraph, vertices: Sequence) -> SheafGraph:
    keep = set(vertices)
    edges, maps = [], []
    for (t, h), mm in zip(sheaf.edges, sheaf.maps):
        if t in keep and h in keep:
            edges.append((t, h))
            maps.append(mm)
    return SheafGraph(sheaf.n_stalk, vertices, edges, maps, validate=False)


# ---------------------------------------------------------------------------
# diffusion


def diffusion_step(sheaf: SheafGraph, sigma: Cochain0, normalize: bool = True,
                   residual: bool = True, floor: float = EIG_FLOOR) -> dict:
    """One Lie-group diffusion update ``X_v <- exp(log X_v + D_v)``.

    ``D_v`` is the log-domain Laplacian output at v, optionally rescaled so
    its spectral radius is at most 1 (division by max(1, radius), which
    leaves already-small updates untouched). With ``residual=False`` the
    update drops the ``log X_v`` term and returns ``exp(D_v)`` alone. Output
    eigenvalues are floored at `floor` (the construction-time clamp), which
    keeps states log-representable across deep runs.
    """
    stack = _check_cochain0(sheaf, sigma)
    logs = _logm_stack(stack)
    delta = _laplacian_logs(sheaf, logs)
    if normalize:
        radii = np.max(np.abs(np.linalg.eigvalsh(delta)), axis=-1)
        delta /= np.maximum(1.0, radii)[:, None, None]
    new_logs = logs + delta if residual else delta
    # clamp into [floor, 1/floor]: keeps deep residual runs log-representable
    # (the residual drift is otherwise unbounded) without touching states in
    # the normal operating box
    w, V = np.linalg.eigh(new_logs)
    w = np.clip(w, np.log(floor), -np.log(floor))
    out = _sym_part((V * np.exp(w)[..., None, :]) @ np.swapaxes(V, -1, -2))
    return {v: out[i] for i, v in enumerate(sheaf.vertices)}
