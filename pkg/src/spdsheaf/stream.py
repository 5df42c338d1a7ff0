"""Geometric diffusion stream: coordinate lifting, equivariant frames,
learned restriction maps, layered SPD sheaf convolution, pooling and rank
diagnostics.

The stream turns a 3D point cloud into near-rank-one SPD matrices (direction
outer products plus a small ridge), optionally canonicalizes them with
per-vertex equivariant frames so downstream outputs are invariant to rigid
motions, and then applies sheaf-Laplacian updates in the log domain. Layer
parameters are evaluated at seeded random values; the only trained component
is a convex logistic readout on pooled descriptors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidInputError
from .sheaf import SheafGraph, _check_cochain0, _laplacian_logs, diffusion_step
from .spd import (
    _expm_stack,
    _eigh_desc_stack,
    _logm_stack,
    cayley,
    dist_lem,
    erank,
    power_euclidean_mean,
    skew_from_params,
    spd_log,
    sym_dim,
    sym_to_vec,
    vec_to_sym,
    sym_exp,
)


class PointCloud:
    """Vertex coordinates in R^3 plus an undirected edge list."""

    __slots__ = ("ids", "points", "edges", "_index")

    def __init__(self, points, edges, ids=None):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise InvalidInputError("point cloud has non-finite coordinates")
        if self.points.shape[0] == 0:
            raise InvalidInputError("point cloud is empty")
        self.ids = tuple(ids) if ids is not None else tuple(range(self.points.shape[0]))
        if len(self.ids) != self.points.shape[0]:
            raise InvalidInputError("one id per point required")
        self._index = {v: i for i, v in enumerate(self.ids)}
        self.edges = tuple((t, h) for t, h in edges)
        for t, h in self.edges:
            if t not in self._index or h not in self._index:
                raise InvalidInputError(f"edge ({t!r}, {h!r}) references unknown vertex")
            if t == h:
                raise InvalidInputError(f"self-loop at vertex {t!r}")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def index(self, v) -> int:
        return self._index[v]

    def neighbors(self, v):
        out = []
        for t, h in self.edges:
            if t == v:
                out.append(h)
            elif h == v:
                out.append(t)
        return out


def knn_edges(points, k: int = 3) -> list[tuple[int, int]]:
    """Symmetrized k-nearest-neighbour edges on positional indices."""
    pts = np.asarray(points, dtype=np.float64)
    N = pts.shape[0]
    k = min(k, N - 1)
    if k <= 0:
        return []
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    pairs = set()
    for i in range(N):
        for j in np.argsort(d2[i])[:k]:
            pairs.add((min(i, int(j)), max(i, int(j))))
    return sorted(pairs)


def geometric_graph(points, radius: float, k_fallback: int = 2) -> list[tuple[int, int]]:
    """Radius graph; vertices left isolated get their k nearest neighbours."""
    pts = np.asarray(points, dtype=np.float64)
    N = pts.shape[0]
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    pairs = {(i, j) for i in range(N) for j in range(i + 1, N) if d2[i, j] <= radius**2}
    degree = np.zeros(N, dtype=int)
    for i, j in pairs:
        degree[i] += 1
        degree[j] += 1
    for i in range(N):
        if degree[i] == 0 and N > 1:
            for j in np.argsort(d2[i])[:k_fallback]:
                pairs.add((min(i, int(j)), max(i, int(j))))
    return sorted(pairs)


# ---------------------------------------------------------------------------
# lifting and frames


def lift_coordinates(pc: PointCloud, eps_dir: float = 1e-8,
                     eps_spd: float = 1e-4) -> dict:
    """Centroid-centered unit directions lifted to near-rank-one SPD matrices.

    ``X_v = u u^T + eps_spd I`` with ``u = (p_v - centroid)/(||.|| + eps_dir)``.
    Exactly translation invariant; points at the centroid degrade gracefully
    to ``eps_spd I``.
    """
    centered = pc.points - pc.points.mean(axis=0)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    u = centered / (norms + eps_dir)
    lifted = u[:, :, None] * u[:, None, :] + eps_spd * np.eye(3)
    return {v: lifted[i] for i, v in enumerate(pc.ids)}


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def local_frame(pc: PointCloud) -> tuple[dict, dict]:
    """Per-vertex equivariant orthonormal frame, with degeneracy flags.

    Columns: normalized centroid displacement, Gram-Schmidt of the summed
    unit neighbour directions, and their cross product. Under a global
    rotation R the frame maps to R times itself, so ``M^T X M`` is rotation
    invariant. Degenerate geometry (no displacement, no neighbours, collinear
    directions) falls back to the least-aligned canonical axis and sets the
    vertex flag.
    """
    centered = pc.points - pc.points.mean(axis=0)
    frames, flags = {}, {}
    for i, v in enumerate(pc.ids):
        flagged = False
        u = centered[i]
        if np.linalg.norm(u) < 1e-12:
            u = np.array([1.0, 0.0, 0.0])
            flagged = True
        v1 = _unit(u)
        agg = np.zeros(3)
        for w in pc.neighbors(v):
            d = pc.points[pc.index(w)] - pc.points[i]
            nd = np.linalg.norm(d)
            if nd > 0:
                agg += d / nd
        v2 = agg - np.dot(agg, v1) * v1
        if np.linalg.norm(v2) < 1e-8 * max(1.0, np.linalg.norm(agg)):
            axis = np.zeros(3)
            axis[np.argmin(np.abs(v1))] = 1.0
            v2 = axis - np.dot(axis, v1) * v1
            flagged = True
        v2 = _unit(v2)
        v3 = np.cross(v1, v2)
        frames[v] = np.column_stack([v1, v2, v3])
        flags[v] = flagged
    return frames, flags


def canonicalize(sigma: dict, frames: dict) -> dict:
    """Express each stalk value in its local frame: ``M^T X M``."""
    return {v: frames[v].T @ X @ frames[v] for v, X in sigma.items()}


def node_features(sigma: dict) -> dict:
    """Log-domain feature vector per vertex: vec_upper(log X), sqrt(2)-scaled."""
    return {v: sym_to_vec(spd_log(X)) for v, X in sigma.items()}


def unvectorize_feature(h, n: int) -> np.ndarray:
    """Inverse of :func:`node_features` for one vertex."""
    return sym_exp(vec_to_sym(h, n))


# ---------------------------------------------------------------------------
# layer parameters


@dataclass(frozen=True)
class LayerParams:
    """Seed matrix for the learnable isometry plus sheaf-learner MLP weights.

    The MLP maps concatenated endpoint features (2 * n(n+1)/2) through one
    tanh hidden layer to two heads of n(n-1)/2 skew parameters, one per
    endpoint map.
    """

    w_q: np.ndarray
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray

    def __post_init__(self):
        for name in ("w_q", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"layer parameter {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        n = self.w_q.shape[0]
        if self.w_q.shape != (n, n):
            raise InvalidInputError("isometry seed must be square")
        if self.mlp_w2.shape[0] != 2 * (n * (n - 1) // 2):
            raise InvalidInputError(
                "sheaf MLP must emit n(n-1)/2 skew parameters per endpoint map")

    @property
    def n(self) -> int:
        return self.w_q.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.mlp_w1.shape[1] // 2

    @classmethod
    def random(cls, n: int, hidden: int = 32, rng=None, scale: float = 1.0) -> "LayerParams":
        rng = np.random.default_rng(rng)
        feat = sym_dim(n)
        skew = n * (n - 1) // 2
        return cls(
            w_q=rng.normal(size=(n, n)),
            mlp_w1=rng.normal(size=(hidden, 2 * feat)) / math.sqrt(2 * feat),
            mlp_b1=rng.normal(size=hidden) * 0.1,
            mlp_w2=rng.normal(size=(2 * skew, hidden)) * scale / math.sqrt(hidden),
            mlp_b2=rng.normal(size=2 * skew) * 0.1 * scale,
        )

    @classmethod
    def identity(cls, n: int, hidden: int = 32) -> "LayerParams":
        feat = sym_dim(n)
        skew = n * (n - 1) // 2
        return cls(
            w_q=np.eye(n),
            mlp_w1=np.zeros((hidden, 2 * feat)),
            mlp_b1=np.zeros(hidden),
            mlp_w2=np.zeros((2 * skew, hidden)),
            mlp_b2=np.zeros(2 * skew),
        )


def learnable_isometry(W) -> np.ndarray:
    """Orthogonalize a full-rank seed by QR with column signs fixed positive.

    The sign fix (multiplying Q by sign(diag R)) makes the map a continuous
    function of W wherever the diagonal of R stays away from zero. A
    rank-deficient seed is perturbed and retried.
    """
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    if np.linalg.matrix_rank(W) < n:
        W = W + 1e-8 * np.eye(n)
    Q, R = np.linalg.qr(W)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def sheaf_learner(params: LayerParams, h_u, h_v) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal restriction maps for an edge from concatenated endpoint features.

    One hidden-layer MLP produces two heads of skew parameters; each head is
    antisymmetrized into S and mapped through the Cayley transform, so both
    outputs are exactly orthogonal. Zero weights give identity maps.
    """
    h_u = np.asarray(h_u, dtype=np.float64).ravel()
    h_v = np.asarray(h_v, dtype=np.float64).ravel()
    z = np.concatenate([h_u, h_v])
    if z.size != params.mlp_w1.shape[1]:
        raise InvalidInputError(
            f"feature dimension mismatch: got {z.size}, expected {params.mlp_w1.shape[1]}")
    hidden = np.tanh(params.mlp_w1 @ z + params.mlp_b1)
    logits = params.mlp_w2 @ hidden + params.mlp_b2
    n = params.n
    k = n * (n - 1) // 2
    M_tail = cayley(skew_from_params(logits[:k], n))
    M_head = cayley(skew_from_params(logits[k:], n))
    return M_tail, M_head


# ---------------------------------------------------------------------------
# the convolution layer


def _edge_maps_from_features(edges, feats, params) -> list:
    return [sheaf_learner(params, feats[t], feats[h]) for t, h in edges]


def spd_sheaf_layer(topology, sigma: dict, params: LayerParams,
                    tg_delta: float = 0.1) -> tuple[dict, "TraceRow"]:
    """One SPD sheaf convolution layer.

    Steps: conjugate states by the learnable isometry, regenerate restriction
    maps from current log-domain features, add the per-vertex log-Laplacian
    update (eigenvalues normalized to [-1, 1]), exponentiate the residual sum
    and apply the eigenvalue floor nonlinearity. Returns the new cochain and
    its trace row (layer index -1; stack drivers assign real indices).
    """
    vertices = list(topology.ids) if isinstance(topology, PointCloud) else list(topology.vertices)
    edges = topology.edges
    n = next(iter(sigma.values())).shape[0]

    feats = node_features(sigma)
    Q = learnable_isometry(params.w_q)
    tilde = {v: Q @ X @ Q.T for v, X in sigma.items()}
    maps = _edge_maps_from_features(edges, feats, params)
    sheaf = SheafGraph(n, vertices, edges, maps, validate=False)

    stack = _check_cochain0(sheaf, tilde)
    delta = _laplacian_logs(sheaf, _logm_stack(stack))
    radii = np.max(np.abs(np.linalg.eigvalsh(delta)), axis=-1)
    delta /= np.maximum(1.0, radii)[:, None, None]

    base = _logm_stack(_check_cochain0(sheaf, sigma))
    updated = _expm_stack(base + delta)
    w, V = _eigh_desc_stack(updated)
    idx = np.arange(1, n + 1, dtype=np.float64)
    w_new = np.where(np.log(w) > 0.0, w, np.exp(tg_delta * idx))
    out_stack = (V * w_new[..., None, :]) @ np.swapaxes(V, -1, -2)
    out_stack = 0.5 * (out_stack + np.swapaxes(out_stack, -1, -2))
    out = {v: out_stack[i] for i, v in enumerate(vertices)}
    return out, trace_row(out, layer=-1)


# ---------------------------------------------------------------------------
# rank diagnostics


@dataclass
class TraceRow:
    layer: int
    mean_erank: float
    mean_lambda2: float
    min_pairwise_lem: float
    node_eranks: dict

    def as_csv(self) -> str:
        return (f"{self.layer},{self.mean_erank!r},{self.mean_lambda2!r},"
                f"{self.min_pairwise_lem!r}")


@dataclass
class RankTrace:
    """Per-layer effective-rank diagnostics of a diffusion run."""

    rows: list

    def to_csv(self) -> str:
        lines = ["layer,mean_erank,mean_lambda2,min_pairwise_lem"]
        lines += [r.as_csv() for r in self.rows]
        return "\n".join(lines) + "\n"

    def mean_eranks(self) -> list[float]:
        return [r.mean_erank for r in self.rows]


def trace_row(sigma: dict, layer: int) -> TraceRow:
    """Summary statistics of one cochain: eranks, second eigenvalues, spread."""
    vals = list(sigma.values())
    eranks = {v: erank(X) for v, X in sigma.items()}
    lam2 = [np.sort(np.linalg.eigvalsh(X))[-2] if X.shape[0] > 1 else float("nan")
            for X in vals]
    if len(vals) > 1:
        min_lem = min(
            dist_lem(vals[i], vals[j])
            for i in range(len(vals)) for j in range(i + 1, len(vals))
        )
    else:
        min_lem = 0.0
    return TraceRow(
        layer=layer,
        mean_erank=float(np.mean(list(eranks.values()))),
        mean_lambda2=float(np.mean(lam2)),
        min_pairwise_lem=float(min_lem),
        node_eranks=eranks,
    )


def rank_trace(cochains: Sequence[dict]) -> RankTrace:
    """Build the layer-indexed trace from a sequence of per-layer cochains."""
    return RankTrace(rows=[trace_row(c, layer=i) for i, c in enumerate(cochains)])


def run_layers(topology, sigma0: dict, params_list: Sequence[LayerParams]) -> tuple[dict, RankTrace]:
    """Apply a stack of convolution layers, collecting the trace."""
    states = [sigma0]
    sigma = sigma0
    for params in params_list:
        sigma, _ = spd_sheaf_layer(topology, sigma, params)
        states.append(sigma)
    return sigma, rank_trace(states)


def pooled_descriptor(sigma: dict, theta: float = 0.5) -> np.ndarray:
    """vec_upper(log of the power-Euclidean mean); permutation invariant."""
    if not sigma:
        raise InvalidInputError("cannot pool an empty cochain")
    mean = power_euclidean_mean(list(sigma.values()), theta)
    return sym_to_vec(spd_log(mean))


def geometric_descriptor(pc: PointCloud, params_list: Sequence[LayerParams],
                         theta: float = 0.5, eps_dir: float = 1e-8,
                         eps_spd: float = 1e-4, frame_invariant: bool = True) -> np.ndarray:
    """Full pipeline: lift, optionally canonicalize, convolve, pool.

    With ``frame_invariant`` the lifted states are expressed in their
    equivariant local frames, making the descriptor invariant under rigid
    motions of the cloud; without it the descriptor lives in the task frame
    and retains the absolute second-order orientation structure.
    """
    sigma = lift_coordinates(pc, eps_dir, eps_spd)
    if frame_invariant:
        frames, _ = local_frame(pc)
        sigma = canonicalize(sigma, frames)
    sigma, _ = run_layers(pc, sigma, params_list)
    return pooled_descriptor(sigma, theta)


# ---------------------------------------------------------------------------
# plain diffusion runs (depth robustness experiments)


def diffusion_run(pc: PointCloud, layers: int, seed: int,
                  identity_maps: bool = False, residual: bool = True,
                  normalize: bool = True, eps_dir: float = 1e-8,
                  eps_spd: float = 1e-4) -> tuple[dict, RankTrace]:
    """Iterate plain sheaf diffusion on a lifted cloud.

    Restriction maps are resampled per layer (random special-orthogonal via
    the Cayley transform of random skew matrices) unless ``identity_maps`` is
    set. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    sigma = lift_coordinates(pc, eps_dir, eps_spd)
    states = [sigma]
    I = np.eye(3)
    for _ in range(layers):
        if identity_maps:
            maps = [(I, I)] * len(pc.edges)
        else:
            maps = []
            for _e in pc.edges:
                st = rng.normal(size=(3, 3))
                sh = rng.normal(size=(3, 3))
                maps.append((cayley(st - st.T), cayley(sh - sh.T)))
        sheaf = SheafGraph(3, pc.ids, pc.edges, maps, validate=False)
        sigma = diffusion_step(sheaf, sigma, normalize=normalize, residual=residual)
        states.append(sigma)
    return sigma, rank_trace(states)


# ---------------------------------------------------------------------------
# convex readout


@dataclass
class ProbeResult:
    train_accuracy: float
    test_accuracy: float
    weights: np.ndarray


def linear_probe(train_x, train_y, test_x, test_y, steps: int = 2000,
                 lr: float = 0.5, l2: float = 1e-4) -> ProbeResult:
    """Logistic readout trained by full-batch gradient descent.

    Features are standardized with training statistics; the objective is the
    regularized binary cross-entropy, which is convex, so zero
    initialization makes the result deterministic.
    """
    X = np.asarray(train_x, dtype=np.float64)
    y = np.asarray(train_y, dtype=np.float64).ravel()
    Xt = np.asarray(test_x, dtype=np.float64)
    yt = np.asarray(test_y, dtype=np.float64).ravel()
    classes = np.unique(y)
    if classes.size < 2:
        raise DomainError("probe requires at least two classes in the training labels")
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise InvalidInputError("labels must be 0/1")

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd < 1e-12] = 1.0
    Z = np.hstack([np.ones((X.shape[0], 1)), (X - mu) / sd])
    Zt = np.hstack([np.ones((Xt.shape[0], 1)), (Xt - mu) / sd])

    w = np.zeros(Z.shape[1])
    for _ in range(steps):
        p = 1.0 / (1.0 + np.exp(-(Z @ w)))
        grad = Z.T @ (p - y) / Z.shape[0]
        grad[1:] += l2 * w[1:]
        w -= lr * grad

    def acc(M, labels):
        return float(np.mean(((M @ w) > 0).astype(float) == labels))

    return ProbeResult(train_accuracy=acc(Z, y), test_accuracy=acc(Zt, yt), weights=w)


# ---------------------------------------------------------------------------
# synthetic planarity task


def planar_cloud(rng, planar: bool, n_min: int = 8, n_max: int = 20,
                 xy_sigma: float = 0.5, z_jitter: float = 0.02,
                 iso_sigma: float = 0.5) -> PointCloud:
    """Sample one cloud: near-coplanar (class A) or isotropic (class B)."""
    n = int(rng.integers(n_min, n_max + 1))
    if planar:
        pts = np.column_stack([
            rng.normal(scale=xy_sigma, size=n),
            rng.normal(scale=xy_sigma, size=n),
            rng.normal(scale=z_jitter, size=n),
        ])
    else:
        pts = rng.normal(scale=iso_sigma, size=(n, 3))
    return PointCloud(pts, knn_edges(pts, k=3))


def planarity_experiment(seed: int, n_per_class: int = 200, n_layers: int = 2,
                         hidden: int = 32, shuffle_labels: bool = False,
                         theta: float = 0.5) -> dict:
    """Descriptor + probe run for the planar-vs-isotropic task.

    Descriptors live in the task frame (no per-vertex canonicalization): the
    classes are defined relative to a fixed plane, so the probe measures how
    much second-order orientation structure the diffusion stream preserves.
    Half of each class trains the readout, half is held out. With
    ``shuffle_labels`` all labels are permuted before the split (the
    chance-level permutation control).
    """
    rng = np.random.default_rng(seed)
    params = [LayerParams.random(3, hidden=hidden, rng=rng) for _ in range(n_layers)]
    descriptors, labels = [], []
    for label, planar in ((0, False), (1, True)):
        for _ in range(n_per_class):
            pc = planar_cloud(rng, planar)
            descriptors.append(
                geometric_descriptor(pc, params, theta=theta, frame_invariant=False))
            labels.append(label)
    X = np.asarray(descriptors)
    y = np.asarray(labels, dtype=float)

    order = rng.permutation(len(y))
    X, y = X[order], y[order]
    if shuffle_labels:
        y = y[rng.permutation(len(y))]
    half = len(y) // 2
    probe = linear_probe(X[:half], y[:half], X[half:], y[half:])
    return {
        "seed": seed,
        "n_per_class": n_per_class,
        "layers": n_layers,
        "shuffled": shuffle_labels,
        "train_accuracy": probe.train_accuracy,
        "test_accuracy": probe.test_accuracy,
    }
