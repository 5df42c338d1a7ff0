"""JSON schemas for sheaves, cochains, point clouds and signal segments.

Matrices serialize as row-major nested lists; SPD values may use the compact
``{"log_upper": [...]}`` form holding the sqrt(2)-scaled upper-triangular
entries of their logarithm. All writers produce deterministic output (sorted
keys, repr-style floats), so re-running a command yields byte-identical
files.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .covgraph import Segment
from .errors import InvalidInputError, ParseError
from .euclid import EuclidSheaf
from .sheaf import SheafGraph
from .spd import as_spd, spd_log, sym_exp, sym_to_vec, vec_to_sym
from .stream import PointCloud


def load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                         f"{exc.msg}") from exc


def _dump_json(obj, path: str | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


# ---------------------------------------------------------------------------
# matrices


def matrix_to_json(A) -> list:
    return np.asarray(A, dtype=np.float64).tolist()


def spd_to_json(P, compact: bool = False):
    """Nested lists, or the tagged upper-triangular log form when compact."""
    if compact:
        return {"log_upper": sym_to_vec(spd_log(P)).tolist()}
    return matrix_to_json(P)


def matrix_from_json(obj, n_expected: int | None = None) -> np.ndarray:
    """Parse either a nested-list matrix or a {"log_upper": [...]} SPD value."""
    if isinstance(obj, dict):
        if "log_upper" not in obj:
            raise ParseError("matrix object must carry a 'log_upper' field")
        vec = np.asarray(obj["log_upper"], dtype=np.float64)
        n = int((math.isqrt(8 * vec.size + 1) - 1) // 2)
        if n * (n + 1) // 2 != vec.size:
            raise ParseError(f"log_upper length {vec.size} is not triangular")
        if n_expected is not None and n != n_expected:
            raise ParseError(f"log_upper encodes a {n}x{n} matrix, expected {n_expected}")
        return sym_exp(vec_to_sym(vec, n))
    A = np.asarray(obj, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParseError(f"expected a square matrix, got shape {A.shape}")
    if n_expected is not None and A.shape[0] != n_expected:
        raise ParseError(f"expected a {n_expected}x{n_expected} matrix, got {A.shape[0]}")
    return A


# ---------------------------------------------------------------------------
# sheaves and cochains


def sheaf_to_json(sheaf: SheafGraph, cochain0: dict | None = None,
                  path: str | None = None, compact_values: bool = False) -> str:
    edges = [
        {
            "tail": t,
            "head": h,
            "map_tail": matrix_to_json(mt),
            "map_head": matrix_to_json(mh),
        }
        for (t, h), (mt, mh) in zip(sheaf.edges, sheaf.maps)
    ]
    obj = {"n_stalk": sheaf.n_stalk, "vertices": list(sheaf.vertices), "edges": edges}
    if cochain0 is not None:
        obj["cochain0"] = [
            [v, spd_to_json(cochain0[v], compact=compact_values)] for v in sheaf.vertices
        ]
    return _dump_json(obj, path)


def _sheaf_parts_from_obj(obj, what: str):
    try:
        n = int(obj["n_stalk"])
        vertices = [_as_id(v) for v in obj["vertices"]]
        edges, maps = [], []
        for e in obj["edges"]:
            edges.append((_as_id(e["tail"]), _as_id(e["head"])))
            maps.append((matrix_from_json(e["map_tail"], n),
                         matrix_from_json(e["map_head"], n)))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed {what} object: missing {exc}") from exc
    return n, vertices, edges, maps


def _as_id(v):
    if isinstance(v, (str, int)):
        return v
    raise ParseError(f"vertex ids must be strings or integers, got {type(v).__name__}")


def sheaf_from_json_obj(obj) -> tuple[SheafGraph, dict | None]:
    n, vertices, edges, maps = _sheaf_parts_from_obj(obj, "sheaf")
    sheaf = SheafGraph(n, vertices, edges, maps)
    cochain = None
    if obj.get("cochain0") is not None:
        cochain = {}
        for v, val in obj["cochain0"]:
            cochain[_as_id(v)] = as_spd(matrix_from_json(val, n))
        missing = set(sheaf.vertices) - set(cochain)
        if missing:
            raise ParseError(f"cochain0 is missing vertices {sorted(map(str, missing))}")
    return sheaf, cochain


def load_sheaf(path: str) -> tuple[SheafGraph, dict | None]:
    return sheaf_from_json_obj(load_json(path))


def load_euclid_sheaf(path: str) -> EuclidSheaf:
    n, vertices, edges, maps = _sheaf_parts_from_obj(load_json(path), "sheaf")
    return EuclidSheaf(n, vertices, edges, maps)


def cochain0_to_json(n_stalk: int, cochain: dict, path: str | None = None,
                     compact_values: bool = False) -> str:
    obj = {
        "n_stalk": n_stalk,
        "values": [[v, spd_to_json(X, compact=compact_values)] for v, X in cochain.items()],
    }
    return _dump_json(obj, path)


def cochain0_from_json_obj(obj) -> tuple[int, dict]:
    try:
        n = int(obj["n_stalk"])
        values = {_as_id(v): as_spd(matrix_from_json(val, n)) for v, val in obj["values"]}
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed cochain object: missing {exc}") from exc
    return n, values


def load_cochain0(path: str) -> tuple[int, dict]:
    return cochain0_from_json_obj(load_json(path))


# ---------------------------------------------------------------------------
# point clouds


def cloud_to_json(pc: PointCloud, path: str | None = None) -> str:
    obj = {
        "vertices": [{"id": v, "xyz": pc.points[i].tolist()} for i, v in enumerate(pc.ids)],
        "edges": [[t, h] for t, h in pc.edges],
    }
    return _dump_json(obj, path)


def cloud_from_json_obj(obj) -> PointCloud:
    try:
        ids = [_as_id(v["id"]) for v in obj["vertices"]]
        points = [v["xyz"] for v in obj["vertices"]]
        edges = [(_as_id(t), _as_id(h)) for t, h in obj.get("edges", [])]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed point-cloud object: missing {exc}") from exc
    if not ids:
        raise ParseError("point cloud has no vertices")
    return PointCloud(points, edges, ids=ids)


def load_cloud(path: str) -> PointCloud:
    return cloud_from_json_obj(load_json(path))


# ---------------------------------------------------------------------------
# segments and edge weights


def segments_to_json(segments, path: str | None = None) -> str:
    obj = {
        "segments": [
            {"t_mid": s.t_mid, "f_mid": s.f_mid, "data": s.data.tolist()}
            for s in segments
        ]
    }
    return _dump_json(obj, path)


def segments_from_json_obj(obj) -> list[Segment]:
    try:
        raw = obj["segments"]
        segs = [Segment(s["data"], s["t_mid"], s["f_mid"]) for s in raw]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed segments object: missing {exc}") from exc
    except InvalidInputError as exc:
        raise ParseError(f"malformed segment: {exc}") from exc
    if not segs:
        raise ParseError("segments file contains no segments")
    return segs


def load_segments(path: str) -> list[Segment]:
    return segments_from_json_obj(load_json(path))


def weights_to_json(edges, weights, path: str | None = None) -> str:
    obj = {"edges": [[t, h] for t, h in edges], "weights": [float(w) for w in weights]}
    return _dump_json(obj, path)


def load_weights(path: str) -> tuple[list[tuple], list[float]]:
    obj = load_json(path)
    try:
        edges = [(_as_id(t), _as_id(h)) for t, h in obj["edges"]]
        weights = [float(w) for w in obj["weights"]]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed weights object: missing {exc}") from exc
    if len(edges) != len(weights):
        raise ParseError("weights file: edge and weight counts differ")
    return edges, weights
