"""3-D convex hulls with degenerate-dimension fallback and point-in-hull tests.

Quickhull handles affine rank 3; lower-rank inputs are hulled exactly in
their affine subspace (plane, segment, or point) instead of being perturbed,
so collinear or coplanar denotations get stable classifications.  All
tolerance checks use a single epsilon, far below the 0.1 chip quantum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .colorspace import ColorChip
from .kernels import points_in_halfspaces

EPSILON = 1e-6


@dataclass
class Hull:
    """Convex hull of chips; representation depends on affine dimension.

    dim 3: triangle facets as outward halfspaces (normal . x <= offset).
    dim 2: plane (origin, unit normal) plus 2-D edge halfplanes in an
           orthonormal in-plane basis.
    dim 1: segment (origin, unit direction, parameter interval).
    dim 0: single point.
    """

    dimension: int
    vertices: list[ColorChip]
    normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(0))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    plane_normal: np.ndarray = field(default_factory=lambda: np.zeros(3))
    edge_normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    edge_offsets: np.ndarray = field(default_factory=lambda: np.zeros(0))
    interval: tuple[float, float] = (0.0, 0.0)

    def to_json_dict(self) -> dict:
        """Debug export: vertices plus facet descriptors."""
        return {
            "dimension": self.dimension,
            "vertices": [v.as_tuple() for v in self.vertices],
            "facets": [
                {"normal": list(map(float, n)), "offset": float(d)}
                for n, d in zip(self.normals, self.offsets)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _unique_sorted_points(points) -> tuple[np.ndarray, list[ColorChip]]:
    chips = sorted(set(points))
    arr = np.array([c.as_tuple() for c in chips], dtype=float)
    return arr, chips


def _affine_frame(pts: np.ndarray):
    """Greedy extreme-point frame: returns (rank, index list) with the
    spanning indices found by farthest-point selection at EPSILON tolerance."""
    n = pts.shape[0]
    i0 = 0  # pts are lexicographically sorted
    d = np.linalg.norm(pts - pts[i0], axis=1)
    i1 = int(np.argmax(d))
    if d[i1] <= EPSILON:
        return 0, [i0]
    u = (pts[i1] - pts[i0]) / d[i1]
    rel = pts - pts[i0]
    perp = rel - np.outer(rel @ u, u)
    dperp = np.linalg.norm(perp, axis=1)
    i2 = int(np.argmax(dperp))
    if dperp[i2] <= EPSILON:
        return 1, [i0, i1]
    w = perp[i2] / dperp[i2]
    nrm = np.cross(u, w)
    doff = np.abs(rel @ nrm)
    i3 = int(np.argmax(doff))
    if doff[i3] <= EPSILON:
        return 2, [i0, i1, i2]
    return 3, [i0, i1, i2, i3]


def _hull_2d_indices(q: np.ndarray) -> list[int]:
    """Andrew monotone chain on 2-D points; returns CCW hull vertex indices."""
    order = np.lexsort((q[:, 1], q[:, 0]))

    def cross(o, a, b):
        return (q[a, 0] - q[o, 0]) * (q[b, 1] - q[o, 1]) - \
               (q[a, 1] - q[o, 1]) * (q[b, 0] - q[o, 0])

    lower: list[int] = []
    for i in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= EPSILON:
            lower.pop()
        lower.append(int(i))
    upper: list[int] = []
    for i in order[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= EPSILON:
            upper.pop()
        upper.append(int(i))
    return lower[:-1] + upper[:-1]


def _quickhull_3d(pts: np.ndarray, frame: list[int]):
    """Incremental quickhull; returns (vertex index set, normals, offsets)."""
    n = pts.shape[0]
    interior = pts[frame].mean(axis=0)

    faces: list[dict] = []  # keys: tri (i,j,k), normal, offset, outside, alive

    def make_face(i, j, k, candidates):
        a, b, c = pts[i], pts[j], pts[k]
        nrm = np.cross(b - a, c - a)
        norm = np.linalg.norm(nrm)
        if norm < 1e-12:
            return None
        nrm = nrm / norm
        off = float(nrm @ a)
        if nrm @ interior > off:  # orient outward
            nrm, off = -nrm, -off
            i, j, k = i, k, j
        face = {"tri": (i, j, k), "normal": nrm, "offset": off,
                "outside": [], "alive": True}
        if len(candidates):
            above = pts[candidates] @ nrm - off
            mask = above > EPSILON
            if mask.any():
                idx = np.asarray(candidates)[mask]
                face["outside"] = list(idx[np.argsort(-above[mask], kind="stable")])
        faces.append(face)
        return face

    f0 = frame
    initial = [(f0[0], f0[1], f0[2]), (f0[0], f0[1], f0[3]),
               (f0[0], f0[2], f0[3]), (f0[1], f0[2], f0[3])]
    candidates = [i for i in range(n) if i not in frame]
    for tri in initial:
        make_face(*tri, candidates)

    while True:
        work = next((f for f in faces if f["alive"] and f["outside"]), None)
        if work is None:
            break
        apex = work["outside"][0]  # farthest point of that face
        apex_pt = pts[apex]
        visible = [f for f in faces if f["alive"]
                   and apex_pt @ f["normal"] - f["offset"] > EPSILON]
        # horizon = edges of visible faces not shared with another visible face
        edge_count: dict[tuple[int, int], tuple[int, int]] = {}
        for f in visible:
            i, j, k = f["tri"]
            for e in ((i, j), (j, k), (k, i)):
                key = (min(e), max(e))
                edge_count[key] = (edge_count.get(key, (0, e))[0] + 1, e)
        horizon = [e for cnt, e in edge_count.values() if cnt == 1]
        orphans: set[int] = set()
        for f in visible:
            f["alive"] = False
            orphans.update(f["outside"])
        orphans.discard(apex)
        orphan_list = sorted(orphans)
        for e in horizon:
            make_face(e[0], e[1], apex, orphan_list)

    live = [f for f in faces if f["alive"]]
    vidx = sorted({i for f in live for i in f["tri"]})
    normals = np.array([f["normal"] for f in live])
    offsets = np.array([f["offset"] for f in live])
    return vidx, normals, offsets


def convex_hull(points) -> Hull:
    """Hull of a set of chips, exact in the affine dimension of the input.

    Inputs are deduplicated and sorted lexicographically first, so the result
    is a function of the point set only.
    """
    pts, chips = _unique_sorted_points(points)
    if len(chips) == 0:
        raise ValueError("convex_hull requires at least one point")
    rank, frame = _affine_frame(pts)

    if rank == 0:
        return Hull(dimension=0, vertices=[chips[0]], origin=pts[0])

    if rank == 1:
        u = pts[frame[1]] - pts[frame[0]]
        u = u / np.linalg.norm(u)
        t = (pts - pts[frame[0]]) @ u
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        return Hull(dimension=1, vertices=[chips[lo], chips[hi]],
                    origin=pts[frame[0]], basis=u[None, :],
                    interval=(float(t[lo]), float(t[hi])))

    if rank == 2:
        origin = pts[frame[0]]
        e1 = pts[frame[1]] - origin
        e1 = e1 / np.linalg.norm(e1)
        e2 = pts[frame[2]] - origin
        e2 = e2 - (e2 @ e1) * e1
        e2 = e2 / np.linalg.norm(e2)
        basis = np.stack([e1, e2])
        q = (pts - origin) @ basis.T
        hull_idx = _hull_2d_indices(q)
        if len(hull_idx) < 3:  # sliver thinner than eps: treat as a segment
            u = e1
            t = (pts - origin) @ u
            lo, hi = int(np.argmin(t)), int(np.argmax(t))
            return Hull(dimension=1, vertices=[chips[lo], chips[hi]],
                        origin=origin, basis=u[None, :],
                        interval=(float(t[lo]), float(t[hi])))
        edge_n = []
        edge_d = []
        m = len(hull_idx)
        for k in range(m):
            v0 = q[hull_idx[k]]
            v1 = q[hull_idx[(k + 1) % m]]
            e = v1 - v0
            nrm = np.array([e[1], -e[0]])  # outward for CCW polygons
            nlen = np.linalg.norm(nrm)
            if nlen < 1e-12:
                continue
            nrm = nrm / nlen
            edge_n.append(nrm)
            edge_d.append(float(nrm @ v0))
        return Hull(dimension=2, vertices=[chips[i] for i in hull_idx],
                    origin=origin, basis=basis,
                    plane_normal=np.cross(basis[0], basis[1]),
                    edge_normals=np.array(edge_n), edge_offsets=np.array(edge_d))

    vidx, normals, offsets = _quickhull_3d(pts, frame)
    return Hull(dimension=3, vertices=[chips[i] for i in vidx],
                normals=normals, offsets=offsets)


def contains(h: Hull, p: ColorChip, eps: float = EPSILON) -> bool:
    """Point-in-hull with boundary (and an eps collar) counting as inside."""
    return bool(contains_many(h, np.array([p.as_tuple()]), eps)[0])


def contains_many(h: Hull, pts: np.ndarray, eps: float = EPSILON) -> np.ndarray:
    """Vectorized containment test over an (n, 3) coordinate array."""
    pts = np.asarray(pts, dtype=float)
    if h.dimension == 3:
        return points_in_halfspaces(pts, h.normals, h.offsets, eps)
    rel = pts - h.origin
    if h.dimension == 0:
        return np.linalg.norm(rel, axis=1) <= eps
    if h.dimension == 1:
        u = h.basis[0]
        t = rel @ u
        perp = np.linalg.norm(rel - np.outer(t, u), axis=1)
        lo, hi = h.interval
        return (perp <= eps) & (t >= lo - eps) & (t <= hi + eps)
    # dimension 2: within eps of the plane and inside every edge halfplane
    off_plane = np.abs(rel @ h.plane_normal)
    q = rel @ h.basis.T
    inside = points_in_halfspaces(q, h.edge_normals, h.edge_offsets, eps)
    return (off_plane <= eps) & inside
