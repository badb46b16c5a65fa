"""Bounding-volume hierarchy over triangles.

Nearest-hit ray queries (Moller-Trumbore) and closest-point distance
queries, both exact: every query returns the same answer as a scan over
all triangles.  Ray t values are in units of the (possibly unnormalized)
direction vector, so a direction with unit z component makes t the planar
z-depth directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .mesh import TriMesh

_LEAF_SIZE = 4
_STACK_DEPTH = 96


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

@dataclass
class Bvh:
    """Flattened tree: leaf nodes have left < 0 and cover triangle slots
    [-(left+1), right) of the reordered triangle arrays."""

    node_min: np.ndarray     # (n_nodes, 3)
    node_max: np.ndarray     # (n_nodes, 3)
    left: np.ndarray         # (n_nodes,) int32
    right: np.ndarray        # (n_nodes,) int32
    v0: np.ndarray           # (m, 3) first vertex per triangle, leaf order
    e1: np.ndarray           # (m, 3) v1 - v0
    e2: np.ndarray           # (m, 3) v2 - v0
    tri_index: np.ndarray    # (m,) original triangle ids, leaf order

    def ray_query(self, origins: np.ndarray, directions: np.ndarray):
        """Nearest hit per ray: (t, triangle id or -1, bary u, bary v)."""
        origins = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
        directions = np.ascontiguousarray(np.atleast_2d(directions), dtype=np.float64)
        if origins.shape != directions.shape or origins.shape[1] != 3:
            raise ValueError("origins and directions must both be (n, 3)")
        if np.any(np.all(directions == 0.0, axis=1)):
            raise ValueError("zero-vector ray direction")
        n = len(origins)
        t = np.empty(n)
        tri = np.empty(n, dtype=np.int64)
        bu = np.empty(n)
        bv = np.empty(n)
        _ray_kernel(self.node_min, self.node_max, self.left, self.right,
                    self.v0, self.e1, self.e2, origins, directions, t, tri, bu, bv)
        hit = tri >= 0
        tri[hit] = self.tri_index[tri[hit]]
        return t, tri, bu, bv

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the closest triangle."""
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if points.shape[1] != 3:
            raise ValueError("points must be (n, 3)")
        out = np.empty(len(points))
        _distance_kernel(self.node_min, self.node_max, self.left, self.right,
                         self.v0, self.e1, self.e2, points, out)
        return out


def build_bvh(mesh: TriMesh) -> Bvh:
    """Median-split BVH (longest centroid axis, leaves of up to 4 triangles)."""
    if mesh.n_triangles == 0:
        raise ValueError("mesh has no triangles")
    tv = mesh.vertices[mesh.triangles]              # (m, 3, 3)
    lo = tv.min(axis=1)
    hi = tv.max(axis=1)
    centroid = tv.mean(axis=1)

    order = np.arange(mesh.n_triangles)
    node_min, node_max, left, right = [], [], [], []
    # (slot range, node id) work list; node id equals position in the lists
    stack = [(0, mesh.n_triangles, 0)]
    node_min.append(None); node_max.append(None); left.append(0); right.append(0)
    while stack:
        start, end, node = stack.pop()
        idx = order[start:end]
        node_min[node] = lo[idx].min(axis=0)
        node_max[node] = hi[idx].max(axis=0)
        if end - start <= _LEAF_SIZE:
            left[node] = -(start + 1)
            right[node] = end
            continue
        c = centroid[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (end - start) // 2
        part = np.argpartition(c[:, axis], mid)
        order[start:end] = idx[part]
        child = len(node_min)
        node_min += [None, None]; node_max += [None, None]
        left += [0, 0]; right += [0, 0]
        left[node] = child
        right[node] = child + 1
        stack.append((start, start + mid, child))
        stack.append((start + mid, end, child + 1))

    tv = tv[order]
    return Bvh(
        node_min=np.ascontiguousarray(node_min, dtype=np.float64),
        node_max=np.ascontiguousarray(node_max, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        v0=np.ascontiguousarray(tv[:, 0]),
        e1=np.ascontiguousarray(tv[:, 1] - tv[:, 0]),
        e2=np.ascontiguousarray(tv[:, 2] - tv[:, 0]),
        tri_index=order.astype(np.int64),
    )


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _slab_hit(bmin, bmax, ox, oy, oz, dx, dy, dz, t_best):
    tmin = 0.0
    tmax = t_best
    for axis in range(3):
        if axis == 0:
            o, d = ox, dx
        elif axis == 1:
            o, d = oy, dy
        else:
            o, d = oz, dz
        if abs(d) < 1e-300:
            if o < bmin[axis] or o > bmax[axis]:
                return False
        else:
            inv = 1.0 / d
            t1 = (bmin[axis] - o) * inv
            t2 = (bmax[axis] - o) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
            if tmin > tmax:
                return False
    return True


@njit(cache=True, parallel=True)
def _ray_kernel(node_min, node_max, left, right, v0, e1, e2,
                origins, dirs, out_t, out_tri, out_u, out_v):
    n = origins.shape[0]
    for i in prange(n):
        ox, oy, oz = origins[i, 0], origins[i, 1], origins[i, 2]
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        t_best = np.inf
        tri_best = -1
        u_best = 0.0
        v_best = 0.0
        stack = np.empty(_STACK_DEPTH, dtype=np.int32)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if not _slab_hit(node_min[node], node_max[node],
                             ox, oy, oz, dx, dy, dz, t_best):
                continue
            if left[node] < 0:
                for k in range(-(left[node] + 1), right[node]):
                    # Moller-Trumbore
                    px = dy * e2[k, 2] - dz * e2[k, 1]
                    py = dz * e2[k, 0] - dx * e2[k, 2]
                    pz = dx * e2[k, 1] - dy * e2[k, 0]
                    det = e1[k, 0] * px + e1[k, 1] * py + e1[k, 2] * pz
                    if abs(det) < 1e-14:
                        continue
                    inv_det = 1.0 / det
                    sx = ox - v0[k, 0]
                    sy = oy - v0[k, 1]
                    sz = oz - v0[k, 2]
                    u = (sx * px + sy * py + sz * pz) * inv_det
                    if u < 0.0 or u > 1.0:
                        continue
                    qx = sy * e1[k, 2] - sz * e1[k, 1]
                    qy = sz * e1[k, 0] - sx * e1[k, 2]
                    qz = sx * e1[k, 1] - sy * e1[k, 0]
                    v = (dx * qx + dy * qy + dz * qz) * inv_det
                    if v < 0.0 or u + v > 1.0:
                        continue
                    t = (e2[k, 0] * qx + e2[k, 1] * qy + e2[k, 2] * qz) * inv_det
                    if 1e-9 < t < t_best:
                        t_best = t
                        tri_best = k
                        u_best = u
                        v_best = v
            else:
                stack[top] = left[node]
                stack[top + 1] = right[node]
                top += 2
        out_t[i] = t_best
        out_tri[i] = tri_best
        out_u[i] = u_best
        out_v[i] = v_best


@njit(cache=True, inline="always")
def _tri_sqdist(px, py, pz, a, d1, d2):
    """Squared distance point-triangle (region decomposition over s, t)."""
    bx = px - a[0]
    by = py - a[1]
    bz = pz - a[2]
    a00 = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    a01 = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
    a11 = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
    b0 = -(bx * d1[0] + by * d1[1] + bz * d1[2])
    b1 = -(bx * d2[0] + by * d2[1] + bz * d2[2])
    det = a00 * a11 - a01 * a01
    s = a01 * b1 - a11 * b0
    t = a01 * b0 - a00 * b1
    if s + t <= det:
        if s < 0.0:
            if t < 0.0:
                if b0 < 0.0:
                    t = 0.0
                    s = min(max(-b0 / a00, 0.0), 1.0) if a00 > 0.0 else 0.0
                else:
                    s = 0.0
                    t = min(max(-b1 / a11, 0.0), 1.0) if a11 > 0.0 else 0.0
            else:
                s = 0.0
                t = min(max(-b1 / a11, 0.0), 1.0) if a11 > 0.0 else 0.0
        elif t < 0.0:
            t = 0.0
            s = min(max(-b0 / a00, 0.0), 1.0) if a00 > 0.0 else 0.0
        else:
            if det > 0.0:
                inv = 1.0 / det
                s *= inv
                t *= inv
            else:
                s = 0.0
                t = 0.0
    else:
        if s < 0.0:
            tmp0 = a01 + b0
            tmp1 = a11 + b1
            if tmp1 > tmp0:
                numer = tmp1 - tmp0
                denom = a00 - 2.0 * a01 + a11
                s = min(max(numer / denom, 0.0), 1.0) if denom > 0.0 else 0.0
                t = 1.0 - s
            else:
                s = 0.0
                t = min(max(-b1 / a11, 0.0), 1.0) if a11 > 0.0 else 0.0
        elif t < 0.0:
            tmp0 = a01 + b1
            tmp1 = a00 + b0
            if tmp1 > tmp0:
                numer = tmp1 - tmp0
                denom = a00 - 2.0 * a01 + a11
                t = min(max(numer / denom, 0.0), 1.0) if denom > 0.0 else 0.0
                s = 1.0 - t
            else:
                t = 0.0
                s = min(max(-b0 / a00, 0.0), 1.0) if a00 > 0.0 else 0.0
        else:
            numer = (a11 + b1) - (a01 + b0)
            denom = a00 - 2.0 * a01 + a11
            s = min(max(numer / denom, 0.0), 1.0) if denom > 0.0 else 0.0
            t = 1.0 - s
    qx = bx - (s * d1[0] + t * d2[0])
    qy = by - (s * d1[1] + t * d2[1])
    qz = bz - (s * d1[2] + t * d2[2])
    return qx * qx + qy * qy + qz * qz


@njit(cache=True, inline="always")
def _box_sqdist(bmin, bmax, px, py, pz):
    d = 0.0
    for axis in range(3):
        p = px if axis == 0 else (py if axis == 1 else pz)
        if p < bmin[axis]:
            e = bmin[axis] - p
            d += e * e
        elif p > bmax[axis]:
            e = p - bmax[axis]
            d += e * e
    return d


@njit(cache=True, parallel=True)
def _distance_kernel(node_min, node_max, left, right, v0, e1, e2, points, out):
    n = points.shape[0]
    for i in prange(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        stack = np.empty(_STACK_DEPTH, dtype=np.int32)
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _box_sqdist(node_min[node], node_max[node], px, py, pz) >= best:
                continue
            if left[node] < 0:
                for k in range(-(left[node] + 1), right[node]):
                    sq = _tri_sqdist(px, py, pz, v0[k], e1[k], e2[k])
                    if sq < best:
                        best = sq
            else:
                lo_l = _box_sqdist(node_min[left[node]], node_max[left[node]], px, py, pz)
                lo_r = _box_sqdist(node_min[right[node]], node_max[right[node]], px, py, pz)
                # push the farther child first so the nearer is explored next
                if lo_l <= lo_r:
                    stack[top] = right[node]
                    stack[top + 1] = left[node]
                else:
                    stack[top] = left[node]
                    stack[top + 1] = right[node]
                top += 2
        out[i] = np.sqrt(best)
