"""Procedural noise primitives: gradient (lattice-zero) noise, fractal sums,
hashed value noise, and cellular (nearest-feature) noise.

All functions are pure and fully determined by their integer seed; inputs
are (n, 3) float arrays of sample positions.
"""

from __future__ import annotations

import numpy as np

# gradient table: the 12 cube-edge directions (plus 4 repeats to fill 16 slots)
_GRADS = np.array([
    (1, 1, 0), (-1, 1, 0), (1, -1, 0), (-1, -1, 0),
    (1, 0, 1), (-1, 0, 1), (1, 0, -1), (-1, 0, -1),
    (0, 1, 1), (0, -1, 1), (0, 1, -1), (0, -1, -1),
    (1, 1, 0), (-1, 1, 0), (0, -1, 1), (0, -1, -1),
], dtype=np.float64)


def _permutation(seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    p = rng.permutation(256).astype(np.int64)
    return np.concatenate([p, p])


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin3(points: np.ndarray, seed: int = 0) -> np.ndarray:
    """Classic 3D gradient noise; exactly zero at integer lattice points,
    values well inside [-1, 1]."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    perm = _permutation(seed)
    cell = np.floor(p).astype(np.int64)
    frac = p - cell
    cell &= 255

    u = _fade(frac[:, 0])
    v = _fade(frac[:, 1])
    w = _fade(frac[:, 2])

    def grad_dot(ix, iy, iz, ox, oy, oz):
        h = perm[perm[perm[(cell[:, 0] + ix) & 255] + ((cell[:, 1] + iy) & 255)]
                 + ((cell[:, 2] + iz) & 255)] & 15
        g = _GRADS[h]
        return (g[:, 0] * (frac[:, 0] - ox) + g[:, 1] * (frac[:, 1] - oy)
                + g[:, 2] * (frac[:, 2] - oz))

    n000 = grad_dot(0, 0, 0, 0.0, 0.0, 0.0)
    n100 = grad_dot(1, 0, 0, 1.0, 0.0, 0.0)
    n010 = grad_dot(0, 1, 0, 0.0, 1.0, 0.0)
    n110 = grad_dot(1, 1, 0, 1.0, 1.0, 0.0)
    n001 = grad_dot(0, 0, 1, 0.0, 0.0, 1.0)
    n101 = grad_dot(1, 0, 1, 1.0, 0.0, 1.0)
    n011 = grad_dot(0, 1, 1, 0.0, 1.0, 1.0)
    n111 = grad_dot(1, 1, 1, 1.0, 1.0, 1.0)

    nx00 = n000 + u * (n100 - n000)
    nx10 = n010 + u * (n110 - n010)
    nx01 = n001 + u * (n101 - n001)
    nx11 = n011 + u * (n111 - n011)
    nxy0 = nx00 + v * (nx10 - nx00)
    nxy1 = nx01 + v * (nx11 - nx01)
    return nxy0 + w * (nxy1 - nxy0)


def fbm3(points: np.ndarray, octaves: int = 3, seed: int = 0,
         lacunarity: float = 2.0, gain: float = 0.5) -> np.ndarray:
    """Fractal sum of gradient noise, normalized so |value| < 1."""
    if octaves < 1:
        raise ValueError("octaves >= 1 required")
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    total = np.zeros(len(p))
    amp, freq, norm = 1.0, 1.0, 0.0
    for i in range(octaves):
        octave_seed = np.random.SeedSequence(int(seed), spawn_key=(i,)).generate_state(1)[0]
        total += amp * perlin3(p * freq, int(octave_seed))
        norm += amp
        amp *= gain
        freq *= lacunarity
    return total / norm


def _hash3(ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, seed: int) -> np.ndarray:
    """Well-mixed uint64 per integer lattice cell (splitmix-style)."""
    x = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
         ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
         ^ iz.astype(np.uint64) * np.uint64(0x165667B19E3779F9)
         ^ np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _hash_unit(ix, iy, iz, seed):
    """Uniform float in [0, 1) per lattice cell."""
    return _hash3(ix, iy, iz, seed).astype(np.float64) / float(2 ** 64)


def value3(points: np.ndarray, seed: int = 0) -> np.ndarray:
    """Hashed value noise in [0, 1): smooth trilinear blend of per-cell values."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    cell = np.floor(p).astype(np.int64)
    f = _fade(p - cell)
    out = np.zeros(len(p))
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                val = _hash_unit(cell[:, 0] + dx, cell[:, 1] + dy, cell[:, 2] + dz, seed)
                wx = f[:, 0] if dx else 1.0 - f[:, 0]
                wy = f[:, 1] if dy else 1.0 - f[:, 1]
                wz = f[:, 2] if dz else 1.0 - f[:, 2]
                out += val * wx * wy * wz
    return out


def voronoi_f1(points: np.ndarray, seed: int = 0) -> np.ndarray:
    """Cellular noise: distance to the nearest jittered feature point.

    One feature point per unit cell; the 3x3x3 neighborhood is searched, so
    values lie in [0, ~1.17)."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    cell = np.floor(p).astype(np.int64)
    best = np.full(len(p), np.inf)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                cx = cell[:, 0] + dx
                cy = cell[:, 1] + dy
                cz = cell[:, 2] + dz
                fx = cx + _hash_unit(cx, cy, cz, seed ^ 0x1)
                fy = cy + _hash_unit(cx, cy, cz, seed ^ 0x2)
                fz = cz + _hash_unit(cx, cy, cz, seed ^ 0x3)
                d = np.sqrt((p[:, 0] - fx) ** 2 + (p[:, 1] - fy) ** 2 + (p[:, 2] - fz) ** 2)
                best = np.minimum(best, d)
    return best


def ridged3(points: np.ndarray, octaves: int = 2, seed: int = 0) -> np.ndarray:
    """Ridge transform of fractal noise: sharp line-like crests in [0, 1]."""
    return 1.0 - np.abs(fbm3(points, octaves=octaves, seed=seed))
