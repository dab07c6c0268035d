"""Angular quadrature on the unit sphere for discrete-ordinates transport.

Product rule: Gauss-Legendre in the polar cosine (even count, so no horizontal
direction) times uniform midpoint azimuth (count divisible by 4).  Directions
are constructed half-by-half with explicit sign flips and component swaps, so
the node set is closed bitwise under the specular mirrors

    vertical   (s1, s2, s3) -> (s1, s2, -s3)
    x-wall     (s1, s2, s3) -> (-s1, s2, s3)
    y-wall     (s1, s2, s3) -> (s1, -s2, s3)

and therefore under the horizontal point reflection (s1,s2) -> (-s1,-s2).
Weights sum to 4*pi and odd moments cancel exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * np.pi


def _azimuth_nodes(n_azi: int):
    """Midpoint azimuth cos/sin pairs, bitwise symmetric under swap and sign.

    First-quadrant pairs are built for phi < pi/4 and completed by swapping
    (cos, sin); the remaining quadrants are sign patterns of quadrant one.
    """
    if n_azi % 4 != 0:
        raise ValueError("azimuth count must be a multiple of 4")
    nq = n_azi // 4
    c = np.empty(nq)
    s = np.empty(nq)
    for j in range((nq + 1) // 2):
        phi = 2.0 * np.pi * (j + 0.5) / n_azi
        k = nq - 1 - j
        if j == k:  # phi = pi/4 exactly
            c[j] = s[j] = np.sqrt(0.5)
        else:
            c[j], s[j] = np.cos(phi), np.sin(phi)
            c[k], s[k] = s[j], c[j]
    cos_all = np.concatenate([c, -s, -c, s])
    sin_all = np.concatenate([s, c, -s, -c])
    return cos_all, sin_all


def _match_index(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each row of a, the index of the bitwise-equal row of b."""
    idx = np.empty(len(a), dtype=np.int64)
    for i, row in enumerate(a):
        hits = np.where((b == row).all(axis=1))[0]
        if len(hits) != 1:
            raise ValueError("direction set not closed under requested mirror")
        idx[i] = hits[0]
    return idx


@dataclass
class AngularQuadrature:
    """Discrete ordinates: directions xi (ndir, 3), weights w (ndir,)."""

    n_polar: int = 4
    n_azi: int = 4
    xi: np.ndarray = field(init=False, repr=False)
    w: np.ndarray = field(init=False, repr=False)
    mirror_z: np.ndarray = field(init=False, repr=False)
    mirror_x: np.ndarray = field(init=False, repr=False)
    mirror_y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_polar % 2 != 0 or self.n_polar < 2:
            raise ValueError("polar count must be even and >= 2")
        mu, wmu = np.polynomial.legendre.leggauss(self.n_polar)
        pos = mu > 0
        mu_pos, w_pos = mu[pos], wmu[pos]
        sin_pos = np.sqrt(1.0 - mu_pos**2)
        caz, saz = _azimuth_nodes(self.n_azi)
        w_azi = 2.0 * np.pi / self.n_azi

        dirs, wts = [], []
        for p in range(len(mu_pos)):
            for sign in (1.0, -1.0):
                for q in range(self.n_azi):
                    dirs.append((sin_pos[p] * caz[q], sin_pos[p] * saz[q],
                                 sign * mu_pos[p]))
                    wts.append(w_pos[p] * w_azi)
        self.xi = np.array(dirs)
        self.w = np.array(wts)
        self.mirror_z = _match_index(self.xi * np.array([1.0, 1.0, -1.0]), self.xi)
        self.mirror_x = _match_index(self.xi * np.array([-1.0, 1.0, 1.0]), self.xi)
        self.mirror_y = _match_index(self.xi * np.array([1.0, -1.0, 1.0]), self.xi)

    @property
    def n_dir(self) -> int:
        return len(self.w)

    def mean_intensity_weights(self) -> np.ndarray:
        """Weights of the angular mean (1/4pi) int . dsigma."""
        return self.w / FOUR_PI

    def mirror_for_axis(self, axis: int) -> np.ndarray:
        return (self.mirror_x, self.mirror_y, self.mirror_z)[axis]


def specular_reflect(intensity: np.ndarray, quad: AngularQuadrature,
                     axis: int, dir_axis: int = 1) -> np.ndarray:
    """Reindex an intensity array by the specular mirror for a wall normal.

    axis: 0, 1, 2 for wall normals e1, e2, e3.  dir_axis: position of the
    direction index in `intensity` (bands first by convention).
    """
    return np.take(intensity, quad.mirror_for_axis(axis), axis=dir_axis)
