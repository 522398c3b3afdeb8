"""Rectangular sampling grids on a domain in the complex plane.

A :class:`DomainGrid` is a rectangular node lattice with a per-node validity
mask.  The basepoint must be an unmasked node.  Grids also provide the
axis-aligned integration paths used by the frame and Weierstrass
integrators: a row-first sweep (along the basepoint row, then along
columns), its column-first mirror, and a breadth-first fallback that routes
around masked nodes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DomainGrid", "MaskedPathError", "GridError"]


class GridError(ValueError):
    pass


class MaskedPathError(GridError):
    pass


@dataclass
class DomainGrid:
    xs: np.ndarray
    ys: np.ndarray
    i0: int
    j0: int
    mask: np.ndarray = field(default=None)  # (ny, nx) True = valid

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.mask is None:
            self.mask = np.ones((self.ny, self.nx), dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.ny, self.nx):
            raise GridError("mask shape does not match grid")
        if not self.mask[self.j0, self.i0]:
            raise GridError("basepoint node is masked")

    # -- construction ------------------------------------------------------

    @classmethod
    def make(cls, xmin, xmax, nx, ymin, ymax, ny, z0=0j):
        """Uniform grid; ``z0`` must land on a node (within 1e-9 of spacing)."""
        xs = np.linspace(xmin, xmax, nx)
        ys = np.linspace(ymin, ymax, ny)
        i0 = int(np.argmin(np.abs(xs - z0.real)))
        j0 = int(np.argmin(np.abs(ys - z0.imag)))
        dx = xs[1] - xs[0] if nx > 1 else 1.0
        dy = ys[1] - ys[0] if ny > 1 else 1.0
        if abs(xs[i0] - z0.real) > 1e-9 * abs(dx) or abs(ys[j0] - z0.imag) > 1e-9 * abs(dy):
            raise GridError(f"basepoint {z0} is not a grid node")
        return cls(xs, ys, i0, j0)

    @classmethod
    def square(cls, half, n, z0=0j):
        """Square grid [-half, half]^2 around the origin (odd n keeps 0 on a
        node), shifted so that it contains ``z0``."""
        return cls.make(z0.real - half, z0.real + half, n,
                        z0.imag - half, z0.imag + half, n, z0)

    # -- basic geometry ------------------------------------------------------

    @property
    def nx(self):
        return len(self.xs)

    @property
    def ny(self):
        return len(self.ys)

    @property
    def z0(self):
        return complex(self.xs[self.i0], self.ys[self.j0])

    @property
    def zz(self):
        return self.xs[None, :] + 1j * self.ys[:, None]

    @property
    def dx(self):
        return float(self.xs[1] - self.xs[0]) if self.nx > 1 else 0.0

    @property
    def dy(self):
        return float(self.ys[1] - self.ys[0]) if self.ny > 1 else 0.0

    def node(self, j, i):
        return complex(self.xs[i], self.ys[j])

    def index_of(self, z, tol=1e-9):
        i = int(np.argmin(np.abs(self.xs - z.real)))
        j = int(np.argmin(np.abs(self.ys - z.imag)))
        scale = max(abs(self.dx), abs(self.dy), 1e-30)
        if abs(self.xs[i] - z.real) > tol * scale or abs(self.ys[j] - z.imag) > tol * scale:
            raise GridError(f"{z} is not a grid node")
        return j, i

    def interior(self, ring=1):
        """Mask of nodes whose full (2*ring+1)-square neighborhood is valid."""
        m = self.mask.copy()
        for _ in range(ring):
            p = np.pad(m, 1, constant_values=False)
            m = (p[1:-1, 1:-1] & p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2]
                 & p[1:-1, 2:] & p[:-2, :-2] & p[:-2, 2:] & p[2:, :-2] & p[2:, 2:])
        return m

    def max_l1_pathlength(self):
        """Worst-case |dx|+|dy| from the basepoint to any node."""
        lx = max(abs(self.xs[-1] - self.xs[self.i0]), abs(self.xs[0] - self.xs[self.i0]))
        ly = max(abs(self.ys[-1] - self.ys[self.j0]), abs(self.ys[0] - self.ys[self.j0]))
        return lx + ly

    def with_mask(self, mask):
        return DomainGrid(self.xs, self.ys, self.i0, self.j0, mask)

    # -- paths ---------------------------------------------------------------

    def lpath(self, za, zb):
        """Axis-aligned polyline through nodes from za to zb (horizontal then
        vertical); raises MaskedPathError if it crosses a masked node."""
        ja, ia = self.index_of(za)
        jb, ib = self.index_of(zb)
        nodes = [(ja, ia)]
        step = 1 if ib >= ia else -1
        for i in range(ia + step, ib + step, step) if ib != ia else []:
            nodes.append((ja, i))
        step = 1 if jb >= ja else -1
        for j in range(ja + step, jb + step, step) if jb != ja else []:
            nodes.append((j, ib))
        for (j, i) in nodes:
            if not self.mask[j, i]:
                raise MaskedPathError(f"path crosses masked node at {self.node(j, i)}")
        return [self.node(j, i) for (j, i) in nodes]

    def bfs_tree(self):
        """Breadth-first spanning tree of the unmasked nodes from the
        basepoint; returns a list of ((jfrom, ifrom), (jto, ito)) steps in
        visit order.  Deterministic: neighbors in E, W, N, S order."""
        start = (self.j0, self.i0)
        seen = np.zeros_like(self.mask)
        seen[start] = True
        steps = []
        q = deque([start])
        while q:
            j, i = q.popleft()
            for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                jj, ii = j + dj, i + di
                if 0 <= jj < self.ny and 0 <= ii < self.nx \
                        and self.mask[jj, ii] and not seen[jj, ii]:
                    seen[jj, ii] = True
                    steps.append(((j, i), (jj, ii)))
                    q.append((jj, ii))
        return steps


def dilate_invalid(mask, cells=1):
    """Grow the invalid (False) region of a mask by ``cells`` rings."""
    m = np.asarray(mask, dtype=bool)
    for _ in range(cells):
        p = np.pad(m, 1, constant_values=True)
        m = (p[1:-1, 1:-1] & p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2]
             & p[1:-1, 2:] & p[:-2, :-2] & p[:-2, 2:] & p[2:, :-2] & p[2:, 2:])
    return m
