"""Structured triangulation of one periodic cell of the strip f < x2 < h.

The grid is the shear of a uniform lattice: column i sits at x1 = i*L/nx and
carries ny+1 nodes from the surface height f(x1) (row 0) up to h (row ny).
Columns 0 and nx are identified, so the mesh lives on a cylinder; elements in
the last column reference column-0 node numbers but keep unwrapped
coordinates (x1 = L) for geometry, which keeps all signed areas positive.

Each quad splits into two counterclockwise triangles; with increasing row
heights this yields positive areas for any Lipschitz surface profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MeshError
from .model import SurfaceFn

__all__ = ["Mesh", "build_mesh"]

SURFACE = "SURFACE"
TOP = "TOP"
PERIODIC_PAIR = "PERIODIC_PAIR"


@dataclass(frozen=True)
class Mesh:
    period: float
    h: float
    nx: int
    ny: int
    nodes: np.ndarray          # (n_nodes, 2), x1 in [0, period)
    triangles: np.ndarray      # (n_tri, 3) node indices (periodically wrapped)
    tri_coords: np.ndarray     # (n_tri, 3, 2) unwrapped vertex coordinates
    surface_nodes: np.ndarray  # (nx,) node ids on x2 = f(x1)
    top_nodes: np.ndarray      # (nx,) node ids on x2 = h, ordered by x1

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def free_nodes(self) -> np.ndarray:
        """All nodes except the essential (surface) ones."""
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.surface_nodes] = False
        return np.nonzero(mask)[0]

    def areas(self) -> np.ndarray:
        """Signed triangle areas from the unwrapped coordinates."""
        a, b, c = (self.tri_coords[:, k, :] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def meshsize(self) -> float:
        """Longest edge over all triangles."""
        tc = self.tri_coords
        e = np.concatenate([tc[:, 1] - tc[:, 0],
                            tc[:, 2] - tc[:, 1],
                            tc[:, 0] - tc[:, 2]])
        return float(np.max(np.hypot(e[:, 0], e[:, 1])))

    def top_edge_triangles(self) -> np.ndarray:
        """Triangle index adjacent to the top edge of column i, for each i."""
        # quad (i, ny-1) contributes triangles 2*(i*ny + ny-1) and +1; the
        # second one (a, c, d) owns the top edge d-c.
        i = np.arange(self.nx)
        return 2 * (i * self.ny + (self.ny - 1)) + 1

    def surface_edge_triangles(self) -> np.ndarray:
        """Triangle index adjacent to the surface edge of column i."""
        i = np.arange(self.nx)
        return 2 * (i * self.ny + 0)

    def dump(self) -> str:
        """Tab-separated plain-text listing: nodes, triangles, tagged edges.

        Lateral boundaries are identified, so each PERIODIC_PAIR record names
        the single node that represents both the x1=0 and x1=period sides of
        its row.
        """
        lines = []
        for k, (x1, x2) in enumerate(self.nodes):
            lines.append(f"node\t{k}\t{x1!r}\t{x2!r}")
        for k, (a, b, c) in enumerate(self.triangles):
            lines.append(f"tri\t{k}\t{a}\t{b}\t{c}")
        for i in range(self.nx):
            a, b = self.surface_nodes[i], self.surface_nodes[(i + 1) % self.nx]
            lines.append(f"edge\t{SURFACE}\t{a}\t{b}")
            a, b = self.top_nodes[i], self.top_nodes[(i + 1) % self.nx]
            lines.append(f"edge\t{TOP}\t{a}\t{b}")
        for j in range(self.ny + 1):
            lines.append(f"edge\t{PERIODIC_PAIR}\t{j * self.nx}\t{j * self.nx}")
        return "\n".join(lines) + "\n"


def build_mesh(f: SurfaceFn, h: float, nx: int, ny: int) -> Mesh:
    """Mesh one periodic cell of the strip between f and x2 = h."""
    if nx < 2 or ny < 2:
        raise MeshError(f"nx, ny must be >= 2, got ({nx}, {ny})")
    if h <= f.f_max:
        raise MeshError(f"h={h} must exceed the surface bound M={f.f_max}")
    per = f.period
    x1 = np.arange(nx) * (per / nx)
    fv = np.asarray(f.f(x1), dtype=float)
    s = np.arange(ny + 1) / ny
    # node id = j*nx + i; force surface and top rows exact
    x2 = fv[None, :] + s[:, None] * (h - fv[None, :])
    x2[0, :] = fv
    x2[-1, :] = h
    nodes = np.empty(((ny + 1) * nx, 2))
    nodes[:, 0] = np.tile(x1, ny + 1)
    nodes[:, 1] = x2.reshape(-1)

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ip = (ii + 1) % nx
    na = jj * nx + ii
    nb = jj * nx + ip
    nc = (jj + 1) * nx + ip
    nd = (jj + 1) * nx + ii
    # quad (i, j) -> triangles 2*(i*ny+j) = (a,b,c) and +1 = (a,c,d)
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.stack([na, nb, nc], axis=-1).reshape(-1, 3)
    tris[1::2] = np.stack([na, nc, nd], axis=-1).reshape(-1, 3)

    xl = x1[ii]
    xr = xl + per / nx  # unwrapped right column abscissa
    pa = np.stack([xl, x2[jj, ii]], axis=-1)
    pb = np.stack([xr, x2[jj, ip]], axis=-1)
    pc = np.stack([xr, x2[jj + 1, ip]], axis=-1)
    pd = np.stack([xl, x2[jj + 1, ii]], axis=-1)
    coords = np.empty((2 * nx * ny, 3, 2))
    coords[0::2] = np.stack([pa, pb, pc], axis=-2).reshape(-1, 3, 2)
    coords[1::2] = np.stack([pa, pc, pd], axis=-2).reshape(-1, 3, 2)

    mesh = Mesh(
        period=per, h=float(h), nx=nx, ny=ny,
        nodes=nodes,
        triangles=tris,
        tri_coords=coords,
        surface_nodes=np.arange(nx, dtype=np.int64),
        top_nodes=ny * nx + np.arange(nx, dtype=np.int64),
    )
    areas = mesh.areas()
    if np.any(areas <= 0.0):
        raise MeshError(f"degenerate element: min signed area {areas.min():.3g}")
    return mesh
