"""P1 vector finite elements on the periodic strip with a DtN top coupling.

The sesquilinear form is

    B(u, v) = int_D  mu * sum_j grad(u_j).grad(conj v_j)
                   + (lam+mu) * div(u) div(conj v)
                   - omega^2 u . conj v  dx
            - int_{top} (DtN u) . conj v ds,

and the load is -(g, v).  The boundary term is a Fourier-multiplier sum over
xi_n = 2*pi*n/period: top nodes are equispaced, the trace of a P1 field is
piecewise linear, and the exact Fourier coefficients of that interpolant are
sinc^2-weighted DFT values.  Using them on both trial and test side yields a
dense coupling block on the top dofs only.

The transformed form replaces the constant coefficients by the domain-map
factors: with J the (lower-triangular) Jacobi matrix of the map and
C = inv(J) inv(J)^T det(J), gradients become invJ^T-transformed gradients and
all terms pick up det(J); all evaluated by a degree-5 (7-point) rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dtn import TraceCoefficients, symbol_matrices
from .errors import MapSingularError, SolveError
from .mesh import Mesh
from .model import DomainMap, ElasticParams

__all__ = [
    "SparseSystem",
    "FieldSolution",
    "assemble_B",
    "assemble_B_transformed",
    "assemble_load",
    "assemble_load_transformed",
    "solve",
    "norms",
    "trace_coefficients",
    "element_gradients",
    "MIDEDGE_RULE",
    "DEGREE5_RULE",
]

# Barycentric quadrature rules (points, weights); weights sum to 1.
MIDEDGE_RULE = (
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
)

_A5 = 0.4701420641051151
_B5 = 0.1012865073234563
_W5A = (155.0 + math.sqrt(15.0)) / 1200.0
_W5B = (155.0 - math.sqrt(15.0)) / 1200.0
DEGREE5_RULE = (
    np.array([
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [1.0 - 2 * _A5, _A5, _A5],
        [_A5, 1.0 - 2 * _A5, _A5],
        [_A5, _A5, 1.0 - 2 * _A5],
        [1.0 - 2 * _B5, _B5, _B5],
        [_B5, 1.0 - 2 * _B5, _B5],
        [_B5, _B5, 1.0 - 2 * _B5],
    ]),
    np.array([9.0 / 40.0, _W5A, _W5A, _W5A, _W5B, _W5B, _W5B]),
)


def _geometry_from_coords(coords: np.ndarray):
    """Areas (nt,) and constant P1 gradients (nt, 3, 2)."""
    x, y = coords[..., 0], coords[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    grads = np.stack([b, c], axis=2) / area2[:, None, None]
    return 0.5 * area2, grads


def _geometry_arrays(mesh: Mesh):
    return _geometry_from_coords(mesh.tri_coords)


def element_matrices(coords: np.ndarray, lam: float, mu: float):
    """Vectorized (stiffness, mass) element matrices, shape (nt, 6, 6).

    Local dof order is (vertex k, component a) -> 2k + a.  Exact for P1:
    the stiffness integrand is constant and the mass integrand quadratic.
    """
    coords = np.asarray(coords, dtype=float)
    area, g = _geometry_from_coords(coords)

    gg = np.einsum("tia,tja->tij", g, g)          # grad_i . grad_j
    gij = np.einsum("tia,tjb->tiajb", g, g)       # grad_i[a] grad_j[b]
    nt = coords.shape[0]
    k = np.zeros((nt, 3, 2, 3, 2))
    for a in range(2):
        k[:, :, a, :, a] += mu * gg
    k += (lam + mu) * gij
    k *= area[:, None, None, None, None]

    m_scalar = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m = np.zeros((nt, 3, 2, 3, 2))
    for a in range(2):
        m[:, :, a, :, a] = area[:, None, None] * m_scalar
    return k.reshape(nt, 6, 6), m.reshape(nt, 6, 6)


def _map_factors(dmap: DomainMap, pts: np.ndarray):
    """(detj, t12, t22) at points (..., 2), where
    inv(J)^T = [[1, t12], [0, t22]]."""
    j1, j2 = dmap.jacobian(pts)
    detj = 1.0 + j2
    if np.any(detj <= 0.0):
        raise MapSingularError(
            f"det J = {float(np.min(detj)):.6g} <= 0 at a quadrature point")
    return detj, -j1 / detj, 1.0 / detj


def transformed_element_matrices(coords: np.ndarray, dmap: DomainMap,
                                 lam: float, mu: float,
                                 rule=DEGREE5_RULE):
    """Element (stiffness, mass) for the pulled-back form, shape (nt, 6, 6).

    Gradients transform as G = inv(J)^T grad(phi); every term carries det J.
    """
    coords = np.asarray(coords, dtype=float)
    bary, wts = rule
    area, grads = _geometry_from_coords(coords)
    pts = np.einsum("qk,tkx->tqx", bary, coords)      # (nt, nq, 2)
    detj, t12, t22 = _map_factors(dmap, pts)          # (nt, nq)

    gx = grads[..., 0][:, None, :]                    # (nt, 1, 3)
    gy = grads[..., 1][:, None, :]
    G = np.empty(coords.shape[:1] + (len(wts), 3, 2))
    G[..., 0] = gx + t12[..., None] * gy
    G[..., 1] = t22[..., None] * gy

    wdet = wts[None, :] * detj * area[:, None]        # (nt, nq)
    gg = np.einsum("tq,tqia,tqja->tij", wdet, G, G)
    gij = np.einsum("tq,tqia,tqjb->tiajb", wdet, G, G)
    nt = coords.shape[0]
    k = np.zeros((nt, 3, 2, 3, 2))
    for a in range(2):
        k[:, :, a, :, a] += mu * gg
    k += (lam + mu) * gij

    mm = np.einsum("tq,qi,qj->tij", wdet, bary, bary)
    m = np.zeros((nt, 3, 2, 3, 2))
    for a in range(2):
        m[:, :, a, :, a] = mm
    return k.reshape(nt, 6, 6), m.reshape(nt, 6, 6)


@dataclass(frozen=True)
class SparseSystem:
    """Assembled complex system: sparse domain part minus a dense DtN block.

    The DtN block couples only the top-node dofs; `top_dofs` lists their
    positions inside the free-dof vector.
    """

    dimension: int
    entries: sp.csr_matrix            # domain part (stiffness - omega^2 mass)
    dtn_block: np.ndarray             # (2*nx, 2*nx) complex
    top_dofs: np.ndarray              # (2*nx,) indices into the free vector
    mesh: Mesh
    params: ElasticParams
    n_max: int

    def full_matrix(self) -> sp.csc_matrix:
        """Domain part minus the DtN block, as CSC for factorization."""
        i = np.repeat(self.top_dofs, self.top_dofs.size)
        j = np.tile(self.top_dofs, self.top_dofs.size)
        dtn = sp.coo_matrix((self.dtn_block.ravel(), (i, j)),
                            shape=(self.dimension, self.dimension))
        return (self.entries - dtn).tocsc()

    def dtn_full(self) -> np.ndarray:
        """DtN block scattered to the full free dimension (for inspection)."""
        out = np.zeros((self.dimension, self.dimension), dtype=complex)
        out[np.ix_(self.top_dofs, self.top_dofs)] = self.dtn_block
        return out


@dataclass(frozen=True)
class FieldSolution:
    """Nodal displacement on the full mesh (zeros on the surface nodes)."""

    mesh: Mesh
    values: np.ndarray                # (n_nodes, 2) complex
    norms: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def _free_dof_arrays(mesh: Mesh):
    """free node ids, and a map node id -> free-vector position (or -1)."""
    free = mesh.free_nodes
    pos = -np.ones(mesh.n_nodes, dtype=np.int64)
    pos[free] = np.arange(free.size)
    return free, pos


def _scatter_elements(mesh: Mesh, elem: np.ndarray) -> sp.csr_matrix:
    """Assemble (nt, 6, 6) element blocks into the free-dof sparse matrix."""
    free, pos = _free_dof_arrays(mesh)
    n_free = free.size
    tri = mesh.triangles
    dofs = np.empty((tri.shape[0], 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * pos[tri]
    dofs[:, 1::2] = 2 * pos[tri] + 1
    keep = dofs >= 0
    rows = np.repeat(dofs[:, :, None], 6, axis=2)
    cols = np.repeat(dofs[:, None, :], 6, axis=1)
    mask = keep[:, :, None] & keep[:, None, :]
    a = sp.coo_matrix(
        (elem[mask], (rows[mask], cols[mask])),
        shape=(2 * n_free, 2 * n_free),
    )
    return a.tocsr()


def _effective_n_max(mesh: Mesh, n_max: int) -> int:
    # Aliasing guard: the PL trace transform is injective only up to Nyquist.
    return min(int(n_max), (mesh.nx - 1) // 2)


def _sinc2(t: np.ndarray) -> np.ndarray:
    out = np.ones_like(t)
    nz = t != 0.0
    out[nz] = (np.sin(t[nz]) / t[nz]) ** 2
    return out


def _dtn_block(mesh: Mesh, p: ElasticParams, n_max: int) -> np.ndarray:
    """Dense coupling on top dofs realizing int_top (DtN u_h) . conj(v_h)."""
    nx = mesh.nx
    per = mesh.period
    xk = mesh.nodes[mesh.top_nodes, 0]
    block = np.zeros((2 * nx, 2 * nx), dtype=complex)
    ns = np.arange(-n_max, n_max + 1)
    beta = _sinc2(math.pi * ns / nx)
    for n, b in zip(ns, beta):
        xi = 2.0 * math.pi * n / per
        m = symbol_matrices(xi, p)
        w = np.exp(1j * xi * xk)
        outer = np.outer(w, np.conj(w)) * (per * b * b / nx ** 2)
        block += np.kron(outer, m)
    return block


def assemble_B(mesh: Mesh, p: ElasticParams, n_max: int) -> SparseSystem:
    """Assemble the reference form: exact P1 element integrals + DtN block."""
    k, m = element_matrices(mesh.tri_coords, p.lam, p.mu)
    domain = _scatter_elements(mesh, k - p.omega ** 2 * m)
    return _finish_system(mesh, p, n_max, domain)


def assemble_B_transformed(mesh_ref: Mesh, p: ElasticParams, dmap: DomainMap,
                           n_max: int) -> SparseSystem:
    """Assemble the pulled-back form on the reference mesh.

    The map fixes the top line, so the DtN block is identical to assemble_B.
    """
    k, m = transformed_element_matrices(mesh_ref.tri_coords, dmap, p.lam, p.mu)
    domain = _scatter_elements(mesh_ref, k - p.omega ** 2 * m)
    return _finish_system(mesh_ref, p, n_max, domain)


def _finish_system(mesh: Mesh, p: ElasticParams, n_max: int,
                   domain: sp.csr_matrix) -> SparseSystem:
    n_eff = _effective_n_max(mesh, n_max)
    block = _dtn_block(mesh, p, n_eff)
    _, pos = _free_dof_arrays(mesh)
    tp = pos[mesh.top_nodes]
    top_dofs = np.empty(2 * mesh.nx, dtype=np.int64)
    top_dofs[0::2] = 2 * tp
    top_dofs[1::2] = 2 * tp + 1
    return SparseSystem(
        dimension=domain.shape[0],
        entries=domain.astype(complex),
        dtn_block=block,
        top_dofs=top_dofs,
        mesh=mesh,
        params=p,
        n_max=n_eff,
    )


def assemble_load(mesh: Mesh, g, rule=DEGREE5_RULE) -> np.ndarray:
    """Free-dof load vector with entries -int g . phi_i (7-point rule)."""
    bary, wts = rule
    area, _ = _geometry_arrays(mesh)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    gv = np.asarray(g(pts), dtype=complex)           # (nt, nq, 2)
    contrib = -np.einsum("q,tqa,qi,t->tia", wts, gv, bary, area)
    return _scatter_load(mesh, contrib)


def assemble_load_transformed(mesh_ref: Mesh, g_tilde, dmap: DomainMap,
                              rule=DEGREE5_RULE) -> np.ndarray:
    """Load for the pulled-back form: -int g_tilde . phi_i det(J)."""
    bary, wts = rule
    area, _ = _geometry_arrays(mesh_ref)
    pts = np.einsum("qk,tkx->tqx", bary, mesh_ref.tri_coords)
    detj, _, _ = _map_factors(dmap, pts)
    gv = np.asarray(g_tilde(pts), dtype=complex)
    contrib = -np.einsum("q,tq,tqa,qi,t->tia", wts, detj, gv, bary, area)
    return _scatter_load(mesh_ref, contrib)


def _scatter_load(mesh: Mesh, contrib: np.ndarray) -> np.ndarray:
    free, pos = _free_dof_arrays(mesh)
    out = np.zeros(2 * free.size, dtype=complex)
    tri = mesh.triangles
    dofs = np.empty((tri.shape[0], 3, 2), dtype=np.int64)
    dofs[..., 0] = 2 * pos[tri]
    dofs[..., 1] = 2 * pos[tri] + 1
    keep = dofs[..., 0] >= 0
    np.add.at(out, dofs[keep][:, 0], contrib[keep][:, 0])
    np.add.at(out, dofs[keep][:, 1], contrib[keep][:, 1])
    return out


def solve(system: SparseSystem, load: np.ndarray,
          metadata: dict | None = None) -> FieldSolution:
    """Direct sparse factorization; residual must satisfy ||Ax-b|| <= 1e-10 ||b||."""
    b = np.asarray(load, dtype=complex)
    if b.shape != (system.dimension,):
        raise SolveError(
            f"load has shape {b.shape}, expected ({system.dimension},)")
    a = system.full_matrix()
    if np.any(b):
        try:
            lu = spla.splu(a)
        except RuntimeError as exc:  # singular factorization
            raise SolveError(f"factorization failed: {exc}") from exc
        x = lu.solve(b)
        rel = np.linalg.norm(a @ x - b) / np.linalg.norm(b)
        if rel > 1e-10:
            raise SolveError(
                f"relative residual {rel:.3e} exceeds 1e-10 "
                "(possible discrete resonance or bad truncation)")
    else:
        x = np.zeros_like(b)

    mesh = system.mesh
    free, _ = _free_dof_arrays(mesh)
    values = np.zeros((mesh.n_nodes, 2), dtype=complex)
    values[free, 0] = x[0::2]
    values[free, 1] = x[1::2]
    sol = FieldSolution(mesh=mesh, values=values, norms={},
                        metadata=dict(metadata or {}))
    sol.norms.update(norms(sol))
    return sol


def element_gradients(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Per-element constant gradient (nt, 2, 2): [t, a, b] = d u_a / d x_b."""
    _, grads = _geometry_arrays(mesh)
    vals = np.asarray(values, dtype=complex)[mesh.triangles]   # (nt, 3, 2)
    return np.einsum("tka,tkb->tab", vals, grads)


def norms(sol: FieldSolution) -> dict:
    """Quadrature-exact L2, H1, d2 (=||d u/d x2||) and top-trace L2 norms."""
    mesh = sol.mesh
    area, _ = _geometry_arrays(mesh)
    vals = np.asarray(sol.values, dtype=complex)[mesh.triangles]  # (nt, 3, 2)
    # v^H (ones+I) v = |sum v|^2 + sum |v|^2, per component
    ssum = np.abs(np.sum(vals, axis=1)) ** 2
    ssq = np.sum(np.abs(vals) ** 2, axis=1)
    l2_sq = float(np.sum(area[:, None] / 12.0 * (ssum + ssq)))
    gu = element_gradients(mesh, sol.values)
    semi_sq = float(np.sum(area[:, None, None] * np.abs(gu) ** 2))
    d2_sq = float(np.sum(area[:, None] * np.abs(gu[:, :, 1]) ** 2))

    top = sol.values[mesh.top_nodes]
    nxt = np.roll(top, -1, axis=0)
    dx = mesh.period / mesh.nx
    trace_sq = float(np.sum(
        dx / 3.0 * (np.abs(top) ** 2 + np.abs(nxt) ** 2
                    + np.real(np.conj(top) * nxt))))
    return {
        "l2": math.sqrt(l2_sq),
        "h1": math.sqrt(l2_sq + semi_sq),
        "d2": math.sqrt(d2_sq),
        "trace_l2_top": math.sqrt(trace_sq),
    }


def trace_coefficients(mesh: Mesh, values: np.ndarray,
                       n_max: int) -> TraceCoefficients:
    """Fourier coefficients of the piecewise-linear top trace, |n| <= n_max.

    These are exact coefficients of the P1 interpolant: sinc^2-weighted DFT
    of the nodal values, the same transform the DtN block uses.
    """
    n_eff = _effective_n_max(mesh, n_max)
    top = np.asarray(values, dtype=complex)[mesh.top_nodes]   # (nx, 2)
    hat = np.fft.fft(top, axis=0) / mesh.nx
    ns = np.arange(-n_eff, n_eff + 1)
    beta = _sinc2(math.pi * ns / mesh.nx)
    modes = {int(n): b * hat[n % mesh.nx] for n, b in zip(ns, beta)}
    return TraceCoefficients(period=mesh.period, height=mesh.h, modes=modes)
