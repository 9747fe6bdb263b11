"""Mesh construction, element integrals, assembly, DtN block, solve, norms."""

import math

import numpy as np
import pytest

from elastodtn.errors import MeshError, SolveError
from elastodtn.fem import (
    FieldSolution,
    assemble_B,
    assemble_B_transformed,
    assemble_load,
    assemble_load_transformed,
    element_matrices,
    norms,
    solve,
    trace_coefficients,
    transformed_element_matrices,
)
from elastodtn.mesh import build_mesh
from elastodtn.model import (
    DomainMap,
    flat_surface,
    make_cutoff,
    make_params,
    sawtooth_surface,
)


class TestMesh:
    def test_counting_example(self):
        mesh = build_mesh(flat_surface(0.5, 0.4, 0.6, 1.0), 1.5, 2, 2)
        assert mesh.n_nodes == 6
        assert mesh.triangles.shape == (8, 3)
        assert mesh.free_nodes.size == 4

    def test_sawtooth_positive_areas(self):
        surf = sawtooth_surface(0.5, 0.125, 0.3, 0.7, 1.0)  # L = 0.5
        mesh = build_mesh(surf, 1.5, 16, 12)
        assert np.all(mesh.areas() > 0.0)

    def test_boundary_node_heights_exact(self):
        surf = sawtooth_surface(0.5, 0.125, 0.3, 0.7, 1.0)
        mesh = build_mesh(surf, 1.5, 16, 12)
        x1 = mesh.nodes[mesh.surface_nodes, 0]
        assert np.array_equal(mesh.nodes[mesh.surface_nodes, 1], surf.f(x1))
        assert np.all(mesh.nodes[mesh.top_nodes, 1] == 1.5)

    def test_top_nodes_equispaced(self):
        mesh = build_mesh(flat_surface(0.5, 0.4, 0.6, 2.0), 1.5, 8, 4)
        x1 = mesh.nodes[mesh.top_nodes, 0]
        assert np.allclose(np.diff(x1), 0.25)

    def test_degenerate_params_rejected(self):
        surf = flat_surface(0.5, 0.4, 0.6, 1.0)
        with pytest.raises(MeshError):
            build_mesh(surf, 1.5, 1, 4)
        with pytest.raises(MeshError):
            build_mesh(surf, 0.55, 4, 4)

    def test_dump_format(self):
        mesh = build_mesh(flat_surface(0.5, 0.4, 0.6, 1.0), 1.5, 2, 2)
        lines = mesh.dump().splitlines()
        kinds = {ln.split("\t")[0] for ln in lines}
        assert kinds == {"node", "tri", "edge"}
        assert sum(ln.startswith("node\t") for ln in lines) == 6
        assert sum(ln.startswith("tri\t") for ln in lines) == 8
        assert any("PERIODIC_PAIR" in ln for ln in lines)


class TestElementMatrices:
    def test_stiffness_matches_symbolic_integration(self):
        import sympy as sp
        x, y = sp.symbols("x y")
        phi = [1 - x - y, x, y]
        lam = mu = 1.0
        expect = np.zeros((6, 6))
        for i in range(3):
            for a in range(2):
                for j in range(3):
                    for b in range(2):
                        gi = [sp.diff(phi[i], x), sp.diff(phi[i], y)]
                        gj = [sp.diff(phi[j], x), sp.diff(phi[j], y)]
                        term = (lam + mu) * gi[a] * gj[b]
                        if a == b:
                            term += mu * (gi[0] * gj[0] + gi[1] * gj[1])
                        val = sp.integrate(sp.integrate(term, (y, 0, 1 - x)),
                                           (x, 0, 1))
                        expect[2 * i + a, 2 * j + b] = float(val)
        coords = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
        k, m = element_matrices(coords, 1.0, 1.0)
        assert np.max(np.abs(k[0] - expect)) < 1e-14
        # scalar mass block: area/6 diagonal, area/12 off-diagonal
        assert m[0, 0, 0] == pytest.approx(0.5 / 6)
        assert m[0, 0, 2] == pytest.approx(0.5 / 12)
        assert m[0, 0, 1] == 0.0

    def test_translation_invariance(self):
        coords = np.array([[[0.0, 0.0], [1.0, 0.0], [0.3, 0.9]]])
        shifted = coords + np.array([2.0, -1.0])
        k1, m1 = element_matrices(coords, 1.3, 0.8)
        k2, m2 = element_matrices(shifted, 1.3, 0.8)
        assert np.allclose(k1, k2, atol=1e-13)
        assert np.allclose(m1, m2, atol=1e-14)

    def test_closed_forms_equal_midedge_quadrature(self):
        # the mid-edge rule is degree-2 exact: it must reproduce both the
        # (constant-integrand) stiffness and the (quadratic) mass exactly
        from elastodtn.fem import MIDEDGE_RULE, _geometry_from_coords
        bary, wts = MIDEDGE_RULE
        coords = np.array([[[0.2, 0.1], [1.1, 0.3], [0.4, 1.2]]])
        lam, mu = 1.7, 0.6
        area, grads = _geometry_from_coords(coords)
        k_q = np.zeros((3, 2, 3, 2))
        m_q = np.zeros((3, 2, 3, 2))
        for q, w in enumerate(wts):
            phi = bary[q]
            for i in range(3):
                for a in range(2):
                    for j in range(3):
                        for b in range(2):
                            val = (lam + mu) * grads[0, i, a] * grads[0, j, b]
                            if a == b:
                                val += mu * float(grads[0, i] @ grads[0, j])
                                m_q[i, a, j, b] += w * area[0] * phi[i] * phi[j]
                            k_q[i, a, j, b] += w * area[0] * val
        k, m = element_matrices(coords, lam, mu)
        assert np.allclose(k[0], k_q.reshape(6, 6), atol=1e-13)
        assert np.allclose(m[0], m_q.reshape(6, 6), atol=1e-14)


class TestAssembly:
    def test_domain_block_conjugate_symmetric(self, flat_geom, params2):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 12, 16)
        system = assemble_B(mesh, params2, 8)
        a = system.entries
        assert abs(a - a.conj().T).max() < 1e-12 * abs(a).max()

    def test_elastostatic_limit_positive_energy(self, flat_geom):
        p = make_params(1.0, 1.0, 1e-3)
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 12, 16)
        a = assemble_B(mesh, p, 8).full_matrix()
        gen = np.random.default_rng(3)
        for _ in range(10):
            v = gen.standard_normal(a.shape[0]) \
                + 1j * gen.standard_normal(a.shape[0])
            assert float(np.real(np.vdot(v, a @ v))) > 0.0

    def test_identity_map_equivalence(self, flat_geom, params2):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 16, 20)
        f0 = flat_geom.surface
        ident = DomainMap(f0=f0, f_eta=f0, cutoff=make_cutoff(0.1, 1.1))
        sys_a = assemble_B(mesh, params2, 8)
        sys_b = assemble_B_transformed(mesh, params2, ident, 8)
        diff = abs(sys_a.entries - sys_b.entries).max()
        assert diff < 1e-14 * abs(sys_a.entries).max()
        assert np.array_equal(sys_a.dtn_block, sys_b.dtn_block)

    def test_flat_shift_element_against_hand_factors(self):
        # map factors inside the ramp band: J1 = 0, J2 = -delta_f * slope
        f0 = flat_surface(0.4, 0.0, 1.0, 1.0)
        f1 = flat_surface(0.6, 0.0, 1.0, 1.0)
        cutoff = make_cutoff(0.2, 2.0)
        dmap = DomainMap(f0=f0, f_eta=f1, cutoff=cutoff)
        coords = np.array([[[0.1, 1.0], [0.2, 1.0], [0.1, 1.1]]])  # in band
        lam = mu = 1.0
        k, m = transformed_element_matrices(coords, dmap, lam, mu)
        j2 = -0.2 / 1.7
        d = 1.0 + j2
        grads = np.array([[-10.0, -10.0], [10.0, 0.0], [0.0, 10.0]])
        area = 0.005
        expect_k = np.zeros((6, 6))
        for i in range(3):
            for a in range(2):
                for j in range(3):
                    for b in range(2):
                        gi = np.array([grads[i, 0], grads[i, 1] / d])
                        gj = np.array([grads[j, 0], grads[j, 1] / d])
                        val = (lam + mu) * gi[a] * gj[b]
                        if a == b:
                            val += mu * float(gi @ gj)
                        expect_k[2 * i + a, 2 * j + b] = val * area * d
        assert np.max(np.abs(k[0] - expect_k)) < 1e-12
        # mass block scales by det J
        _, m_plain = element_matrices(coords, lam, mu)
        assert np.allclose(m[0], d * m_plain[0], atol=1e-15)

    def test_dtn_block_touches_only_top_dofs(self, flat_geom, params2):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 8, 6)
        system = assemble_B(mesh, params2, 3)
        full = system.dtn_full()
        mask = np.zeros(system.dimension, dtype=bool)
        mask[system.top_dofs] = True
        assert np.all(full[~mask, :] == 0.0)
        assert np.all(full[:, ~mask] == 0.0)
        assert np.any(full[np.ix_(mask, mask)] != 0.0)


class TestLoads:
    def test_zero_source(self, flat_geom):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 8, 8)
        load = assemble_load(mesh, lambda pts: np.zeros(pts.shape[:-1] + (2,)))
        assert np.array_equal(load, np.zeros_like(load))

    def test_identity_map_equals_plain(self, flat_geom, bump):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 16, 20)
        f0 = flat_geom.surface
        ident = DomainMap(f0=f0, f_eta=f0, cutoff=make_cutoff(0.1, 1.1))
        plain = assemble_load(mesh, bump)
        mapped = assemble_load_transformed(mesh, bump, ident)
        assert np.allclose(plain, mapped, atol=1e-15)

    def test_constant_source_nodal_entries(self, flat_geom):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 8, 8)
        c = 2.0 - 0.5j

        def g(pts):
            out = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
            out[..., 0] = c
            return out

        load = assemble_load(mesh, g)
        # entry of an interior node = -c/3 * total area of adjacent elements
        node = mesh.free_nodes[mesh.free_nodes.size // 2]
        adjacent = np.nonzero(np.any(mesh.triangles == node, axis=1))[0]
        expect = -c / 3.0 * float(np.sum(mesh.areas()[adjacent]))
        free_pos = int(np.searchsorted(mesh.free_nodes, node))
        assert load[2 * free_pos] == pytest.approx(expect, rel=1e-12)
        assert load[2 * free_pos + 1] == 0.0


class TestSolve:
    def test_zero_load_zero_solution(self, flat_geom, params2):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 8, 8)
        system = assemble_B(mesh, params2, 4)
        sol = solve(system, np.zeros(system.dimension, dtype=complex))
        assert np.array_equal(sol.values, np.zeros_like(sol.values))
        assert sol.norms["h1"] == 0.0

    def test_linearity_exact(self, flat_geom, params2, bump):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 16, 24)
        system = assemble_B(mesh, params2, 8)
        load = assemble_load(mesh, bump)
        u1 = solve(system, load)
        u2 = solve(system, 2.0 * load)
        assert np.array_equal(u2.values, 2.0 * u1.values)

    def test_residual_enforced(self, flat_geom, params2, bump):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 24, 32)
        system = assemble_B(mesh, params2, 8)
        load = assemble_load(mesh, bump)
        sol = solve(system, load)
        a = system.full_matrix()
        x = np.empty(system.dimension, dtype=complex)
        x[0::2] = sol.values[mesh.free_nodes, 0]
        x[1::2] = sol.values[mesh.free_nodes, 1]
        rel = np.linalg.norm(a @ x - load) / np.linalg.norm(load)
        assert rel <= 1e-10

    def test_shape_mismatch_raises(self, flat_geom, params2):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 8, 8)
        system = assemble_B(mesh, params2, 4)
        with pytest.raises(SolveError):
            solve(system, np.zeros(3, dtype=complex))

    def test_galerkin_orthogonality(self, flat_geom, params2, bump):
        from elastodtn.verify import source_norms
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 24, 32)
        system = assemble_B(mesh, params2, 8)
        load = assemble_load(mesh, bump)
        sol = solve(system, load)
        a = system.full_matrix()
        x = np.empty(system.dimension, dtype=complex)
        x[0::2] = sol.values[mesh.free_nodes, 0]
        x[1::2] = sol.values[mesh.free_nodes, 1]
        gl2 = source_norms(mesh, bump)["l2"]
        assert float(np.max(np.abs(a @ x - load))) <= 1e-9 * gl2


class TestNorms:
    def test_constant_field_l2(self, flat_geom):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 16, 16)
        c = 1.5 - 0.5j
        vals = np.full((mesh.n_nodes, 2), 0.0, dtype=complex)
        vals[:, 0] = c
        n = norms(FieldSolution(mesh=mesh, values=vals))
        area = float(np.sum(mesh.areas()))
        assert n["l2"] == pytest.approx(abs(c) * math.sqrt(area), rel=1e-12)
        assert n["d2"] == pytest.approx(0.0, abs=1e-12)

    def test_zero_field(self, flat_geom):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 8, 8)
        n = norms(FieldSolution(mesh=mesh,
                                values=np.zeros((mesh.n_nodes, 2), complex)))
        assert n["l2"] == 0.0 and n["h1"] == 0.0
        assert n["d2"] == 0.0 and n["trace_l2_top"] == 0.0

    def test_trace_parseval_single_mode(self, flat_geom):
        # exact L2 of the PL interpolant vs its own retained coefficient
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 1024, 2)
        vals = np.zeros((mesh.n_nodes, 2), dtype=complex)
        x1 = mesh.nodes[mesh.top_nodes, 0]
        vals[mesh.top_nodes, 0] = np.exp(2j * math.pi * x1)
        n = norms(FieldSolution(mesh=mesh, values=vals))
        tr = trace_coefficients(mesh, vals, 1)
        parseval = mesh.period * float(np.sum(np.abs(tr.modes[1]) ** 2))
        assert abs(n["trace_l2_top"] ** 2 - parseval) < 1e-10

    def test_linear_vertical_field_h1(self, flat_geom):
        # u = (x2 - f, 0) has exact nodal representation on each column...
        # use u = (x2, 0): l2^2 = int x2^2, semi = area
        mesh = build_mesh(flat_surface(0.0, -0.1, 0.1, 1.0), 1.0, 8, 8)
        vals = np.zeros((mesh.n_nodes, 2), dtype=complex)
        vals[:, 0] = mesh.nodes[:, 1]
        n = norms(FieldSolution(mesh=mesh, values=vals))
        assert n["l2"] == pytest.approx(math.sqrt(1.0 / 3.0), rel=1e-12)
        assert n["d2"] == pytest.approx(1.0, rel=1e-12)
        assert n["h1"] == pytest.approx(math.sqrt(1.0 / 3.0 + 1.0), rel=1e-12)


class TestTraceCoefficients:
    def test_matches_direct_formula(self, flat_geom):
        mesh = build_mesh(flat_geom.surface, flat_geom.h, 16, 4)
        gen = np.random.default_rng(5)
        vals = np.zeros((mesh.n_nodes, 2), dtype=complex)
        vals[mesh.top_nodes] = gen.standard_normal((16, 2)) \
            + 1j * gen.standard_normal((16, 2))
        tr = trace_coefficients(mesh, vals, 5)
        x1 = mesh.nodes[mesh.top_nodes, 0]
        for n in (-3, 0, 2):
            xi = 2 * math.pi * n / mesh.period
            t = math.pi * n / 16
            sinc2 = 1.0 if n == 0 else (math.sin(t) / t) ** 2
            direct = sinc2 * np.mean(
                vals[mesh.top_nodes] * np.exp(-1j * xi * x1)[:, None], axis=0)
            assert np.allclose(tr.modes[n], direct, atol=1e-14)
        assert set(tr.modes) == set(range(-5, 6))
