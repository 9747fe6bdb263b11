"""Seeded ensemble runs of the random problem on the reference mesh.

Each sample draws a surface, builds the vertical domain map, assembles the
pulled-back form and load, solves, and records both the reference-strip norm
of the transformed solution (the quantity the mean-square bound controls)
and the physical-strip norm of the pushforward, obtained by change of
variables on the same quadrature points.  Samples are pure functions of
(seed, index), so ensembles are reproducible bit for bit at any parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import ElastoDtnError, EnsembleError, ParameterError
from .fem import DEGREE5_RULE, assemble_B_transformed, assemble_load_transformed, solve
from .mesh import Mesh
from .model import (
    DomainMap,
    ElasticParams,
    RandomSurfaceModel,
    SourceSpec,
    check_invertibility,
    make_cutoff,
    make_source,
    sample_surface,
)
from .verify import BoundProfile, surface_distance_1inf

__all__ = [
    "EnsembleResult",
    "run_sample",
    "run_ensemble",
    "meansquare_envelope_check",
    "random_input_moments",
    "default_n_max",
]


def default_n_max(p: ElasticParams, period: float) -> int:
    """Smallest mode count with |xi_n| >= 4 k_s (evanescent tail negligible
    at unit distance), floored at 8."""
    return max(8, int(math.ceil(4.0 * p.k_s * period / (2.0 * math.pi))))


def _jacobian_extremes(dmap: DomainMap, h: float, resolution: int = 64):
    """(kappa, min_detJ) over a tensor grid: kappa dominates both directions
    of the norm-equivalence sandwich."""
    per = dmap.f0.period
    x1 = np.linspace(0.0, per, resolution, endpoint=False)
    f0 = dmap.f0.f(x1)
    s = np.linspace(0.0, 1.0, resolution)
    pts = np.empty((resolution, resolution, 2))
    pts[..., 0] = x1[:, None]
    pts[..., 1] = f0[:, None] + s[None, :] * (h - f0[:, None])
    j1, j2 = dmap.jacobian(pts)
    d = 1.0 + j2
    tr_fwd = 1.0 + j1 ** 2 + d ** 2
    lmax_fwd = 0.5 * (tr_fwd + np.sqrt(tr_fwd ** 2 - 4.0 * d ** 2))
    kappa_a = np.max(np.maximum(lmax_fwd, 1.0) / d)
    tr_inv = 1.0 + (1.0 + j1 ** 2) / d ** 2
    lmax_inv = 0.5 * (tr_inv + np.sqrt(tr_inv ** 2 - 4.0 / d ** 2))
    kappa_b = np.max(np.maximum(lmax_inv, 1.0) * d)
    return float(max(kappa_a, kappa_b)), float(d.min())


def pushforward_h1_sq(mesh: Mesh, values: np.ndarray, dmap: DomainMap) -> float:
    """||u*||^2_{H1} on the image strip by change of variables:
    int [sum_a |invJ^T grad u~_a|^2 + |u~|^2] det J dy."""
    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    j1, j2 = dmap.jacobian(pts)
    detj = 1.0 + j2
    vals = np.asarray(values, dtype=complex)[mesh.triangles]
    uh = np.einsum("qk,tka->tqa", bary, vals)
    gu = fem.element_gradients(mesh, values)                 # (nt, 2, 2)
    g1 = gu[:, None, :, 0] - (j1 / detj)[..., None] * gu[:, None, :, 1]
    g2 = gu[:, None, :, 1] / detj[..., None]
    wa = wts[None, :] * area[:, None] * detj
    return float(np.sum(wa * (np.abs(g1) ** 2 + np.abs(g2) ** 2
                              + np.abs(uh) ** 2).sum(axis=-1)))


def pullback_source_h1_sq(mesh: Mesh, g, dmap: DomainMap) -> float:
    """||g o H||^2_{H1} on the reference strip (g has analytic .grad)."""
    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    j1, j2 = dmap.jacobian(pts)
    xpts = dmap.apply(pts)
    gv = np.asarray(g(xpts), dtype=complex)
    gx = np.asarray(g.grad(xpts), dtype=complex)
    # D_y (g o H) = (D_x g) J, J = [[1, 0], [J1, 1+J2]]
    d1 = gx[..., 0] + gx[..., 1] * j1[..., None]
    d2 = gx[..., 1] * (1.0 + j2)[..., None]
    wa = wts[None, :] * area[:, None]
    return float(np.sum(wa * (np.abs(gv) ** 2 + np.abs(d1) ** 2
                              + np.abs(d2) ** 2).sum(axis=-1)))


def run_sample(model: RandomSurfaceModel, src: SourceSpec, p: ElasticParams,
               mesh_ref: Mesh, index: int, *, delta: float | None = None,
               epsilon_margin: float = 0.05,
               n_max: int | None = None) -> dict:
    """Solve one draw of the random problem; returns the per-sample record."""
    if index < 0:
        raise ParameterError("sample index must be >= 0")
    h = mesh_ref.h
    gap = h - model.f0.sup()
    if delta is None:
        delta = gap / 8.0
    if n_max is None:
        n_max = default_n_max(p, model.f0.period)
    f_eta = sample_surface(model, index)
    cutoff = make_cutoff(delta, gap)
    dmap = DomainMap(f0=model.f0, f_eta=f_eta, cutoff=cutoff,
                     epsilon_margin=epsilon_margin)
    min_detj = check_invertibility(dmap, 64, h=h)
    kappa, _ = _jacobian_extremes(dmap, h)

    g_eta = make_source(src, index, f_max=model.f0.f_max, h=h)
    g_tilde = lambda pts: g_eta(dmap.apply(pts))
    system = assemble_B_transformed(mesh_ref, p, dmap, n_max)
    load = assemble_load_transformed(mesh_ref, g_tilde, dmap)
    sol = solve(system, load, metadata={"omega": p.omega,
                                        "n_max": system.n_max,
                                        "sample_index": index})
    return {
        "index": index,
        "u_h1_sq": sol.norms["h1"] ** 2,
        "u_ref_h1_sq": pushforward_h1_sq(mesh_ref, sol.values, dmap),
        "g_h1_sq": pullback_source_h1_sq(mesh_ref, g_eta, dmap),
        "min_detJ": min_detj,
        "kappa": kappa,
    }


@dataclass(frozen=True)
class EnsembleResult:
    """Aggregated per-sample records; a pure function of its inputs."""

    sample_count: int
    per_sample: list[dict]
    mean_u_sq: float
    mean_g_sq: float
    se_u_sq: float


def run_ensemble(model: RandomSurfaceModel, src: SourceSpec, p: ElasticParams,
                 mesh_ref: Mesh, N: int, parallelism: int = 1,
                 **sample_kwargs) -> EnsembleResult:
    """N independent samples with indices 0..N-1; aggregation is an ordered
    reduction, so the result is independent of scheduling."""
    if N < 1:
        raise ParameterError("N must be >= 1")
    results: dict[int, dict] = {}
    failures: dict[int, str] = {}

    def task(i):
        return run_sample(model, src, p, mesh_ref, i, **sample_kwargs)

    if parallelism <= 1:
        for i in range(N):
            try:
                results[i] = task(i)
            except ElastoDtnError as exc:
                failures[i] = str(exc)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futs = {i: pool.submit(task, i) for i in range(N)}
            for i, fut in futs.items():
                try:
                    results[i] = fut.result()
                except ElastoDtnError as exc:
                    failures[i] = str(exc)
    if failures:
        detail = "; ".join(f"{i}: {msg}" for i, msg in sorted(failures.items()))
        raise EnsembleError(f"samples failed: {detail}")

    per_sample = [results[i] for i in range(N)]
    u_sq = np.array([r["u_h1_sq"] for r in per_sample])
    g_sq = np.array([r["g_h1_sq"] for r in per_sample])
    mean_u = float(np.mean(u_sq))
    se = float(np.std(u_sq, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return EnsembleResult(sample_count=N, per_sample=per_sample,
                          mean_u_sq=mean_u, mean_g_sq=float(np.mean(g_sq)),
                          se_u_sq=se)


def meansquare_envelope_check(res: EnsembleResult, profile: BoundProfile,
                    calibrated_C: float) -> dict:
    """Mean-square envelope: mean ||u~||^2 <= C (H-m+1)^2 (c4+c5+c6)^2 mean ||g~||^2.

    The profile must be evaluated at the envelope Lipschitz constant
    L0 = L + M0 of the random family.
    """
    factor = (profile.h + 2.0 - profile.m) ** 2
    rhs = calibrated_C * factor * (profile.c4 + profile.c5 + profile.c6) ** 2 \
        * res.mean_g_sq
    lhs = res.mean_u_sq
    return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs)}


def random_input_moments(model: RandomSurfaceModel, src: SourceSpec,
                        p: ElasticParams, mesh_ref: Mesh, N: int, *,
                        delta: float | None = None,
                        epsilon_margin: float = 0.05) -> dict:
    """Sample second moments of ||f(eta)-f0||_{1,inf} and ||g~(eta)||_{H1}."""
    if N < 2:
        raise ParameterError("N must be >= 2 for moment estimates")
    h = mesh_ref.h
    gap = h - model.f0.sup()
    if delta is None:
        delta = gap / 8.0
    cutoff = make_cutoff(delta, gap)
    f_moms = []
    g_moms = []
    for i in range(N):
        f_eta = sample_surface(model, i)
        f_moms.append(surface_distance_1inf(f_eta, model.f0, model.f0.period) ** 2)
        dmap = DomainMap(f0=model.f0, f_eta=f_eta, cutoff=cutoff,
                         epsilon_margin=epsilon_margin)
        g_eta = make_source(src, i, f_max=model.f0.f_max, h=h)
        g_moms.append(pullback_source_h1_sq(mesh_ref, g_eta, dmap))
    return {
        "f_second_moment": float(np.mean(f_moms)),
        "g_second_moment": float(np.mean(g_moms)),
    }
