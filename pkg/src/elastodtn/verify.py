"""Executable checks: manufactured solutions, inequality residuals,
stability-constant shapes, frequency sweeps, pullback identities and
form-continuity estimates.

All stability "constants" here are shapes with the generic prefactor set to
1; only growth rates, ratios and envelopes are checkable quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fem
from .dtn import (
    TraceCoefficients,
    gamma,
    helmholtz_split,
    projection_matrices,
    symbol_matrices,
    upward_extend,
)
from .errors import InternalError, MmsError, SweepError
from .fem import (
    DEGREE5_RULE,
    FieldSolution,
    assemble_B,
    assemble_B_transformed,
    assemble_load,
    assemble_load_transformed,
    solve,
    trace_coefficients,
)
from .mesh import Mesh, build_mesh
from .model import DomainMap, ElasticParams, Geometry, SourceField, make_params

__all__ = [
    "BoundProfile",
    "bound_profile",
    "SmoothStep",
    "UpgoingModesField",
    "manufactured_source",
    "navier_apply_fd",
    "mms_convergence",
    "rellich_residual",
    "rellich_lhs_samples",
    "poincare_check",
    "trace_bound_check",
    "SweepConfig",
    "SweepResult",
    "omega_sweep",
    "pullback_identity_check",
    "form_continuity_check",
    "helmholtz_field_check",
]


# ---------------------------------------------------------------------------
# Stability-constant shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundProfile:
    """Shape values of the stability constants (generic prefactor = 1).

    With H = h+1:
        c1 = sqrt(1+L^2) (omega (h-m) + 1)
        c2 = (1+L^2)^(1/4) sqrt(H-m) (1 + omega (H-m))
        c3 = (H-m)(1 + omega (H-m))^2 / omega
        c4 = (h+1-m) omega
        c5 = sqrt(1 + 1/omega) c3
        c6 = (1/omega + 1) c1 c2^2
    """

    omega: float
    h: float
    m: float
    L: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float


def bound_profile(omega: float, h: float, m: float, L: float) -> BoundProfile:
    cap_h = h + 1.0
    c1 = math.sqrt(1.0 + L * L) * (omega * (h - m) + 1.0)
    c2 = (1.0 + L * L) ** 0.25 * math.sqrt(cap_h - m) * (1.0 + omega * (cap_h - m))
    c3 = (cap_h - m) * (1.0 + omega * (cap_h - m)) ** 2 / omega
    c4 = (h + 1.0 - m) * omega
    c5 = math.sqrt(1.0 + 1.0 / omega) * c3
    c6 = (1.0 / omega + 1.0) * c1 * c2 ** 2
    return BoundProfile(omega=omega, h=h, m=m, L=L,
                        c1=c1, c2=c2, c3=c3, c4=c4, c5=c5, c6=c6)


# ---------------------------------------------------------------------------
# Manufactured solutions
# ---------------------------------------------------------------------------

class SmoothStep:
    """Polynomial step, 0 below lo and 1 above hi: quintic (C^2, the default)
    or septic (C^3, order=7)."""

    def __init__(self, lo: float, hi: float, order: int = 5):
        if not hi > lo:
            raise MmsError(f"band must satisfy hi > lo, got ({lo}, {hi})")
        if order not in (5, 7):
            raise MmsError("smoothstep order must be 5 or 7")
        self.lo = float(lo)
        self.hi = float(hi)
        self.width = float(hi - lo)
        self.order = order

    def _t(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / self.width, 0.0, 1.0)

    def value(self, x):
        t = self._t(x)
        if self.order == 5:
            return t ** 3 * (10.0 + t * (-15.0 + 6.0 * t))
        return t ** 4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))

    def d1(self, x):
        t = self._t(x)
        if self.order == 5:
            return 30.0 * t ** 2 * (t - 1.0) ** 2 / self.width
        return 140.0 * t ** 3 * (1.0 - t) ** 3 / self.width

    def d2(self, x):
        t = self._t(x)
        if self.order == 5:
            return 60.0 * t * (2.0 * t - 1.0) * (t - 1.0) / self.width ** 2
        return 420.0 * t ** 2 * (1.0 - t) ** 2 * (1.0 - 2.0 * t) / self.width ** 2


class SmoothWindow:
    """C^3 window: 0 outside (lo, hi), 1 on the middle plateau."""

    def __init__(self, lo: float, hi: float, ramp_fraction: float = 0.35):
        w = (hi - lo) * ramp_fraction
        self.up = SmoothStep(lo, lo + w, order=7)
        self.down = SmoothStep(hi - w, hi, order=7)

    def value(self, x):
        return self.up.value(x) * (1.0 - self.down.value(x))

    def d1(self, x):
        return (self.up.d1(x) * (1.0 - self.down.value(x))
                - self.up.value(x) * self.down.d1(x))

    def d2(self, x):
        return (self.up.d2(x) * (1.0 - self.down.value(x))
                - 2.0 * self.up.d1(x) * self.down.d1(x)
                - self.up.value(x) * self.down.d2(x))


class UpgoingModesField:
    """Sum of exact upgoing compressional modes times a vertical step.

    u(x) = chi(x2) * sum_j c_j (xi_j, g_j) exp(i (xi_j x1 + g_j x2)) with
    xi_j = 2 pi n_j / period and g_j = gamma(xi_j, k_p).  The field vanishes
    (with its trace) below the band, and above the band it solves the
    homogeneous problem and satisfies the transparent condition exactly, so
    the manufactured source is supported inside the band:

        g1 = c xi  [mu chi'' + i (lam+3mu) g chi'] E
        g2 = c     [(lam+2mu) g chi'' + i chi' (2 mu g^2 + (lam+mu)(k_p^2+g^2))] E
    """

    def __init__(self, p: ElasticParams, period: float,
                 modes: list[tuple[int, complex]], band: tuple[float, float]):
        self.p = p
        self.period = float(period)
        self.chi = SmoothStep(*band)
        self.modes = []
        for n, c in modes:
            xi = 2.0 * math.pi * n / self.period
            self.modes.append((xi, complex(gamma(xi, p.k_p)), complex(c)))

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        ch = self.chi.value(x2)
        out = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
        for xi, g, c in self.modes:
            e = np.exp(1j * (xi * x1 + g * x2))
            out[..., 0] += c * xi * ch * e
            out[..., 1] += c * g * ch * e
        return out

    def grad(self, pts):
        """(..., 2, 2) with [a, b] = d u_a / d x_b."""
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        ch = self.chi.value(x2)
        dch = self.chi.d1(x2)
        out = np.zeros(pts.shape[:-1] + (2, 2), dtype=complex)
        for xi, g, c in self.modes:
            e = np.exp(1j * (xi * x1 + g * x2))
            comp = np.stack([np.full_like(e, xi), np.full_like(e, g)], axis=-1)
            d1 = 1j * xi * ch * e
            d2 = (dch + 1j * g * ch) * e
            out[..., 0] += c * comp * d1[..., None]
            out[..., 1] += c * comp * d2[..., None]
        return out

    def source(self, pts):
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        dch = self.chi.d1(x2)
        ddch = self.chi.d2(x2)
        lam, mu, kp2 = self.p.lam, self.p.mu, self.p.k_p ** 2
        out = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
        for xi, g, c in self.modes:
            e = np.exp(1j * (xi * x1 + g * x2))
            out[..., 0] += c * xi * (mu * ddch + 1j * (lam + 3.0 * mu) * g * dch) * e
            out[..., 1] += c * ((lam + 2.0 * mu) * g * ddch
                                + 1j * dch * (2.0 * mu * g * g
                                              + (lam + mu) * (kp2 + g * g))) * e
        return out

    def trace(self, h: float, n_max: int) -> TraceCoefficients:
        """Exact trace coefficients at height h (requires chi == 1 there)."""
        modes = {}
        for xi, g, c in self.modes:
            n = round(xi * self.period / (2.0 * math.pi))
            vec = modes.setdefault(n, np.zeros(2, dtype=complex))
            vec += c * np.array([xi, g]) * np.exp(1j * g * h)
        return TraceCoefficients(period=self.period, height=h,
                                 modes={n: v for n, v in modes.items()
                                        if abs(n) <= n_max})


def navier_apply_fd(value_fn, p: ElasticParams, pts, step: float = 0.01):
    """mu Lap(u) + (lam+mu) grad(div u) + omega^2 u by 4th-order differences
    with one Richardson extrapolation level (6th order overall).

    Accuracy on unit-amplitude fields with wavenumbers ~k: about (k*step)^6;
    the default step targets ~1e-10 for k of order one.
    """
    pts = np.asarray(pts, dtype=float)

    def apply_at(hh):
        def d(axis, order):
            shifts = {1: [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)],
                      2: [(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)]}
            den = 12.0 * hh if order == 1 else 12.0 * hh * hh
            acc = 0.0
            for k, w in shifts[order]:
                q = pts.copy()
                q[..., axis] += k * hh
                acc = acc + w * np.asarray(value_fn(q), dtype=complex)
            return acc / den

        lap = d(0, 2) + d(1, 2)
        # grad(div u): [d1(div), d2(div)] with div = d1 u1 + d2 u2
        def div_at(q):
            def dd(axis):
                shifts = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)]
                acc = 0.0
                for k, w in shifts:
                    r = q.copy()
                    r[..., axis] += k * hh
                    acc = acc + w * np.asarray(value_fn(r), dtype=complex)[..., axis]
                return acc / (12.0 * hh)
            return dd(0) + dd(1)

        graddiv = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
        shifts = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)]
        for axis in range(2):
            acc = 0.0
            for k, w in shifts:
                q = pts.copy()
                q[..., axis] += k * hh
                acc = acc + w * div_at(q)
            graddiv[..., axis] = acc / (12.0 * hh)
        u = np.asarray(value_fn(pts), dtype=complex)
        return p.mu * lap + (p.lam + p.mu) * graddiv + p.omega ** 2 * u

    coarse = apply_at(step)
    fine = apply_at(step / 2.0)
    return (16.0 * fine - coarse) / 15.0


def manufactured_source(u_exact, p: ElasticParams, step: float = 0.01,
                        check_period: float | None = None):
    """Source g = mu Lap(u) + (lam+mu) grad(div u) + omega^2 u as a callable.

    Uses the field's closed-form .source when available, otherwise the
    finite-difference application.  When a period is known (either passed or
    read off the field) the field is required to be periodic in x1.
    """
    period = check_period if check_period is not None else getattr(
        u_exact, "period", None)
    value_fn = u_exact.value if hasattr(u_exact, "value") else u_exact
    if period is not None:
        x2 = np.linspace(0.0, 1.0, 9)
        left = np.stack([np.zeros_like(x2), x2], axis=-1)
        right = left.copy()
        right[..., 0] = period
        va, vb = np.asarray(value_fn(left)), np.asarray(value_fn(right))
        scale = max(1.0, float(np.max(np.abs(va))))
        if np.max(np.abs(va - vb)) > 1e-9 * scale:
            raise MmsError("manufactured field is not periodic in x1")
    if hasattr(u_exact, "source"):
        return u_exact.source
    return lambda pts: navier_apply_fd(value_fn, p, pts, step=step)


def _field_errors(mesh: Mesh, sol_values: np.ndarray, field) -> tuple[float, float]:
    """(h1_error, l2_error) of the P1 field against an analytic field."""
    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    uh = np.einsum("qk,tka->tqa", bary,
                   np.asarray(sol_values, dtype=complex)[mesh.triangles])
    ue = field.value(pts)
    guh = fem.element_gradients(mesh, sol_values)           # (nt, 2, 2)
    gue = field.grad(pts)                                   # (nt, nq, 2, 2)
    wa = wts[None, :] * area[:, None]
    l2_sq = float(np.sum(wa * np.sum(np.abs(uh - ue) ** 2, axis=-1)))
    ge = np.abs(guh[:, None, :, :] - gue) ** 2
    semi_sq = float(np.sum(wa * np.sum(ge, axis=(-2, -1))))
    return math.sqrt(l2_sq + semi_sq), math.sqrt(l2_sq)


def default_mms_field(p: ElasticParams, geom: Geometry,
                      amplitude: complex = 1.0) -> UpgoingModesField:
    """Vertical + first-order oblique upgoing p-modes over a band that clears
    the surface and ends below the measured height."""
    top = geom.h
    m_sup = geom.surface.f_max
    lo = m_sup + 0.15 * (top - m_sup)
    hi = m_sup + 0.55 * (top - m_sup)
    return UpgoingModesField(
        p, geom.surface.period,
        modes=[(0, amplitude), (1, 0.7 * amplitude)],
        band=(lo, hi),
    )


def mms_convergence(p: ElasticParams, geom: Geometry, levels: int,
                    nx0: int | None = None, ny0: int | None = None,
                    n_max: int = 64, field: UpgoingModesField | None = None):
    """Error table over dyadic refinements for the manufactured problem.

    Returns a list of {mesh_size, h1_error, l2_error} dicts, coarse to fine.
    """
    if levels < 3:
        raise MmsError("need at least 3 refinement levels")
    per = geom.surface.period
    if nx0 is None:
        nx0 = max(8, int(math.ceil(per * 8)))
    if ny0 is None:
        ny0 = max(8, int(math.ceil((geom.h - geom.surface.f_min) * 8)))
    if field is None:
        field = default_mms_field(p, geom)
    g = manufactured_source(field, p)
    table = []
    for lev in range(levels):
        mesh = build_mesh(geom.surface, geom.h, nx0 * 2 ** lev, ny0 * 2 ** lev)
        system = assemble_B(mesh, p, n_max)
        load = assemble_load(mesh, g)
        sol = solve(system, load, metadata={"omega": p.omega,
                                            "n_max": system.n_max})
        h1_err, l2_err = _field_errors(mesh, sol.values, field)
        table.append({"mesh_size": mesh.meshsize(),
                      "h1_error": h1_err, "l2_error": l2_err})
    return table


def convergence_slopes(table, key: str) -> list[float]:
    """Per-refinement observed orders log2(e_l / e_{l+1})."""
    errs = [row[key] for row in table]
    return [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]


# ---------------------------------------------------------------------------
# Rellich-type boundary inequality
# ---------------------------------------------------------------------------

def _dtn_apply_samples(u_hat: np.ndarray, period: float, p: ElasticParams,
                       x_eval: np.ndarray, ns: np.ndarray) -> np.ndarray:
    """sum_n M(xi_n) u_hat_n exp(i xi_n x) at the evaluation abscissae."""
    out = np.zeros((x_eval.size, 2), dtype=complex)
    for n, uh in zip(ns, u_hat):
        xi = 2.0 * math.pi * n / period
        m = symbol_matrices(xi, p)
        out += (m @ uh) * np.exp(1j * xi * x_eval)[:, None]
    return out


def rellich_lhs_samples(u_vals: np.ndarray, grad_vals: np.ndarray,
                        p: ElasticParams, period: float) -> float:
    """Top-boundary integral from uniform samples of the trace and gradient.

    u_vals (N, 2) and grad_vals (N, 2, 2) sample x1 = k*period/N on the top
    line; the trapezoid rule and a plain DFT are exact for band-limited data,
    which makes this the analytic cross-check path for single-mode fields.
    """
    u_vals = np.asarray(u_vals, dtype=complex)
    n = u_vals.shape[0]
    x = np.arange(n) * (period / n)
    u_hat = np.fft.fft(u_vals, axis=0) / n
    ns = ((np.arange(n) + n // 2) % n) - n // 2
    tu = _dtn_apply_samples(u_hat, period, p, x, ns)
    return float(_rellich_integrand(tu, u_vals, grad_vals, p).mean() * period)


def _rellich_integrand(tu, u, grad, p: ElasticParams) -> np.ndarray:
    """2 Re(Tu . d2 conj(u)) - E(u, conj u) + omega^2 |u|^2, pointwise."""
    d2u = grad[..., 1]
    term1 = 2.0 * np.real(np.sum(tu * np.conj(d2u), axis=-1))
    div = grad[..., 0, 0] + grad[..., 1, 1]
    e = (p.mu * np.sum(np.abs(grad) ** 2, axis=(-2, -1))
         + (p.lam + p.mu) * np.abs(div) ** 2)
    return term1 - e + p.omega ** 2 * np.sum(np.abs(u) ** 2, axis=-1)


def rellich_residual(sol: FieldSolution, g, p: ElasticParams,
                     n_max: int | None = None) -> dict:
    """lhs / rhs of the boundary inequality for a solved field.

    lhs uses the mode transform of the piecewise-linear top trace and the
    top-layer element gradients (midpoint rule over top edges); rhs is
    2 k_s Im int g . conj(u).
    """
    mesh = sol.mesh
    if n_max is None:
        n_max = int(sol.metadata.get("n_max", (mesh.nx - 1) // 2))
    trace = trace_coefficients(mesh, sol.values, n_max)
    nx = mesh.nx
    dx = mesh.period / nx
    x_mid = (np.arange(nx) + 0.5) * dx
    ns = np.array(sorted(trace.modes.keys()))
    u_hat = np.array([trace.modes[n] for n in ns])
    tu_mid = _dtn_apply_samples(u_hat, mesh.period, p, x_mid, ns)

    top = sol.values[mesh.top_nodes]
    u_mid = 0.5 * (top + np.roll(top, -1, axis=0))
    gu = fem.element_gradients(mesh, sol.values)[mesh.top_edge_triangles()]
    lhs = float(np.sum(_rellich_integrand(tu_mid, u_mid, gu, p)) * dx)

    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    uh = np.einsum("qk,tka->tqa", bary, sol.values[mesh.triangles])
    gv = np.asarray(g(pts), dtype=complex)
    integral = np.sum(wts[None, :] * area[:, None]
                      * np.sum(gv * np.conj(uh), axis=-1))
    rhs = float(2.0 * p.k_s * np.imag(integral))
    return {"lhs": lhs, "rhs": rhs}


# ---------------------------------------------------------------------------
# Poincare and trace bounds
# ---------------------------------------------------------------------------

def poincare_check(field: FieldSolution) -> float:
    """l2 / ||d2 u|| for a surface-vanishing field (0 when both vanish)."""
    n = field.norms if field.norms else fem.norms(field)
    l2, d2 = n["l2"], n["d2"]
    if d2 == 0.0:
        if l2 > 0.0:
            raise InternalError(
                "||d2 u|| = 0 with ||u|| > 0 for a surface-vanishing field")
        return 0.0
    return l2 / d2


def source_norms(mesh: Mesh, g: SourceField) -> dict:
    """L2 and H1 norms of an analytic source by degree-5 quadrature."""
    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    wa = wts[None, :] * area[:, None]
    gv = np.asarray(g(pts), dtype=complex)
    l2_sq = float(np.sum(wa * np.sum(np.abs(gv) ** 2, axis=-1)))
    gg = np.asarray(g.grad(pts), dtype=complex)
    semi_sq = float(np.sum(wa * np.sum(np.abs(gg) ** 2, axis=(-2, -1))))
    return {"l2": math.sqrt(l2_sq), "h1": math.sqrt(l2_sq + semi_sq)}


def trace_bound_check(sol: FieldSolution, g, p: ElasticParams,
                      profile: BoundProfile) -> dict:
    """||div u||^2 + ||curl u||^2 on the surface vs the c1-shaped bound."""
    mesh = sol.mesh
    gu = fem.element_gradients(mesh, sol.values)[mesh.surface_edge_triangles()]
    div = gu[:, 0, 0] + gu[:, 1, 1]
    curl = gu[:, 1, 0] - gu[:, 0, 1]
    x1 = mesh.nodes[mesh.surface_nodes, 0]
    y1 = mesh.nodes[mesh.surface_nodes, 1]
    dx = np.diff(np.append(x1, mesh.period))
    dy = np.diff(np.append(y1, y1[0]))
    length = np.hypot(dx, dy)
    lhs = float(np.sum(length * (np.abs(div) ** 2 + np.abs(curl) ** 2)))
    gnorm = source_norms(mesh, g)["l2"] if hasattr(g, "grad") else None
    if gnorm is None:
        bary, wts = DEGREE5_RULE
        area, _ = fem._geometry_from_coords(mesh.tri_coords)
        pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
        gv = np.asarray(g(pts), dtype=complex)
        gnorm = math.sqrt(float(np.sum(
            wts[None, :] * area[:, None] * np.sum(np.abs(gv) ** 2, axis=-1))))
    d2 = sol.norms["d2"] if sol.norms else fem.norms(sol)["d2"]
    rhs_shape = profile.c1 * gnorm * d2
    ratio = lhs / rhs_shape if rhs_shape > 0 else 0.0
    return {"lhs": lhs, "rhs_shape": rhs_shape, "ratio": ratio}


# ---------------------------------------------------------------------------
# Frequency sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    lam: float
    mu: float
    omegas: tuple[float, ...]
    geom: Geometry
    source: SourceField
    nx: int
    ny: int
    n_max: int


@dataclass(frozen=True)
class SweepResult:
    omegas: list[float]
    ratios: list[float]
    fitted_slope: float
    profile_envelope: list[float]


def omega_sweep(config: SweepConfig) -> SweepResult:
    """||u||_H1 / ||g||_H1 across frequencies, with the anchored omega^3
    envelope calibrated at the smallest frequency."""
    geom = config.geom
    mesh = build_mesh(geom.surface, geom.h, config.nx, config.ny)
    gn = source_norms(mesh, config.source)
    if gn["h1"] == 0.0:
        raise SweepError("source has zero H1 norm")
    ratios = []
    for om in config.omegas:
        p = make_params(config.lam, config.mu, om)
        system = assemble_B(mesh, p, config.n_max)
        load = assemble_load(mesh, config.source)
        sol = solve(system, load, metadata={"omega": om, "n_max": system.n_max})
        ratios.append(sol.norms["h1"] / gn["h1"])
    omegas = [float(o) for o in config.omegas]
    lo = np.log(omegas)
    lr = np.log(ratios)
    half = min(len(omegas) // 2, len(omegas) - 2)
    slope = float(np.polyfit(lo[half:], lr[half:], 1)[0])
    c_hat = ratios[0] / omegas[0] ** 3
    envelope = [c_hat * om ** 3 for om in omegas]
    return SweepResult(omegas=omegas, ratios=ratios, fitted_slope=slope,
                       profile_envelope=envelope)


# ---------------------------------------------------------------------------
# Pullback identity (change of variables)
# ---------------------------------------------------------------------------

class TrigPolyField:
    """Random smooth periodic test field: a vertical C^2 window times a small
    trigonometric polynomial in x1 with quadratic x2 modulation."""

    def __init__(self, period: float, chi, seed: int,
                 n_harmonics: int = 2, x2_ref: float = 0.0):
        self.period = float(period)
        self.chi = chi
        self.x2_ref = float(x2_ref)
        gen = np.random.Generator(np.random.Philox(key=np.array(
            [seed % (1 << 64), 0xF1E1D], dtype=np.uint64)))
        ks = np.arange(-n_harmonics, n_harmonics + 1)
        self.ks = 2.0 * math.pi * ks / self.period
        shape = (2, ks.size, 3)  # component, harmonic, x2-power
        self.coef = (gen.standard_normal(shape)
                     + 1j * gen.standard_normal(shape)) / (ks.size * 3.0)

    def _poly(self, x2):
        z = x2 - self.x2_ref
        return np.stack([np.ones_like(z), z, z * z], axis=-1)

    def _dpoly(self, x2):
        z = x2 - self.x2_ref
        return np.stack([np.zeros_like(z), np.ones_like(z), 2.0 * z], axis=-1)

    def value(self, pts):
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        e = np.exp(1j * np.multiply.outer(x1, self.ks))      # (..., nk)
        pz = self._poly(x2)                                  # (..., 3)
        base = np.einsum("...k,akp,...p->...a", e, self.coef, pz)
        return self.chi.value(x2)[..., None] * base

    def grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        e = np.exp(1j * np.multiply.outer(x1, self.ks))
        de = 1j * self.ks * e
        pz = self._poly(x2)
        dpz = self._dpoly(x2)
        ch = self.chi.value(x2)
        dch = self.chi.d1(x2)
        base = np.einsum("...k,akp,...p->...a", e, self.coef, pz)
        dbase1 = np.einsum("...k,akp,...p->...a", de, self.coef, pz)
        dbase2 = np.einsum("...k,akp,...p->...a", e, self.coef, dpz)
        out = np.zeros(pts.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0] = ch[..., None] * dbase1
        out[..., 1] = ch[..., None] * dbase2 + dch[..., None] * base
        return out


def _dtn_pairing(u_top: np.ndarray, v_top: np.ndarray, period: float,
                 p: ElasticParams, n_max: int) -> complex:
    """int_top (DtN u) . conj(v) from equispaced top samples (PL transform)."""
    nx = u_top.shape[0]
    ns = np.arange(-n_max, n_max + 1)
    beta = fem._sinc2(math.pi * ns / nx)
    uh = np.fft.fft(u_top, axis=0) / nx
    vh = np.fft.fft(v_top, axis=0) / nx
    total = 0.0 + 0.0j
    for n, b in zip(ns, beta):
        xi = 2.0 * math.pi * n / period
        m = symbol_matrices(xi, p)
        total += period * b * b * np.vdot(vh[n % nx], m @ uh[n % nx])
    return complex(total)


def _quad_form_plain(mesh: Mesh, p: ElasticParams, u, v, n_max: int) -> complex:
    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    uv = u.value(pts)
    vv = np.conj(v.value(pts))
    ug = u.grad(pts)
    vg = np.conj(v.grad(pts))
    wa = wts[None, :] * area[:, None]
    term_mu = p.mu * np.sum(wa * np.sum(ug * vg, axis=(-2, -1)))
    div_u = ug[..., 0, 0] + ug[..., 1, 1]
    div_v = vg[..., 0, 0] + vg[..., 1, 1]
    term_div = (p.lam + p.mu) * np.sum(wa * div_u * div_v)
    term_mass = -p.omega ** 2 * np.sum(wa * np.sum(uv * vv, axis=-1))
    top_pts = np.stack([mesh.nodes[mesh.top_nodes, 0],
                        np.full(mesh.nx, mesh.h)], axis=-1)
    dtn = _dtn_pairing(u.value(top_pts), v.value(top_pts),
                       mesh.period, p, n_max)
    return complex(term_mu + term_div + term_mass - dtn)


def _quad_form_transformed(mesh_ref: Mesh, p: ElasticParams, dmap: DomainMap,
                           u, v, n_max: int) -> complex:
    """B_c(u~, v~) by quadrature, with u~ = u o H evaluated analytically."""
    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh_ref.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh_ref.tri_coords)
    j1, j2 = dmap.jacobian(pts)
    detj = 1.0 + j2
    xpts = dmap.apply(pts)

    def pulled(field):
        val = field.value(xpts)
        gx = field.grad(xpts)
        g = np.empty_like(gx)
        # D_y (f o H) = (D_x f) J with J = [[1, 0], [J1, 1+J2]]
        g[..., 0] = gx[..., 0] + gx[..., 1] * j1[..., None]
        g[..., 1] = gx[..., 1] * detj[..., None]
        return val, g

    uv, ug = pulled(u)
    vv, vg = pulled(v)
    vv = np.conj(vv)
    vg = np.conj(vg)
    # invJ^T rows: [1, -J1/det; 0, 1/det], transformed gradient G = invJ^T grad
    t12 = -j1 / detj

    def tgrad(g):
        out = np.empty_like(g)
        out[..., 0] = g[..., 0] + t12[..., None] * g[..., 1]
        out[..., 1] = g[..., 1] / detj[..., None]
        return out

    tug = tgrad(ug)
    tvg = tgrad(vg)
    wa = wts[None, :] * area[:, None] * detj
    term_mu = p.mu * np.sum(wa * np.sum(tug * tvg, axis=(-2, -1)))
    div_u = tug[..., 0, 0] + tug[..., 1, 1]
    div_v = tvg[..., 0, 0] + tvg[..., 1, 1]
    term_div = (p.lam + p.mu) * np.sum(wa * div_u * div_v)
    term_mass = -p.omega ** 2 * np.sum(wa * np.sum(uv * vv, axis=-1))
    top_pts = np.stack([mesh_ref.nodes[mesh_ref.top_nodes, 0],
                        np.full(mesh_ref.nx, mesh_ref.h)], axis=-1)
    # H fixes the top line, so samples of u~ there equal samples of u
    dtn = _dtn_pairing(u.value(dmap.apply(top_pts)),
                       v.value(dmap.apply(top_pts)),
                       mesh_ref.period, p, n_max)
    return complex(term_mu + term_div + term_mass - dtn)


def pullback_identity_check(dmap: DomainMap, p: ElasticParams, n_trials: int,
                            nx: int = 96, ny: int = 96,
                            source: SourceField | None = None,
                            n_max: int = 8, seed: int = 0) -> dict:
    """Compare the form on the mapped domain with the pulled-back form on the
    reference domain for random smooth test pairs; also the load pair when a
    source is given.  Returns the max absolute discrepancies.

    The cutoff ramp makes det J jump across the curves x2 = f0(x1) + delta
    and x2 = f0(x1) + ramp_end; quadrature across a jump is only first-order
    accurate, so the test fields are windowed to the band strictly between
    those curves, where every integrand is C^2 and the degree-5 rule
    converges at better than second order.
    """
    h = dmap.f0.sup() + dmap.cutoff.gap
    mesh_ref = build_mesh(dmap.f0, h, nx, ny)
    mesh_map = build_mesh(dmap.f_eta, h, nx, ny)
    per = dmap.f0.period
    x = np.linspace(0.0, per, 2048, endpoint=False)
    band_lo = max(float(np.max(dmap.f0.f(x))) + dmap.cutoff.delta,
                  float(np.max(dmap.f_eta.f(x))))
    band_hi = float(np.min(dmap.f0.f(x))) + dmap.cutoff.ramp_end
    margin = 0.05 * (band_hi - band_lo)
    window = SmoothWindow(band_lo + margin, band_hi - margin)

    b_disc = 0.0
    for t in range(n_trials):
        u = TrigPolyField(per, window, seed=seed * 1000 + 2 * t,
                          x2_ref=band_lo)
        v = TrigPolyField(per, window, seed=seed * 1000 + 2 * t + 1,
                          x2_ref=band_lo)
        lhs = _quad_form_plain(mesh_map, p, u, v, n_max)
        rhs = _quad_form_transformed(mesh_ref, p, dmap, u, v, n_max)
        b_disc = max(b_disc, abs(lhs - rhs))

    g_disc = 0.0
    if source is not None:
        bary, wts = DEGREE5_RULE
        for t in range(n_trials):
            v = TrigPolyField(per, window, seed=seed * 1000 + 777 + t,
                              x2_ref=band_lo)
            # mapped side: -int g . conj(v)
            area, _ = fem._geometry_from_coords(mesh_map.tri_coords)
            pts = np.einsum("qk,tkx->tqx", bary, mesh_map.tri_coords)
            wa = wts[None, :] * area[:, None]
            lhs = -np.sum(wa * np.sum(source(pts) * np.conj(v.value(pts)),
                                      axis=-1))
            # reference side: -int (g o H) . conj(v o H) det J
            area_r, _ = fem._geometry_from_coords(mesh_ref.tri_coords)
            pts_r = np.einsum("qk,tkx->tqx", bary, mesh_ref.tri_coords)
            _, j2 = dmap.jacobian(pts_r)
            xr = dmap.apply(pts_r)
            wa_r = wts[None, :] * area_r[:, None] * (1.0 + j2)
            rhs = -np.sum(wa_r * np.sum(source(xr) * np.conj(v.value(xr)),
                                        axis=-1))
            g_disc = max(g_disc, abs(complex(lhs) - complex(rhs)))
    return {"b_discrepancy": b_disc, "g_discrepancy": g_disc,
            "max_discrepancy": max(b_disc, g_disc)}


# ---------------------------------------------------------------------------
# Form continuity along a shrinking surface/source sequence
# ---------------------------------------------------------------------------

def surface_distance_1inf(fa, fb, period: float, n_samples: int = 10000) -> float:
    """Dense-grid sup|fa-fb| + sup|fa'-fb'|."""
    x = np.linspace(0.0, period, n_samples, endpoint=False)
    return float(np.max(np.abs(fa.f(x) - fb.f(x)))
                 + np.max(np.abs(fa.df(x) - fb.df(x))))


def _random_unit_fields(mesh: Mesh, count: int, seed: int):
    """Random free-node fields normalized to unit H1 norm."""
    gen = np.random.Generator(np.random.Philox(key=np.array(
        [seed % (1 << 64), 0xBA7C4], dtype=np.uint64)))
    free = mesh.free_nodes
    out = []
    for _ in range(count):
        vec = np.zeros((mesh.n_nodes, 2), dtype=complex)
        vec[free] = gen.standard_normal((free.size, 2)) \
            + 1j * gen.standard_normal((free.size, 2))
        h1 = fem.norms(FieldSolution(mesh=mesh, values=vec))["h1"]
        vec /= h1
        out.append(vec)
    return out


def _free_vector(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    free = mesh.free_nodes
    out = np.empty(2 * free.size, dtype=complex)
    out[0::2] = values[free, 0]
    out[1::2] = values[free, 1]
    return out


def form_continuity_check(f0, f_sequence, g0, g_sequence, p: ElasticParams,
                          h: float, nx: int, ny: int, n_max: int,
                          delta: float, n_batch: int = 32,
                          seed: int = 0) -> dict:
    """Operator-discrepancy ratios along (f_m, g_m) -> (f0, g0).

    b_ratios[m] = max_pairs |B_m(u,v) - B(u,v)| / ||f_m - f0||_{1,inf};
    g_ratios[m] = max_v |G_m(v) - G(v)| / (||g0 - g_m||_L2 + ||f_m-f0||_{1,inf});
    sol_errors[m] = ||u_m - u||_H1 on the fixed reference mesh.
    """
    from .model import make_cutoff

    mesh = build_mesh(f0, h, nx, ny)
    gap = h - f0.sup()
    cutoff = make_cutoff(delta, gap)
    base = assemble_B(mesh, p, n_max)
    a0 = base.full_matrix()
    load0 = assemble_load(mesh, g0)
    sol0 = solve(base, load0)
    fields = _random_unit_fields(mesh, n_batch, seed)
    pairs = [(fields[i], fields[(i + 1) % len(fields)]) for i in range(len(fields))]
    uvecs = [(_free_vector(mesh, u), _free_vector(mesh, v)) for u, v in pairs]

    bary, wts = DEGREE5_RULE
    area, _ = fem._geometry_from_coords(mesh.tri_coords)
    pts = np.einsum("qk,tkx->tqx", bary, mesh.tri_coords)
    wa = wts[None, :] * area[:, None]

    b_ratios, g_ratios, sol_errors = [], [], []
    for fm, gm in zip(f_sequence, g_sequence):
        dist_f = surface_distance_1inf(fm, f0, f0.period)
        dmap = DomainMap(f0=f0, f_eta=fm, cutoff=cutoff)
        sys_m = assemble_B_transformed(mesh, p, dmap, n_max)
        a_m = sys_m.full_matrix()
        diff = (a_m - a0).tocsr()
        disc = max(abs(complex(np.vdot(v, diff @ u))) for u, v in uvecs)
        b_ratios.append(disc / dist_f if dist_f > 0 else 0.0)

        load_m = assemble_load_transformed(mesh, gm, dmap)
        dload = load_m - load0
        g_disc = max(abs(complex(np.vdot(v, dload))) for u, v in uvecs)
        dg = np.asarray(gm(pts), dtype=complex) - np.asarray(g0(pts), dtype=complex)
        dist_g = math.sqrt(float(np.sum(wa * np.sum(np.abs(dg) ** 2, axis=-1))))
        denom = dist_g + dist_f
        g_ratios.append(g_disc / denom if denom > 0 else 0.0)

        sol_m = solve(sys_m, load_m)
        err = FieldSolution(mesh=mesh, values=sol_m.values - sol0.values)
        sol_errors.append(fem.norms(err)["h1"])
    return {"b_ratios": b_ratios, "g_ratios": g_ratios,
            "sol_errors": sol_errors}


# ---------------------------------------------------------------------------
# Helmholtz-decomposition consistency of the upward extension
# ---------------------------------------------------------------------------

def helmholtz_field_check(sol_or_trace, p: ElasticParams, dz: float = 0.5,
                          n_samples: int = 256,
                          n_max: int | None = None) -> dict:
    """Cross-check the two propagation routes above the top line.

    Route A splits the trace into scalar compressional/shear data, propagates
    each with its own vertical wavenumber and reassembles the vector field;
    route B propagates with the matrix projections.  The residuals are the
    per-channel mismatches relative to the total extended field.
    """
    if isinstance(sol_or_trace, TraceCoefficients):
        trace = sol_or_trace
    else:
        sol = sol_or_trace
        if n_max is None:
            n_max = int(sol.metadata.get("n_max", (sol.mesh.nx - 1) // 2))
        trace = trace_coefficients(sol.mesh, sol.values, n_max)
    per = trace.period
    h = trace.height
    x1 = np.linspace(0.0, per, n_samples, endpoint=False)
    pts = np.stack([x1, np.full_like(x1, h + dz)], axis=-1)

    phi, psi = helmholtz_split(trace, p)
    u_p_a = np.zeros((n_samples, 2), dtype=complex)
    u_s_a = np.zeros((n_samples, 2), dtype=complex)
    u_p_b = np.zeros((n_samples, 2), dtype=complex)
    u_s_b = np.zeros((n_samples, 2), dtype=complex)
    for n, uhat in trace.modes.items():
        xi = trace.xi(n)
        g_p = gamma(xi, p.k_p)
        g_s = gamma(xi, p.k_s)
        e1 = np.exp(1j * xi * x1)
        u_p_a += np.outer(e1 * np.exp(1j * g_p * dz),
                          phi[n] * np.array([xi, g_p]))
        u_s_a += np.outer(e1 * np.exp(1j * g_s * dz),
                          psi[n] * np.array([g_s, -xi]))
        mp, ms = projection_matrices(xi, p)
        u_p_b += np.outer(e1 * np.exp(1j * g_p * dz),
                          mp @ np.asarray(uhat, dtype=complex))
        u_s_b += np.outer(e1 * np.exp(1j * g_s * dz),
                          ms @ np.asarray(uhat, dtype=complex))
    total = upward_extend(trace, p, pts)
    scale = float(np.max(np.abs(total)))
    if scale == 0.0:
        return {"p_residual": 0.0, "s_residual": 0.0}
    return {
        "p_residual": float(np.max(np.abs(u_p_a - u_p_b))) / scale,
        "s_residual": float(np.max(np.abs(u_s_a - u_s_b))) / scale,
    }
