"""Vertical wavenumbers, the elastic DtN symbol, mode algebra, traction.

Branch convention: gamma(xi, k) = sqrt(k^2 - xi^2) >= 0 for |xi| <= k and
i*sqrt(xi^2 - k^2) for |xi| > k, i.e. Im gamma >= 0, so exp(i*gamma*(x2-h))
stays bounded above the line x2 = h.

For a horizontal wavenumber xi the 2x2 DtN symbol is

    M(xi) = i/rho * [[w^2 g_p,          xi*(mu*rho - w^2)],
                     [-xi*(mu*rho - w^2),        w^2 g_s ]],

rho = xi^2 + g_p*g_s, and the compressional/shear mode projections are

    Mp = 1/rho * [[xi^2,  g_s*xi], [g_p*xi, g_p*g_s]],
    Ms = 1/rho * [[g_p*g_s, -g_s*xi], [-g_p*xi, xi^2]].

Mp and Ms are complementary rank-one projections (Mp+Ms=I, Mp^2=Mp,
Mp*Ms=0), and the keystone identity ties everything together: the traction
mu*d_n u + (lam+mu)*n*div u of the exact upgoing field built from Mp/Ms
equals M(xi) applied to the trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SymbolSingularError
from .model import ElasticParams

__all__ = [
    "gamma",
    "SymbolMatrix",
    "symbol_matrix",
    "symbol_matrices",
    "ModeProjections",
    "mode_projections",
    "TraceCoefficients",
    "apply_dtn",
    "upward_extend",
    "helmholtz_split",
    "traction",
    "symbol_bound_check",
]

_RHO_FLOOR = 1e-14


def gamma(xi, k: float):
    """Branch-correct sqrt(k^2 - xi^2); scalar in, scalar out (or array)."""
    if k <= 0:
        raise ParameterError(f"wavenumber k must be positive, got {k}")
    xi = np.asarray(xi, dtype=float)
    diff = k * k - xi * xi
    out = np.where(diff >= 0.0,
                   np.sqrt(np.maximum(diff, 0.0)) + 0.0j,
                   1j * np.sqrt(np.maximum(-diff, 0.0)))
    return out if out.ndim else complex(out)


def _gammas_rho(xi, p: ElasticParams):
    g_p = gamma(xi, p.k_p)
    g_s = gamma(xi, p.k_s)
    rho = np.asarray(xi, dtype=float) ** 2 + g_p * g_s
    return g_p, g_s, rho


@dataclass(frozen=True)
class SymbolMatrix:
    """DtN symbol at one horizontal wavenumber."""

    xi: float
    entries: np.ndarray
    gamma_p: complex
    gamma_s: complex
    rho: complex


def symbol_matrices(xis, p: ElasticParams) -> np.ndarray:
    """Vectorized DtN symbols, shape (..., 2, 2)."""
    xis = np.asarray(xis, dtype=float)
    g_p, g_s, rho = _gammas_rho(xis, p)
    if np.any(np.abs(rho) < _RHO_FLOOR):
        raise SymbolSingularError("xi^2 + gamma_p*gamma_s vanished")
    w2 = p.omega ** 2
    off = xis * (p.mu * rho - w2)
    m = np.empty(np.shape(xis) + (2, 2), dtype=complex)
    m[..., 0, 0] = w2 * g_p
    m[..., 0, 1] = off
    m[..., 1, 0] = -off
    m[..., 1, 1] = w2 * g_s
    return 1j / rho[..., None, None] * m


def symbol_matrix(xi: float, p: ElasticParams) -> SymbolMatrix:
    """DtN symbol M(xi) with its branch data."""
    g_p, g_s, rho = _gammas_rho(float(xi), p)
    entries = symbol_matrices(float(xi), p)
    return SymbolMatrix(xi=float(xi), entries=entries,
                        gamma_p=complex(g_p), gamma_s=complex(g_s),
                        rho=complex(rho))


@dataclass(frozen=True)
class ModeProjections:
    """Compressional (Mp) and shear (Ms) projections at one wavenumber."""

    xi: float
    Mp: np.ndarray
    Ms: np.ndarray


def projection_matrices(xis, p: ElasticParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (Mp, Ms), each shape (..., 2, 2)."""
    xis = np.asarray(xis, dtype=float)
    g_p, g_s, rho = _gammas_rho(xis, p)
    if np.any(np.abs(rho) < _RHO_FLOOR):
        raise SymbolSingularError("xi^2 + gamma_p*gamma_s vanished")
    mp = np.empty(np.shape(xis) + (2, 2), dtype=complex)
    mp[..., 0, 0] = xis * xis
    mp[..., 0, 1] = g_s * xis
    mp[..., 1, 0] = g_p * xis
    mp[..., 1, 1] = g_p * g_s
    mp /= rho[..., None, None]
    ms = np.zeros_like(mp)
    ms[..., 0, 0] = mp[..., 1, 1]
    ms[..., 0, 1] = -mp[..., 0, 1]
    ms[..., 1, 0] = -mp[..., 1, 0]
    ms[..., 1, 1] = mp[..., 0, 0]
    return mp, ms


def mode_projections(xi: float, p: ElasticParams) -> ModeProjections:
    mp, ms = projection_matrices(float(xi), p)
    return ModeProjections(xi=float(xi), Mp=mp, Ms=ms)


@dataclass(frozen=True)
class TraceCoefficients:
    """Fourier data of a vector trace on the line x2 = height.

    modes maps integer n to the coefficient of exp(i*xi_n*x1) with
    xi_n = 2*pi*n/period; the L2 norm on one period is
    sqrt(period * sum_n |u_n|^2).
    """

    period: float
    height: float
    modes: dict[int, np.ndarray]

    def xi(self, n: int) -> float:
        return 2.0 * math.pi * n / self.period

    def norm_l2(self) -> float:
        s = sum(float(np.sum(np.abs(v) ** 2)) for v in self.modes.values())
        return math.sqrt(self.period * s)


def apply_dtn(trace: TraceCoefficients, p: ElasticParams,
              n_max: int) -> TraceCoefficients:
    """Apply the DtN operator mode by mode; modes beyond n_max are dropped."""
    out = {}
    for n, u in trace.modes.items():
        if abs(n) > n_max:
            continue
        m = symbol_matrices(trace.xi(n), p)
        out[n] = m @ np.asarray(u, dtype=complex)
    return TraceCoefficients(period=trace.period, height=trace.height,
                             modes=out)


def upward_extend(trace: TraceCoefficients, p: ElasticParams,
                  pts: np.ndarray) -> np.ndarray:
    """Upward extension u(x) at points (..., 2) with x2 >= trace.height:

    u = sum_n [exp(i g_p (x2-h)) Mp + exp(i g_s (x2-h)) Ms] u_n exp(i xi_n x1).
    """
    pts = np.asarray(pts, dtype=float)
    out = np.zeros(pts.shape[:-1] + (2,), dtype=complex)
    x1 = pts[..., 0]
    dz = pts[..., 1] - trace.height
    for n, u in trace.modes.items():
        xi = trace.xi(n)
        mp, ms = projection_matrices(xi, p)
        g_p = gamma(xi, p.k_p)
        g_s = gamma(xi, p.k_s)
        u = np.asarray(u, dtype=complex)
        amp = (np.exp(1j * g_p * dz)[..., None] * (mp @ u)
               + np.exp(1j * g_s * dz)[..., None] * (ms @ u))
        out += amp * np.exp(1j * xi * x1)[..., None]
    return out


def helmholtz_split(trace: TraceCoefficients,
                    p: ElasticParams) -> tuple[dict[int, complex], dict[int, complex]]:
    """Split the trace into compressional (P) and shear (S) scalar modes:

    (P_n, S_n) = 1/rho * [[xi, g_s], [g_p, -xi]] (u_1, u_2).
    """
    phi, psi = {}, {}
    for n, u in trace.modes.items():
        xi = trace.xi(n)
        g_p, g_s, rho = _gammas_rho(xi, p)
        if abs(rho) < _RHO_FLOOR:
            raise SymbolSingularError("xi^2 + gamma_p*gamma_s vanished")
        u = np.asarray(u, dtype=complex)
        phi[n] = complex((xi * u[0] + g_s * u[1]) / rho)
        psi[n] = complex((g_p * u[0] - xi * u[1]) / rho)
    return phi, psi


def traction(grad_u: np.ndarray, div_u: complex, normal, p: ElasticParams) -> np.ndarray:
    """T = mu * (grad_u @ n) + (lam + mu) * n * div_u.

    grad_u is the Jacobian convention grad_u[j, k] = d u_j / d x_k and n is a
    unit vector.
    """
    n = np.asarray(normal, dtype=float)
    if abs(float(n @ n) - 1.0) > 1e-12:
        raise ParameterError("normal must be a unit vector")
    grad_u = np.asarray(grad_u, dtype=complex)
    return p.mu * (grad_u @ n) + (p.lam + p.mu) * n * div_u


def _max_entry_norm(mats: np.ndarray) -> np.ndarray:
    """Max-absolute-entry norm along the last two axes."""
    return np.max(np.abs(mats), axis=(-2, -1))


def symbol_bound_check(p: ElasticParams, xi_grid) -> dict:
    """Numerical sweep of the symbol-bound properties.

    Returns c_of_omega = max ||M||/(1+xi^2) over the grid, neg_def_ok
    (Hermitian part of -M positive definite wherever |xi| > k_s), and
    interior_ratio = max ||M||/omega over |xi| <= k_s.  The norm is the
    max-absolute-entry norm.
    """
    xi = np.asarray(xi_grid, dtype=float)
    mats = symbol_matrices(xi, p)
    norms = _max_entry_norm(mats)
    c_of_omega = float(np.max(norms / (1.0 + xi ** 2)))

    evan = np.abs(xi) > p.k_s
    neg_def_ok = True
    if np.any(evan):
        herm = 0.5 * (mats[evan] + np.conj(np.swapaxes(mats[evan], -1, -2)))
        eigs = np.linalg.eigvalsh(-herm)
        neg_def_ok = bool(np.all(eigs > 0.0))

    interior = np.abs(xi) <= p.k_s
    interior_ratio = float(np.max(norms[interior]) / p.omega) if np.any(interior) else 0.0
    return {
        "c_of_omega": c_of_omega,
        "neg_def_ok": neg_def_ok,
        "interior_ratio": interior_ratio,
    }


def sweep_grid(p: ElasticParams, n_points: int = 1000,
               upper_factor: float = 8.0) -> np.ndarray:
    """Uniform grid on [0, upper_factor*k_s] with the branch points inserted."""
    xi = np.linspace(0.0, upper_factor * p.k_s, n_points)
    return np.unique(np.concatenate([xi, [p.k_p, p.k_s]]))
