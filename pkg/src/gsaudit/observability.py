"""Observability constants of the harmonic flow on truncated spans.

The flow diagonalizes in the Hermite basis with rates lambda_n = n + 1/2, so
on span{h_0, ..., h_{N-1}} both sides of the observability inequality

    ||T(T) g||^2 <= C * integral_0^T ||T(t) g||^2_{L^2(omega)} dt

are explicit quadratic forms: the left side is diagonal, and the right side
is the sensor mass matrix filtered through a closed-form time integral. The
smallest valid C is the top eigenvalue of the symmetric-definite pencil, and
bound_shape_fit compares the measured constants against the N exp(N / T^p)
shape predicted for Gelfand-Shilov smoothing flows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh

from .geometry import FullSpaceSensorSet
from .hermite import (
    QuadratureConvergenceError,
    basis_function,
    basis_matrix,
    effective_support_radius,
    interval_nodes,
)

__all__ = [
    "GramianError",
    "MAX_TRUNCATION",
    "ObservabilityReport",
    "bound_shape_fit",
    "diagonal_constant",
    "empirical_constant",
    "mass_matrix",
    "observability_gramian",
    "observability_scan",
]

# pencil conditioning degrades past this truncation; keep solves reliable
MAX_TRUNCATION = 48

# Gramian condition numbers beyond this make the pencil solve meaningless
_COND_LIMIT = 1e13


class GramianError(RuntimeError):
    """The observation Gramian is numerically singular.

    Happens when the sensor set is too thin for the requested truncation:
    some combination of the first N modes is invisible to omega at working
    precision, so no finite observability constant can be certified.
    """


def _check_trunc(n_trunc: int):
    if not 1 <= n_trunc <= MAX_TRUNCATION:
        raise ValueError(f"truncation must lie in [1, {MAX_TRUNCATION}]")


def _rates(n_trunc: int) -> np.ndarray:
    return np.arange(n_trunc) + 0.5


def mass_matrix(omega, n_trunc: int, rtol: float = 1e-11) -> np.ndarray:
    """Matrix of sensor-set inner products A[m, n] = int_omega h_m h_n.

    Composite Gauss-Legendre on the sensor intervals clipped to the
    effective support of the retained modes, with a refinement check.
    """
    _check_trunc(n_trunc)
    if omega.dim != 1:
        raise ValueError("observability runs on one-dimensional sensors")
    if isinstance(omega, FullSpaceSensorSet):
        return np.eye(n_trunc)

    cutoff = effective_support_radius(basis_function(n_trunc - 1))
    pieces = [
        (max(a, -cutoff), min(b, cutoff))
        for a, b in zip(omega.starts, omega.ends)
        if b > -cutoff and a < cutoff
    ]
    if not pieces:
        return np.zeros((n_trunc, n_trunc))

    def assemble(order: int, max_panel: float) -> np.ndarray:
        xs, ws = [], []
        for a, b in pieces:
            x, w = interval_nodes(a, b, order=order, max_panel=max_panel)
            xs.append(x)
            ws.append(w)
        x = np.concatenate(xs)
        w = np.concatenate(ws)
        basis = basis_matrix(n_trunc - 1, x)
        return (basis * w) @ basis.T

    coarse = assemble(24, 0.5)
    fine = assemble(48, 0.25)
    scale = max(1.0, float(np.abs(fine).max()))
    drift = float(np.abs(fine - coarse).max())
    if drift > rtol * scale:
        raise QuadratureConvergenceError(
            f"mass matrix: refinement moved an entry by {drift:.3e}"
        )
    return 0.5 * (fine + fine.T)


def observability_gramian(omega, T: float, n_trunc: int, mass: np.ndarray | None = None) -> np.ndarray:
    """G[m, n] = A[m, n] (1 - e^{-(lam_m+lam_n) T}) / (lam_m + lam_n)."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    A = mass_matrix(omega, n_trunc) if mass is None else mass
    lam = _rates(n_trunc)
    rate_sum = lam[:, None] + lam[None, :]
    return A * (-np.expm1(-rate_sum * T)) / rate_sum


def diagonal_constant(T: float, n_trunc: int) -> float:
    """Closed form for omega = R: max_n 2 lam_n / (e^{2 lam_n T} - 1)."""
    if not T > 0:
        raise ValueError("T must be positive")
    lam = _rates(n_trunc)
    return float(np.max(2.0 * lam / np.expm1(2.0 * lam * T)))


def _pencil_top(energy_diag: np.ndarray, gramian: np.ndarray) -> tuple:
    geigs = eigvalsh(gramian)
    norm = float(geigs[-1])
    floor = float(geigs[0])
    if norm <= 0 or floor <= norm / _COND_LIMIT:
        raise GramianError(
            "observation Gramian is numerically singular "
            f"(eigenvalue range [{floor:.3e}, {norm:.3e}]); "
            "the sensor set is too thin for this truncation"
        )
    top = float(eigvalsh(np.diag(energy_diag), gramian)[-1])
    return top, norm / floor, floor / norm


def empirical_constant(omega, T: float, n_trunc: int, details: dict | None = None) -> float:
    """Smallest C valid on the truncated span, via the (E_T, G_T) pencil.

    Pass a dict as details to receive the Gramian conditioning and the
    relative smallest eigenvalue alongside the returned constant.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    _check_trunc(n_trunc)
    gramian = observability_gramian(omega, T, n_trunc)
    energy = np.exp(-2.0 * _rates(n_trunc) * T)
    c_obs, conditioning, psd_ratio = _pencil_top(energy, gramian)
    if details is not None:
        details.update(conditioning=conditioning, psd_ratio=psd_ratio)
    return c_obs


def bound_shape_fit(t_grid, c_grid, r2: float, s: float, n_cap: int = 10**12) -> int:
    """Smallest integer N >= 1 with log C(T) <= log N + N T^{-4 r2/(1-s)}.

    The right side is strictly increasing in N, so a finite N always exists;
    the search doubles then bisects.
    """
    if not 0.0 <= s < 1.0:
        raise ValueError("s must lie in [0, 1)")
    if not r2 > 0:
        raise ValueError("r2 must be positive")
    t = np.asarray(t_grid, dtype=float)
    c = np.asarray(c_grid, dtype=float)
    if t.shape != c.shape or t.ndim != 1 or len(t) == 0:
        raise ValueError("t_grid and c_grid must be matching nonempty vectors")
    if np.any(t <= 0) or np.any(c <= 0):
        raise ValueError("grid values must be positive")
    t_pow = t ** (-4.0 * r2 / (1.0 - s))
    log_c = np.log(c)

    def admissible(n: int) -> bool:
        return bool(np.all(log_c <= math.log(n) + n * t_pow + 1e-12))

    if admissible(1):
        return 1
    hi = 2
    while not admissible(hi):
        hi *= 2
        if hi > n_cap:
            raise RuntimeError(f"no admissible N below {n_cap}")
    lo = hi // 2  # largest known-inadmissible value
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ObservabilityReport:
    """Empirical constants over a T-grid with the fitted bound shape."""

    omega_id: str
    n_trunc: int
    t_grid: tuple
    c_obs: tuple
    conditioning: tuple
    psd_ratios: tuple
    fitted_n: int
    r2: float
    s: float

    @property
    def monotone(self) -> bool:
        """C_obs nonincreasing along the (ascending) T-grid."""
        return all(
            later <= earlier * (1.0 + 1e-12)
            for earlier, later in zip(self.c_obs, self.c_obs[1:])
        )

    def to_dict(self) -> dict:
        return {
            "omega_id": self.omega_id,
            "n_trunc": self.n_trunc,
            "t_grid": list(self.t_grid),
            "c_obs": list(self.c_obs),
            "conditioning": list(self.conditioning),
            "psd_ratios": list(self.psd_ratios),
            "fitted_n": self.fitted_n,
            "r2": self.r2,
            "s": self.s,
            "monotone": self.monotone,
        }


def observability_scan(omega, t_grid, n_trunc: int, r2: float, s: float) -> ObservabilityReport:
    """Pencil solves over an ascending T-grid plus the bound-shape fit."""
    _check_trunc(n_trunc)
    times = [float(t) for t in t_grid]
    if not times or any(t <= 0 for t in times):
        raise ValueError("t_grid must be nonempty with positive entries")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("t_grid must be strictly increasing")
    mass = mass_matrix(omega, n_trunc)
    lam = _rates(n_trunc)
    constants, conds, ratios = [], [], []
    for t in times:
        gramian = observability_gramian(omega, t, n_trunc, mass=mass)
        c_obs, conditioning, psd_ratio = _pencil_top(np.exp(-2.0 * lam * t), gramian)
        constants.append(c_obs)
        conds.append(conditioning)
        ratios.append(psd_ratio)
    fitted = bound_shape_fit(times, constants, r2, s)
    omega_id = getattr(omega, "description", "") or omega.to_dict().get("kind", "sensor")
    return ObservabilityReport(
        omega_id=omega_id,
        n_trunc=n_trunc,
        t_grid=tuple(times),
        c_obs=tuple(constants),
        conditioning=tuple(conds),
        psd_ratios=tuple(ratios),
        fitted_n=fitted,
        r2=r2,
        s=s,
    )
