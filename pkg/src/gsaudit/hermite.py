"""Orthonormal Hermite basis machinery: evaluation, ladder calculus, quadrature.

Expansions in the L2(R)-orthonormal Hermite functions h_n (one or two
variables via tensor products) support exact differentiation and coordinate
multiplication through the ladder relations

    h_n'(x)  = sqrt(n/2) h_{n-1}(x) - sqrt((n+1)/2) h_{n+1}(x),
    x h_n(x) = sqrt(n/2) h_{n-1}(x) + sqrt((n+1)/2) h_{n+1}(x),

and weighted L2 norms are computed by quadrature with an explicit
refinement-convergence check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_hermite

__all__ = [
    "MAX_DEGREE",
    "Ball",
    "ComplexOverflowError",
    "DimensionMismatchError",
    "QuadratureConvergenceError",
    "QuadratureRule",
    "SpectralFunction",
    "basis_function",
    "basis_matrix",
    "derivative",
    "effective_support_radius",
    "evaluate",
    "evaluate_complex",
    "gauss_hermite",
    "gauss_legendre",
    "interval_nodes",
    "multiply_by_coordinate",
    "norm_squared_on_ball",
    "norm_squared_on_intervals",
    "norm_squared_outside_radius",
    "tensor_product",
    "weighted_norm",
]

MAX_DEGREE = 64  # validated per-axis truncation; ladder images may exceed it

_LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)
_PI_QUARTER = math.pi ** -0.25


class DimensionMismatchError(ValueError):
    """Point dimension does not match the expansion dimension."""


class ComplexOverflowError(OverflowError):
    """The entire extension exceeds the double range at the requested point."""


class QuadratureConvergenceError(RuntimeError):
    """Doubling the quadrature resolution moved the result beyond tolerance."""


@dataclass(frozen=True)
class SpectralFunction:
    """Finite expansion sum_n c_n h_n (1D) or sum_{mn} c_{mn} h_m x h_n (2D).

    Coefficients are frozen at construction; all operations return new
    instances, so values are safe to share across worker threads.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim not in (1, 2):
            raise ValueError("coeffs must be a vector (1D) or a matrix (2D)")
        if arr.size == 0 or not np.all(np.isfinite(arr)):
            raise ValueError("coeffs must be nonempty and finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def max_degree(self) -> int:
        return max(s - 1 for s in self.coeffs.shape)

    def norm_squared(self) -> float:
        """Squared L2(R^d) norm, exact by Parseval."""
        return float(np.sum(self.coeffs**2))

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())


def basis_function(degree, dim: int = 1) -> SpectralFunction:
    """Pure basis element h_n (dim 1) or h_m x h_n (dim 2, degree a pair)."""
    if dim == 1:
        c = np.zeros(int(degree) + 1)
        c[-1] = 1.0
        return SpectralFunction(c)
    if dim == 2:
        m, n = (int(d) for d in degree)
        c = np.zeros((m + 1, n + 1))
        c[m, n] = 1.0
        return SpectralFunction(c)
    raise ValueError("dim must be 1 or 2")


@dataclass(frozen=True)
class Ball:
    """Euclidean ball; the 1D case is the interval [c - r, c + r]."""

    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        if len(center) not in (1, 2):
            raise ValueError("ball center must be 1D or 2D")
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        if self.dim == 1:
            return 2.0 * self.radius
        return math.pi * self.radius**2

    def interval(self) -> tuple:
        if self.dim != 1:
            raise DimensionMismatchError("interval() requires a 1D ball")
        return (self.center[0] - self.radius, self.center[0] + self.radius)

    def center_norm(self) -> float:
        return float(np.linalg.norm(self.center))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.dim == 1:
            return np.abs(pts - self.center[0]) < self.radius
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) < self.radius


# ---------------------------------------------------------------------------
# evaluation


def _clenshaw_scaled(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Returns f(x) * exp(x^2/2) (the polynomial part): stable at large |x|
    # where the Hermite functions themselves underflow.
    b1 = np.zeros_like(x, dtype=np.result_type(x, 1.0))
    b2 = np.zeros_like(b1)
    for k in range(len(coeffs) - 1, -1, -1):
        b1, b2 = (
            coeffs[k] + math.sqrt(2.0 / (k + 1)) * x * b1 - math.sqrt((k + 1.0) / (k + 2.0)) * b2,
            b1,
        )
    return _PI_QUARTER * b1


def _scaled_basis_matrix(max_degree: int, x: np.ndarray) -> np.ndarray:
    # Rows: h_n(x) * exp(x^2/2) for n = 0..max_degree via forward recurrence.
    x = np.asarray(x)
    out = np.empty((max_degree + 1,) + x.shape, dtype=np.result_type(x, 1.0))
    out[0] = _PI_QUARTER
    if max_degree >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, max_degree):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def basis_matrix(max_degree: int, x: np.ndarray) -> np.ndarray:
    """Matrix of h_n(x_j), shape (max_degree + 1, len(x))."""
    x = np.asarray(x, dtype=float)
    return _scaled_basis_matrix(max_degree, x) * np.exp(-0.5 * x**2)


def _poly_part(f: SpectralFunction, points: np.ndarray) -> np.ndarray:
    """f(points) * exp(|x|^2/2), vectorized; points (...,) in 1D, (..., 2) in 2D."""
    if f.dim == 1:
        return _clenshaw_scaled(f.coeffs, np.asarray(points))
    pts = np.asarray(points)
    if pts.shape[-1] != 2:
        raise DimensionMismatchError("2D expansion requires points with last axis 2")
    flat = pts.reshape(-1, 2)
    a = _scaled_basis_matrix(f.coeffs.shape[0] - 1, flat[:, 0])
    b = _scaled_basis_matrix(f.coeffs.shape[1] - 1, flat[:, 1])
    vals = np.einsum("mi,mn,ni->i", a, f.coeffs, b)
    return vals.reshape(pts.shape[:-1])


def _squared_radius(points: np.ndarray, dim: int) -> np.ndarray:
    pts = np.asarray(points)
    if dim == 1:
        return pts**2
    return np.sum(pts**2, axis=-1)


def evaluate(f: SpectralFunction, x) -> np.ndarray:
    """Pointwise values of f at real points (scalar, vector, or (..., 2))."""
    pts = np.asarray(x, dtype=float)
    if f.dim == 2 and (pts.ndim == 0 or pts.shape[-1] != 2):
        raise DimensionMismatchError("2D expansion requires points with last axis 2")
    if f.dim == 1 and pts.ndim > 1:
        raise DimensionMismatchError("1D expansion requires scalar or vector points")
    vals = _poly_part(f, pts) * np.exp(-0.5 * _squared_radius(pts, f.dim))
    return vals if vals.ndim else float(vals)


def evaluate_complex(f: SpectralFunction, z) -> np.ndarray:
    """Entire extension of f at complex points.

    The Gaussian factor grows like exp((Im z)^2/2); points where it (or the
    combined value) leaves the double range raise ComplexOverflowError.
    """
    pts = np.asarray(z, dtype=complex)
    if f.dim == 2 and (pts.ndim == 0 or pts.shape[-1] != 2):
        raise DimensionMismatchError("2D expansion requires points with last axis 2")
    if f.dim == 1 and pts.ndim > 1:
        raise DimensionMismatchError("1D expansion requires scalar or vector points")
    im_sq = _squared_radius(pts.imag, f.dim)
    if np.any(0.5 * im_sq > _LOG_FLOAT_MAX):
        raise ComplexOverflowError("exp((Im z)^2/2) exceeds the floating range")
    vals = _poly_part(f, pts) * np.exp(-0.5 * _squared_radius(pts, f.dim))
    if not np.all(np.isfinite(vals)):
        raise ComplexOverflowError("entire extension overflowed at the requested point")
    return vals if vals.ndim else complex(vals)


# ---------------------------------------------------------------------------
# ladder calculus


def _ladder_1d(c: np.ndarray, sign: float) -> np.ndarray:
    n = np.arange(len(c), dtype=float)
    out = np.zeros(len(c) + 1)
    out[: len(c) - 1] += np.sqrt(n[1:] / 2.0) * c[1:]
    out[1:] += sign * np.sqrt((n + 1.0) / 2.0) * c
    return out


def _ladder(f: SpectralFunction, axis: int, sign: float) -> SpectralFunction:
    if not 0 <= axis < f.dim:
        raise ValueError(f"axis {axis} invalid for a {f.dim}D expansion")
    if f.dim == 1:
        return SpectralFunction(_ladder_1d(f.coeffs, sign))
    c = np.moveaxis(f.coeffs, axis, 0)
    n = np.arange(c.shape[0], dtype=float)[:, None]
    out = np.zeros((c.shape[0] + 1, c.shape[1]))
    out[: c.shape[0] - 1] += np.sqrt(n[1:] / 2.0) * c[1:]
    out[1:] += sign * np.sqrt((n + 1.0) / 2.0) * c
    return SpectralFunction(np.moveaxis(out, 0, axis))


def derivative(f: SpectralFunction, axis: int = 0) -> SpectralFunction:
    """Exact partial derivative along the given axis (ladder identity)."""
    return _ladder(f, axis, -1.0)


def multiply_by_coordinate(f: SpectralFunction, axis: int = 0) -> SpectralFunction:
    """Exact multiplication by the coordinate along the given axis."""
    return _ladder(f, axis, +1.0)


def _apply_multi_derivative(f: SpectralFunction, beta) -> SpectralFunction:
    g = f
    for axis, b in enumerate(beta):
        for _ in range(b):
            g = derivative(g, axis)
    return g


def _normalize_beta(f: SpectralFunction, beta) -> tuple:
    if np.isscalar(beta):
        beta = (int(beta),) if f.dim == 1 else None
    else:
        beta = tuple(int(b) for b in beta)
    if beta is None or len(beta) != f.dim or any(b < 0 for b in beta):
        raise ValueError("beta must be a nonnegative multi-index matching dim")
    return beta


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights; `kind` states the weight convention.

    gauss-hermite integrates against exp(-|x|^2) on R; gauss-legendre against
    Lebesgue measure on an interval; tensor-product pairs two 1D rules.
    """

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def exact_degree(self) -> int:
        """Largest polynomial degree integrated exactly (per axis)."""
        return 2 * self.order - 1


def gauss_hermite(order: int) -> QuadratureRule:
    if order < 1:
        raise ValueError("order must be >= 1")
    x, w = roots_hermite(order)
    return QuadratureRule("gauss-hermite", x, w, order)


def gauss_legendre(order: int, a: float, b: float) -> QuadratureRule:
    if order < 1:
        raise ValueError("order must be >= 1")
    if not b > a:
        raise ValueError("interval must satisfy b > a")
    x, w = leggauss(order)
    half = 0.5 * (b - a)
    return QuadratureRule("gauss-legendre", 0.5 * (a + b) + half * x, half * w, order)


def tensor_product(rx: QuadratureRule, ry: QuadratureRule) -> QuadratureRule:
    nodes = np.stack(
        [np.repeat(rx.nodes, len(ry.nodes)), np.tile(ry.nodes, len(rx.nodes))], axis=-1
    )
    weights = np.repeat(rx.weights, len(ry.weights)) * np.tile(ry.weights, len(rx.weights))
    return QuadratureRule(f"tensor-product({rx.kind},{ry.kind})", nodes, weights, min(rx.order, ry.order))


def interval_nodes(a: float, b: float, order: int = 20, max_panel: float = 0.5):
    """Composite Gauss-Legendre nodes/weights on [a, b] with bounded panels."""
    panels = max(1, math.ceil((b - a) / max_panel))
    edges = np.linspace(a, b, panels + 1)
    x0, w0 = leggauss(order)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    w = (half[:, None] * w0[None, :]).ravel()
    return x, w


def effective_support_radius(f: SpectralFunction) -> float:
    """Radius beyond which every retained basis function is below 1e-45."""
    return math.sqrt(2.0 * f.max_degree + 1.0) + 15.0


def _check_refinement(coarse: float, fine: float, rtol: float, what: str, atol: float = 0.0):
    # Near-zero results compare in absolute terms; the norms at stake are O(1).
    tol = rtol * max(abs(fine), abs(coarse)) + atol + 1e-280
    if abs(fine - coarse) > tol:
        raise QuadratureConvergenceError(
            f"{what}: refinement moved the value from {coarse!r} to {fine!r}"
        )


def _gh_weighted_sq(g: SpectralFunction, n: int, delta: float, order: int) -> float:
    if g.dim == 1:
        rule = gauss_hermite(order)
        p = _clenshaw_scaled(g.coeffs, rule.nodes)
        return float(np.sum(rule.weights * (1.0 + rule.nodes**2) ** (delta * n) * p**2))
    rule = gauss_hermite(order)
    a = _scaled_basis_matrix(g.coeffs.shape[0] - 1, rule.nodes)
    b = _scaled_basis_matrix(g.coeffs.shape[1] - 1, rule.nodes)
    vals = a.T @ g.coeffs @ b  # polynomial part on the tensor grid
    r_sq = rule.nodes[:, None] ** 2 + rule.nodes[None, :] ** 2
    wts = rule.weights[:, None] * rule.weights[None, :]
    return float(np.sum(wts * (1.0 + r_sq) ** (delta * n) * vals**2))


def _ball_weighted_sq(
    g: SpectralFunction, n: int, delta: float, ball: Ball, order: int, max_panel: float
) -> float:
    if ball.dim != g.dim:
        raise DimensionMismatchError("ball dimension must match the expansion")
    if g.dim == 1:
        a, b = ball.interval()
        x, w = interval_nodes(a, b, order=order, max_panel=max_panel)
        vals = _poly_part(g, x) * np.exp(-0.5 * x**2)
        return float(np.sum(w * (1.0 + x**2) ** (delta * n) * vals**2))
    # Iterated integral over the disc with x = cx + r sin(theta), so the inner
    # half-width r cos(theta) is smooth and Gauss-Legendre converges fast.
    cx, cy = ball.center
    r = ball.radius
    # The Gaussian restricted to the disc boundary behaves like exp(r^2 cos(2 theta)/2),
    # so the angular bandwidth grows with r^2.
    n_theta = max(8, order, math.ceil(4 * r / max_panel), math.ceil(2 * r * r / max_panel))
    theta, w_theta = leggauss(n_theta)
    theta = 0.5 * math.pi * theta
    w_theta = 0.5 * math.pi * w_theta
    h = r * np.cos(theta)
    # Composite inner rule: the widest chord is 2r, so split [-1, 1] into
    # enough equal panels that every chord panel is at most max_panel wide.
    n_panels = max(1, math.ceil(2.0 * r / max_panel))
    base_x, base_w = leggauss(order)
    centers = -1.0 + (2.0 * np.arange(n_panels) + 1.0) / n_panels
    xi = (centers[:, None] + base_x[None, :] / n_panels).ravel()
    wi = np.tile(base_w / n_panels, n_panels)
    xs = cx + r * np.sin(theta)
    ys = cy + h[:, None] * xi[None, :]
    pts = np.stack([np.broadcast_to(xs[:, None], ys.shape), ys], axis=-1)
    vals = _poly_part(g, pts) * np.exp(-0.5 * _squared_radius(pts, 2))
    r_sq = _squared_radius(pts, 2)
    inner = np.sum(wi[None, :] * h[:, None] * (1.0 + r_sq) ** (delta * n) * vals**2, axis=1)
    return float(np.sum(w_theta * r * np.cos(theta) * inner))


def weighted_norm(
    f: SpectralFunction,
    n: int = 0,
    beta=0,
    weight_delta: float = 1.0,
    region: Ball | None = None,
    rtol: float = 1e-8,
    check: bool = True,
    atol: float = 0.0,
) -> float:
    """Weighted derivative norm ||(1+|x|^2)^(delta*n/2) d^beta f||_{L2(region)}.

    Parameters
    ----------
    n, beta : weight power and derivative multi-index (beta an int in 1D).
    weight_delta : exponent delta in [0, 1] of the weight (1+|x|^2)^(delta/2).
    region : ball to integrate over, or None for the whole space.
    rtol : relative tolerance of the refinement-convergence check; doubling
        the quadrature resolution must move the squared value by less.
    atol : absolute floor added to the refinement tolerance; callers that only
        compare the result against a much larger scale (degenerate far-out
        regions) pass the scale here so tail noise does not fail the check.
    """
    if n < 0:
        raise ValueError("weight power n must be nonnegative")
    if not 0.0 <= weight_delta <= 1.0:
        raise ValueError("weight_delta must lie in [0, 1]")
    beta = _normalize_beta(f, beta)
    g = _apply_multi_derivative(f, beta)
    if region is None:
        order = g.max_degree + n + 9
        if not float(weight_delta * n).is_integer():
            # non-polynomial weight: branch points at +-i slow the rule down
            order = max(order, 100)
        coarse = _gh_weighted_sq(g, n, weight_delta, order)
        fine = _gh_weighted_sq(g, n, weight_delta, 2 * order)
    else:
        coarse = _ball_weighted_sq(g, n, weight_delta, region, 24, 0.5)
        fine = _ball_weighted_sq(g, n, weight_delta, region, 48, 0.25)
    if check:
        _check_refinement(coarse, fine, rtol, "weighted_norm", atol=atol)
    return math.sqrt(max(fine, 0.0))


def norm_squared_on_intervals(
    f: SpectralFunction, intervals, order: int = 20, max_panel: float = 0.5
) -> float:
    """Sum of integrals of f^2 over the given 1D intervals.

    Intervals fully outside the effective support contribute exact zeros and
    are skipped; partial overlaps are clipped.
    """
    if f.dim != 1:
        raise DimensionMismatchError("interval norms require a 1D expansion")
    cutoff = effective_support_radius(f)
    total = 0.0
    for a, b in intervals:
        a, b = max(float(a), -cutoff), min(float(b), cutoff)
        if b <= a:
            continue
        x, w = interval_nodes(a, b, order=order, max_panel=max_panel)
        vals = _poly_part(f, x) * np.exp(-0.5 * x**2)
        total += float(np.sum(w * vals**2))
    return total


def norm_squared_on_ball(
    f: SpectralFunction, ball: Ball, rtol: float = 1e-8, atol: float = 0.0
) -> float:
    """Integral of f^2 over a ball, with refinement-convergence check."""
    coarse = _ball_weighted_sq(f, 0, 0.0, ball, 24, 0.5)
    fine = _ball_weighted_sq(f, 0, 0.0, ball, 48, 0.25)
    _check_refinement(coarse, fine, rtol, "norm_squared_on_ball", atol=atol)
    return max(fine, 0.0)


def _annulus_mass(f: SpectralFunction, r_in: float, r_out: float, order: int, max_panel: float) -> float:
    # Centered polar integral of f^2. The polynomial part of f^2 at fixed
    # radius is a trigonometric polynomial, so a uniform angular grid just
    # past twice its degree integrates the angle exactly; the radial factor
    # is handled by composite Gauss-Legendre panels.
    shape = f.coeffs.shape
    n_phi = 2 * (shape[0] + shape[1] - 2) + 9
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    rho, w_rho = interval_nodes(r_in, r_out, order=order, max_panel=max_panel)
    pts = np.stack(
        [rho[:, None] * np.cos(phi)[None, :], rho[:, None] * np.sin(phi)[None, :]],
        axis=-1,
    )
    vals_sq = _poly_part(f, pts) ** 2 * np.exp(-(rho**2))[:, None]
    ring = vals_sq.mean(axis=1) * (2.0 * math.pi)
    return float(np.sum(w_rho * rho * ring))


def norm_squared_outside_radius(f: SpectralFunction, r: float) -> float:
    """Mass of f^2 on the complement of the centered ball of radius r."""
    if r <= 0:
        raise ValueError("radius must be positive")
    cutoff = effective_support_radius(f)
    if r >= cutoff:
        return 0.0
    if f.dim == 1:
        return norm_squared_on_intervals(f, [(-cutoff, -r), (r, cutoff)])
    coarse = _annulus_mass(f, r, cutoff, 20, 0.5)
    fine = _annulus_mass(f, r, cutoff, 24, 0.25)
    _check_refinement(coarse, fine, 1e-8, "norm_squared_outside_radius")
    return max(fine, 0.0)
