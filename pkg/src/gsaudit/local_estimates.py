"""Ball classification and the local-estimate toolchain.

A covering ball Q is good when for every m the combined weighted derivative
mass on Q stays under a multiple of the plain mass on Q,

    sum_{|beta|=m} (1/beta!) ||w^m d^beta f||^2_{L2(Q)}
        <= (2 kappa/eps) (2^(m+1) d^m q_m^2 / m!) ||f||^2_{L2(Q)},

with w(x) = (1+|x|^2)^(delta/2) and q_m = tilde_D2^(2m) (m!)^s. The test is
run for m up to a cap; beyond the cap the condition is implied by the global
derivative bound once 2^(m+1) >= eps D1^2 / (2 kappa ||f||^2_Q), which is
recorded as a certified tail. Good balls admit a pointwise derivative bound
at a witness point, an analytic extension to a complex neighborhood whose
normalized sup M_k is bounded in closed form, and finally a local estimate
transferring mass from Q to Q intersected with a sensor set. Everything
large lives in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .hermite import (
    Ball,
    SpectralFunction,
    _poly_part,
    derivative,
    evaluate,
    interval_nodes,
    norm_squared_on_ball,
    norm_squared_on_intervals,
    norm_squared_outside_radius,
    weighted_norm,
)

__all__ = [
    "AnalyticityReport",
    "BadMassReport",
    "BallAudit",
    "ClassifierConfig",
    "GoodBallResult",
    "LocalEstimateReport",
    "MkBound",
    "PolydiscSup",
    "SeriesBound",
    "WitnessResult",
    "analyticity_check",
    "bad_mass_bound",
    "derivative_family",
    "good_ball_test",
    "local_estimate_check",
    "mk_bound",
    "mk_bruteforce",
    "pointwise_witness",
    "series_bound",
    "tail_condition_order",
]

# Balls carrying less than this fraction of the total mass are classified
# good and skipped: every inequality at stake degenerates to 0 <= 0.
DEGENERATE_MASS_REL = 1e-40

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class ClassifierConfig:
    """Parameters of the good/bad classification.

    kappa is the measured covering overlap (an integer count), tilde_d2 and s
    describe the weighted derivative bound after the delta transfer, delta is
    the weight power shared with the radius profile.
    """

    eps: float
    kappa: int
    tilde_d2: float
    s: float
    delta: float
    dim: int = 1
    m_cap: int = 24

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        if not (isinstance(self.kappa, (int, np.integer)) and self.kappa >= 1):
            raise ValueError("kappa must be an integer overlap count >= 1")
        if not self.tilde_d2 >= 1.0:
            raise ValueError("tilde_d2 must satisfy tilde_d2 >= 1")
        if not 0.0 <= self.s < 1.0:
            raise ValueError("s must lie in [0, 1)")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not 0 <= self.m_cap <= 24:
            raise ValueError("m_cap must lie in [0, 24]")

    def log_q(self, m: int) -> float:
        return 2.0 * m * math.log(self.tilde_d2) + self.s * gammaln(m + 1)


def _multi_indices(dim: int, order: int):
    if dim == 1:
        return [order]
    return [(a, order - a) for a in range(order + 1)]


def derivative_family(f: SpectralFunction, max_order: int) -> dict:
    """All derivatives d^beta f for |beta| <= max_order, keyed by beta."""
    if f.dim == 1:
        out = {0: f}
        for m in range(1, max_order + 1):
            out[m] = derivative(out[m - 1])
        return out
    out = {(0, 0): f}
    for total in range(1, max_order + 1):
        for a, b in _multi_indices(2, total):
            if a > 0:
                out[(a, b)] = derivative(out[(a - 1, b)], axis=0)
            else:
                out[(a, b)] = derivative(out[(a, b - 1)], axis=1)
    return out


def _log_beta_factorial(beta) -> float:
    if np.isscalar(beta):
        return gammaln(beta + 1)
    return float(sum(gammaln(b + 1) for b in beta))


@dataclass(frozen=True)
class GoodBallResult:
    is_good: bool
    failing_m: int | None
    degenerate: bool
    mass_sq: float
    log_margins: tuple  # log RHS - log LHS per m; positive means good at m


def good_ball_test(
    f: SpectralFunction,
    ball: Ball,
    cfg: ClassifierConfig,
    derivatives: dict | None = None,
    mass_sq: float | None = None,
) -> GoodBallResult:
    """Classify a covering ball, checking the inequality for m <= m_cap.

    Quadrature noise guard: the derivative masses only matter on the scale of
    the right-hand side, so the refinement check runs with that floor.
    """
    if f.dim != cfg.dim or ball.dim != cfg.dim:
        raise ValueError("function, ball and config dimensions must agree")
    if mass_sq is None:
        mass_sq = norm_squared_on_ball(f, ball, atol=1e-30 * f.norm_squared())
    if mass_sq <= DEGENERATE_MASS_REL * f.norm_squared():
        return GoodBallResult(True, None, True, mass_sq, ())
    if derivatives is None:
        derivatives = derivative_family(f, cfg.m_cap)
    log_mass = math.log(mass_sq)
    log_prefactor = math.log(2.0 * cfg.kappa / cfg.eps)
    margins = []
    failing = None
    for m in range(cfg.m_cap + 1):
        log_rhs = (
            log_prefactor
            + (m + 1) * _LOG2
            + m * math.log(cfg.dim)
            + 2.0 * cfg.log_q(m)
            - gammaln(m + 1)
            + log_mass
        )
        floor = math.exp(min(log_rhs - 23.0, 700.0))
        zero_beta = 0 if cfg.dim == 1 else (0, 0)
        parts = []
        for beta in _multi_indices(cfg.dim, m):
            w = weighted_norm(
                derivatives[beta], n=m, beta=zero_beta, weight_delta=cfg.delta,
                region=ball, atol=floor,
            )
            log_sq = 2.0 * math.log(w) if w > 0 else -math.inf
            parts.append(log_sq - _log_beta_factorial(beta))
        log_lhs = logsumexp(parts)
        margins.append(log_rhs - log_lhs)
        if failing is None and log_lhs > log_rhs:
            failing = m
    return GoodBallResult(failing is None, failing, False, mass_sq, tuple(margins))


def tail_condition_order(cfg: ClassifierConfig, d1: float, mass_sq: float) -> int:
    """Least order from which the global bound implies the ball condition.

    For m with 2^(m+1) >= eps D1^2 / (2 kappa mass) the classifier inequality
    follows from ||w^m d^beta f|| <= D1 q_m, so orders beyond the cap are
    certified whenever this kicks in by m_cap + 1.
    """
    if not mass_sq > 0:
        raise ValueError("tail certification needs positive ball mass")
    arg = cfg.eps * d1 * d1 / (2.0 * cfg.kappa * mass_sq)
    if arg <= 2.0:
        return 0
    return max(0, math.ceil(math.log2(arg) - 1.0))


@dataclass(frozen=True)
class BadMassReport:
    bad_mass: float
    uncertified_good_mass: float  # good balls whose tail is not certified
    q0_mass_upper: float
    budget: float  # eps * D1^2
    n_good: int
    n_bad: int
    n_degenerate: int
    n_uncertified: int

    @property
    def total(self) -> float:
        return self.bad_mass + self.uncertified_good_mass + self.q0_mass_upper

    @property
    def passed(self) -> bool:
        return self.total <= self.budget * (1.0 + 1e-12)


def bad_mass_bound(f, covering, cfg: ClassifierConfig, bound, results=None) -> BadMassReport:
    """Audit the bad-ball mass estimate: bad + uncovered mass <= eps D1^2.

    Good balls without a certified tail are counted on the bad side, which
    only strengthens the audited inequality. The complement term uses that
    the covering provably contains the ball of its target radius, so the
    uncovered mass is at most the mass outside that radius.
    """
    balls = covering.balls()
    if results is None:
        derivatives = derivative_family(f, cfg.m_cap)
        results = [good_ball_test(f, b, cfg, derivatives=derivatives) for b in balls]
    if len(results) != len(balls):
        raise ValueError("one classification result per covering ball required")
    bad = unc = 0.0
    n_good = n_bad = n_deg = n_unc = 0
    for res in results:
        if res.degenerate:
            n_deg += 1
            continue
        if not res.is_good:
            n_bad += 1
            bad += res.mass_sq
            continue
        n_good += 1
        if tail_condition_order(cfg, bound.D1, res.mass_sq) > cfg.m_cap + 1:
            n_unc += 1
            unc += res.mass_sq
    q0 = norm_squared_outside_radius(f, covering.target_radius)
    return BadMassReport(
        bad_mass=bad,
        uncertified_good_mass=unc,
        q0_mass_upper=q0,
        budget=cfg.eps * bound.D1**2,
        n_good=n_good,
        n_bad=n_bad,
        n_degenerate=n_deg,
        n_uncertified=n_unc,
    )


# ---------------------------------------------------------------------------
# pointwise witness


def _log_w_inf_neg(ball: Ball, cfg: ClassifierConfig) -> float:
    # log sup_{x in Q} w(x)^{-2} = -delta * log(1 + max{0, |y| - rho}^2);
    # w is radially increasing, so the sup sits at the point nearest 0.
    nearest = max(0.0, ball.center_norm() - ball.radius)
    return -cfg.delta * math.log1p(nearest * nearest)


def _log_abs_derivatives_at(derivatives: dict, cfg: ClassifierConfig, points) -> dict:
    with np.errstate(divide="ignore"):
        return {
            beta: np.log(np.abs(evaluate(derivatives[beta], points)))
            for total in range(cfg.m_cap + 1)
            for beta in _multi_indices(cfg.dim, total)
        }


def _ball_grid(ball: Ball, n: int, dim: int):
    if dim == 1:
        return np.linspace(ball.center[0] - ball.radius, ball.center[0] + ball.radius, n)
    side = max(2, int(math.sqrt(n)))
    ax = np.linspace(-ball.radius, ball.radius, side)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    pts = pts[np.linalg.norm(pts, axis=1) <= ball.radius] + np.asarray(ball.center)
    return np.concatenate([pts, [np.asarray(ball.center, dtype=float)]])


@dataclass(frozen=True)
class WitnessResult:
    x_k: tuple | None
    verified: bool
    min_margin: float  # best over grid of worst log margin over (m, beta)
    refined: bool
    n_points: int


def pointwise_witness(
    f: SpectralFunction,
    ball: Ball,
    cfg: ClassifierConfig,
    mass_sq: float | None = None,
    derivatives: dict | None = None,
    n_grid: int = 1024,
) -> WitnessResult:
    """Search the ball for a point satisfying the pointwise derivative bounds.

    The bound at order m reads |d^beta f(x)| <= (2 kappa/eps)^(1/2) 2^(m+1)
    d^(m/2) C^(1/2) ||f||_Q / |Q|^(1/2) with C = q_m^2 sup_Q w^(-2m). A good
    ball must contain such a point; the grid is refined once before reporting
    failure.
    """
    if mass_sq is None:
        mass_sq = norm_squared_on_ball(f, ball, atol=1e-30 * f.norm_squared())
    if not mass_sq > 0:
        raise ValueError("pointwise witness needs positive ball mass")
    if derivatives is None:
        derivatives = derivative_family(f, cfg.m_cap)
    log_w_neg = _log_w_inf_neg(ball, cfg)
    base = (
        0.5 * math.log(2.0 * cfg.kappa / cfg.eps)
        + 0.5 * math.log(mass_sq)
        - 0.5 * math.log(ball.volume)
    )
    log_rhs = {
        m: base
        + (m + 1) * _LOG2
        + 0.5 * m * math.log(cfg.dim)
        + cfg.log_q(m)
        + 0.5 * m * log_w_neg
        for m in range(cfg.m_cap + 1)
    }

    def scan(n: int):
        grid = _ball_grid(ball, n, cfg.dim)
        logs = _log_abs_derivatives_at(derivatives, cfg, grid)
        worst = np.full(len(grid), np.inf)
        for total in range(cfg.m_cap + 1):
            for beta in _multi_indices(cfg.dim, total):
                worst = np.minimum(worst, log_rhs[total] - logs[beta])
        best = int(np.argmax(worst))
        return grid[best], float(worst[best]), len(grid)

    point, margin, used = scan(n_grid)
    refined = False
    if margin < 0.0:
        refined = True
        point, margin, used = scan(4 * n_grid)
    x_k = (float(point),) if cfg.dim == 1 else tuple(float(v) for v in point)
    return WitnessResult(x_k, margin >= 0.0, margin, refined, used)


# ---------------------------------------------------------------------------
# polydisc sup: brute force and closed-form bound


def _log_abs_analytic(f, z: np.ndarray, dim: int) -> np.ndarray:
    # log |F(z)| on complex points; the Gaussian factor is applied in logs so
    # large imaginary parts cannot overflow.
    if callable(f):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(f(z)))
    vals = _poly_part(f, z)
    if dim == 1:
        gauss = 0.5 * (z.imag**2 - z.real**2)
    else:
        gauss = 0.5 * np.sum(z.imag**2 - z.real**2, axis=-1)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(vals)) + gauss


def _max_log_abs(f, pts: np.ndarray, dim: int, chunk: int = 1 << 17) -> float:
    flat = pts.reshape(-1) if dim == 1 else pts.reshape(-1, 2)
    best = -math.inf
    for i in range(0, len(flat), chunk):
        best = max(best, float(np.max(_log_abs_analytic(f, flat[i : i + chunk], dim))))
    return best


def _polydisc_points(ball: Ball, rho8: float, n_q: int, n_phi: int, dim: int):
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    circle = np.exp(1j * phis)
    if dim == 1:
        q = np.linspace(ball.center[0] - ball.radius, ball.center[0] + ball.radius, n_q)
        q = np.append(q, ball.center[0])
        rings = [q[:, None] + rho8 * v * circle[None, :] for v in (1.0, 0.5)]
        return np.concatenate([r.ravel() for r in rings] + [q.astype(complex)])
    n_side = max(2, int(math.sqrt(n_q)))
    ax = np.linspace(-ball.radius, ball.radius, n_side)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    disc = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    disc = disc[np.linalg.norm(disc, axis=1) <= ball.radius] + np.asarray(ball.center)
    disc = np.concatenate([disc, [np.asarray(ball.center, dtype=float)]])
    offs = [
        np.stack(
            [
                np.broadcast_to(v1 * rho8 * circle[:, None], (n_phi, n_phi)),
                np.broadcast_to(v2 * rho8 * circle[None, :], (n_phi, n_phi)),
            ],
            axis=-1,
        ).reshape(-1, 2)
        for v1, v2 in ((1.0, 1.0), (1.0, 0.5), (0.5, 1.0))
    ]
    offsets = np.concatenate(offs + [np.zeros((1, 2), dtype=complex)])
    return (disc[:, None, :] + offsets[None, :, :]).reshape(-1, 2)


@dataclass(frozen=True)
class PolydiscSup:
    log_m: float
    log_sup: float
    n_samples: int
    rounds: int
    converged: bool

    @property
    def m(self) -> float:
        return math.exp(self.log_m) if self.log_m < 700.0 else math.inf


def mk_bruteforce(
    f,
    ball: Ball,
    x_k,
    rho_k: float,
    norm_sq: float | None = None,
    rel_tol: float = 0.01,
    max_rounds: int = 5,
) -> PolydiscSup:
    """Normalized sup of the analytic extension over Q + D(0, 8 rho_k)^d.

    Samples the distinguished boundary (radius 8 rho_k around each real base
    point) plus interior slices, doubling the sampling density until the
    result moves by less than rel_tol. f may be a SpectralFunction or a
    callable on complex points (surrogate tests). The result is clamped to
    M >= 1 as in the defining lemma.
    """
    dim = ball.dim
    if norm_sq is None:
        if callable(f):
            if dim != 1:
                raise ValueError("callable surrogates are supported in dim 1 only")
            a, b = ball.interval()
            x, w = interval_nodes(a, b)
            norm_sq = float(np.sum(w * np.abs(f(x.astype(complex))) ** 2))
        else:
            norm_sq = norm_squared_on_ball(f, ball, atol=1e-30 * f.norm_squared())
    if not norm_sq > 0:
        raise ValueError("polydisc sup needs positive mass on the ball")
    rho8 = 8.0 * rho_k
    n_q, n_phi = (24, 48) if dim == 1 else (64, 24)
    log_sup = -math.inf
    rounds = 0
    converged = False
    n_samples = 0
    for rounds in range(1, max_rounds + 1):
        pts = _polydisc_points(ball, rho8, n_q, n_phi, dim)
        n_samples = len(pts)
        new = _max_log_abs(f, pts, dim)
        if rounds > 1 and abs(new - log_sup) <= math.log1p(rel_tol):
            log_sup = max(log_sup, new)
            converged = True
            break
        log_sup = max(log_sup, new)
        if dim == 1:
            n_q, n_phi = 2 * n_q, 2 * n_phi
        else:
            # the torus sampling cost is n_q * n_phi^2, so the angular count
            # grows slower to keep refinement rounds affordable
            n_q, n_phi = 2 * n_q, max(n_phi + 1, int(1.5 * n_phi))
    log_m = 0.5 * math.log(ball.volume) - 0.5 * math.log(norm_sq) + log_sup
    return PolydiscSup(
        log_m=max(log_m, 0.0),
        log_sup=log_sup,
        n_samples=n_samples,
        rounds=rounds,
        converged=converged,
    )


@dataclass(frozen=True)
class SeriesBound:
    log_sum: float
    log_bound: float
    terms_used: int
    remainder_certified: bool
    log_remainder: float
    bound_overflow: bool

    @property
    def sum(self) -> float:
        return math.exp(self.log_sum) if self.log_sum < 700.0 else math.inf

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound) if self.log_bound < 700.0 else math.inf


def series_bound(
    D: float,
    s: float,
    rel_remainder: float = 1e-12,
    term_cap: int = 30_000_000,
    chunk: int = 1_000_000,
) -> SeriesBound:
    """Partial sum of sum_m D^m/(m!)^(1-s) against 2 (2D)^(3 (2D)^(1/(1-s))).

    The sum accumulates in log space in vectorized chunks; once the term
    ratio drops below one, the geometric tail certifies the remainder below
    rel_remainder of the sum. Past term_cap the partial sum is returned
    uncertified (the peak term sits near D^(1/(1-s)), which can exceed any
    reasonable cap). A certified sum above the bound raises: the bound is a
    proved lemma, so that would be a bug.
    """
    if not D >= 0.5:
        raise ValueError("series bound requires D >= 1/2")
    if not 0.0 <= s < 1.0:
        raise ValueError("s must lie in [0, 1)")
    log_d = math.log(D)
    one_ms = 1.0 - s
    log_sum = -math.inf
    log_rem = math.inf
    certified = False
    m_next = 0
    while m_next <= term_cap:
        m = np.arange(m_next, min(m_next + chunk, term_cap + 1))
        log_sum = np.logaddexp(log_sum, logsumexp(m * log_d - one_ms * gammaln(m + 1)))
        m_last = int(m[-1])
        ratio = D / (m_last + 2) ** one_ms
        if ratio < 1.0:
            log_rem = (
                (m_last + 1) * log_d
                - one_ms * gammaln(m_last + 2)
                - math.log1p(-ratio)
            )
            if log_rem <= log_sum + math.log(rel_remainder):
                certified = True
                m_next = m_last + 1
                break
        m_next = m_last + 1
    arg = math.log(2.0 * D) / one_ms
    power = math.exp(arg) if arg < 709.0 else math.inf
    log_bound = _LOG2 + 3.0 * power * math.log(2.0 * D)
    overflow = math.isinf(log_bound)
    if certified and log_sum > log_bound + 1e-9:
        raise RuntimeError("certified series sum exceeds its proved bound")
    return SeriesBound(
        log_sum=float(log_sum),
        log_bound=log_bound,
        terms_used=m_next,
        remainder_certified=certified,
        log_remainder=log_rem,
        bound_overflow=overflow,
    )


@dataclass(frozen=True)
class MkBound:
    d_value: float  # the constant D entering the series
    log_bound: float
    log_intermediate: float | None  # series-based bound, when computable
    series: SeriesBound | None
    exponent_overflow: bool


def mk_bound(
    cfg: ClassifierConfig,
    profile,
    bound,
    compute_intermediate: bool = True,
    series_term_cap: int = 30_000_000,
) -> MkBound:
    """Closed-form bound on log M_k, plus the sharper series intermediate.

    D = 40 d^(3/2) tilde_D2^2 R max{r0, (1-eta)^(-1)}; the uniform bound is
    log 4 + (1/2) log(2 kappa/eps) + 3 (2D)^(2/(1-s)). The intermediate bound
    2 (2 kappa/eps)^(1/2) sum_m D^m/(m!)^(1-s) is reported whenever the
    series is certifiable within the term cap.
    """
    if abs(bound.D2 - cfg.tilde_d2) > 1e-9 * cfg.tilde_d2:
        raise ValueError("config tilde_d2 must match the transferred bound")
    if abs(bound.s - cfg.s) > 1e-12:
        raise ValueError("config s must match the transferred bound")
    d_value = (
        40.0
        * cfg.dim**1.5
        * cfg.tilde_d2**2
        * profile.R
        * max(profile.r0, 1.0 / (1.0 - profile.eta))
    )
    half_log = 0.5 * math.log(2.0 * cfg.kappa / cfg.eps)
    arg = (2.0 / (1.0 - cfg.s)) * math.log(2.0 * d_value)
    power = math.exp(arg) if arg < 709.0 else math.inf
    log_bound = math.log(4.0) + half_log + 3.0 * power
    series = None
    log_intermediate = None
    if compute_intermediate and d_value >= 0.5:
        peak_arg = math.log(d_value) / (1.0 - cfg.s)
        peak = math.exp(peak_arg) if peak_arg < 709.0 else math.inf
        if peak <= 0.9 * series_term_cap:
            series = series_bound(d_value, cfg.s, term_cap=series_term_cap)
            if series.remainder_certified:
                log_intermediate = _LOG2 + half_log + series.log_sum
    return MkBound(
        d_value=d_value,
        log_bound=log_bound,
        log_intermediate=log_intermediate,
        series=series,
        exponent_overflow=math.isinf(power),
    )


# ---------------------------------------------------------------------------
# the local estimate


@dataclass(frozen=True)
class LocalEstimateReport:
    applicable: bool
    log_lhs: float
    log_rhs: float
    intersection_measure: float
    intersection_mass_sq: float
    base: float
    exponent: float

    @property
    def log_ratio(self) -> float:
        return self.log_lhs - self.log_rhs

    @property
    def passed(self) -> bool:
        return self.applicable and self.log_ratio >= -1e-9


def local_estimate_check(
    f: SpectralFunction,
    ball: Ball,
    omega,
    log_m_k: float,
    mass_sq: float | None = None,
) -> LocalEstimateReport:
    """Check (24 d 2^d |Q|/|Q cap omega|)^(1+4 log M/log 2) ||f||^2_{Q cap omega} >= ||f||^2_Q.

    One-dimensional: the intersection is decomposed into intervals and both
    sides are integrated directly; the comparison runs in log space since the
    exponent is typically in the thousands.
    """
    if f.dim != 1 or ball.dim != 1:
        raise ValueError("the local estimate audit is implemented in dimension 1")
    if log_m_k < -1e-12:
        raise ValueError("log M_k must be nonnegative (M_k >= 1)")
    a, b = ball.interval()
    pieces = omega.intersect_interval(a, b)
    measure = sum(hi - lo for lo, hi in pieces)
    if measure <= 0.0:
        return LocalEstimateReport(False, -math.inf, -math.inf, 0.0, 0.0, math.inf, math.inf)
    if mass_sq is None:
        mass_sq = norm_squared_on_ball(f, ball, atol=1e-30 * f.norm_squared())
    inter_sq = norm_squared_on_intervals(f, pieces)
    base = 48.0 * ball.volume / measure  # 24 d 2^d = 48 in dimension 1
    exponent = 1.0 + 4.0 * max(log_m_k, 0.0) / _LOG2
    log_lhs = exponent * math.log(base) + (math.log(inter_sq) if inter_sq > 0 else -math.inf)
    log_rhs = math.log(mass_sq) if mass_sq > 0 else -math.inf
    return LocalEstimateReport(True, log_lhs, log_rhs, measure, inter_sq, base, exponent)


# ---------------------------------------------------------------------------
# analyticity


@dataclass(frozen=True)
class AnalyticityReport:
    premise_passed: bool
    violations: tuple
    residuals: tuple  # max Taylor error over the sample per partial degree
    fitted_ratio: float
    final_error: float

    @property
    def converged(self) -> bool:
        return self.fitted_ratio < 1.0 and self.final_error <= 1e-8


def analyticity_check(
    f: SpectralFunction,
    c1: float,
    c2: float,
    y,
    tau: float,
    premise_order: int = 12,
    taylor_degree: int = 20,
) -> AnalyticityReport:
    """Audit the analyticity lemma: derivative-bound premise and Taylor convergence.

    Premise: ||d^beta f|| <= c1 c2^|beta| beta! for |beta| <= premise_order,
    with the norms computed exactly from the ladder coefficients. Conclusion:
    partial Taylor sums of f around y converge geometrically on |x - y| < tau
    (the fitted residual ratio estimates the geometric rate).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    derivatives = derivative_family(f, max(premise_order, taylor_degree))
    violations = []
    for total in range(premise_order + 1):
        for beta in _multi_indices(f.dim, total):
            exact = derivatives[beta].norm()
            cap = c1 * c2**total * math.exp(_log_beta_factorial(beta))
            if exact > cap * (1.0 + 1e-12):
                violations.append((beta, exact, cap))
    rng = np.random.default_rng(0)
    if f.dim == 1:
        y0 = float(np.asarray(y).reshape(()))
        sample = y0 + 0.95 * tau * (2.0 * rng.random(16) - 1.0)
        offsets = sample - y0
    else:
        y0 = np.asarray(y, dtype=float)
        raw = 2.0 * rng.random((64, 2)) - 1.0
        raw = raw[np.linalg.norm(raw, axis=1) <= 1.0][:16]
        sample = y0 + 0.95 * tau * raw
        offsets = sample - y0
    target = evaluate(f, sample)
    partial = np.zeros_like(target)
    residuals = []
    for total in range(taylor_degree + 1):
        for beta in _multi_indices(f.dim, total):
            coeff = evaluate(derivatives[beta], y0)
            log_fact = _log_beta_factorial(beta)
            if f.dim == 1:
                partial = partial + coeff / math.exp(log_fact) * offsets**total
            else:
                mono = offsets[:, 0] ** beta[0] * offsets[:, 1] ** beta[1]
                partial = partial + coeff / math.exp(log_fact) * mono
        residuals.append(float(np.max(np.abs(partial - target))))
    tail = [r for r in residuals[-8:] if r > 1e-300]
    if len(tail) >= 2:
        slope = np.polyfit(np.arange(len(tail)), np.log(tail), 1)[0]
        ratio = float(math.exp(slope))
    else:
        ratio = 0.0
    return AnalyticityReport(
        premise_passed=not violations,
        violations=tuple(violations),
        residuals=tuple(residuals),
        fitted_ratio=ratio,
        final_error=residuals[-1],
    )


# ---------------------------------------------------------------------------
# per-ball audit record


@dataclass(frozen=True)
class BallAudit:
    """Everything measured about one covering ball during a theorem run."""

    k: int
    ball: Ball
    m_cap: int
    is_good: bool
    failing_m: int | None
    degenerate: bool
    mass_sq: float
    tail_certified: bool | None = None
    tail_order: int | None = None
    x_k: tuple | None = None
    witness_verified: bool | None = None
    witness_refined: bool | None = None
    log_mk_bruteforce: float | None = None
    mk_converged: bool | None = None
    log_mk_bound: float | None = None
    log_mk_intermediate: float | None = None
    log_local_lhs: float | None = None
    log_local_rhs: float | None = None
    local_applicable: bool | None = None

    @property
    def mk_consistent(self) -> bool | None:
        if self.log_mk_bruteforce is None or self.log_mk_bound is None:
            return None
        return self.log_mk_bruteforce <= self.log_mk_bound + 1e-9

    @property
    def local_passed(self) -> bool | None:
        if self.log_local_lhs is None or not self.local_applicable:
            return None
        return self.log_local_lhs >= self.log_local_rhs - 1e-9

    def with_fields(self, **kwargs) -> "BallAudit":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "center": [float(c) for c in self.ball.center],
            "radius": self.ball.radius,
            "m_cap": self.m_cap,
            "is_good": self.is_good,
            "failing_m": self.failing_m,
            "degenerate": self.degenerate,
            "mass_sq": self.mass_sq,
            "tail_certified": self.tail_certified,
            "tail_order": self.tail_order,
            "x_k": list(self.x_k) if self.x_k is not None else None,
            "witness_verified": self.witness_verified,
            "witness_refined": self.witness_refined,
            "log_mk_bruteforce": self.log_mk_bruteforce,
            "mk_converged": self.mk_converged,
            "log_mk_bound": self.log_mk_bound,
            "log_mk_intermediate": self.log_mk_intermediate,
            "log_local_lhs": self.log_local_lhs,
            "log_local_rhs": self.log_local_rhs,
            "local_applicable": self.local_applicable,
            "mk_consistent": self.mk_consistent,
            "local_passed": self.local_passed,
        }
