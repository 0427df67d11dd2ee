"""End-to-end audits of the uncertainty principles with error term.

verify_uncertainty runs the full proof pipeline on a concrete instance
(f, omega, eps): localize the mass of f to a ball, cover it, classify the
covering into good and bad balls, find pointwise witnesses, bound the
analytic-extension sups, apply the local estimate on every good ball, and
sum with the covering overlap. Every inequality along the way is audited
with both its measured sides and the closed-form constants; the report
records each step and the smallest constant that actually works for the
instance next to the pipeline's provable one.

verify_uncertainty_decay does the same for sensor sets whose density decays
polynomially, with per-ball density floors and the squared-log constant.
Every failure aborts with the violated step identified: the underlying
statements are theorems, so a red inequality means an invalid certificate
or a bug, never a counterexample.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    OVERLAP_CAP,
    FullSpaceSensorSet,
    RadiusProfile,
    besicovitch_cover,
    certify_density,
)
from .hermite import (
    SpectralFunction,
    norm_squared_on_intervals,
    weighted_norm,
)
from .local_estimates import (
    BallAudit,
    ClassifierConfig,
    bad_mass_bound,
    derivative_family,
    good_ball_test,
    local_estimate_check,
    mk_bound,
    mk_bruteforce,
    pointwise_witness,
    tail_condition_order,
)
from .semigroup import GSBound, delta_weight_transfer, tail_mass_check

__all__ = [
    "PipelineError",
    "StepRecord",
    "UncertaintyReport",
    "k_effective_spread",
    "k_effective_sweep",
    "verify_uncertainty",
    "verify_uncertainty_decay",
]

_LOG2 = math.log(2.0)


class PipelineError(RuntimeError):
    """A pipeline step failed; .step names the violated premise or lemma."""

    def __init__(self, step: str, message: str):
        super().__init__(f"step '{step}': {message}")
        self.step = step


def _safe_exp_arg(arg: float) -> float:
    return math.exp(arg) if arg < 709.0 else math.inf


def _jsonable(x):
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(float(x)) if isinstance(x, np.floating) else int(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass(frozen=True)
class StepRecord:
    """One audited inequality: passed means log_lhs <= log_rhs (+ tolerance)."""

    name: str
    passed: bool
    log_lhs: float | None = None
    log_rhs: float | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "name": self.name,
                "passed": self.passed,
                "log_lhs": self.log_lhs,
                "log_rhs": self.log_rhs,
                "detail": self.detail,
            }
        )


@dataclass(frozen=True)
class UncertaintyReport:
    kind: str  # "uncertainty" or "uncertainty-decay"
    f_id: str
    omega_id: str
    eps: float
    gamma: tuple  # ("constant", g) or ("decaying", gamma0, a)
    profile: RadiusProfile
    bound_summary: dict
    r: float
    covering_summary: dict
    n_good: int
    n_uncertified: int
    n_bad: int
    n_degenerate: int
    ball_audits: tuple
    steps: tuple
    total_mass: float
    omega_mass: float
    error_term: float  # eps * D1^2
    good_mass: float
    bad_mass: float
    q0_mass_upper: float
    log_lhs: float  # log ||f||^2
    log_rhs_formal: float  # log of the explicit-constant right-hand side
    k_formal: float
    k_effective: float | None
    error_term_dominated: bool
    passed: bool

    def step(self, name: str) -> StepRecord:
        for s in self.steps:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "kind": self.kind,
                "f_id": self.f_id,
                "omega_id": self.omega_id,
                "eps": self.eps,
                "gamma": list(self.gamma),
                "profile": self.profile.to_dict(),
                "bound": self.bound_summary,
                "tail_radius": self.r,
                "covering": self.covering_summary,
                "n_good": self.n_good,
                "n_uncertified": self.n_uncertified,
                "n_bad": self.n_bad,
                "n_degenerate": self.n_degenerate,
                "total_mass": self.total_mass,
                "omega_mass": self.omega_mass,
                "error_term": self.error_term,
                "good_mass": self.good_mass,
                "bad_mass": self.bad_mass,
                "q0_mass_upper": self.q0_mass_upper,
                "log_lhs": self.log_lhs,
                "log_rhs_formal": self.log_rhs_formal,
                "k_formal": self.k_formal,
                "k_effective": self.k_effective,
                "error_term_dominated": self.error_term_dominated,
                "passed": self.passed,
                "steps": [s.to_dict() for s in self.steps],
                "ball_audits": [a.to_dict() for a in self.ball_audits],
            }
        )


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _mass_on_sensor(f: SpectralFunction, omega) -> float:
    if isinstance(omega, FullSpaceSensorSet):
        return f.norm_squared()
    return norm_squared_on_intervals(f, zip(omega.starts, omega.ends))


def _sensor_id(omega) -> str:
    return getattr(omega, "description", "") or omega.to_dict().get("kind", "sensor")


def _premise_check(f, bound, tilde, delta, tol=1e-7):
    """Spot-check the declared derivative bounds on a small (n, beta) grid."""
    routes = [(1.0, bound)]
    if delta != 1.0:
        routes.append((delta, tilde))
    worst = math.inf
    worst_at = None
    for n in range(3):
        for b in range(3):
            for weight, gs in routes:
                measured = weighted_norm(f, n=n, beta=b, weight_delta=weight)
                log_meas = math.log(measured) if measured > 0 else -math.inf
                margin = gs.log_value(n, b) - log_meas
                if margin < worst:
                    worst, worst_at = margin, (n, b, weight)
    return worst, worst_at, worst >= -tol


def _gamma_floor(gamma_spec, center_norm: float) -> float:
    if gamma_spec[0] == "constant":
        return gamma_spec[1]
    _, gamma0, a = gamma_spec
    return gamma0 / (1.0 + center_norm**a)


def _run_pipeline(
    f: SpectralFunction,
    bound: GSBound,
    profile: RadiusProfile,
    omega,
    gamma_spec: tuple,
    eps: float,
    kind: str,
    m_cap: int,
    threads: int,
    f_id: str,
    witness_grid: int,
) -> UncertaintyReport:
    steps = []

    def record(name, passed, log_lhs=None, log_rhs=None, **detail):
        steps.append(StepRecord(name, passed, log_lhs, log_rhs, detail))
        if not passed:
            raise PipelineError(name, f"audit failed with detail {detail}")

    # admissibility of the instance
    if f.dim != 1:
        raise PipelineError("admissibility", "the pipeline audit runs in dimension 1")
    if not 0.0 < eps <= 1.0:
        raise PipelineError("admissibility", "eps must lie in (0, 1]")
    tilde = delta_weight_transfer(bound, profile.delta)
    s = tilde.s
    if not s < 1.0:
        raise PipelineError("admissibility", f"s = delta nu + mu = {s} must be below 1")
    if gamma_spec[0] == "constant" and not 0.0 < gamma_spec[1] <= 1.0:
        raise PipelineError("admissibility", "gamma must lie in (0, 1]")
    if gamma_spec[0] == "decaying":
        if not 0.0 < gamma_spec[1] <= 1.0 or gamma_spec[2] < 0.0:
            raise PipelineError("admissibility", "need gamma0 in (0, 1] and a >= 0")
    record("admissibility", True, s=s, tilde_d2=tilde.D2, eps=eps)

    # the declared derivative bounds must actually majorize f
    worst_margin, worst_at, ok = _premise_check(f, bound, tilde, profile.delta)
    record(
        "premise",
        ok,
        log_lhs=-worst_margin,
        log_rhs=0.0,
        worst_margin=worst_margin,
        worst_at=worst_at,
    )

    # localization: mass outside B(0, r) fits in half the error budget
    tail = tail_mass_check(f, bound, eps)
    record(
        "tail",
        tail.passed,
        log_lhs=math.log(tail.tail_mass) if tail.tail_mass > 0 else -math.inf,
        log_rhs=math.log(tail.budget),
        r=tail.r,
        tail_mass=tail.tail_mass,
        budget=tail.budget,
    )

    covering = besicovitch_cover(profile, tail.r)
    balls = covering.balls()
    kappa = covering.kappa_measured
    record(
        "covering",
        covering.coverage.passed and kappa <= OVERLAP_CAP[1],
        n_balls=len(balls),
        kappa=kappa,
        target_radius=covering.target_radius,
        n_uncovered=covering.coverage.n_uncovered,
    )

    if kind == "uncertainty-decay":
        # per-center norm bound from the proof: 1 + |y_k|^a is controlled by
        # the localization radius uniformly over the covering
        _, _, a = gamma_spec
        lhs = max(1.0 + abs(c) ** a for c in covering.centers)
        rhs = (
            2.0 ** (1.0 + a)
            * profile.r0**a
            * (1.0 - profile.eta) ** (-a)
            * tail.r**a
        )
        record("center-norm-bound", lhs <= rhs * (1.0 + 1e-12), math.log(lhs), math.log(rhs))

    gamma_arg = gamma_spec[1] if gamma_spec[0] == "constant" else gamma_spec[1:]
    density = certify_density(
        omega, profile, gamma_arg, covering.target_radius, sample_centers=covering.centers
    )
    record(
        "density",
        density.passed,
        min_ratio=density.min_ratio,
        threshold=density.threshold,
        n_violations=density.n_violations,
    )

    # classification
    cfg = ClassifierConfig(
        eps=eps, kappa=kappa, tilde_d2=tilde.D2, s=s, delta=profile.delta, dim=1, m_cap=m_cap
    )
    derivs = derivative_family(f, m_cap)
    results = _map(lambda ball: good_ball_test(f, ball, cfg, derivatives=derivs), balls, threads)
    audits = []
    for k, (ball, res) in enumerate(zip(balls, results)):
        certified = None
        order = None
        if res.is_good and not res.degenerate:
            order = tail_condition_order(cfg, tilde.D1, res.mass_sq)
            certified = order <= m_cap + 1
        audits.append(
            BallAudit(
                k=k,
                ball=ball,
                m_cap=m_cap,
                is_good=res.is_good,
                failing_m=res.failing_m,
                degenerate=res.degenerate,
                mass_sq=res.mass_sq,
                tail_certified=certified,
                tail_order=order,
            )
        )
    n_good = sum(1 for a in audits if a.is_good and not a.degenerate and a.tail_certified)
    n_uncertified = sum(
        1 for a in audits if a.is_good and not a.degenerate and not a.tail_certified
    )
    n_bad = sum(1 for a in audits if not a.is_good)
    n_deg = sum(1 for a in audits if a.degenerate)
    record(
        "classification",
        True,
        n_good=n_good,
        n_uncertified=n_uncertified,
        n_bad=n_bad,
        n_degenerate=n_deg,
    )

    # bad balls and the uncovered remainder fit in the error budget
    bad_report = bad_mass_bound(f, covering, cfg, tilde, results=results)
    record(
        "bad-mass",
        bad_report.passed,
        log_lhs=math.log(bad_report.total) if bad_report.total > 0 else -math.inf,
        log_rhs=math.log(bad_report.budget),
        bad_mass=bad_report.bad_mass,
        uncertified_good_mass=bad_report.uncertified_good_mass,
        q0_mass_upper=bad_report.q0_mass_upper,
        n_uncertified=bad_report.n_uncertified,
    )

    total_mass = f.norm_squared()
    good_mass = sum(
        a.mass_sq for a in audits if a.is_good and not a.degenerate and a.tail_certified
    )
    deg_mass = sum(a.mass_sq for a in audits if a.degenerate)
    bad_mass = bad_report.bad_mass
    # bad_report.total = bad + uncertified-good + outside-mass, all inside the
    # eps budget; certified good balls and degenerate slop carry the rest
    covered = good_mass + deg_mass + bad_report.total
    record(
        "decomposition",
        covered >= total_mass * (1.0 - 1e-8) - 1e-12,
        log_lhs=math.log(total_mass) if total_mass > 0 else -math.inf,
        log_rhs=math.log(covered) if covered > 0 else -math.inf,
        covered_mass=covered,
        total_mass=total_mass,
    )

    # per-good-ball work: witness, analytic-extension sup, local estimate.
    # Only certified balls participate: an uncertified ball's tail condition
    # is unknown beyond m_cap, and its mass already sits in the eps budget.
    active = [a for a in audits if a.is_good and not a.degenerate and a.tail_certified]
    ub = mk_bound(cfg, profile, tilde)
    log_mk_reference = (
        ub.log_intermediate if ub.log_intermediate is not None else ub.log_bound
    )

    def ball_work(audit: BallAudit):
        wit = pointwise_witness(
            f, audit.ball, cfg, mass_sq=audit.mass_sq, derivatives=derivs, n_grid=witness_grid
        )
        updated = audit.with_fields(
            x_k=wit.x_k,
            witness_verified=wit.verified,
            witness_refined=wit.refined,
            log_mk_bound=ub.log_bound,
            log_mk_intermediate=ub.log_intermediate,
        )
        if not wit.verified:
            return updated, None
        rho_k = float(profile.rho(wit.x_k[0]))
        brute = mk_bruteforce(f, audit.ball, wit.x_k, rho_k, norm_sq=audit.mass_sq)
        local = local_estimate_check(f, audit.ball, omega, brute.log_m, mass_sq=audit.mass_sq)
        updated = updated.with_fields(
            log_mk_bruteforce=brute.log_m,
            mk_converged=brute.converged,
            log_local_lhs=local.log_lhs,
            log_local_rhs=local.log_rhs,
            local_applicable=local.applicable,
        )
        return updated, local

    worked = _map(ball_work, active, threads)
    locals_by_k = {}
    unwitnessed = []
    for audit, local in worked:
        locals_by_k[audit.k] = local
        audits[audit.k] = audit
        if not audit.witness_verified:
            unwitnessed.append(audit.k)
    record(
        "witness",
        not unwitnessed,
        n_checked=len(active),
        unwitnessed_balls=unwitnessed,
    )

    worst_mk = -math.inf
    for a in (audits[x.k] for x in active):
        if not a.mk_converged:
            raise PipelineError("mk-bound", f"polydisc sampling did not stabilize on ball {a.k}")
        worst_mk = max(worst_mk, a.log_mk_bruteforce - log_mk_reference)
    record(
        "mk-bound",
        worst_mk <= 1e-9,
        log_lhs=worst_mk,
        log_rhs=0.0,
        log_mk_uniform_bound=ub.log_bound,
        log_mk_series_bound=ub.log_intermediate,
        d_value=ub.d_value,
        exponent_overflow=ub.exponent_overflow,
    )

    worst_local = math.inf
    sum_inter = 0.0
    worst_ball_density = math.inf
    log_measured_factors = []
    for a in (audits[x.k] for x in active):
        local = locals_by_k[a.k]
        if not local.applicable:
            raise PipelineError(
                "local-estimate", f"ball {a.k} does not meet omega (density violation)"
            )
        worst_local = min(worst_local, local.log_lhs - local.log_rhs)
        sum_inter += local.intersection_mass_sq
        gamma_k = _gamma_floor(gamma_spec, a.ball.center_norm())
        worst_ball_density = min(
            worst_ball_density, local.intersection_measure / a.ball.volume - gamma_k
        )
        log_measured_factors.append(local.exponent * math.log(local.base))
    record(
        "local-estimate",
        worst_local >= -1e-9 and worst_ball_density >= -1e-12,
        log_lhs=-worst_local if active else None,
        log_rhs=0.0,
        n_checked=len(active),
        worst_ball_density_margin=worst_ball_density,
    )

    # summation with overlap kappa
    omega_mass = _mass_on_sensor(f, omega)
    record(
        "overlap-sum",
        sum_inter <= kappa * omega_mass * (1.0 + 1e-9) + 1e-300,
        log_lhs=math.log(sum_inter) if sum_inter > 0 else -math.inf,
        log_rhs=math.log(kappa * omega_mass) if omega_mass > 0 else -math.inf,
        sum_good_intersections=sum_inter,
        omega_mass=omega_mass,
        kappa=kappa,
    )

    error_term = eps * bound.D1**2
    dominated = total_mass <= error_term * (1.0 + 1e-12)
    log_main = (
        math.log(total_mass - error_term) if not dominated else -math.inf
    )

    # measured chain: ||f||^2 - eps D1^2 <= max_k(base^exp) kappa ||f||^2_omega
    if log_measured_factors:
        log_chain = max(log_measured_factors) + math.log(kappa)
        log_chain_rhs = log_chain + (math.log(omega_mass) if omega_mass > 0 else -math.inf)
        log_chain_rhs = np.logaddexp(log_chain_rhs, math.log(deg_mass) if deg_mass > 0 else -math.inf)
    else:
        log_chain_rhs = math.log(deg_mass) if deg_mass > 0 else -math.inf
    record(
        "measured-chain",
        dominated or log_main <= log_chain_rhs + 1e-9,
        log_lhs=log_main,
        log_rhs=float(log_chain_rhs),
        error_term_dominated=dominated,
    )

    # formal chain with the closed-form constants
    arg = (2.0 / (1.0 - s)) * math.log(2.0 * ub.d_value)
    power = _safe_exp_arg(arg)
    exponent_formal = 9.0 + (2.0 / _LOG2) * math.log(2.0 * kappa / eps) + (12.0 / _LOG2) * power
    gamma_min = min(
        (_gamma_floor(gamma_spec, a.ball.center_norm()) for a in active),
        default=_gamma_floor(gamma_spec, covering.target_radius),
    )
    log_formal_factor = exponent_formal * math.log(48.0 / gamma_min) + math.log(kappa)
    log_rhs_formal = np.logaddexp(
        log_formal_factor + (math.log(omega_mass) if omega_mass > 0 else -math.inf),
        math.log(error_term) if error_term > 0 else -math.inf,
    )
    log_lhs = math.log(total_mass) if total_mass > 0 else -math.inf
    formal_ok = log_lhs <= float(log_rhs_formal) + 1e-9
    d2_power = _safe_exp_arg((4.0 / (1.0 - s)) * math.log(bound.D2))
    bracket = 1.0 + math.log(1.0 / eps) + d2_power
    denom = bracket if kind == "uncertainty" else bracket**2
    k_formal = log_formal_factor / denom
    record(
        "formal-chain",
        formal_ok,
        log_lhs=log_lhs,
        log_rhs=float(log_rhs_formal),
        k_formal=k_formal,
        exponent_formal=exponent_formal,
        bracket=bracket,
    )

    if dominated or omega_mass <= 0:
        k_effective = None
    else:
        k_effective = (log_main - math.log(omega_mass)) / denom

    return UncertaintyReport(
        kind=kind,
        f_id=f_id,
        omega_id=_sensor_id(omega),
        eps=eps,
        gamma=gamma_spec,
        profile=profile,
        bound_summary={
            "D1": bound.D1,
            "D2": bound.D2,
            "nu": bound.nu,
            "mu": bound.mu,
            "tilde_D2": tilde.D2,
            "s": s,
        },
        r=tail.r,
        covering_summary={
            "n_balls": len(balls),
            "kappa": kappa,
            "target_radius": covering.target_radius,
            "coverage_samples": covering.coverage.n_samples,
            "coverage_misses": covering.coverage.n_uncovered,
        },
        n_good=n_good,
        n_uncertified=n_uncertified,
        n_bad=n_bad,
        n_degenerate=n_deg,
        ball_audits=tuple(audits),
        steps=tuple(steps),
        total_mass=total_mass,
        omega_mass=omega_mass,
        error_term=error_term,
        good_mass=good_mass,
        bad_mass=bad_mass,
        q0_mass_upper=bad_report.q0_mass_upper,
        log_lhs=log_lhs,
        log_rhs_formal=float(log_rhs_formal),
        k_formal=k_formal,
        k_effective=k_effective,
        error_term_dominated=dominated,
        passed=formal_ok,
    )


def verify_uncertainty(
    f: SpectralFunction,
    bound: GSBound,
    profile: RadiusProfile,
    omega,
    gamma: float,
    eps: float,
    m_cap: int = 24,
    threads: int = 1,
    f_id: str = "f",
    witness_grid: int = 1024,
) -> UncertaintyReport:
    """Audit the constant-density uncertainty principle on one instance.

    Runs tail localization, covering, good/bad classification, witnesses,
    polydisc sups, local estimates, and the overlap summation; each audited
    inequality becomes a step record. Raises PipelineError naming the failed
    step if any inequality breaks; with valid certificates that indicates a
    bug, since every step is a proved statement.
    """
    return _run_pipeline(
        f, bound, profile, omega, ("constant", float(gamma)), eps,
        kind="uncertainty", m_cap=m_cap, threads=threads, f_id=f_id,
        witness_grid=witness_grid,
    )


def verify_uncertainty_decay(
    f: SpectralFunction,
    bound: GSBound,
    profile: RadiusProfile,
    omega,
    gamma0: float,
    a: float,
    eps: float,
    m_cap: int = 24,
    threads: int = 1,
    f_id: str = "f",
    witness_grid: int = 1024,
) -> UncertaintyReport:
    """Audit the variant with polynomially decaying density gamma0/(1+|x|^a).

    Adds the per-center norm bound check and applies the per-ball density
    floor in the local-estimate base; the reported constant divides by the
    squared bracket (1 + log(1/eps) + D2^(4/(1-s)))^2. a = 0 degenerates to
    the constant-density audit at level gamma0/2.
    """
    return _run_pipeline(
        f, bound, profile, omega, ("decaying", float(gamma0), float(a)), eps,
        kind="uncertainty-decay", m_cap=m_cap, threads=threads, f_id=f_id,
        witness_grid=witness_grid,
    )


def k_effective_sweep(
    cases,
    m_cap: int = 24,
    threads: int = 1,
    reports_out: list | None = None,
    witness_grid: int = 1024,
) -> list:
    """Tabulate the empirical constant across a family of instances.

    cases: iterable of dicts with keys f, bound, profile, omega, gamma, eps
    and optionally f_id. Returns one row per case with the report's headline
    numbers and K_effective normalized by (1 + log(1/eps)). Pass a list as
    reports_out to also collect the full reports.
    """
    rows = []
    for case in cases:
        report = verify_uncertainty(
            case["f"],
            case["bound"],
            case["profile"],
            case["omega"],
            case["gamma"],
            case["eps"],
            m_cap=m_cap,
            threads=threads,
            f_id=case.get("f_id", "f"),
            witness_grid=witness_grid,
        )
        if reports_out is not None:
            reports_out.append(report)
        k_eff = report.k_effective
        norm = 1.0 + math.log(1.0 / report.eps)
        rows.append(
            {
                "f_id": report.f_id,
                "omega_id": report.omega_id,
                "eps": report.eps,
                "gamma": report.gamma[1],
                "k_effective": k_eff,
                "k_effective_normalized": None if k_eff is None else k_eff / norm,
                "k_formal": report.k_formal,
                "error_term_dominated": report.error_term_dominated,
                "n_good": report.n_good,
                "n_bad": report.n_bad,
                "passed": report.passed,
            }
        )
    return rows


def k_effective_spread(rows) -> dict:
    """Max/min ratio of the normalized constant over main-term-active rows."""
    vals = [
        r["k_effective_normalized"]
        for r in rows
        if r["k_effective_normalized"] is not None and r["k_effective_normalized"] > 0
    ]
    if not vals:
        return {"n_active": 0, "max": None, "min": None, "ratio": None}
    return {
        "n_active": len(vals),
        "max": max(vals),
        "min": min(vals),
        "ratio": max(vals) / min(vals),
    }
