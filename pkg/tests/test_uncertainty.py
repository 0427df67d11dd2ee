"""End-to-end pipeline audits: step records, constants, failure modes."""

import json
import math

import pytest

from gsaudit.geometry import (
    FullSpaceSensorSet,
    RadiusProfile,
    sensor_decaying_density,
    sensor_periodic,
)
from gsaudit.semigroup import GSBound, fit_gs_bound, harmonic_flow
from gsaudit.uncertainty import (
    PipelineError,
    k_effective_spread,
    k_effective_sweep,
    verify_uncertainty,
    verify_uncertainty_decay,
)

from conftest import random_expansion

STEP_ORDER = [
    "admissibility",
    "premise",
    "tail",
    "covering",
    "density",
    "classification",
    "bad-mass",
    "decomposition",
    "witness",
    "mk-bound",
    "local-estimate",
    "overlap-sum",
    "measured-chain",
    "formal-chain",
]


@pytest.fixture(scope="module")
def instance():
    g = random_expansion(7, 12)
    f = harmonic_flow(g, 0.3)
    bound = fit_gs_bound(f, 0.5, 0.5)
    profile = RadiusProfile(R=1.0, delta=0.0, eta=0.5, r0=1.0)
    return f, bound, profile


@pytest.fixture(scope="module")
def report_full(instance):
    f, bound, profile = instance
    omega = FullSpaceSensorSet(1, "full line")
    return verify_uncertainty(f, bound, profile, omega, gamma=1.0, eps=0.1, f_id="flow")


@pytest.fixture(scope="module")
def report_periodic(instance):
    f, bound, profile = instance
    return verify_uncertainty(
        f, bound, profile, sensor_periodic(1.0, 0.5), gamma=0.3, eps=0.1, f_id="flow"
    )


@pytest.fixture(scope="module")
def report_decay(instance):
    f, bound, profile = instance
    omega = sensor_decaying_density(0.5, 1.0, profile)
    return verify_uncertainty_decay(
        f, bound, profile, omega, gamma0=0.5, a=1.0, eps=0.1, f_id="flow"
    )


class TestFullSpaceSensor:
    def test_passes_with_small_constant(self, report_full):
        assert report_full.passed
        # omega = R gives ||f||_omega = ||f||, so the empirical constant is
        # essentially zero (slightly negative: the error term helps)
        assert report_full.k_effective is not None
        assert report_full.k_effective <= 0.01
        assert report_full.k_formal > 0.0

    def test_all_steps_recorded_in_order(self, report_full):
        assert [s.name for s in report_full.steps] == STEP_ORDER
        assert all(s.passed for s in report_full.steps)

    def test_omega_mass_is_total_mass(self, report_full, instance):
        f, _, _ = instance
        assert report_full.omega_mass == pytest.approx(f.norm_squared(), rel=1e-12)

    def test_report_roundtrips_through_json(self, report_full):
        data = json.loads(json.dumps(report_full.to_dict()))
        assert data["kind"] == "uncertainty"
        assert data["passed"] is True
        assert data["gamma"] == ["constant", 1.0]
        assert len(data["steps"]) == len(STEP_ORDER)
        assert len(data["ball_audits"]) == data["covering"]["n_balls"]


class TestPeriodicSensor:
    def test_pipeline_passes(self, report_periodic):
        assert report_periodic.passed
        assert report_periodic.n_good >= 1
        assert report_periodic.n_bad == 0

    def test_empirical_constant_positive(self, report_periodic):
        # omega is a strict subset, so recovering the mass costs a factor > 1
        assert report_periodic.k_effective > 0.0
        assert report_periodic.omega_mass < report_periodic.total_mass

    def test_formal_dominates_empirical(self, report_periodic):
        assert report_periodic.k_formal >= report_periodic.k_effective

    def test_chain_inequalities(self, report_periodic):
        for name in ("measured-chain", "formal-chain"):
            step = report_periodic.step(name)
            assert step.passed
            assert step.log_lhs <= step.log_rhs + 1e-9

    def test_overlap_sum_bounded_by_kappa(self, report_periodic):
        step = report_periodic.step("overlap-sum")
        kappa = step.detail["kappa"]
        assert kappa <= 4
        assert step.detail["sum_good_intersections"] <= kappa * step.detail["omega_mass"] * (
            1.0 + 1e-9
        )

    def test_good_ball_audits_fully_populated(self, report_periodic):
        checked = 0
        for audit in report_periodic.ball_audits:
            if not (audit.is_good and not audit.degenerate):
                continue
            if not audit.tail_certified:
                # unknown beyond m_cap: counted in the eps budget, not audited
                assert audit.log_mk_bruteforce is None
                continue
            checked += 1
            assert audit.witness_verified
            # closed ball: the witness may sit on the boundary
            assert abs(audit.x_k[0] - audit.ball.center[0]) <= audit.ball.radius + 1e-12
            assert audit.mk_consistent
            assert audit.local_passed
        assert checked == report_periodic.n_good

    def test_decomposition_accounts_for_all_mass(self, report_periodic):
        r = report_periodic
        covered = r.good_mass + r.bad_mass + r.q0_mass_upper
        deg = sum(a.mass_sq for a in r.ball_audits if a.degenerate)
        assert covered + deg >= r.total_mass * (1.0 - 1e-8) - 1e-12


class TestErrorTermDominated:
    def test_eps_one_dominates(self, instance):
        # the fitted bound anchors D1 at ||f||, so eps = 1 makes the error
        # term swallow the whole mass
        f, bound, profile = instance
        rep = verify_uncertainty(
            f, bound, profile, sensor_periodic(1.0, 0.5), gamma=0.3, eps=1.0
        )
        assert rep.passed
        assert rep.error_term_dominated
        assert rep.k_effective is None
        assert rep.total_mass <= rep.error_term * (1.0 + 1e-12)


class TestPipelineFailures:
    def test_understated_bound_fails_premise(self, instance):
        f, bound, profile = instance
        lie = GSBound(D1=bound.D1 * 1e-3, D2=bound.D2, nu=bound.nu, mu=bound.mu)
        with pytest.raises(PipelineError) as err:
            verify_uncertainty(f, lie, profile, FullSpaceSensorSet(1), gamma=1.0, eps=0.1)
        assert err.value.step == "premise"

    def test_overstated_density_fails(self, instance):
        # periodic fill 1/2 has worst window ratio 1/3 on this profile, so
        # claiming gamma = 0.45 must abort at the density certificate
        f, bound, profile = instance
        with pytest.raises(PipelineError) as err:
            verify_uncertainty(
                f, bound, profile, sensor_periodic(1.0, 0.5), gamma=0.45, eps=0.1
            )
        assert err.value.step == "density"

    def test_supercritical_s_rejected(self, instance):
        f, bound, _ = instance
        steep = RadiusProfile(R=1.0, delta=1.0, eta=0.5, r0=1.0)
        # nu = mu = 1/2 and delta = 1 give s = 1, outside the theorem range
        with pytest.raises(PipelineError) as err:
            verify_uncertainty(f, bound, steep, FullSpaceSensorSet(1), gamma=1.0, eps=0.1)
        assert err.value.step == "admissibility"

    @pytest.mark.parametrize("eps", [0.0, 1.5])
    def test_eps_out_of_range(self, instance, eps):
        f, bound, profile = instance
        with pytest.raises(PipelineError) as err:
            verify_uncertainty(f, bound, profile, FullSpaceSensorSet(1), gamma=1.0, eps=eps)
        assert err.value.step == "admissibility"

    def test_gamma_out_of_range(self, instance):
        f, bound, profile = instance
        with pytest.raises(PipelineError) as err:
            verify_uncertainty(f, bound, profile, FullSpaceSensorSet(1), gamma=0.0, eps=0.1)
        assert err.value.step == "admissibility"

    def test_two_dimensional_input_rejected(self):
        f = random_expansion(3, 4, dim=2)
        bound = GSBound(D1=10.0, D2=2.0, nu=0.25, mu=0.25)
        with pytest.raises(PipelineError) as err:
            verify_uncertainty(
                f, bound, RadiusProfile(), FullSpaceSensorSet(2), gamma=1.0, eps=0.1
            )
        assert err.value.step == "admissibility"


class TestOmegaMonotonicity:
    def test_larger_sensor_needs_smaller_constant(self, instance, report_periodic):
        # fill 3/4 contains fill 1/2 cell by cell, so the same gamma
        # certificate holds and the empirical constant cannot grow
        f, bound, profile = instance
        bigger = verify_uncertainty(
            f, bound, profile, sensor_periodic(1.0, 0.75), gamma=0.3, eps=0.1
        )
        assert bigger.passed
        assert bigger.omega_mass >= report_periodic.omega_mass
        assert bigger.k_effective <= report_periodic.k_effective + 1e-12


class TestDecayVariant:
    def test_pipeline_passes(self, report_decay):
        assert report_decay.passed
        assert report_decay.kind == "uncertainty-decay"
        assert report_decay.gamma == ("decaying", 0.5, 1.0)
        assert report_decay.k_effective > 0.0

    def test_center_norm_bound_step(self, report_decay):
        step = report_decay.step("center-norm-bound")
        assert step.passed
        assert step.log_lhs <= step.log_rhs + 1e-12

    def test_per_ball_density_floor_respected(self, report_decay):
        step = report_decay.step("local-estimate")
        assert step.detail["worst_ball_density_margin"] >= -1e-12

    def test_squared_bracket_shrinks_constant(self, instance, report_decay):
        # same instance through the constant-density audit at the worst
        # per-ball level: the decay constant divides by the squared bracket,
        # so it comes out much smaller
        assert report_decay.k_effective < 0.01

    def test_a_zero_degenerates_to_constant_density(self, instance):
        f, bound, profile = instance
        rep = verify_uncertainty_decay(
            f, bound, profile, sensor_periodic(1.0, 0.5), gamma0=0.5, a=0.0, eps=0.1
        )
        assert rep.passed
        # gamma0 / (1 + |x|^0) = gamma0 / 2 everywhere
        assert rep.step("density").detail["min_ratio"] >= 0.25
        step = rep.step("center-norm-bound")
        assert step.log_lhs == pytest.approx(math.log(2.0), abs=1e-12)
        assert step.log_rhs == pytest.approx(math.log(2.0), abs=1e-12)

    def test_negative_a_rejected(self, instance):
        f, bound, profile = instance
        with pytest.raises(PipelineError) as err:
            verify_uncertainty_decay(
                f, bound, profile, FullSpaceSensorSet(1), gamma0=0.5, a=-1.0, eps=0.1
            )
        assert err.value.step == "admissibility"


class TestSweep:
    def test_rows_and_spread(self, instance):
        f, bound, profile = instance
        periodic = sensor_periodic(1.0, 0.5)
        full = FullSpaceSensorSet(1, "full line")
        cases = [
            {"f": f, "bound": bound, "profile": profile, "omega": omega, "gamma": g, "eps": eps}
            for (omega, g) in ((periodic, 0.3), (full, 1.0))
            for eps in (0.1, 1.0)
        ]
        rows = k_effective_sweep(cases)
        assert len(rows) == 4
        assert all(r["passed"] for r in rows)
        for r in rows:
            if r["eps"] == 1.0:
                assert r["error_term_dominated"]
                assert r["k_effective"] is None
        spread = k_effective_spread(rows)
        # only the periodic eps = 0.1 row has a positive constant
        assert spread["n_active"] == 1
        assert spread["ratio"] == pytest.approx(1.0)

    def test_spread_of_empty_sweep(self):
        assert k_effective_spread([])["ratio"] is None
