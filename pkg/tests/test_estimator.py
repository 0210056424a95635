from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from secure_estimation.components import attack_sim, estimator, sat_core, strong_obs
from secure_estimation.constants.estimation_pipeline import METHODS
from secure_estimation.entity.artifact_entity import CertElement
from secure_estimation.entity.model_entity import BoolAssignment
from secure_estimation.exceptions.exception import InfeasibilityError, InvalidInputError, StructuralError
from secure_estimation.pipelines.benchmark_pipeline import relative_error
from tests.conftest import first_sso_system

R, S = 1, 1


def failing_hypotheses(theory, m, p, r, s):
    """Toutes les hypothèses |Γu| ≤ r, |Γ̄y| ≤ s rejetées par le test de cohérence."""
    for ku in range(r + 1):
        for gamma_u in combinations(range(m), ku):
            for ky in range(s + 1):
                for attacked in combinations(range(p), ky):
                    gamma_y = [i for i in range(p) if i not in attacked]
                    if not theory.consistent(gamma_u, gamma_y):
                        yield list(gamma_u), gamma_y


def elements_of(certificate):
    return ([CertElement("input", j) for j in certificate.free_inputs]
            + [CertElement("output", i) for i in certificate.trusted_outputs])


def test_true_hypothesis_is_consistent(sso_system, attacked_window):
    window, truth, scenario = attacked_window(0)
    result = estimator.test_consistency(sso_system, window, scenario.attacked_inputs,
                                        scenario.attacked_outputs.complement())
    assert result.is_sat
    assert result.residual <= result.epsilon_used
    assert relative_error(result.x_hat, truth.x_at_estimate_time) <= 1e-6


def test_consistency_requires_trusted_outputs(sso_system, attacked_window):
    window, _, _ = attacked_window(0)
    with pytest.raises(InvalidInputError):
        estimator.test_consistency(sso_system, window, [0], [])


def test_attack_free_scenario_is_accepted_first(sso_system, attacked_window):
    window, truth, _ = attacked_window(1, attacked_inputs=[], attacked_outputs=[])
    report = estimator.estimate(sso_system, window, R, S)
    assert not any(report.identified.b) and not any(report.identified.c)
    assert report.sat_calls == 1
    assert relative_error(report.x_hat, truth.x_at_estimate_time) <= 1e-6


@pytest.mark.parametrize("method", METHODS)
def test_exact_recovery_for_every_method(sso_system, attacked_window, method):
    for seed in range(8):
        window, truth, _ = attacked_window(seed)
        report = estimator.estimate(sso_system, window, R, S, method=method)
        assert relative_error(report.x_hat, truth.x_at_estimate_time) <= 1e-6
        assert sum(report.identified.b) <= R and sum(report.identified.c) <= S


def test_final_assignment_satisfies_every_emitted_certificate(sso_system, attacked_window):
    window, _, _ = attacked_window(5)
    solver = sat_core.new_solver(sso_system.m, sso_system.p, R, S)
    report = estimator.estimate(sso_system, window, R, S, method="both", solver=solver)
    assert solver.satisfies(report.identified)
    assert report.certificates_added == len(solver.clauses) == len(report.certificates)
    assert report.sat_calls <= estimator.model_count(sso_system.m, sso_system.p, R, S)


def test_brute_force_agrees_with_lazy_search(sso_system, attacked_window):
    window, truth, _ = attacked_window(3)
    lazy = estimator.estimate(sso_system, window, R, S)
    exhaustive = estimator.estimate_brute_force(sso_system, window, R, S)
    np.testing.assert_allclose(lazy.x_hat, exhaustive.x_hat, atol=1e-6)
    assert relative_error(exhaustive.x_hat, truth.x_at_estimate_time) <= 1e-6


def test_infeasible_budget_raises_with_residual_floor(sso_system, attacked_window):
    window, _, _ = attacked_window(2)
    with pytest.raises(InfeasibilityError) as info:
        estimator.estimate(sso_system, window, 0, 0, check_sso=False)
    assert info.value.residual_floor > 0.0


def test_structural_precondition_is_enforced(non_sso_system):
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(non_sso_system, 1, 1, seed=0)
    window, _ = attack_sim.run_scenario(non_sso_system, scenario, x0, u_ctrl, T)
    window = attack_sim.remove_ctrl_effect(non_sso_system, window)
    with pytest.raises(StructuralError) as info:
        estimator.estimate(non_sso_system, window, 1, 1)
    assert info.value.gamma_u is not None and info.value.gamma_y is not None


def test_unknown_method_is_rejected(sso_system, attacked_window):
    window, _, _ = attacked_window(0)
    with pytest.raises(InvalidInputError):
        estimator.estimate(sso_system, window, R, S, method="exhaustive")


def test_certificates_are_sound_irreducible_and_bounded(sso_system, attacked_window):
    m, p = sso_system.m, sso_system.p
    checked = 0
    for seed in range(4):
        window, _, _ = attacked_window(seed)
        theory = estimator.TheorySolver(sso_system, window)
        for gamma_u, gamma_y in failing_hypotheses(theory, m, p, R, S):
            checked += 1
            for certificate in theory.certificate_method1(gamma_u, gamma_y, R, S):
                assert not theory.consistent(certificate.suspected_inputs(), certificate.trusted_outputs)
                assert len(certificate.trusted_outputs) <= p - 2 * S + 1
                assert certificate.size >= m + 1
            for certificate in theory.certificate_method2(gamma_u, gamma_y):
                elements = elements_of(certificate)
                assert not theory.consistent_elements(elements)
                for k in range(len(elements)):
                    assert theory.consistent_elements(elements[:k] + elements[k + 1:])
                assert certificate.size >= m + 1
    assert checked > 0


def test_method2_rejects_consistent_hypothesis(sso_system, attacked_window):
    window, _, scenario = attacked_window(0)
    with pytest.raises(InvalidInputError):
        estimator.certificate_method2(sso_system, window, scenario.attacked_inputs,
                                      scenario.attacked_outputs.complement())


def test_method2_parallel_orderings_match_serial(sso_system, attacked_window):
    window, _, _ = attacked_window(4)
    theory = estimator.TheorySolver(sso_system, window)
    gamma_u, gamma_y = next(failing_hypotheses(theory, sso_system.m, sso_system.p, R, S))
    serial = theory.certificate_method2(gamma_u, gamma_y)
    parallel = theory.certificate_method2(gamma_u, gamma_y, workers=3)
    assert serial == parallel
    assert 1 <= len(serial) <= 3


def test_output_slacks_partition_the_residual(sso_system, attacked_window):
    window, _, _ = attacked_window(6)
    theory = estimator.TheorySolver(sso_system, window)
    gamma_u, gamma_y = next(failing_hypotheses(theory, sso_system.m, sso_system.p, R, S))
    result = theory.check(gamma_u, gamma_y)
    raw, normalized = theory.output_slacks(gamma_u, gamma_y, result.x_hat, result.u_hat)
    assert sum(v ** 2 for v in raw.values()) == pytest.approx(result.residual ** 2, rel=1e-9)

    order = estimator.slack_outputs(sso_system, window, gamma_u, gamma_y, result.x_hat, result.u_hat)
    assert sorted(order) == sorted(gamma_y)
    assert normalized[order[0]] == max(normalized.values())

    inputs = estimator.slack_inputs(sso_system, window, gamma_u, gamma_y, result.x_hat, result.u_hat)
    assert sorted(inputs) == [j for j in range(sso_system.m) if j not in gamma_u]


def test_naive_certificate_and_model_count():
    certificate = estimator.naive_certificate([True, False], [False, True, False])
    assert certificate.free_inputs.indices == (1,)
    assert certificate.trusted_outputs.indices == (0, 2)
    assert estimator.model_count(2, 3, 1, 1) == 12


@given(st.integers(min_value=0, max_value=50), st.data())
def test_consistent_fits_merge_over_output_unions(sso_system, seed, data):
    m, p = sso_system.m, sso_system.p
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(sso_system, R, S, seed)
    window, _ = attack_sim.run_scenario(sso_system, scenario, x0, u_ctrl, T)
    theory = estimator.TheorySolver(sso_system, attack_sim.remove_ctrl_effect(sso_system, window))

    gamma_u = sorted(data.draw(st.sets(st.integers(0, m - 1), max_size=2 * R)))
    temp = sorted(data.draw(st.sets(st.integers(0, p - 1), min_size=p - 2 * S, max_size=p - 2 * S)))
    first = set(temp) | data.draw(st.sets(st.integers(0, p - 1)))
    second = set(temp) | data.draw(st.sets(st.integers(0, p - 1)))
    if theory.consistent(gamma_u, sorted(first)) and theory.consistent(gamma_u, sorted(second)):
        assert theory.consistent(gamma_u, sorted(first | second))


def test_sso_precondition_holds_for_fixture(sso_system):
    assert strong_obs.is_sparse_strongly_observable(sso_system, 2 * R, 2 * S).holds


@pytest.mark.slow
def test_exact_recovery_on_many_random_systems():
    rng = np.random.default_rng(100)
    for trial in range(100):
        r, s = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        m = int(rng.integers(2 * r, 7))
        p = int(rng.integers(2 * r + 2 * s + 2, 13))
        n = int(rng.integers(2, 9))
        system = first_sso_system(n, m, p, r, s, start=1000 * trial)
        scenario, x0, u_ctrl, T = attack_sim.prepare_run(system, r, s, seed=trial)
        window, truth = attack_sim.run_scenario(system, scenario, x0, u_ctrl, T)
        report = estimator.estimate(system, attack_sim.remove_ctrl_effect(system, window), r, s,
                                    check_sso=False)
        assert relative_error(report.x_hat, truth.x_at_estimate_time) <= 1e-6


@pytest.mark.slow
def test_scale_point_terminates_within_call_budget():
    system = attack_sim.random_system(40, 10, 24, seed=0)
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(system, 2, 4, seed=0)
    window, _ = attack_sim.run_scenario(system, scenario, x0, u_ctrl, T)
    report = estimator.estimate(system, attack_sim.remove_ctrl_effect(system, window), 2, 4, check_sso=False)
    assert report.sat_calls <= 5000


def blocks(certificate, gamma_u, gamma_y):
    """Vrai si la clause du certificat exclut l'hypothèse (Γu, Γy)."""
    return (not set(gamma_u) & set(certificate.free_inputs.indices)
            and set(certificate.trusted_outputs.indices) <= set(gamma_y))


@given(st.integers(min_value=0, max_value=50), st.data())
def test_consistency_is_monotone_along_hypothesis_chains(sso_system, seed, data):
    m, p = sso_system.m, sso_system.p
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(sso_system, R, S, seed)
    window, _ = attack_sim.run_scenario(sso_system, scenario, x0, u_ctrl, T)
    theory = estimator.TheorySolver(sso_system, attack_sim.remove_ctrl_effect(sso_system, window))

    true_u = set(scenario.attacked_inputs.indices)
    true_y = set(scenario.attacked_outputs.complement().indices)
    more_inputs = true_u | data.draw(st.sets(st.integers(0, m - 1)))
    fewer_outputs = data.draw(st.sets(st.sampled_from(sorted(true_y)), min_size=1))
    assert theory.consistent(sorted(more_inputs), sorted(fewer_outputs))

    gamma_u, gamma_y = next(failing_hypotheses(theory, m, p, R, S))
    fewer_inputs = data.draw(st.sets(st.sampled_from(gamma_u))) if gamma_u else set()
    more_outputs = set(gamma_y) | data.draw(st.sets(st.integers(0, p - 1)))
    assert not theory.consistent(sorted(fewer_inputs), sorted(more_outputs))


@given(st.integers(min_value=0, max_value=40))
def test_certificates_meet_their_criteria_on_generated_systems(start):
    system = first_sso_system(3, 3, 7, R, S, start=start)
    m, p = system.m, system.p
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(system, R, S, seed=start)
    window, _ = attack_sim.run_scenario(system, scenario, x0, u_ctrl, T)
    theory = estimator.TheorySolver(system, attack_sim.remove_ctrl_effect(system, window))
    true_u = scenario.attacked_inputs.indices
    true_y = scenario.attacked_outputs.complement().indices

    gamma_u, gamma_y = next(failing_hypotheses(theory, m, p, R, S))
    method1 = theory.certificate_method1(gamma_u, gamma_y, R, S)
    method2 = theory.certificate_method2(gamma_u, gamma_y)
    for certificate in method1 + method2:
        assert not theory.consistent(certificate.suspected_inputs(), certificate.trusted_outputs)
        assert blocks(certificate, gamma_u, gamma_y)
        assert not blocks(certificate, true_u, true_y)
        assert certificate.size >= m + 1
    for certificate in method1:
        assert len(certificate.trusted_outputs) <= p - 2 * S + 1


def test_budget_leaving_no_trusted_output_is_rejected(sso_system, attacked_window):
    window, _, _ = attacked_window(0)
    with pytest.raises(InvalidInputError):
        estimator.estimate(sso_system, window, R, sso_system.p, check_sso=False)
    with pytest.raises(InvalidInputError):
        estimator.estimate_brute_force(sso_system, window, R, sso_system.p)
    with pytest.raises(InvalidInputError):
        estimator.estimate(sso_system, window, sso_system.m + 1, S, check_sso=False)


class StuckSolver(sat_core.SolverState):
    """Propose indéfiniment l'hypothèse sans attaque, sans jamais s'épuiser."""

    def next_assignment(self):
        return BoolAssignment((False,) * self.m, (False,) * self.p)


def test_iteration_cap_turns_a_looping_solver_into_an_error(sso_system, attacked_window):
    window, _, _ = attacked_window(2)
    solver = StuckSolver(sso_system.m, sso_system.p, R, S)
    cap = estimator.model_count(sso_system.m, sso_system.p, R, S) + 1
    with pytest.raises(InfeasibilityError) as info:
        estimator.estimate(sso_system, window, R, S, method="naive", check_sso=False, solver=solver)
    assert f"plafond de sécurité de {cap} tests" in str(info.value)
    assert info.value.residual_floor > 0.0
