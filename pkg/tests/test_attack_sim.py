import numpy as np
import pytest

from secure_estimation.components import attack_sim, lti_model, strong_obs
from secure_estimation.exceptions.exception import GenerationFailureError, InvalidInputError


def test_random_system_is_deterministic_and_stable():
    first = attack_sim.random_system(4, 2, 5, seed=9)
    second = attack_sim.random_system(4, 2, 5, seed=9)
    for key in ("A", "B", "C", "D"):
        np.testing.assert_array_equal(getattr(first, key), getattr(second, key))
    assert attack_sim.spectral_radius(first.A) <= 1.0 + 1e-12
    assert not np.array_equal(first.A, attack_sim.random_system(4, 2, 5, seed=10).A)


def test_random_system_rejects_empty_dimensions():
    with pytest.raises(InvalidInputError):
        attack_sim.random_system(0, 1, 1, seed=0)


def test_random_scenario_respects_budget_and_support(sso_system):
    scenario = attack_sim.random_scenario(sso_system, 1, 2, seed=4, T=5)
    assert len(scenario.attacked_inputs) == 1
    assert len(scenario.attacked_outputs) == 2
    assert scenario.w_stream.shape == (5, sso_system.m)
    assert scenario.a_stream.shape == (5, sso_system.p)
    off_inputs = [j for j in range(sso_system.m) if j not in scenario.attacked_inputs]
    off_outputs = [i for i in range(sso_system.p) if i not in scenario.attacked_outputs]
    assert not scenario.w_stream[:, off_inputs].any()
    assert not scenario.a_stream[:, off_outputs].any()


def test_scenario_from_supports_rejects_over_budget(sso_system):
    with pytest.raises(InvalidInputError):
        attack_sim.scenario_from_supports(sso_system, [0, 1], [], 1, 1, seed=0)


def test_run_scenario_window_and_ground_truth(sso_system):
    scenario, x0, u_ctrl, _ = attack_sim.prepare_run(sso_system, 1, 1, seed=3, T=6)
    window, truth = attack_sim.run_scenario(sso_system, scenario, x0, u_ctrl, 6)
    n, p = sso_system.n, sso_system.p
    assert window.tau == n and window.t_end == 5
    assert window.Y.shape == (n * p,)
    np.testing.assert_array_equal(truth.x_at_estimate_time, truth.x_trajectory[6 - n])
    observed = truth.y_system + scenario.a_stream
    np.testing.assert_allclose(window.Y, observed[6 - n:].reshape(-1))


def test_run_scenario_rejects_short_horizon(sso_system):
    scenario, x0, u_ctrl, _ = attack_sim.prepare_run(sso_system, 1, 1, seed=3, T=2)
    with pytest.raises(InvalidInputError):
        attack_sim.run_scenario(sso_system, scenario, x0, u_ctrl, 2)


def test_remove_ctrl_effect_matches_zero_command_simulation(sso_system):
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(sso_system, 1, 1, seed=8)
    window, _ = attack_sim.run_scenario(sso_system, scenario, x0, u_ctrl, T)
    zero_window, _ = attack_sim.run_scenario(sso_system, scenario, x0, np.zeros_like(u_ctrl), T)
    cleaned = attack_sim.remove_ctrl_effect(sso_system, window)
    np.testing.assert_allclose(cleaned.Y, zero_window.Y, atol=1e-10)
    assert not cleaned.U_ctrl.any()


def test_prepare_run_is_deterministic(sso_system):
    first = attack_sim.prepare_run(sso_system, 1, 1, seed=12)
    second = attack_sim.prepare_run(sso_system, 1, 1, seed=12)
    np.testing.assert_array_equal(first[1], second[1])
    np.testing.assert_array_equal(first[0].a_stream, second[0].a_stream)


def test_prepare_run_with_explicit_streams_infers_supports(sso_system):
    T, m, p = sso_system.n, sso_system.m, sso_system.p
    w = np.zeros((T, m))
    w[:, 1] = 1.0
    scenario, _, _, _ = attack_sim.prepare_run(sso_system, 1, 1, seed=0, w_stream=w)
    assert scenario.attacked_inputs.indices == (1,)
    assert scenario.attacked_outputs.indices == ()

    with pytest.raises(InvalidInputError):
        attack_sim.prepare_run(sso_system, 1, 1, seed=0, w_stream=w, attacked_inputs=[0])
    with pytest.raises(InvalidInputError):
        attack_sim.prepare_run(sso_system, 1, 1, seed=0, a_stream=np.ones((T, p)))


def test_attack_budget():
    assert attack_sim.attack_budget(10, 24) == (2, 4)
    assert attack_sim.attack_budget(4, 10) == (1, 2)
    assert attack_sim.attack_budget(2, 3) == (1, 1)


def test_plant_continuous_model_is_stable_with_pattern():
    Ac, Bc, Cc = attack_sim.plant_continuous(seed=1)
    assert Ac.shape == (8, 8) and Bc.shape == (8, 4) and Cc.shape == (10, 8)
    assert np.max(np.linalg.eigvals(Ac).real) < 0.0
    assert not Bc[:4].any()
    assert not Cc[0, :4].any()


def test_plant_system_reports_generation_failure():
    with pytest.raises(GenerationFailureError):
        attack_sim.plant_system(seed=0, max_redraws=0)


@pytest.mark.slow
def test_plant_system_is_sparse_strongly_observable():
    system = attack_sim.plant_system(seed=0)
    assert (system.n, system.m, system.p) == (8, 4, 10)
    assert not system.D.any()
    assert strong_obs.is_sparse_strongly_observable(system, 2, 4).holds


def test_discretized_plant_is_stable():
    Ac, Bc, _ = attack_sim.plant_continuous(seed=2)
    A, B = lti_model.discretize_zoh(Ac, Bc, 5.0)
    assert attack_sim.spectral_radius(A) < 1.0
    assert B.shape == (8, 4)
