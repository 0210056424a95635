import pytest
from hypothesis import settings

from secure_estimation.components import attack_sim, strong_obs


settings.register_profile("fast", max_examples=15, deadline=None, derandomize=True)
settings.load_profile("fast")

SMALL_DIMS = (3, 3, 7)
SMALL_BUDGET = (1, 1)


def first_sso_system(n, m, p, r, s, start=0):
    """Premier système aléatoire (2r, 2s)-fortement observable à partir de la graine `start`."""
    for seed in range(start, start + 50):
        system = attack_sim.random_system(n, m, p, seed)
        if strong_obs.is_sparse_strongly_observable(system, 2 * r, 2 * s).holds:
            return system
    raise RuntimeError(f"aucun système ({2 * r},{2 * s})-SSO pour {(n, m, p)}")


@pytest.fixture(scope="session")
def sso_system():
    return first_sso_system(*SMALL_DIMS, *SMALL_BUDGET)


@pytest.fixture(scope="session")
def non_sso_system():
    # deux entrées inconnues compensent toujours une seule sortie de confiance (D non nul)
    return attack_sim.random_system(2, 2, 3, seed=0)


@pytest.fixture
def attacked_window(sso_system):
    """Fabrique : fenêtre (effet de commande retiré), vérité terrain et scénario pour une graine."""

    def make(seed, r=SMALL_BUDGET[0], s=SMALL_BUDGET[1], attacked_inputs=None, attacked_outputs=None):
        scenario, x0, u_ctrl, T = attack_sim.prepare_run(
            sso_system, r, s, seed, attacked_inputs=attacked_inputs, attacked_outputs=attacked_outputs)
        window, truth = attack_sim.run_scenario(sso_system, scenario, x0, u_ctrl, T)
        return attack_sim.remove_ctrl_effect(sso_system, window), truth, scenario

    return make

