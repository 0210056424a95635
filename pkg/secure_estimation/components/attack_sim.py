"""
Génération et exécution de scénarios d'attaque : systèmes aléatoires, usine chimique
(motif de parcimonie), injection des attaques, capture de la fenêtre d'observation et
suppression de l'effet de l'entrée commandée.
"""
import sys
from typing import Optional, Tuple

import numpy as np

from secure_estimation.components import lti_model, numerics, strong_obs
from secure_estimation.constants import estimation_pipeline
from secure_estimation.entity.artifact_entity import AttackScenario, GroundTruth, ObservationWindow
from secure_estimation.entity.config_entity import TolerancePolicy
from secure_estimation.entity.model_entity import LtiSystem, Quadruple
from secure_estimation.exceptions.exception import (GenerationFailureError, InvalidInputError,
                                                    ModelAssumptionError)
from secure_estimation.logging.logger import logging


def spectral_radius(A) -> float:
    A = numerics.as_matrix(A, "A")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def random_system(n: int, m: int, p: int, seed: int,
                  pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> LtiSystem:
    """
    Système aléatoire à entrées i.i.d. U(0, 1) ; A est ramenée à un rayon spectral de 1
    lorsqu'il dépasse 1. Déterministe pour une graine donnée.
    """
    if min(n, m, p) < 1:
        raise InvalidInputError(f"n, m, p doivent être >= 1, reçu ({n}, {m}, {p})", sys)
    rng = np.random.default_rng(seed)
    A = rng.uniform(size=(n, n))
    B = rng.uniform(size=(n, m))
    C = rng.uniform(size=(p, n))
    D = rng.uniform(size=(p, m))
    rho = spectral_radius(A)
    if rho > 1.0:
        A = A / rho
    return lti_model.make_system(A, B, C, D, pol)


def scenario_from_supports(system: Quadruple, attacked_inputs, attacked_outputs, r: int, s: int,
                           seed: int, T: Optional[int] = None) -> AttackScenario:
    """
    Scénario à supports imposés : signaux w et a i.i.d. N(0, 1) sur les canaux attaqués,
    nuls ailleurs, rééchantillonnés à chaque pas.
    """
    T = system.n if T is None else T
    gu = lti_model.make_index_set(attacked_inputs, system.m)
    gy = lti_model.make_index_set(attacked_outputs, system.p)
    if len(gu) > r or len(gy) > s:
        raise InvalidInputError(
            f"supports ({len(gu)}, {len(gy)}) au-delà du budget (r, s) = ({r}, {s})", sys)
    rng = np.random.default_rng(seed)
    w = np.zeros((T, system.m))
    a = np.zeros((T, system.p))
    w[:, list(gu.indices)] = rng.standard_normal((T, len(gu)))
    a[:, list(gy.indices)] = rng.standard_normal((T, len(gy)))
    return AttackScenario(gu, gy, r, s, w, a, seed)


def random_scenario(system: Quadruple, r: int, s: int, seed: int, T: Optional[int] = None) -> AttackScenario:
    """Supports tirés uniformément parmi les sous-ensembles de tailles exactes r et s."""
    if not 0 <= r <= system.m or not 0 <= s <= system.p:
        raise InvalidInputError(f"(r, s) = ({r}, {s}) hors bornes", sys)
    rng = np.random.default_rng(seed)
    attacked_inputs = sorted(rng.choice(system.m, size=r, replace=False).tolist())
    attacked_outputs = sorted(rng.choice(system.p, size=s, replace=False).tolist())
    # les signaux utilisent un flux dérivé pour rester indépendants du tirage des supports
    return scenario_from_supports(system, attacked_inputs, attacked_outputs, r, s,
                                  seed=int(rng.integers(0, 2 ** 31 - 1)), T=T)


def run_scenario(system: Quadruple, scen: AttackScenario, x0, u_ctrl, T: int,
                 tau: Optional[int] = None) -> Tuple[ObservationWindow, GroundTruth]:
    """
    Simule x(t+1) = Ax + B(u + w), y = Cx + D(u + w) + a sur T pas et retourne la
    dernière fenêtre de tau = n échantillons ainsi que l'état x(t_end − tau + 1).
    """
    n, m, p = system.n, system.m, system.p
    tau = n if tau is None else tau
    if T < tau:
        raise InvalidInputError(f"T = {T} < tau = {tau}", sys)
    u_ctrl = np.asarray(u_ctrl, dtype=float).reshape(-1, m)
    w = np.asarray(scen.w_stream, dtype=float).reshape(-1, m)
    a = np.asarray(scen.a_stream, dtype=float).reshape(-1, p)
    if min(u_ctrl.shape[0], w.shape[0], a.shape[0]) < T:
        raise InvalidInputError(f"flux trop courts pour T = {T}", sys)

    x_seq, y_system = lti_model.simulate(system, x0, u_ctrl[:T] + w[:T], T)
    y_observed = y_system + a[:T]
    window = ObservationWindow(
        Y=y_observed[T - tau:T].reshape(-1).copy(),
        U_ctrl=u_ctrl[T - tau:T].reshape(-1).copy(),
        t_end=T - 1,
        tau=tau,
    )
    truth = GroundTruth(x_at_estimate_time=x_seq[T - tau].copy(), x_trajectory=x_seq, y_system=y_system)
    return window, truth


def observed_streams(system: Quadruple, scen: AttackScenario, x0, u_ctrl, T: int) -> Tuple[np.ndarray, np.ndarray]:
    """Flux observés (u commandé, y mesuré) sur T pas, tels que les voit le contrôleur."""
    u_ctrl = np.asarray(u_ctrl, dtype=float).reshape(-1, system.m)[:T]
    _, y_system = lti_model.simulate(system, x0, u_ctrl + scen.w_stream[:T], T)
    return u_ctrl.copy(), y_system + scen.a_stream[:T]


def remove_ctrl_effect(system: Quadruple, win: ObservationWindow) -> ObservationWindow:
    """Y′ = Y − 𝒩·U_ctrl ; l'entrée nominale est ensuite considérée nulle."""
    inv = lti_model.batch_matrices(system, tau=win.tau).inv
    U = np.asarray(win.U_ctrl, dtype=float)
    if U.shape[0] != inv.shape[1] or win.Y.shape[0] != inv.shape[0]:
        raise InvalidInputError("fenêtre incohérente avec le système", sys)
    return ObservationWindow(Y=win.Y - inv @ U, U_ctrl=np.zeros_like(U), t_end=win.t_end, tau=win.tau)


def _draw_pattern(rng: np.random.Generator, pattern, scale: float) -> np.ndarray:
    mask = np.asarray(pattern, dtype=float)
    magnitudes = rng.uniform(0.5, 1.5, size=mask.shape)
    signs = rng.choice([-1.0, 1.0], size=mask.shape)
    return mask * magnitudes * signs * scale


def _draw_plant_continuous(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    Ac = _draw_pattern(rng, estimation_pipeline.PLANT_A_PATTERN, 0.05)
    # diagonale dissipative, puis décalage si une valeur propre reste instable
    np.fill_diagonal(Ac, -np.abs(np.diag(Ac)) * 2.0)
    alpha = float(np.max(np.linalg.eigvals(Ac).real))
    if alpha > -0.01:
        Ac = Ac - (alpha + 0.02) * np.eye(Ac.shape[0])
    Bc = _draw_pattern(rng, estimation_pipeline.PLANT_B_PATTERN, 1.0)
    Cc = _draw_pattern(rng, estimation_pipeline.PLANT_C_PATTERN, 1.0)
    return Ac, Bc, Cc


def plant_continuous(seed: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrices continues (Ac, Bc, Cc) du premier tirage pour une graine donnée."""
    return _draw_plant_continuous(np.random.default_rng(seed))


def plant_system(seed: int, pol: TolerancePolicy = numerics.DEFAULT_POLICY,
                 max_redraws: int = estimation_pipeline.PLANT_MAX_REDRAWS) -> LtiSystem:
    """
    Usine chimique simplifiée (n=8, m=4, p=10) au motif de parcimonie imposé, discrétisée
    avec un pas de 5 s, retirée tant qu'elle n'est pas (2, 4)-fortement observable.

    Raises:
        GenerationFailureError: après `max_redraws` tirages infructueux.
    """
    rng = np.random.default_rng(seed)
    n, m, p = (estimation_pipeline.PLANT_STATE_DIM, estimation_pipeline.PLANT_INPUT_DIM,
               estimation_pipeline.PLANT_OUTPUT_DIM)
    for attempt in range(1, max_redraws + 1):
        Ac, Bc, Cc = _draw_plant_continuous(rng)
        A, B = lti_model.discretize_zoh(Ac, Bc, estimation_pipeline.PLANT_SAMPLING_TIME)
        try:
            system = lti_model.make_system(A, B, Cc, np.zeros((p, m)), pol)
        except ModelAssumptionError:
            continue
        report = strong_obs.is_sparse_strongly_observable(
            system, estimation_pipeline.PLANT_SSO_R, estimation_pipeline.PLANT_SSO_S, pol)
        if report.holds:
            logging.info(f"Usine générée (graine {seed}) après {attempt} tirage(s)")
            return system
        logging.debug(f"Tirage {attempt} rejeté: témoin {report.witness_gamma_u}, {report.witness_gamma_y}")
    raise GenerationFailureError(
        f"aucune usine (2,4)-fortement observable après {max_redraws} tirages (graine {seed})", sys)


def attack_budget(m: int, p: int, fraction: float = estimation_pipeline.ATTACK_FRACTION) -> Tuple[int, int]:
    """
    Budget (r, s) des benchmarks aléatoires : ⌊fraction·m⌋ et ⌊fraction·p⌋, au moins 1.

    Pour m = 10, p = 24 on retrouve (2, 4).
    """
    return max(1, int(np.floor(fraction * m + 1e-12))), max(1, int(np.floor(fraction * p + 1e-12)))


def prepare_run(system: Quadruple, r: int, s: int, seed: int, T: Optional[int] = None,
                attacked_inputs=None, attacked_outputs=None, x0=None, u_ctrl=None,
                w_stream=None, a_stream=None) -> Tuple[AttackScenario, np.ndarray, np.ndarray, int]:
    """
    Assemble un scénario complet (scénario, x0, u commandé, T) à partir d'une graine et
    d'éléments optionnels imposés. Les éléments absents sont tirés :
    x0 et u commandé i.i.d. N(0, 1) sur un flux dérivé de la graine, supports et signaux
    par `random_scenario` ou `scenario_from_supports`.
    """
    n, m, p = system.n, system.m, system.p
    T = n if T is None else int(T)
    if T < 1:
        raise InvalidInputError(f"T doit être >= 1, reçu {T}", sys)
    rng = np.random.default_rng((seed, 1))
    x0 = rng.standard_normal(n) if x0 is None else numerics.as_vector(x0, "x0")
    u_ctrl = rng.standard_normal((T, m)) if u_ctrl is None else numerics.as_matrix(u_ctrl, "u_ctrl")
    if x0.shape[0] != n or u_ctrl.shape != (T, m):
        raise InvalidInputError(f"x0 {x0.shape} ou u_ctrl {u_ctrl.shape} incohérents avec n={n}, m={m}, T={T}", sys)

    if w_stream is not None or a_stream is not None:
        w = np.zeros((T, m)) if w_stream is None else numerics.as_matrix(w_stream, "w_stream")
        a = np.zeros((T, p)) if a_stream is None else numerics.as_matrix(a_stream, "a_stream")
        if w.shape != (T, m) or a.shape != (T, p):
            raise InvalidInputError(f"flux d'attaque de formes {w.shape}, {a.shape}, attendu ({T}, {m}), ({T}, {p})", sys)
        if attacked_inputs is None:
            attacked_inputs = np.flatnonzero(np.any(w != 0, axis=0)).tolist()
        if attacked_outputs is None:
            attacked_outputs = np.flatnonzero(np.any(a != 0, axis=0)).tolist()
        gu = lti_model.make_index_set(attacked_inputs, m)
        gy = lti_model.make_index_set(attacked_outputs, p)
        off_support = np.delete(w, list(gu.indices), axis=1), np.delete(a, list(gy.indices), axis=1)
        if any(np.any(block != 0) for block in off_support):
            raise InvalidInputError("signal d'attaque non nul hors des ensembles attaqués", sys)
        if len(gu) > r or len(gy) > s:
            raise InvalidInputError(f"supports ({len(gu)}, {len(gy)}) au-delà du budget (r, s) = ({r}, {s})", sys)
        scenario = AttackScenario(gu, gy, r, s, w, a, seed)
    elif attacked_inputs is not None or attacked_outputs is not None:
        scenario = scenario_from_supports(system, attacked_inputs or [], attacked_outputs or [], r, s, seed, T)
    else:
        scenario = random_scenario(system, r, s, seed, T)
    return scenario, x0, u_ctrl, T
