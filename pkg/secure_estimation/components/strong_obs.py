"""
Tests structurels : observabilité forte, observabilité forte (r, s)-parcimonieuse
et construction du témoin d'indiscernabilité (nécessité de la condition).
"""
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations, islice
from typing import Iterator, List, Optional, Tuple

import numpy as np

from secure_estimation.components import lti_model, numerics
from secure_estimation.constants.estimation_pipeline import WITNESS_STATE_NORM_MIN
from secure_estimation.entity.artifact_entity import AttackScenario, SsoReport, WitnessScenario
from secure_estimation.entity.config_entity import TolerancePolicy
from secure_estimation.entity.model_entity import IndexSet, Quadruple
from secure_estimation.exceptions.exception import InvalidInputError
from secure_estimation.logging.logger import logging


def is_strongly_observable(quad: Quadruple, tau: Optional[int] = None,
                           pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> bool:
    """
    Vrai ssi rang([obs | inv]) = n + rang(inv) : aucun état initial non nul ne produit
    une sortie identiquement nulle, quelle que soit l'entrée.
    """
    n = quad.n
    if n == 0:
        return True
    if quad.p == 0:
        return False
    batch = lti_model.batch_matrices(quad, tau=tau)
    joint = np.hstack([batch.obs, batch.inv])
    return numerics.rank(joint, pol) == n + numerics.rank(batch.inv, pol)


def _subsystem_is_so(system: Quadruple, gamma_u: Tuple[int, ...], gamma_y: Tuple[int, ...],
                     pol: TolerancePolicy) -> bool:
    return is_strongly_observable(lti_model.subsystem(system, gamma_u, gamma_y), pol=pol)


def _extremal_pairs(m: int, p: int, r: int, s: int) -> Iterator[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    for gamma_u in combinations(range(m), r):
        for gamma_y in combinations(range(p), p - s):
            yield gamma_u, gamma_y


def _scan(system: Quadruple, pairs: List[Tuple[Tuple[int, ...], Tuple[int, ...]]],
          pol: TolerancePolicy) -> Tuple[Optional[int], int]:
    for k, (gamma_u, gamma_y) in enumerate(pairs):
        if not _subsystem_is_so(system, gamma_u, gamma_y, pol):
            return k, k + 1
    return None, len(pairs)


def is_sparse_strongly_observable(system: Quadruple, r: int, s: int,
                                  pol: TolerancePolicy = numerics.DEFAULT_POLICY,
                                  workers: int = 1, chunk_size: int = 256) -> SsoReport:
    """
    Vérifie l'observabilité forte (r, s)-parcimonieuse.

    Seuls les sous-ensembles extrêmes |Γu| = r et |Γy| = p − s sont testés : retirer
    des entrées ou ajouter des sorties préserve l'observabilité forte. Avec plusieurs
    workers, l'énumération est découpée en tranches disjointes et le premier témoin dans
    l'ordre lexicographique l'emporte.

    Raises:
        InvalidInputError: si r ∉ [0, m] ou s ∉ [0, p].
    """
    if not 0 <= r <= system.m or not 0 <= s <= system.p:
        raise InvalidInputError(f"(r, s) = ({r}, {s}) hors bornes pour m={system.m}, p={system.p}", sys)

    pairs_iter = _extremal_pairs(system.m, system.p, r, s)
    checked = 0
    witness = None
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        while witness is None:
            chunks = [list(islice(pairs_iter, chunk_size)) for _ in range(max(1, workers))]
            chunks = [c for c in chunks if c]
            if not chunks:
                break
            results = list(pool.map(lambda c: _scan(system, c, pol), chunks))
            for chunk, (hit, scanned) in zip(chunks, results):
                checked += scanned
                if hit is not None:
                    witness = chunk[hit]
                    break

    if witness is None:
        logging.info(f"Système ({r},{s})-fortement observable: {checked} sous-ensembles vérifiés")
        return SsoReport(True, None, None, checked, r, s)
    gamma_u, gamma_y = witness
    logging.info(f"Échec de l'observabilité ({r},{s}): témoin Γu={gamma_u}, Γy={gamma_y}")
    return SsoReport(False, IndexSet(gamma_u, system.m), IndexSet(gamma_y, system.p), checked, r, s)


def is_sparse_observable(system: Quadruple, s: int, pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> bool:
    """Observabilité s-parcimonieuse : 𝒪_Γy de rang n pour tout |Γy| = p − s."""
    if not 0 <= s <= system.p:
        raise InvalidInputError(f"s = {s} hors bornes pour p={system.p}", sys)
    for gamma_y in combinations(range(system.p), system.p - s):
        obs = lti_model.batch_matrices(system, gamma_u=(), gamma_y=gamma_y).obs
        if numerics.rank(obs, pol) < system.n:
            return False
    return True


def _split(indices: Tuple[int, ...]) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    half = (len(indices) + 1) // 2
    return indices[:half], indices[half:]


def build_indistinguishable_pair(system: Quadruple, r: int, s: int, gamma_u, gamma_y,
                                 pol: TolerancePolicy = numerics.DEFAULT_POLICY
                                 ) -> Optional[Tuple[WitnessScenario, WitnessScenario]]:
    """
    Construit deux scénarios d'attaque aux observations (u, y) identiques mais aux états
    initiaux différents, à partir d'un vecteur du noyau de [obs | inv] du sous-système
    (Γu, Γy) dont la partie état est non nulle.

    Scénario 1 : x0 = Δx, w = Δu⁽¹⁾, a = −Δy⁽¹⁾.
    Scénario 2 : x0 = 0,  w = −Δu⁽²⁾, a = Δy⁽²⁾.
    L'entrée commandée commune vaut Δu⁽²⁾.

    Returns:
        La paire de scénarios, ou None si le sous-système est fortement observable.
    """
    gu = lti_model.make_index_set(gamma_u, system.m)
    gy = lti_model.make_index_set(gamma_y, system.p)
    if len(gu) != 2 * r or len(gy) != system.p - 2 * s:
        raise InvalidInputError(
            f"attendu |Γu| = 2r = {2 * r} et |Γy| = p − 2s = {system.p - 2 * s}, "
            f"reçu {len(gu)} et {len(gy)}", sys)

    n, m, p = system.n, system.m, system.p
    tau = n
    sub = lti_model.subsystem(system, gu, gy)
    if is_strongly_observable(sub, pol=pol):
        return None

    batch = lti_model.batch_matrices(system, gu, gy, tau)
    joint = np.hstack([batch.obs, batch.inv])
    kernel = numerics.null_space_basis(joint, pol)
    chosen = None
    for k in range(kernel.shape[1]):
        if np.linalg.norm(kernel[:n, k]) >= WITNESS_STATE_NORM_MIN:
            chosen = kernel[:, k]
            break
    if chosen is None:
        logging.warning("Noyau sans composante d'état exploitable malgré le test de rang")
        return None
    chosen = chosen / np.linalg.norm(chosen[:n])
    delta_x = chosen[:n]
    delta_u_sub = chosen[n:].reshape(tau, len(gu))

    delta_u = np.zeros((tau, m))
    delta_u[:, list(gu.indices)] = delta_u_sub
    _, delta_y = lti_model.simulate(system, delta_x, delta_u, tau)

    attacked_out = gy.complement().indices
    u_half1, u_half2 = _split(gu.indices)
    y_half1, y_half2 = _split(attacked_out)

    du1 = np.zeros_like(delta_u)
    du1[:, list(u_half1)] = delta_u[:, list(u_half1)]
    du2 = delta_u - du1
    dy1 = np.zeros_like(delta_y)
    dy1[:, list(y_half1)] = delta_y[:, list(y_half1)]
    dy2 = np.zeros_like(delta_y)
    dy2[:, list(y_half2)] = delta_y[:, list(y_half2)]

    scenario_1 = AttackScenario(
        attacked_inputs=IndexSet(u_half1, m), attacked_outputs=IndexSet(y_half1, p),
        r_bound=r, s_bound=s, w_stream=du1, a_stream=-dy1, seed=0)
    scenario_2 = AttackScenario(
        attacked_inputs=IndexSet(u_half2, m), attacked_outputs=IndexSet(y_half2, p),
        r_bound=r, s_bound=s, w_stream=-du2, a_stream=dy2, seed=0)
    logging.info(f"Paire indiscernable construite pour Γu={gu.indices}, Γy={gy.indices}")
    return (WitnessScenario(x0=delta_x, u_ctrl=du2.copy(), scenario=scenario_1),
            WitnessScenario(x0=np.zeros(n), u_ctrl=du2.copy(), scenario=scenario_2))
