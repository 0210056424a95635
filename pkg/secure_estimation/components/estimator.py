"""
Solveur de théorie et observateur SMT paresseux.

Le solveur SAT propose une hypothèse de support d'attaque (b, c) ; le test de cohérence
(moindres carrés sur la fenêtre) l'accepte ou la rejette, et dans ce cas un ou plusieurs
certificats de conflit sont ajoutés au cœur SAT.
"""
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations, zip_longest
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from secure_estimation.components import lti_model, numerics, sat_core, strong_obs
from secure_estimation.constants.estimation_pipeline import METHODS, QUICKXPLAIN_ORDERINGS
from secure_estimation.entity.artifact_entity import (CertElement, Certificate, ConsistencyResult,
                                                      EstimateReport, ObservationWindow)
from secure_estimation.entity.config_entity import TolerancePolicy
from secure_estimation.entity.model_entity import BoolAssignment, IndexSet, Quadruple
from secure_estimation.exceptions.exception import (InfeasibilityError, InvalidInputError,
                                                    StructuralError)
from secure_estimation.logging.logger import logging


class TheorySolver:
    """
    Solveur de théorie lié à un système et à une fenêtre (entrée nominale supposée nulle).

    Les matrices d'observabilité et d'inversibilité complètes sont calculées une fois ;
    chaque test ne fait qu'en extraire les lignes (sorties de confiance) et les colonnes
    (entrées suspectes). Le compteur `calls` est partagé entre threads.
    """

    def __init__(self, system: Quadruple, win: ObservationWindow,
                 pol: TolerancePolicy = numerics.DEFAULT_POLICY):
        self.system = system
        self.win = win
        self.pol = pol
        self.tau = win.tau
        Y = numerics.as_vector(win.Y, "Y")
        if Y.shape[0] != self.tau * system.p:
            raise InvalidInputError(
                f"Y a {Y.shape[0]} composantes, attendu tau·p = {self.tau * system.p}", sys)
        if np.any(np.asarray(win.U_ctrl) != 0):
            logging.warning("Fenêtre avec entrée commandée non nulle: appeler remove_ctrl_effect d'abord")
        self.Y = Y
        full = lti_model.batch_matrices(system, tau=self.tau)
        self._obs = full.obs
        self._inv = full.inv
        self.calls = 0
        self._lock = threading.Lock()

    # -- indexation des lots ---------------------------------------------------------
    def _rows(self, gamma_y: Sequence[int]) -> List[int]:
        p = self.system.p
        return [k * p + i for k in range(self.tau) for i in gamma_y]

    def _cols(self, gamma_u: Sequence[int]) -> List[int]:
        m = self.system.m
        return [k * m + j for k in range(self.tau) for j in gamma_u]

    def _blocks(self, gamma_u: Sequence[int], gamma_y: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = self._rows(gamma_y)
        obs = self._obs[rows]
        inv = self._inv[np.ix_(rows, self._cols(gamma_u))]
        return obs, inv, lti_model.restrict_batch(self.Y, self.system.p, gamma_y, self.tau)

    # -- test de cohérence -----------------------------------------------------------
    def check(self, gamma_u, gamma_y) -> ConsistencyResult:
        """
        min_{x̂, Û} ‖Y|Γy − 𝒪_Γy x̂ − 𝒩_{Γu→Γy} Û‖₂ ≤ ε, résolu en norme minimale.

        Raises:
            InvalidInputError: si Γy est vide (aucune équation).
        """
        gu = lti_model.make_index_set(gamma_u, self.system.m)
        gy = lti_model.make_index_set(gamma_y, self.system.p)
        if len(gy) == 0:
            raise InvalidInputError("Γy vide: le test de cohérence n'a aucune équation", sys)
        with self._lock:
            self.calls += 1
        obs, inv, y = self._blocks(gu.indices, gy.indices)
        z, residual = numerics.lstsq_min_norm(np.hstack([obs, inv]), y, self.pol)
        epsilon = self.pol.epsilon(float(np.linalg.norm(y)))
        n = self.system.n
        return ConsistencyResult(status=residual <= epsilon, x_hat=z[:n], u_hat=z[n:],
                                 residual=residual, epsilon_used=epsilon)

    def consistent(self, gamma_u, gamma_y) -> bool:
        # sans sortie de confiance, toute hypothèse est cohérente
        if len(gamma_y) == 0:
            return True
        return self.check(gamma_u, gamma_y).status

    def consistent_elements(self, elements: Sequence[CertElement]) -> bool:
        """TEST(Δ) : entrées suspectes = entrées absentes de Δ, sorties de confiance = sorties de Δ."""
        free = {e.index for e in elements if e.kind == "input"}
        trusted = sorted(e.index for e in elements if e.kind == "output")
        suspected = [j for j in range(self.system.m) if j not in free]
        return self.consistent(suspected, trusted)

    def _residual(self, gamma_u, gamma_y, x_hat, u_hat) -> np.ndarray:
        obs, inv, y = self._blocks(list(gamma_u), list(gamma_y))
        return y - obs @ x_hat - inv @ u_hat

    # -- variables d'écart ------------------------------------------------------------
    def input_slacks(self, gamma_u_sat, gamma_y_sat, x_hat, u_hat) -> Dict[int, float]:
        """slack_u(j) normalisé par ‖𝒩_{j→Γy}‖₂ (0 si la norme est nulle), j ∉ Γu^SAT."""
        gu = lti_model.make_index_set(gamma_u_sat, self.system.m)
        gy = lti_model.make_index_set(gamma_y_sat, self.system.p)
        residual = self._residual(gu, gy, x_hat, u_hat)
        rows = self._rows(gy.indices)
        slacks = {}
        for j in gu.complement():
            block = self._inv[np.ix_(rows, self._cols([j]))]
            scale = numerics.spectral_norm(block)
            if scale == 0.0:
                logging.debug(f"Entrée {j}: bloc d'inversibilité nul, écart fixé à 0")
                slacks[j] = 0.0
                continue
            projected = numerics.project_onto_colspace(block, residual, self.pol)
            slacks[j] = float(np.linalg.norm(projected)) / scale
        return slacks

    def output_slacks(self, gamma_u_sat, gamma_y_sat, x_hat, u_hat) -> Tuple[Dict[int, float], Dict[int, float]]:
        """
        Résidu de chaque sortie de confiance : (brut, normalisé par ‖𝒪ᵢ‖₂).

        Σᵢ brut(i)² est égal au carré du résidu du test joint.
        """
        gu = lti_model.make_index_set(gamma_u_sat, self.system.m)
        gy = lti_model.make_index_set(gamma_y_sat, self.system.p)
        residual = self._residual(gu, gy, x_hat, u_hat).reshape(self.tau, len(gy))
        raw, normalized = {}, {}
        for col, i in enumerate(gy):
            raw[i] = float(np.linalg.norm(residual[:, col]))
            scale = numerics.spectral_norm(self._obs[self._rows([i])])
            normalized[i] = raw[i] / scale if scale > 0.0 else 0.0
        return raw, normalized

    def slack_inputs(self, gamma_u_sat, gamma_y_sat, x_hat, u_hat) -> List[int]:
        slacks = self.input_slacks(gamma_u_sat, gamma_y_sat, x_hat, u_hat)
        return sorted(slacks, key=lambda j: (slacks[j], j))

    def slack_outputs(self, gamma_u_sat, gamma_y_sat, x_hat, u_hat) -> List[int]:
        """Sortie d'écart normalisé maximal en tête, puis dimension du noyau de 𝒪ᵢ croissante."""
        _, normalized = self.output_slacks(gamma_u_sat, gamma_y_sat, x_hat, u_hat)
        if not normalized:
            return []
        first = min(normalized, key=lambda i: (-normalized[i], i))
        n = self.system.n
        kernel_dim = {i: n - numerics.rank(self._obs[self._rows([i])], self.pol)
                      for i in normalized if i != first}
        return [first] + sorted(kernel_dim, key=lambda i: (kernel_dim[i], i))

    # -- méthode I ---------------------------------------------------------------------
    def _grow_inputs(self, gamma_u: Sequence[int], gamma_y: Sequence[int],
                     order: Sequence[int], r: int) -> List[int]:
        cert = list(gamma_u)
        for j in order:
            if j in cert:
                continue
            if len(cert) >= 2 * r:
                break
            if self.consistent(sorted(cert + [j]), gamma_y):
                break
            cert.append(j)
        return sorted(cert)

    def _shrink_outputs(self, gamma_u: Sequence[int], gamma_y_sat: Sequence[int],
                        order: Sequence[int], s: int) -> List[int]:
        size = max(self.system.p - 2 * s, 0)
        temp = list(order[:size])
        if not self.consistent(gamma_u, sorted(temp)):
            return sorted(temp)
        for i in order[size:]:
            candidate = sorted(temp + [i])
            if not self.consistent(gamma_u, candidate):
                return candidate
        logging.warning("Aucune sortie ne rend le test incohérent: repli sur Γy^SAT")
        return sorted(gamma_y_sat)

    def certificate_method1(self, gamma_u_sat, gamma_y_sat, r: int, s: int,
                            failing: Optional[ConsistencyResult] = None) -> List[Certificate]:
        """
        Deux certificats : croissance des entrées suspectes puis réduction des sorties,
        et l'ordre inverse. Les ordres de parcours viennent des variables d'écart calculées
        au minimiseur du test en échec.
        """
        gu = lti_model.make_index_set(gamma_u_sat, self.system.m)
        gy = lti_model.make_index_set(gamma_y_sat, self.system.p)
        failing = failing if failing is not None else self.check(gu, gy)
        order_u = self.slack_inputs(gu, gy, failing.x_hat, failing.u_hat)
        order_y = self.slack_outputs(gu, gy, failing.x_hat, failing.u_hat)

        cert_u1 = self._grow_inputs(gu.indices, gy.indices, order_u, r)
        cert_y1 = self._shrink_outputs(cert_u1, gy.indices, order_y, s)
        cert_y2 = self._shrink_outputs(gu.indices, gy.indices, order_y, s)
        cert_u2 = self._grow_inputs(gu.indices, cert_y2, order_u, r)

        certificates = []
        for cert_u, cert_y in ((cert_u1, cert_y1), (cert_u2, cert_y2)):
            certificate = Certificate(IndexSet(tuple(cert_u), self.system.m).complement(),
                                      IndexSet(tuple(cert_y), self.system.p))
            if certificate not in certificates:
                certificates.append(certificate)
        return certificates

    # -- méthode II (QuickXplain) -------------------------------------------------------
    def quickxplain(self, background: List[CertElement], added: List[CertElement],
                    candidates: List[CertElement]) -> List[CertElement]:
        """
        Sous-ensemble irréductible de `candidates` en conflit avec `background`.

        Les éléments en tête de `candidates` sont préférés.
        """
        if added and not self.consistent_elements(background):
            return []
        if len(candidates) == 1:
            return list(candidates)
        split = len(candidates) // 2
        preferred, rest = candidates[:split], candidates[split:]
        delta2 = self.quickxplain(background + preferred, preferred, rest)
        delta1 = self.quickxplain(background + delta2, delta2, preferred)
        return delta1 + delta2

    def _ordering(self, inputs: List[CertElement], outputs: List[CertElement], name: str) -> List[CertElement]:
        if name == "inputs_first":
            return inputs + outputs
        if name == "outputs_first":
            return outputs + inputs
        mixed = []
        for a, b in zip_longest(inputs, outputs):
            mixed.extend(e for e in (a, b) if e is not None)
        return mixed

    def certificate_method2(self, gamma_u_sat, gamma_y_sat,
                            orderings: Sequence[str] = QUICKXPLAIN_ORDERINGS,
                            workers: int = 1) -> List[Certificate]:
        """Jusqu'à trois certificats irréductibles (entrées d'abord, sorties d'abord, alternance)."""
        gu = lti_model.make_index_set(gamma_u_sat, self.system.m)
        gy = lti_model.make_index_set(gamma_y_sat, self.system.p)
        if not 1 <= len(orderings) <= 3:
            raise InvalidInputError(f"1 à 3 énumérations attendues, reçu {len(orderings)}", sys)
        inputs = [CertElement("input", j) for j in gu.complement()]
        outputs = [CertElement("output", i) for i in gy]
        if self.consistent_elements(inputs + outputs):
            raise InvalidInputError("certificate_method2 exige une hypothèse incohérente", sys)

        def explain(name: str) -> Certificate:
            core = self.quickxplain([], [], self._ordering(inputs, outputs, name))
            free = tuple(sorted(e.index for e in core if e.kind == "input"))
            trusted = tuple(sorted(e.index for e in core if e.kind == "output"))
            return Certificate(IndexSet(free, self.system.m), IndexSet(trusted, self.system.p))

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                produced = list(pool.map(explain, orderings))
        else:
            produced = [explain(name) for name in orderings]
        certificates = []
        for certificate in produced:
            if certificate not in certificates:
                certificates.append(certificate)
        return certificates


# -- opérations publiques --------------------------------------------------------------

def test_consistency(system: Quadruple, win: ObservationWindow, gamma_u, gamma_y,
                     pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> ConsistencyResult:
    return TheorySolver(system, win, pol).check(gamma_u, gamma_y)


# pytest ne doit pas collecter cette fonction comme un test
test_consistency.__test__ = False


def naive_certificate(b: Sequence[bool], c: Sequence[bool]) -> Certificate:
    """Entrées libres = complément du support de b ; sorties de confiance = complément de celui de c."""
    assignment = BoolAssignment(tuple(bool(v) for v in b), tuple(bool(v) for v in c))
    return Certificate(assignment.attacked_inputs().complement(), assignment.attacked_outputs().complement())


def certificate_method1(system: Quadruple, win: ObservationWindow, gamma_u_sat, gamma_y_sat,
                        r: int, s: int, pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> List[Certificate]:
    return TheorySolver(system, win, pol).certificate_method1(gamma_u_sat, gamma_y_sat, r, s)


def slack_inputs(system: Quadruple, win: ObservationWindow, gamma_u_sat, gamma_y_sat, x_hat, u_hat,
                 pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> List[int]:
    return TheorySolver(system, win, pol).slack_inputs(gamma_u_sat, gamma_y_sat, x_hat, u_hat)


def slack_outputs(system: Quadruple, win: ObservationWindow, gamma_u_sat, gamma_y_sat, x_hat, u_hat,
                  pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> List[int]:
    return TheorySolver(system, win, pol).slack_outputs(gamma_u_sat, gamma_y_sat, x_hat, u_hat)


def certificate_method2(system: Quadruple, win: ObservationWindow, gamma_u_sat, gamma_y_sat,
                        pol: TolerancePolicy = numerics.DEFAULT_POLICY,
                        orderings: Sequence[str] = QUICKXPLAIN_ORDERINGS,
                        workers: int = 1) -> List[Certificate]:
    return TheorySolver(system, win, pol).certificate_method2(gamma_u_sat, gamma_y_sat, orderings, workers)


def model_count(m: int, p: int, r: int, s: int) -> int:
    """Nombre d'affectations satisfaisant Φ_B (sans clause)."""
    return sum(comb(m, i) for i in range(r + 1)) * sum(comb(p, j) for j in range(s + 1))


def _check_budget(system: Quadruple, r: int, s: int) -> None:
    if not 0 <= r <= system.m:
        raise InvalidInputError(f"r doit être dans [0, {system.m}], reçu {r}", sys)
    # au moins une sortie de confiance est nécessaire au test de cohérence
    if not 0 <= s < system.p:
        raise InvalidInputError(f"s doit être dans [0, {system.p - 1}], reçu {s}", sys)


def _certificates_for(theory: TheorySolver, method: str, assignment: BoolAssignment,
                      gamma_u, gamma_y, r: int, s: int, failing: ConsistencyResult,
                      workers: int) -> List[Certificate]:
    if method == "naive":
        return [naive_certificate(assignment.b, assignment.c)]
    certificates = []
    if method in ("method1", "both"):
        certificates += theory.certificate_method1(gamma_u, gamma_y, r, s, failing)
    if method in ("method2", "both"):
        certificates += theory.certificate_method2(gamma_u, gamma_y, workers=workers)
    return certificates


def _ensure_sso(system: Quadruple, r: int, s: int, pol: TolerancePolicy) -> None:
    report = strong_obs.is_sparse_strongly_observable(system, min(2 * r, system.m), min(2 * s, system.p), pol)
    if not report.holds:
        raise StructuralError(
            f"le système n'est pas ({2 * r},{2 * s})-fortement observable: "
            f"Γu={report.witness_gamma_u.one_based()}, Γy={report.witness_gamma_y.one_based()}",
            sys, gamma_u=report.witness_gamma_u.indices, gamma_y=report.witness_gamma_y.indices)


def estimate(system: Quadruple, win: ObservationWindow, r: int, s: int, method: str = "method2",
             pol: TolerancePolicy = numerics.DEFAULT_POLICY, check_sso: bool = True,
             workers: int = 1, solver: Optional[sat_core.SolverState] = None) -> EstimateReport:
    """
    Boucle principale : affectation SAT → test de cohérence → certificats, jusqu'à une
    hypothèse cohérente. L'estimation retournée est l'état retardé x(t − n + 1).

    Raises:
        InvalidInputError: méthode inconnue, r hors de [0, m] ou s hors de [0, p − 1].
        StructuralError: précondition d'observabilité parcimonieuse non satisfaite.
        InfeasibilityError: épuisement du solveur (ou plafond de tests) sans hypothèse cohérente.
    """
    if method not in METHODS:
        raise InvalidInputError(f"méthode inconnue: {method}", sys)
    _check_budget(system, r, s)
    if check_sso:
        _ensure_sso(system, r, s, pol)

    start = time.perf_counter()
    theory = TheorySolver(system, win, pol)
    solver = solver if solver is not None else sat_core.new_solver(system.m, system.p, r, s)
    cap = model_count(system.m, system.p, r, s) + 1
    sat_calls = 0
    emitted: List[Certificate] = []
    seen = set()
    residual_floor = float("inf")

    logging.info(f"Début de l'estimation: n={system.n}, m={system.m}, p={system.p}, r={r}, s={s}, méthode={method}")
    while True:
        assignment = solver.next_assignment()
        if assignment is None:
            raise InfeasibilityError(
                f"solveur épuisé sans hypothèse cohérente (résidu minimal {residual_floor:.3e}): "
                f"epsilon trop petit ou modèle incohérent avec les mesures", sys, residual_floor=residual_floor)
        sat_calls += 1
        gamma_u = assignment.attacked_inputs()
        gamma_y = assignment.attacked_outputs().complement()
        result = theory.check(gamma_u, gamma_y)
        if result.status:
            wall_time = time.perf_counter() - start
            logging.info(f"Hypothèse acceptée après {sat_calls} appels SAT et {theory.calls} tests: "
                         f"entrées {gamma_u.one_based()}, sorties attaquées {assignment.attacked_outputs().one_based()}")
            return EstimateReport(x_hat=result.x_hat, identified=assignment, sat_calls=sat_calls,
                                  theory_calls=theory.calls, certificates_added=len(emitted),
                                  wall_time=wall_time, residual=result.residual, u_hat=result.u_hat,
                                  certificates=emitted)
        residual_floor = min(residual_floor, result.residual)
        for certificate in _certificates_for(theory, method, assignment, gamma_u, gamma_y, r, s, result, workers):
            if certificate.key() in seen:
                continue
            seen.add(certificate.key())
            emitted.append(certificate)
            solver.add_clause(sat_core.clause_from_sets(certificate.free_inputs, certificate.trusted_outputs))
        logging.debug(f"Itération {sat_calls}: résidu {result.residual:.3e}, {len(emitted)} certificats")
        if sat_calls >= cap:
            raise InfeasibilityError(
                f"plafond de sécurité de {cap} tests de cohérence atteint sans hypothèse cohérente "
                f"(résidu minimal {residual_floor:.3e}): erreur de logique dans la boucle SAT",
                sys, residual_floor=residual_floor)


def estimate_brute_force(system: Quadruple, win: ObservationWindow, r: int, s: int,
                         pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> EstimateReport:
    """
    Recherche exhaustive sur tous les supports |Γu| = r, |Γ̄y| = s (ordre lexicographique).

    `sat_calls` compte les hypothèses examinées.
    """
    _check_budget(system, r, s)
    start = time.perf_counter()
    theory = TheorySolver(system, win, pol)
    m, p = system.m, system.p
    tried = 0
    residual_floor = float("inf")
    for attacked_u in combinations(range(m), min(r, m)):
        for attacked_y in combinations(range(p), min(s, p)):
            tried += 1
            gamma_y = [i for i in range(p) if i not in attacked_y]
            result = theory.check(attacked_u, gamma_y)
            if result.status:
                b = tuple(j in attacked_u for j in range(m))
                c = tuple(i in attacked_y for i in range(p))
                return EstimateReport(x_hat=result.x_hat, identified=BoolAssignment(b, c), sat_calls=tried,
                                      theory_calls=theory.calls, certificates_added=0,
                                      wall_time=time.perf_counter() - start, residual=result.residual,
                                      u_hat=result.u_hat)
            residual_floor = min(residual_floor, result.residual)
    raise InfeasibilityError(f"aucun support cohérent parmi {tried} hypothèses", sys,
                             residual_floor=residual_floor)
