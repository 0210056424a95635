"""
Représentation des systèmes LTI, extraction de sous-systèmes, simulation et
matrices d'observabilité / d'inversibilité sur une fenêtre.
"""
import sys
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from secure_estimation.components import numerics
from secure_estimation.entity.config_entity import TolerancePolicy
from secure_estimation.entity.model_entity import BatchMatrices, IndexSet, LtiSystem, Quadruple
from secure_estimation.exceptions.exception import InvalidInputError, ModelAssumptionError
from secure_estimation.logging.logger import logging


def make_index_set(indices: Union[Iterable[int], IndexSet], universe: int) -> IndexSet:
    """
    Construit un IndexSet trié (base 0) et vérifie les bornes.

    Raises:
        InvalidInputError: indice négatif, hors univers ou dupliqué.
    """
    if isinstance(indices, IndexSet):
        if indices.universe != universe:
            raise InvalidInputError(
                f"univers incohérent: {indices.universe} au lieu de {universe}", sys)
        return indices
    values = [int(i) for i in indices]
    if len(set(values)) != len(values):
        raise InvalidInputError(f"indices dupliqués: {values}", sys)
    for i in values:
        if i < 0 or i >= universe:
            raise InvalidInputError(f"indice {i} hors de [0, {universe})", sys)
    return IndexSet(tuple(sorted(values)), universe)


def _check_quadruple(A, B, C, D) -> Tuple[np.ndarray, ...]:
    A = numerics.as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidInputError(f"A doit être carrée, reçu {A.shape}", sys)
    B = numerics.as_matrix(B, "B")
    if B.shape[0] != n:
        raise InvalidInputError(f"B doit avoir {n} lignes, reçu {B.shape}", sys)
    C = numerics.as_matrix(C, "C")
    m = B.shape[1]
    p = C.shape[0]
    if C.shape[1] != n:
        raise InvalidInputError(f"C doit avoir {n} colonnes, reçu {C.shape}", sys)
    D = np.asarray(D, dtype=float)
    if D.size == 0:
        D = np.zeros((p, m))
    D = numerics.as_matrix(D, "D")
    if D.shape != (p, m):
        raise InvalidInputError(f"D doit être de taille {(p, m)}, reçu {D.shape}", sys)
    frozen = []
    for M in (A, B, C, D):
        M = M.copy()
        M.setflags(write=False)
        frozen.append(M)
    return tuple(frozen)


def make_system(A, B, C, D, pol: TolerancePolicy = numerics.DEFAULT_POLICY) -> LtiSystem:
    """
    Valide et construit un système LTI x(t+1) = Ax + Bu, y = Cx + Du.

    Raises:
        InvalidInputError: dimensions incohérentes.
        ModelAssumptionError: [B; D] n'est pas de rang colonne plein.
    """
    A, B, C, D = _check_quadruple(A, B, C, D)
    m = B.shape[1]
    stacked_rank = numerics.rank(np.vstack([B, D]), pol) if m else 0
    if stacked_rank < m:
        raise ModelAssumptionError(f"[B; D] est de rang {stacked_rank} < m = {m}", sys)
    logging.debug(f"Système LTI construit: n={A.shape[0]}, m={m}, p={C.shape[0]}")
    return LtiSystem(A, B, C, D)


def subsystem(system: Quadruple, gamma_u, gamma_y) -> Quadruple:
    """
    Restriction (A, B|(.,Γu), C|(Γy,.), D|(Γy,Γu)) ; l'hypothèse de rang n'est pas imposée.
    """
    gu = make_index_set(gamma_u, system.m)
    gy = make_index_set(gamma_y, system.p)
    iu = list(gu.indices)
    iy = list(gy.indices)
    return Quadruple(
        A=system.A,
        B=system.B[:, iu],
        C=system.C[iy, :],
        D=system.D[np.ix_(iy, iu)],
    )


def simulate(system: Quadruple, x0, u_seq, T: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Simule T pas du système.

    Returns:
        x_seq de forme (T+1, n) et y_seq de forme (T, p).
    """
    x0 = numerics.as_vector(x0, "x0")
    if x0.shape[0] != system.n:
        raise InvalidInputError(f"x0 doit être de longueur {system.n}, reçu {x0.shape[0]}", sys)
    u_seq = np.asarray(u_seq, dtype=float).reshape(-1, system.m) if system.m else np.zeros((T, 0))
    if u_seq.shape[0] < T:
        raise InvalidInputError(f"u_seq contient {u_seq.shape[0]} échantillons < T = {T}", sys)
    x_seq = np.zeros((T + 1, system.n))
    y_seq = np.zeros((T, system.p))
    x_seq[0] = x0
    for t in range(T):
        y_seq[t] = system.C @ x_seq[t] + system.D @ u_seq[t]
        x_seq[t + 1] = system.A @ x_seq[t] + system.B @ u_seq[t]
    return x_seq, y_seq


def batch_matrices(system: Quadruple, gamma_u=None, gamma_y=None, tau: Optional[int] = None) -> BatchMatrices:
    """
    Matrices d'observabilité et d'inversibilité restreintes à (Γu, Γy) sur tau pas.

    Les blocs de lignes sont C|Γy·Aᵏ (k = 0..tau−1) ; le bloc (i, j) de `inv` vaut
    D|(Γy,Γu) si i = j, C|Γy·A^(i−j−1)·B|(.,Γu) si i > j et 0 sinon.
    """
    n = system.n
    tau = n if tau is None else int(tau)
    if tau < 1 or tau > max(n, 1):
        raise InvalidInputError(f"tau doit être dans [1, {n}], reçu {tau}", sys)
    gu = make_index_set(range(system.m) if gamma_u is None else gamma_u, system.m)
    gy = make_index_set(range(system.p) if gamma_y is None else gamma_y, system.p)
    sub = subsystem(system, gu, gy)
    py, mu = sub.C.shape[0], sub.B.shape[1]

    # Markov : C Aᵏ pour k = 0..tau-1
    powers = [sub.C]
    for _ in range(1, tau):
        powers.append(powers[-1] @ sub.A)
    obs = np.vstack(powers) if py else np.zeros((0, n))

    markov = [sub.D] + [powers[k] @ sub.B for k in range(tau - 1)]
    inv = np.zeros((tau * py, tau * mu))
    for i in range(tau):
        for j in range(i + 1):
            inv[i * py:(i + 1) * py, j * mu:(j + 1) * mu] = markov[i - j]
    return BatchMatrices(obs=obs, inv=inv, tau=tau, gamma_u=gu, gamma_y=gy)


def restrict_batch(batch, universe: int, indices: Union[IndexSet, Sequence[int]], tau: int) -> np.ndarray:
    """Extrait d'un lot empilé par instant (longueur tau·universe) les composantes d'indices donnés."""
    batch = np.asarray(batch, dtype=float).reshape(tau, universe)
    return batch[:, list(indices)].reshape(-1)


def discretize_zoh(Ac, Bc, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Discrétisation par bloqueur d'ordre zéro via l'exponentielle de la matrice augmentée
    [[Ac, Bc], [0, 0]]·dt.
    """
    Ac = numerics.as_matrix(Ac, "Ac")
    Bc = numerics.as_matrix(Bc, "Bc")
    n = Ac.shape[0]
    if Ac.shape != (n, n) or Bc.shape[0] != n:
        raise InvalidInputError(f"dimensions incompatibles: Ac {Ac.shape}, Bc {Bc.shape}", sys)
    if not dt > 0:
        raise InvalidInputError(f"dt doit être > 0, reçu {dt}", sys)
    m = Bc.shape[1]
    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = Ac
    augmented[:n, n:] = Bc
    phi = numerics.matrix_exp(augmented * dt)
    return phi[:n, :n], phi[:n, n:]
