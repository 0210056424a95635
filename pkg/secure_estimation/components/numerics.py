"""
Noyaux d'algèbre linéaire dense, déterministes, avec une politique de tolérance explicite.

Toutes les fonctions sont pures ; aucune décomposition randomisée n'est utilisée.
"""
import sys
from typing import Tuple

import numpy as np
import scipy.linalg

from secure_estimation.entity.config_entity import TolerancePolicy
from secure_estimation.exceptions.exception import InvalidInputError

DEFAULT_POLICY = TolerancePolicy()


def as_matrix(M, name: str = "M") -> np.ndarray:
    """
    Convertit une entrée en matrice float 2-D et vérifie que toutes les entrées sont finies.

    Raises:
        InvalidInputError: si l'entrée n'est pas 2-D ou contient NaN/Inf.
    """
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} doit être une matrice 2-D, reçu ndim={arr.ndim}", sys)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contient des valeurs non finies", sys)
    return arr


def as_vector(v, name: str = "v") -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contient des valeurs non finies", sys)
    return arr


def _kept_singular_values(s: np.ndarray, pol: TolerancePolicy) -> np.ndarray:
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(s.shape, dtype=bool)
    return s > pol.rank_rel_tol * s[0]


def rank(M, pol: TolerancePolicy = DEFAULT_POLICY) -> int:
    """
    Rang numérique : nombre de valeurs singulières σᵢ > rank_rel_tol · σ_max.

    Une matrice sans ligne ou sans colonne est de rang 0.
    """
    M = as_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.count_nonzero(_kept_singular_values(s, pol)))


def pinv(M, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    """Pseudo-inverse de Moore-Penrose avec la coupure de rang de la politique."""
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros((M.shape[1], M.shape[0]))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = _kept_singular_values(s, pol)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def lstsq_min_norm(M, v, pol: TolerancePolicy = DEFAULT_POLICY) -> Tuple[np.ndarray, float]:
    """
    Solution de norme minimale de min_z ‖v − M·z‖₂ et résidu atteint.

    Returns:
        (solution, residual_norm)

    Raises:
        InvalidInputError: si M.rows != len(v).
    """
    M = as_matrix(M)
    v = as_vector(v)
    if M.shape[0] != v.shape[0]:
        raise InvalidInputError(
            f"dimensions incompatibles: M a {M.shape[0]} lignes, v a {v.shape[0]} composantes", sys)
    z = pinv(M, pol) @ v
    residual = float(np.linalg.norm(v - M @ z))
    return z, residual


def project_onto_colspace(basis, v, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    """Projection orthogonale Basis·Basis⁺·v sur l'espace colonne de `basis`."""
    basis = as_matrix(basis, "Basis")
    v = as_vector(v)
    if basis.shape[0] != v.shape[0]:
        raise InvalidInputError(
            f"dimensions incompatibles: Basis a {basis.shape[0]} lignes, v a {v.shape[0]} composantes", sys)
    return basis @ (pinv(basis, pol) @ v)


def matrix_exp(M) -> np.ndarray:
    """Exponentielle matricielle (mise à l'échelle et élévation au carré, cœur de Padé)."""
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"matrix_exp exige une matrice carrée, reçu {M.shape}", sys)
    return scipy.linalg.expm(M)


def null_space_basis(M, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    """
    Base orthonormée du noyau numérique de M.

    Les colonnes sont ordonnées par valeur singulière croissante (les directions
    au-delà du nombre de lignes, de valeur singulière nulle, viennent en premier).
    """
    M = as_matrix(M)
    cols = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(cols)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    keep = _kept_singular_values(s, pol)
    r = int(np.count_nonzero(keep))
    basis = Vt[r:].T
    # ordre croissant des valeurs singulières : colonnes sans valeur singulière d'abord
    return basis[:, ::-1]


def spectral_norm(M) -> float:
    M = as_matrix(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))
