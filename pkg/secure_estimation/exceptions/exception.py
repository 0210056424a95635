import sys
from typing import Optional, Sequence


class SecureEstimationException(Exception):
    """
    Exception de base de l'estimateur d'état sécurisé.

    Elle capture automatiquement le fichier et la ligne où l'erreur a été levée,
    ce qui facilite le débogage des sessions d'estimation et des benchmarks.
    """

    def __init__(self, error_message, error_detail=sys):
        """
        :param error_message: Message ou exception d'origine.
        :param error_detail: Module sys, utilisé pour lire le traceback courant.
        """
        super().__init__(error_message)

        _, _, exc_tb = error_detail.exc_info()

        if exc_tb is not None:
            self.lineno = exc_tb.tb_lineno
            self.filename = exc_tb.tb_frame.f_code.co_filename
        else:
            self.lineno = None
            self.filename = "Inconnu"

        self.error_message = f"{error_message} (Fichier: {self.filename}, Ligne: {self.lineno})"

    def __str__(self):
        return self.error_message


class InvalidInputError(SecureEstimationException):
    """Entrée invalide : dimensions incohérentes, indices hors bornes, valeurs non finies."""


class ModelAssumptionError(SecureEstimationException):
    """Le modèle viole une hypothèse structurelle (par ex. [B; D] de rang colonne incomplet)."""


class StructuralError(SecureEstimationException):
    """
    Le système n'est pas (2r, 2s)-fortement observable de façon parcimonieuse.

    Les ensembles témoins (entrées, sorties) sont conservés pour le diagnostic.
    """

    def __init__(self, error_message, error_detail=sys,
                 gamma_u: Optional[Sequence[int]] = None,
                 gamma_y: Optional[Sequence[int]] = None):
        super().__init__(error_message, error_detail)
        self.gamma_u = tuple(gamma_u) if gamma_u is not None else None
        self.gamma_y = tuple(gamma_y) if gamma_y is not None else None


class InfeasibilityError(SecureEstimationException):
    """
    Aucune hypothèse d'attaque cohérente n'a été trouvée.

    Signale en pratique un epsilon trop petit ou un modèle qui ne correspond pas aux mesures.
    """

    def __init__(self, error_message, error_detail=sys, residual_floor: float = float("nan")):
        super().__init__(error_message, error_detail)
        self.residual_floor = residual_floor


class GenerationFailureError(SecureEstimationException):
    """La génération aléatoire d'un système a échoué après le nombre maximal de tirages."""
