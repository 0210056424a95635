from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from secure_estimation.entity.model_entity import BoolAssignment, IndexSet


@dataclass
class SsoReport:
    holds: bool
    witness_gamma_u: Optional[IndexSet]
    witness_gamma_y: Optional[IndexSet]
    subsets_checked: int
    r: int
    s: int


@dataclass
class AttackScenario:
    """
    Scénario d'attaque : ensembles attaqués et signaux injectés w (entrées) et a (sorties).

    `w_stream` est de forme (T, m) et `a_stream` de forme (T, p) ; leurs supports
    sont contenus dans les ensembles attaqués.
    """
    attacked_inputs: IndexSet
    attacked_outputs: IndexSet
    r_bound: int
    s_bound: int
    w_stream: np.ndarray
    a_stream: np.ndarray
    seed: int


@dataclass
class ObservationWindow:
    Y: np.ndarray
    U_ctrl: np.ndarray
    t_end: int
    tau: int


@dataclass
class GroundTruth:
    x_at_estimate_time: np.ndarray
    x_trajectory: np.ndarray
    y_system: np.ndarray


@dataclass
class WitnessScenario:
    """Une des deux trajectoires indiscernables de la construction de nécessité."""
    x0: np.ndarray
    u_ctrl: np.ndarray
    scenario: AttackScenario


@dataclass
class ConsistencyResult:
    status: bool
    x_hat: Optional[np.ndarray]
    u_hat: Optional[np.ndarray]
    residual: float
    epsilon_used: float

    @property
    def is_sat(self) -> bool:
        return self.status


@dataclass(frozen=True)
class CertElement:
    kind: str  # "input" ou "output"
    index: int


@dataclass(frozen=True)
class Certificate:
    """Certificat de conflit : entrées libres (littéraux b_j) et sorties de confiance (littéraux c_i)."""
    free_inputs: IndexSet
    trusted_outputs: IndexSet

    @property
    def size(self) -> int:
        return len(self.free_inputs) + len(self.trusted_outputs)

    def suspected_inputs(self) -> IndexSet:
        return self.free_inputs.complement()

    def key(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        return self.free_inputs.indices, self.trusted_outputs.indices


@dataclass
class EstimateReport:
    x_hat: np.ndarray
    identified: BoolAssignment
    sat_calls: int
    theory_calls: int
    certificates_added: int
    wall_time: float
    residual: float = 0.0
    u_hat: Optional[np.ndarray] = None
    certificates: List[Certificate] = field(default_factory=list)


@dataclass
class BenchmarkArtifact:
    result_file_path: str
    metadata_file_path: str
    rows: int
