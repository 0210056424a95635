import os
import sys
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Tuple

from dotenv import load_dotenv

from secure_estimation.constants import estimation_pipeline
from secure_estimation.exceptions.exception import InvalidInputError


@dataclass(frozen=True)
class TolerancePolicy:
    """
    Politique de tolérance numérique partagée par tous les composants.

    Attributs:
        rank_rel_tol (float): seuil relatif des valeurs singulières (par rapport à σ_max).
        residual_abs_floor (float): plancher absolu de l'epsilon du test de cohérence.
        residual_rel_factor (float): facteur relatif appliqué à ‖Y|Γy‖₂.
    """
    rank_rel_tol: float = estimation_pipeline.RANK_REL_TOL
    residual_abs_floor: float = estimation_pipeline.RESIDUAL_ABS_FLOOR
    residual_rel_factor: float = estimation_pipeline.RESIDUAL_REL_FACTOR

    def __post_init__(self):
        for name in ("rank_rel_tol", "residual_abs_floor", "residual_rel_factor"):
            value = getattr(self, name)
            if not value > 0:
                raise InvalidInputError(f"{name} doit être strictement positif, reçu {value}", sys)

    def epsilon(self, reference_norm: float) -> float:
        """Epsilon effectif : max(plancher absolu, facteur relatif · ‖Y|Γy‖₂)."""
        return max(self.residual_abs_floor, self.residual_rel_factor * reference_norm)

    @classmethod
    def from_env(cls) -> "TolerancePolicy":
        """
        Construit la politique à partir des variables d'environnement (fichier .env accepté).

        Les variables absentes retombent sur les constantes du pipeline.
        """
        load_dotenv()
        prefix = estimation_pipeline.ENV_PREFIX

        def _read(name: str, default: float) -> float:
            raw = os.getenv(prefix + name)
            return float(raw) if raw else default

        return cls(
            rank_rel_tol=_read("RANK_REL_TOL", estimation_pipeline.RANK_REL_TOL),
            residual_abs_floor=_read("RESIDUAL_ABS_FLOOR", estimation_pipeline.RESIDUAL_ABS_FLOOR),
            residual_rel_factor=_read("RESIDUAL_REL_FACTOR", estimation_pipeline.RESIDUAL_REL_FACTOR),
        )


class EstimationPipelineConfig:
    """
    Configuration racine des artefacts produits par la CLI et les benchmarks.

    Chaque exécution écrit dans `<out_dir>/<timestamp>/`.
    """

    def __init__(self, out_dir: str = estimation_pipeline.ARTIFACT_DIR, timestamp: str = None):
        """
        :param out_dir: Dossier racine des artefacts.
        :param timestamp: (optionnel) Horodatage identifiant l'exécution.
        """
        self.timestamp = timestamp if timestamp else datetime.now().strftime("%d%m%Y%H%M%S")
        self.pipeline_name = estimation_pipeline.PIPELINE_NAME
        self.artifact_name = out_dir
        self.artifact_dir = os.path.join(self.artifact_name, self.timestamp)


class RandomBenchmarkConfig:
    """
    Configuration du benchmark sur systèmes aléatoires (balayage de p à m fixé).

    Attributs:
        n (int): ordre des systèmes générés.
        m (int): nombre d'entrées.
        p_grid (tuple): valeurs de p balayées.
        methods (tuple): méthodes de certificat comparées.
        trials (int): nombre d'essais par point.
        seed (int): graine de base ; l'essai k utilise seed + k.
        result_file_path (str): chemin du CSV produit.
    """

    def __init__(self, pipeline_config: EstimationPipelineConfig,
                 n: int = estimation_pipeline.RANDOM_BENCH_STATE_DIM,
                 m: int = estimation_pipeline.RANDOM_BENCH_INPUT_DIM,
                 p_grid: Tuple[int, ...] = estimation_pipeline.RANDOM_BENCH_OUTPUT_GRID,
                 methods: Tuple[str, ...] = estimation_pipeline.RANDOM_BENCH_METHODS,
                 trials: int = estimation_pipeline.DEFAULT_TRIALS,
                 seed: int = 0,
                 workers: int = 1,
                 check_sso: bool = False):
        if trials < 1:
            raise InvalidInputError(f"trials doit être >= 1, reçu {trials}", sys)
        self.n = n
        self.m = m
        self.p_grid = tuple(p_grid)
        self.methods = tuple(methods)
        self.trials = trials
        self.seed = seed
        self.workers = workers
        self.check_sso = check_sso
        self.benchmark_dir = os.path.join(pipeline_config.artifact_dir, estimation_pipeline.BENCHMARK_DIR_NAME)
        self.result_file_path = os.path.join(self.benchmark_dir, estimation_pipeline.RANDOM_BENCH_FILE_NAME)
        self.metadata_file_path = os.path.join(self.benchmark_dir, estimation_pipeline.METADATA_FILE_NAME)


class PlantBenchmarkConfig:
    """Configuration du benchmark sur l'usine chimique (n=8, m=4, p=10, r=1, s=2)."""

    def __init__(self, pipeline_config: EstimationPipelineConfig,
                 methods: Tuple[str, ...] = estimation_pipeline.PLANT_BENCH_METHODS,
                 trials: int = estimation_pipeline.DEFAULT_TRIALS,
                 seed: int = 0,
                 workers: int = 1,
                 r: int = estimation_pipeline.PLANT_ATTACK_R,
                 s: int = estimation_pipeline.PLANT_ATTACK_S):
        if trials < 1:
            raise InvalidInputError(f"trials doit être >= 1, reçu {trials}", sys)
        self.methods = tuple(methods)
        self.trials = trials
        self.seed = seed
        self.workers = workers
        self.r = r
        self.s = s
        self.benchmark_dir = os.path.join(pipeline_config.artifact_dir, estimation_pipeline.BENCHMARK_DIR_NAME)
        self.result_file_path = os.path.join(self.benchmark_dir, estimation_pipeline.PLANT_BENCH_FILE_NAME)
        self.metadata_file_path = os.path.join(self.benchmark_dir, estimation_pipeline.METADATA_FILE_NAME)


@dataclass
class RunConfig:
    """Paramètres d'une commande de la CLI, après lecture des arguments."""
    command: str
    system_path: Optional[str] = None
    scenario_path: Optional[str] = None
    r: Optional[int] = None
    s: Optional[int] = None
    method: Optional[str] = None
    seed: int = 0
    trials: int = estimation_pipeline.DEFAULT_TRIALS
    out_dir: str = estimation_pipeline.ARTIFACT_DIR
    dump_opb: Optional[str] = None
    tau: Optional[int] = None
    n: int = estimation_pipeline.RANDOM_BENCH_STATE_DIM
    m: int = estimation_pipeline.RANDOM_BENCH_INPUT_DIM
    p_grid: Tuple[int, ...] = estimation_pipeline.RANDOM_BENCH_OUTPUT_GRID
    workers: int = 1
    check_sso: bool = True
    dump_window: bool = False
    policy: TolerancePolicy = field(default_factory=TolerancePolicy)

    def __post_init__(self):
        if self.command not in estimation_pipeline.COMMANDS:
            raise InvalidInputError(f"commande inconnue: {self.command}", sys)
        if self.command in ("estimate", "export-opb") and (self.system_path is None or self.scenario_path is None):
            raise InvalidInputError(f"la commande {self.command} exige --system et --scenario", sys)
        if self.command in ("check-sso", "witness") and self.system_path is None:
            raise InvalidInputError(f"la commande {self.command} exige --system", sys)
        if self.command.startswith("bench-") and self.trials < 1:
            raise InvalidInputError(f"trials doit être >= 1, reçu {self.trials}", sys)
        if self.command in ("check-sso", "witness") and (self.r is None or self.s is None):
            raise InvalidInputError(f"la commande {self.command} exige -r et -s", sys)
        for name in ("r", "s", "tau"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvalidInputError(f"{name} doit être positif, reçu {value}", sys)
        if self.workers < 1:
            raise InvalidInputError(f"workers doit être >= 1, reçu {self.workers}", sys)
        if self.method is not None and self.method not in estimation_pipeline.METHODS:
            raise InvalidInputError(f"méthode inconnue: {self.method}", sys)
